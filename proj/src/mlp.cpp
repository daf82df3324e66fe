#include "relforge/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "relforge/rng.hpp"

namespace relforge {

namespace {

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

void hidden_activations(const MlpHead& head, const Embedding& x, std::vector<double>& pre,
                        std::vector<double>& act) {
    pre.resize(head.hidden);
    act.resize(head.hidden);
    for (size_t h = 0; h < head.hidden; ++h) {
        double z = head.b1[h];
        const double* w = &head.w1[h * head.input_dim];
        for (size_t i = 0; i < head.input_dim; ++i) z += w[i] * x.values[i];
        pre[h] = z;
        act[h] = z > 0.0 ? z : 0.0;
    }
}

double raw_output(const MlpHead& head, const std::vector<double>& act) {
    double y = head.b2;
    for (size_t h = 0; h < head.hidden; ++h) y += head.w2[h] * act[h];
    return y;
}

// AUROC and MAE for epoch selection; kept local so the module stays
// self-contained (the harness has its own, oracle-tested implementations).
double rank_auroc(const std::vector<double>& scores, const std::vector<double>& labels) {
    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });
    double pos = 0, neg = 0, rank_sum = 0;
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        double midrank = static_cast<double>(i + j + 1) / 2.0;  // 1-based average rank
        for (size_t k = i; k < j; ++k) {
            if (labels[order[k]] >= 0.5) {
                rank_sum += midrank;
                pos += 1;
            } else {
                neg += 1;
            }
        }
        i = j;
    }
    if (pos == 0 || neg == 0) return 0.5;
    return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg);
}

}  // namespace

MlpHead init_head(size_t input_dim, size_t hidden, OutputMode mode, uint64_t seed) {
    if (input_dim < 1 || hidden < 1) throw ValidationError("init_head: dims must be >= 1");
    MlpHead head;
    head.input_dim = input_dim;
    head.hidden = hidden;
    head.output_mode = mode;
    head.w1.resize(hidden * input_dim);
    head.b1.assign(hidden, 0.0);
    head.w2.resize(hidden);
    head.b2 = 0.0;

    Rng rng(seed);
    double bound1 = std::sqrt(6.0 / static_cast<double>(input_dim + hidden));
    for (double& w : head.w1) w = (2.0 * rng.unit() - 1.0) * bound1;
    double bound2 = std::sqrt(6.0 / static_cast<double>(hidden + 1));
    for (double& w : head.w2) w = (2.0 * rng.unit() - 1.0) * bound2;
    return head;
}

double forward(const MlpHead& head, const Embedding& x) {
    if (x.dim != head.input_dim)
        throw ValidationError("forward: embedding dim " + std::to_string(x.dim) +
                              " != head input dim " + std::to_string(head.input_dim));
    std::vector<double> pre, act;
    hidden_activations(head, x, pre, act);
    double y = raw_output(head, act);
    return head.output_mode == OutputMode::Logit ? sigmoid(y) : y;
}

double predict(const MlpHead& head, const Embedding& x) {
    double y = forward(head, x);
    if (head.output_mode == OutputMode::Linear && head.target_norm)
        y = y * head.target_norm->second + head.target_norm->first;
    return y;
}

std::pair<double, Gradients> loss_and_grad(const MlpHead& head, const HeadDataset& data,
                                           const std::vector<size_t>& batch_indices) {
    if (batch_indices.empty()) throw ValidationError("loss_and_grad: empty batch");

    Gradients g;
    g.w1.assign(head.w1.size(), 0.0);
    g.b1.assign(head.b1.size(), 0.0);
    g.w2.assign(head.w2.size(), 0.0);
    g.b2 = 0.0;

    const double inv_n = 1.0 / static_cast<double>(batch_indices.size());
    double loss = 0.0;
    std::vector<double> pre, act;
    for (size_t idx : batch_indices) {
        const Embedding& x = data.inputs[idx];
        const double target = data.targets[idx];
        hidden_activations(head, x, pre, act);
        double y = raw_output(head, act);

        double dy;  // dLoss/dy, already averaged
        if (head.output_mode == OutputMode::Logit) {
            double p = sigmoid(y);
            double pc = std::clamp(p, 1e-12, 1.0 - 1e-12);
            loss += -(target * std::log(pc) + (1.0 - target) * std::log(1.0 - pc)) * inv_n;
            dy = (p - target) * inv_n;
        } else {
            double diff = y - target;
            loss += std::abs(diff) * inv_n;
            dy = diff > 0.0 ? inv_n : (diff < 0.0 ? -inv_n : 0.0);
        }

        g.b2 += dy;
        for (size_t h = 0; h < head.hidden; ++h) {
            g.w2[h] += dy * act[h];
            if (pre[h] <= 0.0) continue;  // relu gate
            double dh = dy * head.w2[h];
            g.b1[h] += dh;
            double* gw = &g.w1[h * head.input_dim];
            for (size_t i = 0; i < head.input_dim; ++i) gw[i] += dh * x.values[i];
        }
    }
    return {loss, std::move(g)};
}

TrainResult train(MlpHead head, const HeadDataset& train_data, const HeadDataset& val_data,
                  const TrainConfig& cfg) {
    if (train_data.size() == 0) throw ValidationError("train: empty training set");
    if (train_data.size() > cfg.max_train)
        throw ValidationError("train: " + std::to_string(train_data.size()) +
                              " examples exceed the max_train cap of " +
                              std::to_string(cfg.max_train));
    if (train_data.inputs.size() != train_data.targets.size())
        throw ValidationError("train: inputs/targets length mismatch");

    // Regression targets are z-scored on the training subsample.
    HeadDataset scaled;
    const HeadDataset* data = &train_data;
    if (head.output_mode == OutputMode::Linear) {
        double mean = 0.0;
        for (double t : train_data.targets) mean += t;
        mean /= static_cast<double>(train_data.size());
        double var = 0.0;
        for (double t : train_data.targets) var += (t - mean) * (t - mean);
        double std_dev = std::sqrt(var / static_cast<double>(train_data.size()));
        if (std_dev < 1e-12) std_dev = 1.0;
        head.target_norm = {mean, std_dev};
        scaled.inputs = train_data.inputs;
        scaled.targets.reserve(train_data.size());
        for (double t : train_data.targets) scaled.targets.push_back((t - mean) / std_dev);
        data = &scaled;
    }

    // Validation selection never sees more than max_val examples.
    size_t val_n = std::min(val_data.size(), cfg.max_val);

    const size_t n_params = head.parameter_count();
    std::vector<double> m(n_params, 0.0), v(n_params, 0.0);

    auto for_each_param = [&](auto&& fn) {
        size_t p = 0;
        for (size_t i = 0; i < head.w1.size(); ++i, ++p) fn(head.w1[i], p, 0);
        for (size_t i = 0; i < head.b1.size(); ++i, ++p) fn(head.b1[i], p, 1);
        for (size_t i = 0; i < head.w2.size(); ++i, ++p) fn(head.w2[i], p, 2);
        fn(head.b2, p, 3);
    };

    auto validate = [&]() -> double {
        if (val_n == 0) return head.output_mode == OutputMode::Logit ? 0.5 : 0.0;
        std::vector<double> preds(val_n);
        for (size_t i = 0; i < val_n; ++i) preds[i] = predict(head, val_data.inputs[i]);
        if (head.output_mode == OutputMode::Logit) {
            std::vector<double> labels(val_data.targets.begin(),
                                       val_data.targets.begin() + val_n);
            return rank_auroc(preds, labels);
        }
        double mae = 0.0;
        for (size_t i = 0; i < val_n; ++i) mae += std::abs(preds[i] - val_data.targets[i]);
        return mae / static_cast<double>(val_n);
    };
    const bool higher_better = head.output_mode == OutputMode::Logit;

    TrainResult result;
    result.best_val_metric = higher_better ? -1.0 : std::numeric_limits<double>::infinity();

    Rng rng(cfg.seed);
    std::vector<size_t> order(data->size());
    std::iota(order.begin(), order.end(), 0);

    size_t step = 0;
    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cfg.lr_at(epoch);
        rng.shuffle(order);

        double epoch_loss = 0.0;
        size_t n_batches = 0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            size_t end = std::min(start + cfg.batch_size, order.size());
            std::vector<size_t> batch(order.begin() + start, order.begin() + end);
            auto [loss, grad] = loss_and_grad(head, *data, batch);
            if (!std::isfinite(loss))
                throw ValidationError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                      " step " + std::to_string(step));
            epoch_loss += loss;
            ++n_batches;
            ++step;

            const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
            for_each_param([&](double& param, size_t p, int group) {
                double g = group == 0   ? grad.w1[p]
                           : group == 1 ? grad.b1[p - head.w1.size()]
                           : group == 2 ? grad.w2[p - head.w1.size() - head.b1.size()]
                                        : grad.b2;
                m[p] = cfg.adam_beta1 * m[p] + (1.0 - cfg.adam_beta1) * g;
                v[p] = cfg.adam_beta2 * v[p] + (1.0 - cfg.adam_beta2) * g * g;
                double update = (m[p] / bc1) / (std::sqrt(v[p] / bc2) + cfg.adam_eps);
                param -= lr * (update + cfg.weight_decay * param);
            });
        }

        EpochStats stats;
        stats.train_loss = n_batches ? epoch_loss / static_cast<double>(n_batches) : 0.0;
        stats.val_metric = validate();
        result.history.push_back(stats);

        bool improved = val_n == 0  // no validation set: keep the final epoch
                            ? true
                            : (higher_better ? stats.val_metric > result.best_val_metric
                                             : stats.val_metric < result.best_val_metric);
        if (improved) {
            result.best_val_metric = stats.val_metric;
            result.best_epoch = epoch;
            result.head = head;
        }
    }
    if (result.head.input_dim == 0) result.head = head;  // no validation improvement recorded
    return result;
}

std::string save_head(const MlpHead& head) {
    nlohmann::ordered_json doc;
    doc["input_dim"] = head.input_dim;
    doc["hidden"] = head.hidden;
    doc["output_mode"] = head.output_mode == OutputMode::Logit ? "logit" : "linear";
    if (head.target_norm) {
        doc["target_mean"] = head.target_norm->first;
        doc["target_std"] = head.target_norm->second;
    }
    doc["w1"] = head.w1;
    doc["b1"] = head.b1;
    doc["w2"] = head.w2;
    doc["b2"] = head.b2;
    return doc.dump();
}

MlpHead load_head(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("head checkpoint: ") + e.what());
    }
    MlpHead head;
    try {
        head.input_dim = doc.at("input_dim").get<size_t>();
        head.hidden = doc.at("hidden").get<size_t>();
        std::string mode = doc.at("output_mode").get<std::string>();
        if (mode == "logit")
            head.output_mode = OutputMode::Logit;
        else if (mode == "linear")
            head.output_mode = OutputMode::Linear;
        else
            throw ParseError("head checkpoint: unknown output_mode '" + mode + "'");
        if (doc.contains("target_mean"))
            head.target_norm = {doc.at("target_mean").get<double>(),
                                doc.at("target_std").get<double>()};
        head.w1 = doc.at("w1").get<std::vector<double>>();
        head.b1 = doc.at("b1").get<std::vector<double>>();
        head.w2 = doc.at("w2").get<std::vector<double>>();
        head.b2 = doc.at("b2").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("head checkpoint: ") + e.what());
    }
    if (head.w1.size() != head.hidden * head.input_dim || head.b1.size() != head.hidden ||
        head.w2.size() != head.hidden)
        throw ValidationError("head checkpoint: parameter shapes are inconsistent");
    return head;
}

}  // namespace relforge
