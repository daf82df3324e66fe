#include "relforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "relforge/rng.hpp"

namespace relforge {

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw ValidationError("auroc: scores and labels differ in length");
    size_t n_pos = 0, n_neg = 0;
    for (int l : labels) (l == 1 ? n_pos : n_neg) += 1;
    if (n_pos == 0 || n_neg == 0)
        throw ValidationError("auroc: both classes must be present");

    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // tied groups share the average rank, which realizes the 0.5 tie credit
    double pos_rank_sum = 0.0;
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        double midrank = static_cast<double>(i + j + 1) / 2.0;  // ranks are 1-based
        for (size_t k = i; k < j; ++k)
            if (labels[order[k]] == 1) pos_rank_sum += midrank;
        i = j;
    }
    double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double mae(const std::vector<double>& preds, const std::vector<double>& targets) {
    if (preds.size() != targets.size())
        throw ValidationError("mae: preds and targets differ in length");
    if (preds.empty()) throw ValidationError("mae: empty input");

    // Neumaier summation keeps the result independent of accumulation order
    double sum = 0.0, comp = 0.0;
    for (size_t i = 0; i < preds.size(); ++i) {
        double term = std::abs(preds[i] - targets[i]);
        double t = sum + term;
        if (std::abs(sum) >= std::abs(term))
            comp += (sum - t) + term;
        else
            comp += (term - t) + sum;
        sum = t;
    }
    return (sum + comp) / static_cast<double>(preds.size());
}

std::vector<TaskRow> sample_test(const std::vector<TaskRow>& test, size_t cap, uint64_t seed) {
    if (test.size() <= cap) return test;
    std::vector<size_t> idx(test.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    // partial Fisher-Yates: first `cap` entries are a uniform sample
    for (size_t i = 0; i < cap; ++i) {
        size_t j = i + static_cast<size_t>(rng.below(idx.size() - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(cap);
    std::sort(idx.begin(), idx.end());  // keep original row order
    std::vector<TaskRow> out;
    out.reserve(cap);
    for (size_t i : idx) out.push_back(test[i]);
    return out;
}

std::pair<double, double> token_stats(const std::vector<Document>& documents) {
    if (documents.empty()) throw ValidationError("token_stats: empty input");
    double mean = 0.0;
    for (const Document& d : documents) mean += static_cast<double>(d.token_estimate);
    mean /= static_cast<double>(documents.size());
    double var = 0.0;
    for (const Document& d : documents) {
        double diff = static_cast<double>(d.token_estimate) - mean;
        var += diff * diff;
    }
    var /= static_cast<double>(documents.size());
    return {mean, std::sqrt(var)};
}

}  // namespace relforge
