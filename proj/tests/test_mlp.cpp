#include <doctest.h>

#include <cmath>

#include "relforge/metrics.hpp"
#include "relforge/mlp.hpp"
#include "relforge/rng.hpp"

using namespace relforge;

namespace {

Embedding make_embedding(std::vector<double> v) {
    Embedding e;
    e.dim = v.size();
    e.values = std::move(v);
    return e;
}

HeadDataset random_batch(size_t n, size_t dim, OutputMode mode, Rng& rng) {
    HeadDataset ds;
    for (size_t i = 0; i < n; ++i) {
        std::vector<double> v(dim);
        for (double& x : v) x = rng.normal();
        ds.inputs.push_back(make_embedding(std::move(v)));
        ds.targets.push_back(mode == OutputMode::Logit ? static_cast<double>(rng.below(2))
                                                       : rng.normal() * 2.0);
    }
    return ds;
}

// Straight-line recomputation of the forward pass, independent of the
// production loops.
double forward_oracle(const MlpHead& head, const Embedding& x) {
    std::vector<double> h(head.hidden);
    for (size_t j = 0; j < head.hidden; ++j) {
        double z = head.b1[j];
        for (size_t i = 0; i < head.input_dim; ++i)
            z += head.w1[j * head.input_dim + i] * x.values[i];
        h[j] = std::max(0.0, z);
    }
    double y = head.b2;
    for (size_t j = 0; j < head.hidden; ++j) y += head.w2[j] * h[j];
    if (head.output_mode == OutputMode::Logit) return 1.0 / (1.0 + std::exp(-y));
    return y;
}

// Two synthetic gaussian clusters with a wide margin along every axis.
void make_clusters(size_t n, size_t dim, uint64_t seed, HeadDataset& out) {
    Rng rng(seed);
    for (size_t i = 0; i < n; ++i) {
        double label = static_cast<double>(rng.below(2));
        double center = label > 0.5 ? 1.0 : -1.0;
        std::vector<double> v(dim);
        for (double& x : v) x = center + 0.05 * rng.normal();
        out.inputs.push_back(make_embedding(std::move(v)));
        out.targets.push_back(label);
    }
}

}  // namespace

TEST_CASE("initialization shapes, zero biases and determinism") {
    MlpHead head = init_head(2048, 10, OutputMode::Logit, 7);
    CHECK(head.w1.size() == 10 * 2048);
    CHECK(head.b1.size() == 10);
    CHECK(head.w2.size() == 10);
    for (double b : head.b1) CHECK(b == 0.0);
    CHECK(head.b2 == 0.0);

    MlpHead again = init_head(2048, 10, OutputMode::Logit, 7);
    CHECK(head.w1 == again.w1);
    CHECK(head.w2 == again.w2);

    MlpHead other = init_head(2048, 10, OutputMode::Logit, 8);
    CHECK(head.w1 != other.w1);

    double bound = std::sqrt(6.0 / (2048 + 10));
    for (double w : head.w1) CHECK(std::abs(w) <= bound);
}

TEST_CASE("forward computes the two-layer map") {
    MlpHead head = init_head(4, 3, OutputMode::Linear, 1);
    std::fill(head.w1.begin(), head.w1.end(), 0.0);
    std::fill(head.w2.begin(), head.w2.end(), 0.0);
    head.b2 = 0.3;
    CHECK(forward(head, make_embedding({1, 2, 3, 4})) == 0.3);

    head.output_mode = OutputMode::Logit;
    head.b2 = 0.0;
    CHECK(forward(head, make_embedding({1, 2, 3, 4})) == 0.5);

    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        MlpHead h = init_head(8, 5, trial % 2 ? OutputMode::Logit : OutputMode::Linear,
                              1000 + trial);
        for (double& b : h.b1) b = rng.normal() * 0.1;
        h.b2 = rng.normal() * 0.1;
        std::vector<double> v(8);
        for (double& x : v) x = rng.normal();
        Embedding e = make_embedding(v);
        CHECK(forward(h, e) == doctest::Approx(forward_oracle(h, e)).epsilon(1e-12));
    }

    CHECK_THROWS_AS(forward(head, make_embedding({1, 2})), ValidationError);
}

TEST_CASE("losses at the optimum are zero") {
    MlpHead head = init_head(4, 3, OutputMode::Linear, 1);
    std::fill(head.w1.begin(), head.w1.end(), 0.0);
    std::fill(head.w2.begin(), head.w2.end(), 0.0);
    head.b2 = 2.0;
    HeadDataset ds;
    ds.inputs.push_back(make_embedding({1, 1, 1, 1}));
    ds.targets.push_back(2.0);
    auto [loss, grad] = loss_and_grad(head, ds, {0});
    CHECK(loss == 0.0);
    CHECK(grad.b2 == 0.0);
    for (double g : grad.w2) CHECK(g == 0.0);

    head.output_mode = OutputMode::Logit;
    head.b2 = 40.0;  // sigmoid ~ 1
    ds.targets[0] = 1.0;
    auto [bce, grad2] = loss_and_grad(head, ds, {0});
    CHECK(bce == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("analytic gradients match central finite differences") {
    Rng rng(11);
    size_t failures = 0;
    for (int trial = 0; trial < 100; ++trial) {
        OutputMode mode = trial % 2 ? OutputMode::Logit : OutputMode::Linear;
        size_t dim = 3 + rng.below(6);
        size_t hidden = 2 + rng.below(5);
        MlpHead head = init_head(dim, hidden, mode, 500 + trial);
        for (double& b : head.b1) b = rng.normal() * 0.3;
        head.b2 = rng.normal() * 0.3;

        HeadDataset ds = random_batch(1 + rng.below(6), dim, mode, rng);
        std::vector<size_t> batch(ds.size());
        for (size_t i = 0; i < batch.size(); ++i) batch[i] = i;

        auto [loss, grad] = loss_and_grad(head, ds, batch);

        auto flat = [&](MlpHead& h) {
            std::vector<double*> ptrs;
            for (double& w : h.w1) ptrs.push_back(&w);
            for (double& b : h.b1) ptrs.push_back(&b);
            for (double& w : h.w2) ptrs.push_back(&w);
            ptrs.push_back(&h.b2);
            return ptrs;
        };
        std::vector<double> analytic;
        for (double g : grad.w1) analytic.push_back(g);
        for (double g : grad.b1) analytic.push_back(g);
        for (double g : grad.w2) analytic.push_back(g);
        analytic.push_back(grad.b2);

        MlpHead probe = head;
        auto ptrs = flat(probe);
        const double h = 1e-5;
        for (size_t p = 0; p < ptrs.size(); ++p) {
            double saved = *ptrs[p];
            *ptrs[p] = saved + h;
            double up = loss_and_grad(probe, ds, batch).first;
            *ptrs[p] = saved - h;
            double down = loss_and_grad(probe, ds, batch).first;
            *ptrs[p] = saved;
            double fd = (up - down) / (2 * h);
            double rel = std::abs(fd - analytic[p]) /
                         std::max({std::abs(fd), std::abs(analytic[p]), 1e-3});
            if (rel > 1e-4) ++failures;
        }
    }
    CHECK(failures == 0);
}

TEST_CASE("the learning rate decays linearly to zero") {
    TrainConfig cfg;
    CHECK(cfg.lr_at(0) == doctest::Approx(1e-4));
    CHECK(cfg.lr_at(50) == doctest::Approx(0.5e-4));
    CHECK(cfg.lr_at(100) == doctest::Approx(0.0));
    for (size_t e = 1; e < 100; ++e) CHECK(cfg.lr_at(e) < cfg.lr_at(e - 1));
}

TEST_CASE("training separates margin clusters") {
    HeadDataset train_ds, val_ds;
    make_clusters(1000, 32, 21, train_ds);
    make_clusters(400, 32, 22, val_ds);

    TrainConfig cfg;
    cfg.batch_size = 16;
    cfg.seed = 5;
    MlpHead head = init_head(32, 10, OutputMode::Logit, 5);
    TrainResult result = train(std::move(head), train_ds, val_ds, cfg);
    CHECK(result.history.size() == 100);
    CHECK(result.best_val_metric >= 0.99);
}

TEST_CASE("constant-target regression converges to the target") {
    HeadDataset train_ds, val_ds;
    Rng rng(2);
    for (int i = 0; i < 200; ++i) {
        std::vector<double> v(8);
        for (double& x : v) x = rng.normal();
        train_ds.inputs.push_back(make_embedding(v));
        train_ds.targets.push_back(3.5);
    }
    val_ds.inputs = train_ds.inputs;
    val_ds.targets = train_ds.targets;

    TrainConfig cfg;
    cfg.batch_size = 32;
    MlpHead head = init_head(8, 10, OutputMode::Linear, 9);
    TrainResult result = train(std::move(head), train_ds, val_ds, cfg);
    // z-scored constant targets make the normalized optimum b2 = 0, unscaled
    // back to the constant
    double pred = predict(result.head, train_ds.inputs[0]);
    CHECK(pred == doctest::Approx(3.5).epsilon(0.05));
}

TEST_CASE("training is deterministic per seed") {
    HeadDataset train_ds, val_ds;
    make_clusters(200, 16, 31, train_ds);
    make_clusters(80, 16, 32, val_ds);
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.batch_size = 32;
    cfg.seed = 77;

    auto run = [&] {
        MlpHead head = init_head(16, 10, OutputMode::Logit, 3);
        return train(std::move(head), train_ds, val_ds, cfg);
    };
    TrainResult a = run(), b = run();
    CHECK(a.head.w1 == b.head.w1);
    CHECK(a.head.b1 == b.head.b1);
    CHECK(a.head.w2 == b.head.w2);
    CHECK(a.head.b2 == b.head.b2);
    CHECK(a.best_epoch == b.best_epoch);
}

TEST_CASE("the train cap is enforced") {
    HeadDataset train_ds;
    make_clusters(50, 4, 41, train_ds);
    TrainConfig cfg;
    cfg.max_train = 49;
    MlpHead head = init_head(4, 10, OutputMode::Logit, 1);
    CHECK_THROWS_AS(train(std::move(head), train_ds, {}, cfg), ValidationError);
}

TEST_CASE("checkpoints reproduce forward outputs exactly") {
    MlpHead head = init_head(12, 10, OutputMode::Linear, 13);
    head.target_norm = {1.5, 2.25};
    Rng rng(6);
    for (double& b : head.b1) b = rng.normal();
    head.b2 = rng.normal();

    MlpHead loaded = load_head(save_head(head));
    CHECK(loaded.input_dim == head.input_dim);
    CHECK(loaded.target_norm == head.target_norm);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> v(12);
        for (double& x : v) x = rng.normal() * 3.0;
        Embedding e = make_embedding(v);
        CHECK(std::abs(forward(loaded, e) - forward(head, e)) <= 1e-15);
        CHECK(std::abs(predict(loaded, e) - predict(head, e)) <= 1e-15);
    }
}
