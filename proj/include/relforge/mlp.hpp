#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "relforge/scorer.hpp"

namespace relforge {

enum class OutputMode { Logit, Linear };

// Single-hidden-layer MLP: h = relu(w1 x + b1), y = w2 . h + b2.
// Logit mode scores through sigmoid(y); linear mode returns y, optionally
// un-scaled through the stored target normalization.
struct MlpHead {
    size_t input_dim = 0;
    size_t hidden = 10;
    OutputMode output_mode = OutputMode::Logit;
    std::vector<double> w1;  // row-major [hidden][input_dim]
    std::vector<double> b1;  // [hidden]
    std::vector<double> w2;  // [hidden]
    double b2 = 0.0;

    // z-score constants for regression targets (training subsample)
    std::optional<std::pair<double, double>> target_norm;  // mean, std

    size_t parameter_count() const { return w1.size() + b1.size() + w2.size() + 1; }
};

struct TrainConfig {
    double lr0 = 1e-4;
    size_t epochs = 100;
    double weight_decay = 1e-3;
    size_t batch_size = 256;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    uint64_t seed = 0;
    size_t max_train = 100000;
    size_t max_val = 10000;

    // linear decay to zero over the run
    double lr_at(size_t epoch) const {
        return lr0 * (1.0 - static_cast<double>(epoch) / static_cast<double>(epochs));
    }
};

struct HeadDataset {
    std::vector<Embedding> inputs;
    std::vector<double> targets;  // raw targets; z-scoring happens inside train()

    size_t size() const { return inputs.size(); }
};

struct Gradients {
    std::vector<double> w1, b1, w2;
    double b2 = 0.0;
};

struct EpochStats {
    double train_loss = 0.0;
    double val_metric = 0.0;  // AUROC (logit) or MAE (linear)
};

struct TrainResult {
    MlpHead head;  // parameters from the best validation epoch
    std::vector<EpochStats> history;
    size_t best_epoch = 0;
    double best_val_metric = 0.0;
};

// Glorot-uniform weights, zero biases, deterministic per seed.
MlpHead init_head(size_t input_dim, size_t hidden, OutputMode mode, uint64_t seed);

// Logit mode returns sigmoid(y) in (0, 1); linear mode returns y raw
// (normalization is NOT applied here; see predict()).
double forward(const MlpHead& head, const Embedding& x);

// Forward plus target un-scaling for regression heads.
double predict(const MlpHead& head, const Embedding& x);

// Mean loss over the batch (BCE for logit, L1 for linear; zero subgradient at
// exact zeros) and loss gradients. Weight decay is decoupled and not included.
std::pair<double, Gradients> loss_and_grad(const MlpHead& head, const HeadDataset& data,
                                           const std::vector<size_t>& batch_indices);

// Adam with decoupled weight decay and linear LR decay; minibatches reshuffled
// per epoch; parameters returned from the epoch with the best validation
// metric. Caps: |train| <= max_train, validation selection <= max_val.
TrainResult train(MlpHead head, const HeadDataset& train_data, const HeadDataset& val_data,
                  const TrainConfig& cfg);

// Checkpoint JSON round-trips forward outputs to 1e-15 (exact parameter bits).
std::string save_head(const MlpHead& head);
MlpHead load_head(const std::string& json_text);

}  // namespace relforge
