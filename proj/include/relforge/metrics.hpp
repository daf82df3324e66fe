#pragma once

#include <cstdint>
#include <vector>

#include "relforge/docforge.hpp"
#include "relforge/task.hpp"

namespace relforge {

// Mann-Whitney AUROC: over all (positive, negative) pairs, score_p > score_n
// counts 1, ties count 0.5. Computed via midranks in O(n log n); exactly equal
// to the pair count. Throws on single-class input.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

// Mean absolute error (Neumaier-compensated summation).
double mae(const std::vector<double>& preds, const std::vector<double>& targets);

// Uniform subsample without replacement when |test| exceeds the cap, all rows
// otherwise; deterministic per seed.
std::vector<TaskRow> sample_test(const std::vector<TaskRow>& test, size_t cap, uint64_t seed);

// Mean and population standard deviation of token estimates.
std::pair<double, double> token_stats(const std::vector<Document>& documents);

}  // namespace relforge
