#pragma once

#include <map>
#include <string>
#include <vector>

#include "relforge/scorer.hpp"

namespace relforge {

// Ascending candidate values spanning [min, max] of the train targets, with
// their canonical text renderings.
struct CandidateGrid {
    std::vector<double> values;
    std::vector<std::string> render;

    size_t size() const { return values.size(); }
};

// Probabilities over the grid, normalized to sum 1.
struct ScoredDistribution {
    std::vector<double> probs;  // aligned with CandidateGrid::values
};

// AUROC decision rule: probability mass of the exact token "1" (0 when absent
// from the top-k). Never renormalized; any strictly monotone transform of it
// ranks identically.
double classification_score(const TokenDistribution& dist);

// Integer grids enumerate [min, max] when the span fits max_candidates;
// otherwise max_candidates evenly spaced reals rendered at the modal decimal
// precision of the train targets.
CandidateGrid build_grid(const std::vector<double>& train_targets, size_t max_candidates);

// Lower median of the scored value distribution: scores every candidate's
// rendering, exp-normalizes with log-sum-exp shifting, returns the smallest
// candidate whose cumulative probability reaches 0.5.
double median_predict(const std::string& document, const CandidateGrid& grid,
                      const Scorer& scorer);

// The selection step of median_predict, exposed for property tests.
double lower_median(const CandidateGrid& grid, const ScoredDistribution& dist);

// Normalizes raw candidate logprobs into a ScoredDistribution. Returns false
// when every logprob underflowed to zero mass.
bool normalize_logprobs(const std::vector<double>& logprobs, ScoredDistribution& out);

}  // namespace relforge
