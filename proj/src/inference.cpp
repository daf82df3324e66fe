#include "relforge/inference.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <map>

namespace relforge {

double classification_score(const TokenDistribution& dist) {
    return dist.prob("1");
}

namespace {

// Decimal places carried by x: smallest p with round(x * 10^p) / 10^p == x
// up to relative 1e-12. Capped at 9.
int decimal_precision(double x) {
    for (int p = 0; p <= 9; ++p) {
        double scaled = x * std::pow(10.0, p);
        double rounded = std::round(scaled);
        if (std::abs(scaled - rounded) <= std::abs(scaled) * 1e-12 + 1e-9) return p;
    }
    return 9;
}

std::string render_fixed(double x, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, x);
    return buf;
}

}  // namespace

CandidateGrid build_grid(const std::vector<double>& train_targets, size_t max_candidates) {
    if (train_targets.empty()) throw ValidationError("build_grid: empty train targets");
    if (max_candidates < 2) throw ValidationError("build_grid: max_candidates must be >= 2");

    double lo = train_targets[0], hi = train_targets[0];
    bool all_integral = true;
    for (double t : train_targets) {
        lo = std::min(lo, t);
        hi = std::max(hi, t);
        if (t != std::floor(t)) all_integral = false;
    }

    CandidateGrid grid;
    if (lo == hi) {  // single distinct target
        grid.values.push_back(lo);
        grid.render.push_back(all_integral ? std::to_string(static_cast<int64_t>(lo))
                                           : render_fixed(lo, decimal_precision(lo)));
        return grid;
    }

    if (all_integral && hi - lo <= static_cast<double>(max_candidates - 1)) {
        for (int64_t v = static_cast<int64_t>(lo); v <= static_cast<int64_t>(hi); ++v) {
            grid.values.push_back(static_cast<double>(v));
            grid.render.push_back(std::to_string(v));
        }
        return grid;
    }

    // modal decimal precision of the targets, smallest on ties
    std::map<int, size_t> precision_counts;
    for (double t : train_targets) ++precision_counts[decimal_precision(t)];
    int precision = 0;
    size_t best = 0;
    for (const auto& [p, count] : precision_counts) {
        if (count > best) {
            best = count;
            precision = p;
        }
    }

    for (size_t i = 0; i < max_candidates; ++i) {
        double v = lo + (hi - lo) * static_cast<double>(i) /
                            static_cast<double>(max_candidates - 1);
        grid.values.push_back(v);
        grid.render.push_back(render_fixed(v, precision));
    }
    return grid;
}

bool normalize_logprobs(const std::vector<double>& logprobs, ScoredDistribution& out) {
    double shift = -std::numeric_limits<double>::infinity();
    for (double lp : logprobs) shift = std::max(shift, lp);
    if (!std::isfinite(shift)) return false;

    out.probs.resize(logprobs.size());
    double total = 0.0;
    for (size_t i = 0; i < logprobs.size(); ++i) {
        out.probs[i] = std::exp(logprobs[i] - shift);
        total += out.probs[i];
    }
    if (total <= 0.0) return false;
    for (double& p : out.probs) p /= total;
    return true;
}

double lower_median(const CandidateGrid& grid, const ScoredDistribution& dist) {
    double cum = 0.0;
    for (size_t i = 0; i < grid.values.size(); ++i) {
        cum += dist.probs[i];
        if (cum >= 0.5) return grid.values[i];
    }
    return grid.values.back();  // rounding left the tail short of 0.5
}

double median_predict(const std::string& document, const CandidateGrid& grid,
                      const Scorer& scorer) {
    if (grid.size() == 0) throw ValidationError("median_predict: empty grid");

    std::vector<double> logprobs(grid.size());
    for (size_t i = 0; i < grid.size(); ++i)
        logprobs[i] = scorer.continuation_logprob(document, grid.render[i]);

    ScoredDistribution dist;
    if (!normalize_logprobs(logprobs, dist)) {
        std::cerr << "warning: all candidate probabilities underflowed; "
                     "falling back to the grid midpoint\n";
        return grid.values[(grid.size() - 1) / 2];
    }
    return lower_median(grid, dist);
}

}  // namespace relforge
