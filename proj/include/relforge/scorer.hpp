#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "relforge/common.hpp"

namespace relforge {

// Next-token probabilities for the top-k tokens; coverage is the represented
// probability mass (<= 1, never renormalized).
struct TokenDistribution {
    std::map<std::string, double> entries;
    double coverage = 0.0;

    double prob(const std::string& token) const {
        auto it = entries.find(token);
        return it == entries.end() ? 0.0 : it->second;
    }
};

struct Embedding {
    std::vector<double> values;
    size_t dim = 0;
};

// Transport / protocol failure.
struct ScorerError : Error {
    using Error::Error;
};

// The document does not fit the model context; distinguished so the harness
// can halve n_inc/n_rel and retry.
struct ContextLengthError : ScorerError {
    using ScorerError::ScorerError;
};

enum class ScorerBackend { Http, Mock };

struct ScorerConfig {
    ScorerBackend backend = ScorerBackend::Mock;
    std::string endpoint;  // required for http; RELFORGE_SCORER_URL overrides
    size_t top_k = 20;
    size_t max_in_flight = 8;
    double timeout_seconds = 60.0;
    std::optional<size_t> context_limit;  // tokens, checked client-side when set
};

// Shared, immutable once constructed; all three calls are thread-safe and may
// run concurrently up to max_in_flight.
class Scorer {
  public:
    virtual ~Scorer() = default;
    virtual TokenDistribution next_token_distribution(const std::string& document) const = 0;
    virtual double continuation_logprob(const std::string& document,
                                        const std::string& continuation) const = 0;
    virtual Embedding embed_last_token(const std::string& document) const = 0;
    virtual const ScorerConfig& config() const = 0;
};

// Deterministic, table-driven mock. Priority per request:
//   1. oracle table (document text -> ground-truth target) when configured:
//      classification emits {"1": p_true, "0": 1-p_true} for positives
//      (swapped for negatives, or when inverted); regression scores
//      continuations by -sharpness * |value - target|; embeddings carry the
//      target in their leading component.
//   2. fixed next-token table / per-step continuation tables when configured.
//   3. otherwise a pure hash of (seed, request).
class MockScorer : public Scorer {
  public:
    struct Options {
        uint64_t seed = 0;
        size_t dim = 64;
        std::map<std::string, double> fixed_next;                  // token -> prob
        std::vector<std::map<std::string, double>> step_tables;    // per-step token -> prob
        std::unordered_map<std::string, double> truth_by_text;     // oracle, exact text
        // oracle as a pure function of the document (robust to rebuilds)
        std::function<std::optional<double>(const std::string&)> oracle_fn;
        bool invert = false;
        double p_true = 0.9;
        double regression_sharpness = 4.0;
        double hash_coverage = 0.9;
    };

    MockScorer() = default;
    MockScorer(ScorerConfig config, Options options);

    TokenDistribution next_token_distribution(const std::string& document) const override;
    double continuation_logprob(const std::string& document,
                                const std::string& continuation) const override;
    Embedding embed_last_token(const std::string& document) const override;
    const ScorerConfig& config() const override { return config_; }

  private:
    void check_context(const std::string& document) const;
    std::optional<double> truth_of(const std::string& document) const;

    ScorerConfig config_;
    Options opts_;
};

// HTTP JSON client (all POST, UTF-8):
//   /v1/next_token {"text","top_k"} -> {"tokens":[{"token","logprob"}]}
//   /v1/logprob    {"text","continuation"} -> {"logprob"}
//   /v1/embed      {"text"} -> {"embedding":[..],"dim"}
// HTTP 413 maps to ContextLengthError, other failures to ScorerError.
class HttpScorer : public Scorer {
  public:
    explicit HttpScorer(ScorerConfig config);

    TokenDistribution next_token_distribution(const std::string& document) const override;
    double continuation_logprob(const std::string& document,
                                const std::string& continuation) const override;
    Embedding embed_last_token(const std::string& document) const override;
    const ScorerConfig& config() const override { return config_; }

  private:
    std::string post(const std::string& path, const std::string& body) const;

    ScorerConfig config_;
    std::string host_;
    int port_ = 80;
    std::string path_prefix_;
};

// Builds a scorer from config; reads RELFORGE_SCORER_URL for http endpoints.
std::unique_ptr<Scorer> make_scorer(ScorerConfig config, MockScorer::Options mock_options = {});

}  // namespace relforge
