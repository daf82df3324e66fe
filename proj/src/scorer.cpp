#include "relforge/scorer.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "relforge/rng.hpp"
#include "relforge/tokenize.hpp"

namespace relforge {

namespace {

double hash_unit(uint64_t h) {
    // (0, 1), never exactly 0
    return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

std::optional<double> parse_number(const std::string& text) {
    const char* b = text.data();
    const char* e = b + text.size();
    while (b < e && *b == ' ') ++b;
    double v = 0;
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e) return std::nullopt;
    return v;
}

}  // namespace

// ------------------------------------------------------------------- mock

MockScorer::MockScorer(ScorerConfig config, Options options)
    : config_(std::move(config)), opts_(std::move(options)) {
    for (const auto& table : opts_.step_tables)
        for (const auto& [tok, p] : table)
            if (p <= 0.0 || p > 1.0)
                throw ValidationError("mock step table probability out of (0, 1]");
}

void MockScorer::check_context(const std::string& document) const {
    if (config_.context_limit && estimate_tokens(document) > *config_.context_limit)
        throw ContextLengthError("document exceeds mock context limit of " +
                                 std::to_string(*config_.context_limit) + " tokens");
}

std::optional<double> MockScorer::truth_of(const std::string& document) const {
    if (opts_.oracle_fn)
        if (auto v = opts_.oracle_fn(document)) return v;
    auto it = opts_.truth_by_text.find(document);
    if (it != opts_.truth_by_text.end()) return it->second;
    return std::nullopt;
}

TokenDistribution MockScorer::next_token_distribution(const std::string& document) const {
    if (document.empty()) throw ValidationError("next_token_distribution: empty document");
    check_context(document);

    TokenDistribution dist;
    auto truth = truth_of(document);
    if (truth) {
        bool positive = *truth >= 0.5;
        if (opts_.invert) positive = !positive;
        dist.entries["1"] = positive ? opts_.p_true : 1.0 - opts_.p_true;
        dist.entries["0"] = positive ? 1.0 - opts_.p_true : opts_.p_true;
    } else if (!opts_.fixed_next.empty()) {
        dist.entries = opts_.fixed_next;
    } else {
        double p1 = hash_unit(mix64(opts_.seed, fnv1a64(document)));
        dist.entries["1"] = p1 * opts_.hash_coverage;
        dist.entries["0"] = (1.0 - p1) * opts_.hash_coverage;
    }
    double sum = 0.0;
    for (const auto& [tok, p] : dist.entries) sum += p;
    dist.coverage = sum;
    return dist;
}

double MockScorer::continuation_logprob(const std::string& document,
                                        const std::string& continuation) const {
    if (document.empty()) throw ValidationError("continuation_logprob: empty document");
    if (continuation.empty()) throw ValidationError("continuation_logprob: empty continuation");
    check_context(document);

    auto truth = truth_of(document);
    if (truth) {
        auto value = parse_number(continuation);
        if (!value) return -1e9;
        return -opts_.regression_sharpness * std::abs(*value - *truth);
    }
    if (!opts_.step_tables.empty()) {
        // compositional: token i scored by step table i, clamped to the last table
        size_t step = 0;
        double logprob = 0.0;
        size_t i = 0;
        while (i < continuation.size()) {
            while (i < continuation.size() && continuation[i] == ' ') ++i;
            if (i >= continuation.size()) break;
            size_t j = i;
            while (j < continuation.size() && continuation[j] != ' ') ++j;
            std::string token = continuation.substr(i, j - i);
            const auto& table = opts_.step_tables[std::min(step, opts_.step_tables.size() - 1)];
            auto it = table.find(token);
            logprob += std::log(it != table.end() ? it->second : 1e-9);
            ++step;
            i = j;
        }
        return logprob;
    }
    // hash mode: each continuation byte contributes a per-position factor in (0, 1)
    uint64_t h = mix64(opts_.seed, fnv1a64(document));
    double logprob = 0.0;
    for (size_t i = 0; i < continuation.size(); ++i) {
        h = mix64(h, fnv1a64(std::string_view(&continuation[i], 1)));
        logprob += std::log(hash_unit(h));
    }
    return logprob;
}

Embedding MockScorer::embed_last_token(const std::string& document) const {
    if (document.empty()) throw ValidationError("embed_last_token: empty document");
    check_context(document);

    Embedding emb;
    emb.dim = opts_.dim;
    emb.values.resize(opts_.dim);
    uint64_t h = mix64(opts_.seed, fnv1a64(document));
    for (size_t i = 0; i < opts_.dim; ++i) {
        h = mix64(h);
        emb.values[i] = 2.0 * hash_unit(h) - 1.0;
    }
    auto truth = truth_of(document);
    if (truth) {
        // the target dominates the leading component with only faint hash
        // noise elsewhere, so a probe can recover it
        for (double& v : emb.values) v *= 0.05;
        emb.values[0] = *truth;
        if (emb.dim > 1) emb.values[1] = 1.0;
    }
    return emb;
}

// ------------------------------------------------------------------- http

namespace {

// endpoint "http://host:port[/prefix]"
void split_endpoint(const std::string& endpoint, std::string& host, int& port,
                    std::string& prefix) {
    std::string rest = endpoint;
    if (rest.rfind("http://", 0) == 0) rest = rest.substr(7);
    else if (rest.rfind("https://", 0) == 0)
        throw ValidationError("https endpoints are not supported: " + endpoint);
    auto slash = rest.find('/');
    std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
    prefix = slash == std::string::npos ? "" : rest.substr(slash);
    if (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    auto colon = hostport.rfind(':');
    if (colon == std::string::npos) {
        host = hostport;
        port = 80;
    } else {
        host = hostport.substr(0, colon);
        port = std::stoi(hostport.substr(colon + 1));
    }
    if (host.empty()) throw ValidationError("bad scorer endpoint: " + endpoint);
}

}  // namespace

HttpScorer::HttpScorer(ScorerConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty())
        throw ValidationError("http scorer requires an endpoint");
    split_endpoint(config_.endpoint, host_, port_, path_prefix_);
}

std::string HttpScorer::post(const std::string& path, const std::string& body) const {
    httplib::Client client(host_, port_);
    client.set_connection_timeout(std::chrono::duration<double>(config_.timeout_seconds));
    client.set_read_timeout(std::chrono::duration<double>(config_.timeout_seconds));
    auto res = client.Post((path_prefix_ + path).c_str(), body, "application/json");
    if (!res)
        throw ScorerError("scorer transport error on " + path + ": " +
                          httplib::to_string(res.error()));
    if (res->status == 413)
        throw ContextLengthError("scorer reports context length exceeded (413)");
    if (res->status < 200 || res->status >= 300)
        throw ScorerError("scorer HTTP " + std::to_string(res->status) + " on " + path);
    return res->body;
}

TokenDistribution HttpScorer::next_token_distribution(const std::string& document) const {
    if (document.empty()) throw ValidationError("next_token_distribution: empty document");
    if (config_.context_limit && estimate_tokens(document) > *config_.context_limit)
        throw ContextLengthError("document exceeds configured context limit");

    nlohmann::json req{{"text", document}, {"top_k", config_.top_k}};
    std::string body = post("/v1/next_token", req.dump());
    TokenDistribution dist;
    try {
        auto doc = nlohmann::json::parse(body);
        for (const auto& entry : doc.at("tokens")) {
            double p = std::exp(entry.at("logprob").get<double>());
            dist.entries[entry.at("token").get<std::string>()] = p;
            dist.coverage += p;
        }
    } catch (const nlohmann::json::exception& e) {
        throw ScorerError(std::string("malformed next_token response: ") + e.what());
    }
    if (dist.coverage > 1.0 + 1e-9)
        throw ScorerError("next_token response probabilities sum to " +
                          std::to_string(dist.coverage));
    return dist;
}

double HttpScorer::continuation_logprob(const std::string& document,
                                        const std::string& continuation) const {
    if (document.empty()) throw ValidationError("continuation_logprob: empty document");
    if (continuation.empty()) throw ValidationError("continuation_logprob: empty continuation");
    if (config_.context_limit && estimate_tokens(document) > *config_.context_limit)
        throw ContextLengthError("document exceeds configured context limit");

    nlohmann::json req{{"text", document}, {"continuation", continuation}};
    std::string body = post("/v1/logprob", req.dump());
    try {
        return nlohmann::json::parse(body).at("logprob").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ScorerError(std::string("malformed logprob response: ") + e.what());
    }
}

Embedding HttpScorer::embed_last_token(const std::string& document) const {
    if (document.empty()) throw ValidationError("embed_last_token: empty document");
    if (config_.context_limit && estimate_tokens(document) > *config_.context_limit)
        throw ContextLengthError("document exceeds configured context limit");

    nlohmann::json req{{"text", document}};
    std::string body = post("/v1/embed", req.dump());
    Embedding emb;
    try {
        auto doc = nlohmann::json::parse(body);
        emb.values = doc.at("embedding").get<std::vector<double>>();
        emb.dim = doc.at("dim").get<size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ScorerError(std::string("malformed embed response: ") + e.what());
    }
    if (emb.values.size() != emb.dim)
        throw ScorerError("embed response dim mismatch");
    for (double v : emb.values)
        if (!std::isfinite(v)) throw ScorerError("embed response contains non-finite values");
    return emb;
}

std::unique_ptr<Scorer> make_scorer(ScorerConfig config, MockScorer::Options mock_options) {
    if (config.backend == ScorerBackend::Http) {
        if (const char* env = std::getenv("RELFORGE_SCORER_URL"); env && *env)
            config.endpoint = env;
        return std::make_unique<HttpScorer>(std::move(config));
    }
    return std::make_unique<MockScorer>(std::move(config), std::move(mock_options));
}

}  // namespace relforge
