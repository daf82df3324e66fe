#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "relforge/docforge.hpp"
#include "relforge/store.hpp"

namespace relforge::testing {

// Splits a document into its serialized JSON blocks (one per line, context
// first). Parsed with nlohmann as an independent reader of the output format.
std::vector<nlohmann::ordered_json> document_blocks(const std::string& text);

// The test-entity block (always the last line).
nlohmann::ordered_json last_block(const std::string& text);

// Ground-truth readers over the serialized document, used to wire the mock to
// labels without touching builder internals.
std::optional<double> segment_oracle(const std::string& document);
std::optional<double> spend_oracle(const std::string& document);
// Latest-order rule: 1 iff orders[0].amount > threshold, 0 when no orders are
// visible (matches the generator's labeling of users without prior orders).
std::optional<double> activity_oracle(const std::string& document, double threshold);

// Independent temporal-leakage scan: walks every JSON object in every block
// and checks that each fact-table row (identified by its timestamp column)
// carries a timestamp strictly before the test row's seed time. Returns the
// number of violations.
size_t count_leaks(const std::string& document_text, const Schema& schema, Timestamp seed_time,
                   const std::string& seed_column);

// Structural bounds per ACCEPTANCE: child arrays <= n_nest, array nesting
// depth <= d, no child table repeated within one top-level block.
struct BoundsReport {
    bool child_counts_ok = true;
    bool depth_ok = true;
    bool no_repeated_expansion = true;
    bool ok() const { return child_counts_ok && depth_ok && no_repeated_expansion; }
};
BoundsReport check_bounds(const nlohmann::ordered_json& block, size_t n_nest, size_t d);

}  // namespace relforge::testing
