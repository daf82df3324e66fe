#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "relforge/store.hpp"
#include "relforge/task.hpp"

namespace relforge::testing {

// Five-table retail database: regions and products (dimension), users
// (dimension), orders and order_items (fact), plus three prediction tasks:
//   - "user-segment":  binary, target = users.segment (readable from any doc)
//   - "user-activity": binary, target = 1 iff the latest order before as_of
//                      has amount > activity_threshold (readable only from
//                      depth-1 documents with n_nest >= 1)
//   - "user-spend":    regression, target = users.base_spend
struct SyntheticConfig {
    uint64_t seed = 42;
    size_t n_regions = 4;
    size_t n_users = 60;
    size_t n_products = 25;
    size_t n_orders = 500;
    size_t n_items = 900;
    size_t train_rows = 300;
    size_t val_rows = 120;
    size_t test_rows = 120;
    double activity_threshold = 30.0;
    // fraction of items whose timestamp precedes their parent order's
    // (adversarial for temporal filtering of FK->PK joins)
    double late_parent_fraction = 0.0;
};

struct Synthetic {
    IndexedStore store;

    TaskSpec segment_spec;
    TaskSplit segment_split;
    TaskSpec activity_spec;
    TaskSplit activity_split;
    TaskSpec spend_spec;
    TaskSplit spend_split;

    // raw artifacts for disk round-trips (schema.json, *.csv, task manifests)
    std::map<std::string, std::string> files;
};

Synthetic make_synthetic(const SyntheticConfig& cfg);

// Materializes every generated file under `dir` (created if needed) so the
// CLI / load_store / load_task paths can run against it.
void write_synthetic(const Synthetic& s, const std::string& dir);

}  // namespace relforge::testing
