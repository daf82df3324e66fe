#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "relforge/store.hpp"
#include "relforge/task.hpp"
#include "relforge/tokenize.hpp"

namespace relforge {

// Document-generation knobs.
struct DocParams {
    size_t n_inc = 0;   // in-context examples
    size_t n_rel = 0;   // related examples
    size_t n_nest = 0;  // nested rows per link
    size_t d = 0;       // traversal depth
    uint64_t seed = 0;

    bool operator==(const DocParams&) const = default;
};

// Raised when a document exceeds a configured token budget; `hint` carries the
// halved parameters to retry with.
struct OversizeError : Error {
    DocParams hint;
    OversizeError(const std::string& msg, DocParams h) : Error(msg), hint(h) {}
};

// Denormalized entity: flat fields (FK columns spliced with the joined parent's
// fields under "<parent_table>.<column>" keys) plus child row arrays keyed by
// the child table name.
struct NestedEntity {
    std::string source_table;  // empty for task rows
    uint32_t source_ordinal = 0;
    std::vector<std::pair<std::string, Value>> fields;
    std::vector<std::pair<std::string, std::vector<NestedEntity>>> children;
};

struct DocumentParts {
    size_t context_chars = 0;
    size_t n_inc_used = 0;
    size_t n_rel_used = 0;
};

struct Document {
    size_t task_row_id = 0;
    std::string text;
    DocumentParts parts;
    size_t token_estimate = 0;
};

// Expands one database row breadth-first: FK->PK parents are inlined into the
// fields (and their tables marked visited), then, while depth < d_max, up to
// n_nest latest child rows with timestamp < cutoff attach per link whose pkey
// side contributed to the entity and whose fkey table is unvisited. Dimension
// rows pass the cutoff unconditionally. `visited` is shared across the whole
// expansion of one top-level entity.
NestedEntity add_related_entities(const std::string& table_name, uint32_t ordinal,
                                  const IndexedStore& store, size_t n_nest, size_t depth,
                                  size_t d_max, std::set<std::string>& visited, Timestamp cutoff);

// Same expansion anchored at a task row (entity FK joins + seed time field),
// cutoff = the task row's own seed time.
NestedEntity expand_task_row(const TaskRow& row, const TaskSpec& spec, const IndexedStore& store,
                             size_t n_nest, size_t d_max);

// Train rows for the same entity (equal on all entity FK columns) strictly
// before the test row's seed time, newest first (ties by ordinal), up to n_rel.
std::vector<TaskRow> related_examples(const TaskRow& test_row, const std::vector<TaskRow>& train,
                                      size_t n_rel);

// Canonical JSON: fields in schema column order, then child arrays, then the
// target key last iff a target is given. One space after ':' and ',', no other
// insignificant whitespace; reals in shortest round-trip form; timestamps as
// RFC-3339 strings.
std::string serialize_entity(const NestedEntity& entity,
                             const std::optional<std::pair<std::string, Value>>& target);

// Assembles one document: context, shared in-context examples (each anchored
// at its own seed time, target last), related examples (newest first, target
// last), then the test entity without its target. Throws OversizeError when
// max_tokens is set and exceeded.
Document build_document(const TaskRow& test_row, size_t task_row_id, const TaskSpec& spec,
                        const TaskSplit& split, const IndexedStore& store, const DocParams& params,
                        const std::vector<TaskRow>& shared_inc,
                        const Tokenizer& tokenizer = Tokenizer{},
                        std::optional<size_t> max_tokens = std::nullopt);

enum class ExecMode { Serial, Parallel };

// Batch construction over task rows. Serial and OpenMP paths produce
// byte-identical output; the serial path is the reference for tests.
std::vector<Document> build_documents(const std::vector<TaskRow>& rows, const TaskSpec& spec,
                                      const TaskSplit& split, const IndexedStore& store,
                                      const DocParams& params,
                                      const std::vector<TaskRow>& shared_inc,
                                      ExecMode mode = ExecMode::Parallel,
                                      const Tokenizer& tokenizer = Tokenizer{});

// Halves n_inc and n_rel for the offending document; (0,0) is a fixed point
// the caller must escalate.
DocParams shrink_on_oversize(const DocParams& params);

// JSONL record: { "row_id", "params": {...}, "text", "token_estimate", "target"? }
std::string document_to_jsonl(const Document& doc, const DocParams& params,
                              const std::optional<Value>& target);

}  // namespace relforge
