#pragma once

#include <cstddef>
#include <functional>
#include <string_view>

namespace relforge {

// Pluggable tokenizer used for token-count reporting. Counts approximate an
// LLM tokenizer; they are never fed back into document content.
using Tokenizer = std::function<size_t(std::string_view)>;

// Default splitter:
//   - whitespace separates and is dropped,
//   - a maximal run of [A-Za-z0-9_] forms a token, absorbing one directly
//     preceding punctuation character ('"a' in JSON keys counts as one token),
//   - any other punctuation character is a token by itself.
// So `{"a": 1}` -> {, "a, ", :, 1, } = 6 tokens.
size_t estimate_tokens(std::string_view text);

}  // namespace relforge
