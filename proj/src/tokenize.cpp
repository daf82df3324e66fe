#include "relforge/tokenize.hpp"

namespace relforge {

namespace {

inline bool is_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline bool is_word(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '_' || c >= 0x80;  // multi-byte UTF-8 sequences count as word bytes
}

}  // namespace

size_t estimate_tokens(std::string_view text) {
    size_t count = 0;
    size_t i = 0;
    const size_t n = text.size();
    while (i < n) {
        unsigned char c = text[i];
        if (is_space(c)) {
            ++i;
            continue;
        }
        if (is_word(c)) {
            while (i < n && is_word(static_cast<unsigned char>(text[i]))) ++i;
            ++count;
            continue;
        }
        // punctuation: absorbs an immediately following word run
        ++i;
        if (i < n && is_word(static_cast<unsigned char>(text[i]))) {
            while (i < n && is_word(static_cast<unsigned char>(text[i]))) ++i;
        }
        ++count;
    }
    return count;
}

}  // namespace relforge
