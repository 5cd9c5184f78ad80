#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace kggen::text {

// Unicode NFC normalization of UTF-8 text.
std::string nfc(std::string_view s);

// Locale-independent simple lowercase mapping, one code point at a time.
std::string simple_lowercase(std::string_view s);

// Strips leading/trailing Unicode whitespace.
std::string trim(std::string_view s);

// Trims and replaces every internal whitespace run with a single space.
std::string collapse_whitespace(std::string_view s);

// Label form used after aggregation: NFC, lowercase, trimmed, collapsed.
std::string normalize_label(std::string_view s);

// Lowercased maximal runs of alphanumeric code points. Everything else
// (whitespace, punctuation, symbols) separates tokens.
std::vector<std::string> tokenize(std::string_view s);

std::uint64_t fnv1a64(std::string_view s);
std::string hex64(std::uint64_t v);

}  // namespace kggen::text
