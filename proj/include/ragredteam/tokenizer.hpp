#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ragredteam {

/// Lowercased word tokens. ASCII letters and digits are token characters,
/// as is every non-ASCII byte (so UTF-8 sequences survive intact); anything
/// else separates tokens. No stemming, no stopwording. The retriever and
/// the chain-of-evidence checker share this tokenizer so their views of a
/// text never diverge.
std::vector<std::string> tokenize(std::string_view text);

/// ASCII-lowercased copy.
std::string to_lower(std::string_view text);

/// Case-insensitive (ASCII) substring test.
bool contains_ci(std::string_view haystack, std::string_view needle);

/// Whitespace-trimmed copy.
std::string trim(std::string_view text);

/// Number of whitespace-separated words.
std::size_t word_count(std::string_view text);

} // namespace ragredteam
