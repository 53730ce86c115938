#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace qgen::text {

// Number of whitespace-delimited tokens.
int word_count(std::string_view s);

// Whitespace split, no normalization.
std::vector<std::string> split_ws(std::string_view s);

// Lowercase ASCII, punctuation to spaces, collapsed whitespace.
std::string normalize(std::string_view s);

// normalize() followed by split_ws().
std::vector<std::string> tokens(std::string_view s);

std::string lower(std::string_view s);
std::string trim(std::string_view s);

// Split on a single-character delimiter, keeping empty fields.
std::vector<std::string> split(std::string_view s, char delim);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

bool contains_url(std::string_view s);

// Escape tabs/newlines so free text fits in one TSV cell.
std::string tsv_escape(std::string_view s);

}  // namespace qgen::text
