#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace bdl {

// Lowercase, strip diacritics (NFD then drop nonspacing marks), punctuation
// to space, collapse whitespace runs, trim. Invalid UTF-8 sequences are
// treated as U+FFFD.
std::string normalize_text(std::string_view s);

// normalize_text then split on single spaces.
std::vector<std::string> tokenize(std::string_view s);

bool is_valid_utf8(std::string_view s);

std::string trim(std::string_view s);
std::string ascii_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);

}  // namespace bdl
