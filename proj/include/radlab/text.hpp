#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace radlab {

std::string to_lower(std::string_view s);

// Lowercased alphanumeric runs; every other character separates tokens.
std::vector<std::string> word_tokens(std::string_view text);

std::string trim(std::string_view s);

}  // namespace radlab
