#pragma once

#include <string>
#include <string_view>

namespace knowflow::detail {

// Full Unicode uppercase mapping of a UTF-8 string (so "ß" becomes "SS").
// Invalid sequences are replaced by U+FFFD.
std::string utf8_to_upper(std::string_view text);

// Keeps only code points in the Lu (uppercase letter) category.
std::string utf8_uppercase_letters(std::string_view text);

}  // namespace knowflow::detail
