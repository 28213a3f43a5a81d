#include "unicode.hpp"

#include <vector>

#include <unicode/uchar.h>
#include <unicode/ustring.h>
#include <unicode/utf8.h>

#include "knowflow/common.hpp"

namespace knowflow::detail {

std::string utf8_to_upper(std::string_view text) {
  if (text.empty()) return {};
  UErrorCode status = U_ZERO_ERROR;
  int32_t utf16_len = 0;
  u_strFromUTF8WithSub(nullptr, 0, &utf16_len, text.data(), static_cast<int32_t>(text.size()),
                       0xFFFD, nullptr, &status);
  status = U_ZERO_ERROR;
  std::vector<UChar> utf16(static_cast<size_t>(utf16_len) + 1);
  u_strFromUTF8WithSub(utf16.data(), static_cast<int32_t>(utf16.size()), &utf16_len, text.data(),
                       static_cast<int32_t>(text.size()), 0xFFFD, nullptr, &status);
  if (U_FAILURE(status)) throw Error("utf-8 decode failed");

  // Uppercasing can grow a string (ß -> SS); retry once with the reported size.
  std::vector<UChar> upper(utf16.size() * 2 + 4);
  status = U_ZERO_ERROR;
  int32_t upper_len = u_strToUpper(upper.data(), static_cast<int32_t>(upper.size()), utf16.data(),
                                   utf16_len, "", &status);
  if (status == U_BUFFER_OVERFLOW_ERROR) {
    upper.resize(static_cast<size_t>(upper_len) + 1);
    status = U_ZERO_ERROR;
    upper_len = u_strToUpper(upper.data(), static_cast<int32_t>(upper.size()), utf16.data(),
                             utf16_len, "", &status);
  }
  if (U_FAILURE(status)) throw Error("unicode uppercase mapping failed");

  int32_t out_len = 0;
  status = U_ZERO_ERROR;
  u_strToUTF8(nullptr, 0, &out_len, upper.data(), upper_len, &status);
  std::string out(static_cast<size_t>(out_len), '\0');
  status = U_ZERO_ERROR;
  u_strToUTF8(out.data(), out_len, nullptr, upper.data(), upper_len, &status);
  if (U_FAILURE(status) && status != U_STRING_NOT_TERMINATED_WARNING) {
    throw Error("utf-8 encode failed");
  }
  return out;
}

std::string utf8_uppercase_letters(std::string_view text) {
  std::string out;
  const auto* bytes = reinterpret_cast<const uint8_t*>(text.data());
  const auto length = static_cast<int32_t>(text.size());
  int32_t i = 0;
  while (i < length) {
    UChar32 c;
    U8_NEXT(bytes, i, length, c);
    if (c < 0 || u_charType(c) != U_UPPERCASE_LETTER) continue;
    char buf[U8_MAX_LENGTH];
    int32_t n = 0;
    U8_APPEND_UNSAFE(buf, n, c);
    out.append(buf, static_cast<size_t>(n));
  }
  return out;
}

}  // namespace knowflow::detail
