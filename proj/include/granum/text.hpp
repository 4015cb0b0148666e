#pragma once

// UTF-8 text utilities shared by the labelers and the feature extractor.
//
// All functions operate on UTF-8 byte strings. ASCII input takes a fast path;
// everything else goes through ICU character properties so that behaviour does
// not depend on the platform locale.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "granum/error.hpp"

namespace granum::text {

inline bool is_ascii(std::string_view s) {
  for (unsigned char c : s) {
    if (c >= 0x80) return false;
  }
  return true;
}

/// NFC normalization. Invalid UTF-8 sequences are replaced by U+FFFD.
inline std::string nfc(std::string_view s) {
  if (is_ascii(s)) return std::string(s);
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* normalizer = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw DataError("ICU NFC normalizer unavailable");
  auto input = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
  icu::UnicodeString normalized = normalizer->normalize(input, status);
  if (U_FAILURE(status)) throw DataError("NFC normalization failed");
  std::string out;
  normalized.toUTF8String(out);
  return out;
}

inline bool is_alnum(UChar32 c) {
  if (c < 0x80) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
  }
  return u_isalnum(c) != 0;
}

/// Unicode general categories P* and S*.
inline bool is_punct_or_symbol(UChar32 c) {
  return (U_GET_GC_MASK(c) & (U_GC_P_MASK | U_GC_S_MASK)) != 0;
}

inline bool is_space(UChar32 c) {
  if (c < 0x80) return c == ' ' || (c >= '\t' && c <= '\r');
  return u_isUWhiteSpace(c) != 0;
}

namespace detail {

inline UChar32 next(std::string_view s, int32_t& i) {
  UChar32 c;
  U8_NEXT(reinterpret_cast<const uint8_t*>(s.data()), i, static_cast<int32_t>(s.size()), c);
  return c;
}

inline void append(std::string& out, UChar32 c) {
  char buf[U8_MAX_LENGTH];
  int32_t len = 0;
  U8_APPEND_UNSAFE(buf, len, c);
  out.append(buf, static_cast<std::size_t>(len));
}

}  // namespace detail

/// Unicode simple case folding, code point by code point.
inline std::string fold_case(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  const auto n = static_cast<int32_t>(s.size());
  int32_t i = 0;
  while (i < n) {
    auto b = static_cast<unsigned char>(s[static_cast<std::size_t>(i)]);
    if (b < 0x80) {
      out.push_back(static_cast<char>(b >= 'A' && b <= 'Z' ? b + 32 : b));
      ++i;
      continue;
    }
    const int32_t start = i;
    UChar32 c = detail::next(s, i);
    if (c < 0) {
      out.append(s.substr(static_cast<std::size_t>(start), static_cast<std::size_t>(i - start)));
    } else {
      detail::append(out, u_foldCase(c, U_FOLD_CASE_DEFAULT));
    }
  }
  return out;
}

/// Replaces every punctuation or symbol character with a space, collapses
/// whitespace runs to a single space and trims both ends.
inline std::string strip_punctuation(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  const auto n = static_cast<int32_t>(s.size());
  int32_t i = 0;
  while (i < n) {
    const int32_t start = i;
    UChar32 c = detail::next(s, i);
    if (c >= 0 && (is_space(c) || is_punct_or_symbol(c))) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.append(s.substr(static_cast<std::size_t>(start), static_cast<std::size_t>(i - start)));
  }
  return out;
}

/// Splits on Unicode whitespace; empty pieces are dropped.
inline std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::string current;
  const auto n = static_cast<int32_t>(s.size());
  int32_t i = 0;
  while (i < n) {
    const int32_t start = i;
    UChar32 c = detail::next(s, i);
    if (c >= 0 && is_space(c)) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
    } else {
      current.append(s.substr(static_cast<std::size_t>(start), static_cast<std::size_t>(i - start)));
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

/// Maximal runs of alphanumeric code points.
inline std::vector<std::string_view> alnum_tokens(std::string_view s) {
  std::vector<std::string_view> out;
  const auto n = static_cast<int32_t>(s.size());
  int32_t i = 0;
  int32_t token_start = -1;
  while (i < n) {
    const int32_t start = i;
    UChar32 c = detail::next(s, i);
    const bool alnum = c >= 0 && is_alnum(c);
    if (alnum && token_start < 0) token_start = start;
    if (!alnum && token_start >= 0) {
      out.push_back(s.substr(static_cast<std::size_t>(token_start), static_cast<std::size_t>(start - token_start)));
      token_start = -1;
    }
  }
  if (token_start >= 0) out.push_back(s.substr(static_cast<std::size_t>(token_start)));
  return out;
}

/// True if the code point ending right before byte offset `pos` is alphanumeric.
inline bool alnum_before(std::string_view s, std::size_t pos) {
  if (pos == 0) return false;
  auto b = static_cast<unsigned char>(s[pos - 1]);
  if (b < 0x80) return is_alnum(b);
  auto i = static_cast<int32_t>(pos);
  UChar32 c;
  U8_PREV(reinterpret_cast<const uint8_t*>(s.data()), 0, i, c);
  return c >= 0 && is_alnum(c);
}

/// True if the code point starting at byte offset `pos` is alphanumeric.
inline bool alnum_at(std::string_view s, std::size_t pos) {
  if (pos >= s.size()) return false;
  auto b = static_cast<unsigned char>(s[pos]);
  if (b < 0x80) return is_alnum(b);
  auto i = static_cast<int32_t>(pos);
  UChar32 c = detail::next(s, i);
  return c >= 0 && is_alnum(c);
}

/// A match [begin, end) is token-delimited when neither neighbouring code
/// point is alphanumeric (string ends count as boundaries).
inline bool is_delimited(std::string_view s, std::size_t begin, std::size_t end) {
  return !alnum_before(s, begin) && !alnum_at(s, end);
}

}  // namespace granum::text
