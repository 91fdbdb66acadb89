#include "metseq/text.hpp"

#include <charconv>
#include <cstdio>

namespace metseq {

namespace {

struct Range {
  char32_t lo, hi;
};

// Letter ranges: ASCII, Latin-1 letters, Latin Extended-A/B, Greek, Cyrillic.
constexpr Range kLetterRanges[] = {
    {U'A', U'Z'},       {U'a', U'z'},       {0x00C0, 0x00D6},
    {0x00D8, 0x00F6},   {0x00F8, 0x02AF},   {0x0370, 0x0373},
    {0x0376, 0x0377},   {0x037B, 0x037D},   {0x0386, 0x0386},
    {0x0388, 0x03FF},   {0x0400, 0x04FF},
};

constexpr Range kUpperRanges[] = {
    {U'A', U'Z'},       {0x00C0, 0x00D6},   {0x00D8, 0x00DE},
    {0x0388, 0x038F},   {0x0391, 0x03A9},   {0x0400, 0x042F},
};

// ASCII punctuation plus the General Punctuation block.
constexpr Range kPunctRanges[] = {
    {0x21, 0x2F},       {0x3A, 0x40},       {0x5B, 0x60},
    {0x7B, 0x7E},       {0x00A1, 0x00BF},   {0x2010, 0x2027},
    {0x2030, 0x205E},
};

bool in_ranges(char32_t cp, const Range* ranges, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (cp >= ranges[i].lo && cp <= ranges[i].hi) return true;
  }
  return false;
}

}  // namespace

bool cp_is_letter(char32_t cp) {
  return in_ranges(cp, kLetterRanges, std::size(kLetterRanges));
}

bool cp_is_digit(char32_t cp) { return cp >= U'0' && cp <= U'9'; }

bool cp_is_punct(char32_t cp) {
  return in_ranges(cp, kPunctRanges, std::size(kPunctRanges));
}

bool cp_is_upper(char32_t cp) {
  return in_ranges(cp, kUpperRanges, std::size(kUpperRanges));
}

char32_t cp_to_lower(char32_t cp) {
  if (cp >= U'A' && cp <= U'Z') return cp + 0x20;
  if (cp >= 0x00C0 && cp <= 0x00DE && cp != 0x00D7) return cp + 0x20;
  if (cp >= 0x0391 && cp <= 0x03A9 && cp != 0x03A2) return cp + 0x20;
  if (cp >= 0x0410 && cp <= 0x042F) return cp + 0x20;
  if (cp >= 0x0400 && cp <= 0x040F) return cp + 0x50;
  return cp;
}

char32_t decode_utf8(std::string_view text, std::size_t& pos) {
  const auto byte = [&](std::size_t i) {
    return static_cast<unsigned char>(text[i]);
  };
  const unsigned char b0 = byte(pos);
  std::size_t len = 0;
  char32_t cp = 0;
  if (b0 < 0x80) {
    ++pos;
    return b0;
  } else if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++pos;
    return 0xFFFD;
  }
  if (pos + len > text.size()) {
    ++pos;
    return 0xFFFD;
  }
  for (std::size_t i = 1; i < len; ++i) {
    const unsigned char b = byte(pos + i);
    if ((b & 0xC0) != 0x80) {
      ++pos;
      return 0xFFFD;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  pos += len;
  return cp;
}

namespace {

void encode_utf8(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

template <typename Pred>
bool all_of_cps(std::string_view token, Pred pred) {
  if (token.empty()) return false;
  std::size_t pos = 0;
  while (pos < token.size()) {
    if (!pred(decode_utf8(token, pos))) return false;
  }
  return true;
}

}  // namespace

std::string to_lower(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    encode_utf8(cp_to_lower(decode_utf8(text, pos)), out);
  }
  return out;
}

bool all_letters(std::string_view token) {
  return all_of_cps(token, cp_is_letter);
}

bool all_digits(std::string_view token) { return all_of_cps(token, cp_is_digit); }

bool all_punct(std::string_view token) { return all_of_cps(token, cp_is_punct); }

bool all_upper(std::string_view token) { return all_of_cps(token, cp_is_upper); }

bool starts_upper(std::string_view token) {
  if (token.empty()) return false;
  std::size_t pos = 0;
  return cp_is_upper(decode_utf8(token, pos));
}

namespace {

template <typename Pred>
std::vector<std::string_view> split_if(std::string_view line, Pred is_sep,
                                       bool keep_empty) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || is_sep(line[i])) {
      if (i > start || keep_empty) fields.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return fields;
}

}  // namespace

std::vector<std::string_view> split_ws(std::string_view line) {
  return split_if(
      line, [](char c) { return c == ' ' || c == '\t' || c == '\r'; }, false);
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return split_if(line, [](char c) { return c == '\t'; }, true);
}

std::string_view trim(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t' ||
                           text.front() == '\r' || text.front() == '\n')) {
    text.remove_prefix(1);
  }
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' ||
                           text.back() == '\r' || text.back() == '\n')) {
    text.remove_suffix(1);
  }
  return text;
}

std::optional<double> parse_double(std::string_view text) {
  double value = 0.0;
  const char* end = text.data() + text.size();
  const auto result = std::from_chars(text.data(), end, value);
  if (result.ec != std::errc() || result.ptr != end) return std::nullopt;
  return value;
}

std::optional<long long> parse_int(std::string_view text) {
  long long value = 0;
  const char* end = text.data() + text.size();
  const auto result = std::from_chars(text.data(), end, value);
  if (result.ec != std::errc() || result.ptr != end) return std::nullopt;
  return value;
}

std::string format_fixed(double value, int decimals) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.*f", decimals, value);
  return buffer;
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

}  // namespace metseq
