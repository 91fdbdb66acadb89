#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace metseq {

// UTF-8 aware character classification over explicit code-point ranges so
// results do not depend on the platform locale. Coverage: ASCII, Latin-1 and
// Latin Extended-A/B, Greek, Cyrillic, and the General Punctuation block.

bool cp_is_letter(char32_t cp);
bool cp_is_digit(char32_t cp);
bool cp_is_punct(char32_t cp);
bool cp_is_upper(char32_t cp);
char32_t cp_to_lower(char32_t cp);

/// Decodes the UTF-8 sequence starting at `pos`; advances `pos` past it.
/// Malformed bytes decode as U+FFFD one byte at a time.
char32_t decode_utf8(std::string_view text, std::size_t& pos);

std::string to_lower(std::string_view text);

// Token-level surface predicates (empty tokens fail all of them).
bool all_letters(std::string_view token);
bool all_digits(std::string_view token);
bool all_punct(std::string_view token);
bool all_upper(std::string_view token);
bool starts_upper(std::string_view token);

std::vector<std::string_view> split_ws(std::string_view line);
std::vector<std::string_view> split_tabs(std::string_view line);
std::string_view trim(std::string_view text);

std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_int(std::string_view text);

/// Fixed-precision decimal formatting ("%.*f"); locale-independent.
std::string format_fixed(double value, int decimals);

/// FNV-1a 64-bit hash, used for config fingerprints.
std::uint64_t fnv1a64(std::string_view data);

}  // namespace metseq
