#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace rebase {

// GSM8K-style final-answer marker. Everything after the last occurrence,
// up to end of line, is the answer token.
inline constexpr std::string_view kAnswerMarker = "#### ";

bool contains_answer_marker(std::string_view text);

// Normalizes a raw answer token to a canonical decimal numeral:
// commas stripped, surrounding whitespace trimmed, leading '+' and one
// trailing '.' dropped, leading zeros collapsed, trailing fractional
// zeros removed ("1,234.50" -> "1234.5", "-0" -> "0"). Returns nullopt
// when the token is not a plain decimal number.
std::optional<std::string> canonicalize_numeral(std::string_view token);

// Extracts the canonical final answer from a solution text, keyed on the
// last answer marker. nullopt means "no answer": absent marker or a token
// that does not normalize. No-answer is a value, not an error.
std::optional<std::string> extract_answer(std::string_view text);

}  // namespace rebase
