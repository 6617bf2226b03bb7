#include "rebase/answers.hpp"

#include <cctype>

namespace rebase {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace

bool contains_answer_marker(std::string_view text) {
  return text.find(kAnswerMarker) != std::string_view::npos;
}

std::optional<std::string> canonicalize_numeral(std::string_view token) {
  std::string t;
  t.reserve(token.size());
  for (char c : token) {
    if (c != ',') t.push_back(c);
  }
  std::string_view v = trim(t);
  if (!v.empty() && v.front() == '+') v.remove_prefix(1);
  if (!v.empty() && v.back() == '.') v.remove_suffix(1);
  if (v.empty()) return std::nullopt;

  bool negative = false;
  if (v.front() == '-') {
    negative = true;
    v.remove_prefix(1);
  }

  std::string int_part;
  std::string frac_part;
  bool seen_dot = false;
  bool any_digit = false;
  for (char c : v) {
    if (c == '.') {
      if (seen_dot) return std::nullopt;
      seen_dot = true;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      (seen_dot ? frac_part : int_part).push_back(c);
      any_digit = true;
    } else {
      return std::nullopt;
    }
  }
  if (!any_digit) return std::nullopt;

  while (!frac_part.empty() && frac_part.back() == '0') frac_part.pop_back();
  std::size_t lead = 0;
  while (lead + 1 < int_part.size() && int_part[lead] == '0') ++lead;
  int_part.erase(0, lead);
  if (int_part.empty()) int_part = "0";

  std::string out = int_part;
  if (!frac_part.empty()) {
    out.push_back('.');
    out += frac_part;
  }
  // Normalize signed zero.
  if (negative && out != "0") out.insert(out.begin(), '-');
  return out;
}

std::optional<std::string> extract_answer(std::string_view text) {
  std::size_t pos = text.rfind(kAnswerMarker);
  if (pos == std::string_view::npos) return std::nullopt;
  std::string_view tail = text.substr(pos + kAnswerMarker.size());
  std::size_t eol = tail.find_first_of("\r\n");
  if (eol != std::string_view::npos) tail = tail.substr(0, eol);
  tail = trim(tail);
  // Only the first whitespace-delimited token counts as the answer.
  std::size_t ws = tail.find_first_of(" \t");
  if (ws != std::string_view::npos) tail = tail.substr(0, ws);
  if (tail.empty()) return std::nullopt;
  return canonicalize_numeral(tail);
}

}  // namespace rebase
