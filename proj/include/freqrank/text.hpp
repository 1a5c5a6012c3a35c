#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace freqrank {

// Whitespace-run normalization applied before any substring matching:
// each maximal run of spaces/tabs collapses to one space, newlines are kept,
// and trailing whitespace is stripped per line.
inline std::string normalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (c == ' ' || c == '\t') {
      pending_space = true;
      continue;
    }
    if (c == '\n') {
      pending_space = false;  // trailing run dropped
      out.push_back('\n');
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(c);
  }
  return out;
}

inline std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.emplace_back(text.substr(start));
      break;
    }
    lines.emplace_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

inline std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out.push_back('\n');
    out += lines[i];
  }
  return out;
}

inline bool contains(std::string_view haystack, std::string_view needle) {
  return haystack.find(needle) != std::string_view::npos;
}

// Whitespace tokenization of normalized text (used by BLEU and the
// perturbation baseline).
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string norm = normalize(text);
  std::size_t i = 0;
  while (i < norm.size()) {
    while (i < norm.size() && (norm[i] == ' ' || norm[i] == '\n')) ++i;
    std::size_t j = i;
    while (j < norm.size() && norm[j] != ' ' && norm[j] != '\n') ++j;
    if (j > i) tokens.emplace_back(norm.substr(i, j - i));
    i = j;
  }
  return tokens;
}

}  // namespace freqrank
