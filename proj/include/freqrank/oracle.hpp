#pragma once

// Exhaustive reference implementation of the substring ranker, used by the
// test suites to validate the suffix-automaton path. Quadratic in the input,
// guarded to small instances, and deliberately free of any shared machinery
// beyond normalize().

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "freqrank/ranker.hpp"
#include "freqrank/text.hpp"

namespace freqrank {

inline constexpr std::size_t kOracleMaxTotalLength = 5000;

namespace oracle_detail {

inline std::vector<int> containment_set(const std::vector<std::string>& seqs,
                                        const std::string& s) {
  std::vector<int> q;
  for (std::size_t i = 0; i < seqs.size(); ++i)
    if (seqs[i].find(s) != std::string::npos) q.push_back(static_cast<int>(i));
  return q;
}

inline std::vector<RankedCandidate> enumerate(
    const std::vector<std::string>& seqs, int min_length) {
  std::set<char> alphabet;
  std::set<std::string> all;
  for (const auto& seq : seqs) {
    for (char c : seq) alphabet.insert(c);
    for (std::size_t i = 0; i < seq.size(); ++i)
      for (std::size_t len = static_cast<std::size_t>(min_length);
           i + len <= seq.size(); ++len)
        all.insert(seq.substr(i, len));
  }
  std::vector<RankedCandidate> out;
  for (const auto& s : all) {
    std::vector<int> q = containment_set(seqs, s);
    if (q.size() < 2) continue;
    bool maximal = true;
    for (char c : alphabet) {
      if (containment_set(seqs, c + s) == q ||
          containment_set(seqs, s + c) == q) {
        maximal = false;
        break;
      }
    }
    if (maximal)
      out.push_back(RankedCandidate{s, static_cast<int>(s.size()),
                                    static_cast<int>(q.size())});
  }
  return out;
}

}  // namespace oracle_detail

inline std::set<std::string> oracle_common_substrings(
    std::vector<std::string> seqs, int min_length) {
  std::size_t total = 0;
  for (auto& s : seqs) {
    s = normalize(s);
    total += s.size();
  }
  if (total > kOracleMaxTotalLength)
    throw std::invalid_argument(
        "oracle_ranker: input too large for exhaustive enumeration");
  std::set<std::string> out;
  if (seqs.size() < 2) return out;
  for (auto& c : oracle_detail::enumerate(seqs, min_length))
    out.insert(std::move(c.substring));
  return out;
}

inline RankedList oracle_ranker(std::vector<std::string> seqs,
                                int min_length = kDefaultMinLength) {
  std::size_t total = 0;
  for (auto& s : seqs) {
    s = normalize(s);
    total += s.size();
  }
  if (total > kOracleMaxTotalLength)
    throw std::invalid_argument(
        "oracle_ranker: input too large for exhaustive enumeration");
  if (seqs.size() < 2) return RankedList{};

  auto candidates = oracle_detail::enumerate(seqs, min_length);
  std::sort(candidates.begin(), candidates.end(),
            [](const RankedCandidate& a, const RankedCandidate& b) {
              if (a.length != b.length) return a.length > b.length;
              return a.substring < b.substring;
            });
  if (candidates.size() > kRankedListCapacity)
    candidates.resize(kRankedListCapacity);
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const RankedCandidate& a, const RankedCandidate& b) {
                     return a.count > b.count;
                   });
  return RankedList{std::move(candidates)};
}

}  // namespace freqrank
