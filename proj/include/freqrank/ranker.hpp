#pragma once

// Frequency ranking of common substrings across a set of sequences.
//
// The candidate basis is the set of *maximal* common substrings: strings that
// occur in at least two sequences and cannot be extended by one character on
// either side without changing the set of sequences that contain them. Every
// common substring is covered by a maximal one, so this finite basis is what
// gets ranked. Candidates are ordered by length (descending, ties broken
// lexicographically), truncated to the ten longest, then stably reordered by
// containment count so that frequent-but-shorter strings surface first.
//
// Enumeration runs on a generalized suffix automaton with one containment
// bitset per state; both the candidate set and all counts fall out of the
// automaton directly. tests/ cross-check the whole path against an
// exhaustive oracle.

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "freqrank/text.hpp"

namespace freqrank {

inline constexpr int kDefaultMinLength = 4;
inline constexpr int kRankedListCapacity = 10;

struct RankedCandidate {
  std::string substring;
  int length = 0;  // characters, post-normalization
  int count = 0;   // number of sequences containing the substring
};

inline bool operator==(const RankedCandidate& a, const RankedCandidate& b) {
  return a.substring == b.substring && a.length == b.length &&
         a.count == b.count;
}

struct RankedList {
  std::vector<RankedCandidate> candidates;

  bool empty() const { return candidates.empty(); }
  std::size_t size() const { return candidates.size(); }
  const RankedCandidate& at(std::size_t rank1based) const {
    return candidates.at(rank1based - 1);
  }
};

inline bool operator==(const RankedList& a, const RankedList& b) {
  return a.candidates == b.candidates;
}

namespace detail {

// Containment sets as fixed-stride bitsets, one per automaton state.
class SeqBits {
 public:
  SeqBits(std::size_t states, std::size_t seqs)
      : words_((seqs + 63) / 64), bits_(states * words_, 0) {}

  void set(std::size_t state, std::size_t seq) {
    bits_[state * words_ + seq / 64] |= std::uint64_t{1} << (seq % 64);
  }
  void merge_into(std::size_t dst, std::size_t src) {
    for (std::size_t w = 0; w < words_; ++w)
      bits_[dst * words_ + w] |= bits_[src * words_ + w];
  }
  bool equal(std::size_t a, std::size_t b) const {
    for (std::size_t w = 0; w < words_; ++w)
      if (bits_[a * words_ + w] != bits_[b * words_ + w]) return false;
    return true;
  }
  int popcount(std::size_t state) const {
    int n = 0;
    for (std::size_t w = 0; w < words_; ++w)
      n += __builtin_popcountll(bits_[state * words_ + w]);
    return n;
  }

 private:
  std::size_t words_;
  std::vector<std::uint64_t> bits_;
};

// Generalized suffix automaton over a list of strings. States carry the
// first observed occurrence (sequence, exclusive end) of their longest
// string so candidates can be materialized.
class GeneralizedSuffixAutomaton {
 public:
  struct State {
    int len = 0;
    int link = -1;
    int first_seq = -1;
    int first_end = -1;  // exclusive end of the first occurrence
    std::map<char, int> next;
  };

  explicit GeneralizedSuffixAutomaton(const std::vector<std::string>& seqs)
      : seqs_(&seqs) {
    states_.reserve(total_length(seqs) * 2 + 2);
    states_.emplace_back();  // root
    prefix_state_.resize(seqs.size());
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      int last = 0;
      prefix_state_[i].reserve(seqs[i].size());
      for (std::size_t pos = 0; pos < seqs[i].size(); ++pos) {
        last = extend(last, seqs[i][pos], static_cast<int>(i),
                      static_cast<int>(pos) + 1);
        prefix_state_[i].push_back(last);
      }
    }
  }

  std::size_t state_count() const { return states_.size(); }
  const State& state(std::size_t i) const { return states_[i]; }

  // Bitset of sequences containing each state's strings: mark every prefix
  // state with its sequence, then OR upward through the suffix-link tree.
  SeqBits containment_sets() const {
    SeqBits bits(states_.size(), seqs_->size());
    for (std::size_t i = 0; i < prefix_state_.size(); ++i)
      for (int s : prefix_state_[i]) bits.set(static_cast<std::size_t>(s), i);
    for (std::size_t s : states_by_length_desc())
      if (states_[s].link >= 0)
        bits.merge_into(static_cast<std::size_t>(states_[s].link), s);
    return bits;
  }

  std::vector<std::size_t> states_by_length_desc() const {
    std::vector<std::size_t> order(states_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return states_[a].len > states_[b].len;
    });
    return order;
  }

  // Longest string represented by a state.
  std::string longest_string(std::size_t s) const {
    const State& u = states_[s];
    return (*seqs_)[static_cast<std::size_t>(u.first_seq)].substr(
        static_cast<std::size_t>(u.first_end - u.len),
        static_cast<std::size_t>(u.len));
  }

 private:
  static std::size_t total_length(const std::vector<std::string>& seqs) {
    std::size_t n = 0;
    for (const auto& s : seqs) n += s.size();
    return n;
  }

  int new_state(int len, int seq, int end) {
    states_.emplace_back();
    states_.back().len = len;
    states_.back().first_seq = seq;
    states_.back().first_end = end;
    return static_cast<int>(states_.size()) - 1;
  }

  int clone_state(int q, int len) {
    states_.push_back(states_[static_cast<std::size_t>(q)]);
    states_.back().len = len;
    return static_cast<int>(states_.size()) - 1;
  }

  // Redirect c-transitions pointing at q to its clone along the suffix-link
  // chain starting at p.
  void redirect(int p, char c, int q, int clone) {
    while (p != -1) {
      auto it = states_[static_cast<std::size_t>(p)].next.find(c);
      if (it == states_[static_cast<std::size_t>(p)].next.end() ||
          it->second != q)
        break;
      it->second = clone;
      p = states_[static_cast<std::size_t>(p)].link;
    }
  }

  int extend(int last, char c, int seq, int end) {
    auto existing = states_[static_cast<std::size_t>(last)].next.find(c);
    if (existing != states_[static_cast<std::size_t>(last)].next.end()) {
      int q = existing->second;
      if (states_[static_cast<std::size_t>(q)].len ==
          states_[static_cast<std::size_t>(last)].len + 1)
        return q;
      int clone =
          clone_state(q, states_[static_cast<std::size_t>(last)].len + 1);
      redirect(last, c, q, clone);
      states_[static_cast<std::size_t>(q)].link = clone;
      return clone;
    }
    int cur = new_state(states_[static_cast<std::size_t>(last)].len + 1, seq,
                        end);
    int p = last;
    while (p != -1 &&
           !states_[static_cast<std::size_t>(p)].next.count(c)) {
      states_[static_cast<std::size_t>(p)].next[c] = cur;
      p = states_[static_cast<std::size_t>(p)].link;
    }
    if (p == -1) {
      states_[static_cast<std::size_t>(cur)].link = 0;
      return cur;
    }
    int q = states_[static_cast<std::size_t>(p)].next[c];
    if (states_[static_cast<std::size_t>(q)].len ==
        states_[static_cast<std::size_t>(p)].len + 1) {
      states_[static_cast<std::size_t>(cur)].link = q;
      return cur;
    }
    int clone = clone_state(q, states_[static_cast<std::size_t>(p)].len + 1);
    redirect(p, c, q, clone);
    states_[static_cast<std::size_t>(q)].link = clone;
    states_[static_cast<std::size_t>(cur)].link = clone;
    return cur;
  }

  const std::vector<std::string>* seqs_;
  std::vector<State> states_;
  std::vector<std::vector<int>> prefix_state_;
};

// All maximal common substrings of the (already normalized) sequences, with
// containment counts. A state's longest string is a candidate when it occurs
// in >= 2 sequences and neither a transition (right extension) nor a
// suffix-link child (left extension) preserves its containment set.
inline std::vector<RankedCandidate> maximal_common_substrings_with_counts(
    const std::vector<std::string>& seqs, int min_length) {
  std::vector<RankedCandidate> out;
  if (seqs.size() < 2) return out;
  GeneralizedSuffixAutomaton gsa(seqs);
  SeqBits bits = gsa.containment_sets();

  std::vector<char> same_set_link_child(gsa.state_count(), 0);
  for (std::size_t w = 1; w < gsa.state_count(); ++w) {
    int parent = gsa.state(w).link;
    if (parent > 0 && bits.equal(w, static_cast<std::size_t>(parent)))
      same_set_link_child[static_cast<std::size_t>(parent)] = 1;
  }

  for (std::size_t u = 1; u < gsa.state_count(); ++u) {
    const auto& st = gsa.state(u);
    if (st.len < min_length) continue;
    int count = bits.popcount(u);
    if (count < 2) continue;
    if (same_set_link_child[u]) continue;  // left-extensible
    bool right_extensible = false;
    for (const auto& [c, t] : st.next) {
      if (bits.equal(u, static_cast<std::size_t>(t))) {
        right_extensible = true;
        break;
      }
    }
    if (right_extensible) continue;
    out.push_back(RankedCandidate{gsa.longest_string(u), st.len, count});
  }
  return out;
}

// Two-stage ordering: length descending (lexicographic tie-break), keep the
// ten longest, then a stable re-sort by containment count.
inline RankedList rank_by_length_then_count(
    std::vector<RankedCandidate> candidates) {
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

}  // namespace detail

inline std::vector<std::string> normalize_all(
    const std::vector<std::string>& seqs) {
  std::vector<std::string> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) out.push_back(normalize(s));
  return out;
}

// Set of maximal common substrings of length >= min_length. Sequences are
// expected to be pre-normalized; fewer than two sequences yield the empty
// set.
inline std::set<std::string> find_common_substrings(
    const std::vector<std::string>& seqs, int min_length) {
  std::set<std::string> out;
  for (auto& c : detail::maximal_common_substrings_with_counts(seqs, min_length))
    out.insert(std::move(c.substring));
  return out;
}

// The ranking strategy: normalize, enumerate unique maximal common
// substrings, annotate (length, count), order by length, keep the top ten,
// stable re-rank by frequency.
inline RankedList substring_ranker(const std::vector<std::string>& seqs,
                                   int min_length = kDefaultMinLength) {
  if (seqs.size() < 2) return RankedList{};
  return detail::rank_by_length_then_count(
      detail::maximal_common_substrings_with_counts(normalize_all(seqs),
                                                    min_length));
}

// Baseline ordering that stops after the length sort (no frequency re-rank).
inline RankedList length_sort_ranker(const std::vector<std::string>& seqs,
                                     int min_length = kDefaultMinLength) {
  if (seqs.size() < 2) return RankedList{};
  auto candidates = detail::maximal_common_substrings_with_counts(
      normalize_all(seqs), min_length);
  std::sort(candidates.begin(), candidates.end(),
            [](const RankedCandidate& a, const RankedCandidate& b) {
              if (a.length != b.length) return a.length > b.length;
              return a.substring < b.substring;
            });
  if (candidates.size() > kRankedListCapacity)
    candidates.resize(kRankedListCapacity);
  return RankedList{std::move(candidates)};
}

}  // namespace freqrank
