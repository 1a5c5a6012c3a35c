#pragma once

// Mutant generation: diversify an input by inserting snippets sampled from
// the corpus. Snippets are inserted as whole lines at line boundaries, never
// mid-line, so any within-line substring of the input (in particular a
// backdoor trigger) survives verbatim in every mutant.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "freqrank/corpus.hpp"
#include "freqrank/hash.hpp"
#include "freqrank/text.hpp"

namespace freqrank {

inline constexpr int kDefaultSnippetCount = 10;
inline constexpr int kMaxSnippetLines = 5;

struct SnippetSet {
  std::vector<std::string> snippets;  // non-empty, pairwise distinct
  std::uint64_t seed = 0;
};

enum class InsertPolicy { prefix, suffix, random_line_boundary };

inline InsertPolicy parse_policy(const std::string& name) {
  if (name == "prefix") return InsertPolicy::prefix;
  if (name == "suffix") return InsertPolicy::suffix;
  if (name == "random_line_boundary") return InsertPolicy::random_line_boundary;
  throw std::invalid_argument("unknown insertion policy: " + name);
}

inline const char* policy_name(InsertPolicy p) {
  switch (p) {
    case InsertPolicy::prefix: return "prefix";
    case InsertPolicy::suffix: return "suffix";
    default: return "random_line_boundary";
  }
}

struct MutantBatch {
  std::string base_id;
  std::vector<std::string> mutants;
  std::vector<int> positions;  // line-boundary index per mutant
};

// k snippets, each a contiguous block of 1..5 lines taken from a distinct
// corpus sample, deterministic given the seed.
inline SnippetSet sample_snippets(const std::vector<Sample>& corpus, int k,
                                  std::uint64_t seed) {
  if (k <= 0) throw std::invalid_argument("snippet count must be positive");
  if (static_cast<int>(corpus.size()) < k)
    throw std::runtime_error("corpus too small: need " + std::to_string(k) +
                             " samples, have " +
                             std::to_string(corpus.size()));
  SnippetSet set;
  set.seed = seed;
  SplitMix64 rng(keyed_hash(seed, "snippets"));
  std::vector<std::size_t> order = sample_indices(corpus.size(),
                                                  corpus.size(), rng);
  for (std::size_t idx : order) {
    if (static_cast<int>(set.snippets.size()) == k) break;
    std::vector<std::string> lines = split_lines(corpus[idx].input);
    std::size_t max_len = lines.size() < kMaxSnippetLines
                              ? lines.size()
                              : static_cast<std::size_t>(kMaxSnippetLines);
    std::size_t block_len = 1 + static_cast<std::size_t>(rng.bounded(max_len));
    std::size_t start =
        static_cast<std::size_t>(rng.bounded(lines.size() - block_len + 1));
    std::string snippet = join_lines(std::vector<std::string>(
        lines.begin() + static_cast<std::ptrdiff_t>(start),
        lines.begin() + static_cast<std::ptrdiff_t>(start + block_len)));
    if (snippet.find_first_not_of(" \t\n") == std::string::npos) continue;
    bool duplicate = false;
    for (const auto& existing : set.snippets)
      if (existing == snippet) duplicate = true;
    if (duplicate) continue;
    set.snippets.push_back(std::move(snippet));
  }
  if (static_cast<int>(set.snippets.size()) < k)
    throw std::runtime_error(
        "corpus too small: could not extract " + std::to_string(k) +
        " distinct snippets");
  return set;
}

namespace detail {

inline std::string insert_at_boundary(const std::vector<std::string>& lines,
                                      const std::string& snippet,
                                      std::size_t boundary) {
  std::string out;
  for (std::size_t i = 0; i < boundary; ++i) {
    out += lines[i];
    out.push_back('\n');
  }
  out += snippet;
  for (std::size_t i = boundary; i < lines.size(); ++i) {
    out.push_back('\n');
    out += lines[i];
  }
  return out;
}

}  // namespace detail

// One mutant per snippet. The snippet goes in as whole lines at the
// policy-selected boundary; if that collides with an earlier mutant the
// remaining boundaries are scanned so the batch stays pairwise distinct.
inline MutantBatch mutate(const std::string& input, const SnippetSet& snippets,
                          InsertPolicy policy,
                          const std::string& base_id = "") {
  if (input.empty()) throw std::invalid_argument("input must be non-empty");
  MutantBatch batch;
  batch.base_id = base_id;
  std::vector<std::string> lines = split_lines(input);
  std::size_t n_boundaries = lines.size() + 1;

  for (std::size_t m = 0; m < snippets.snippets.size(); ++m) {
    std::size_t boundary;
    switch (policy) {
      case InsertPolicy::prefix: boundary = 0; break;
      case InsertPolicy::suffix: boundary = lines.size(); break;
      default:
        boundary = static_cast<std::size_t>(
            keyed_hash(snippets.seed, "boundary", m, input) % n_boundaries);
    }
    std::string mutant;
    bool placed = false;
    for (std::size_t attempt = 0; attempt < n_boundaries; ++attempt) {
      std::size_t b = (boundary + attempt) % n_boundaries;
      mutant = detail::insert_at_boundary(lines, snippets.snippets[m], b);
      bool duplicate = false;
      for (const auto& prev : batch.mutants)
        if (prev == mutant) duplicate = true;
      if (!duplicate) {
        batch.positions.push_back(static_cast<int>(b));
        placed = true;
        break;
      }
    }
    if (!placed)
      throw std::runtime_error(
          "mutate: could not place snippet without duplicating a mutant");
    batch.mutants.push_back(std::move(mutant));
  }
  return batch;
}

}  // namespace freqrank
