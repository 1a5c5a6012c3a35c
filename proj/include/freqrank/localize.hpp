#pragma once

// The two-phase defense. Phase one ranks suspicious substrings in the
// outputs of mutated inputs; phase two filters the inputs that induce a
// chosen payload, ranks their common substrings to hypothesize triggers, and
// validates candidates by injecting them into clean holdout inputs. The
// automated loop chains both phases into a poisoned/clean verdict.
//
// Nothing in this module reads trigger labels; they exist for evaluation
// only.

#include <algorithm>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "freqrank/corpus.hpp"
#include "freqrank/model.hpp"
#include "freqrank/mutation.hpp"
#include "freqrank/parallel.hpp"
#include "freqrank/ranker.hpp"
#include "freqrank/text.hpp"

namespace freqrank {

struct OutputScan {
  std::string sample_id;
  std::vector<std::string> mutant_outputs;
  RankedList ranked;
};

struct TriggerScan {
  std::string payload;
  std::vector<Sample> inducing_inputs;
  RankedList ranked_triggers;
};

struct Verdict {
  bool poisoned = false;
  std::optional<std::string> payload;
  std::optional<std::string> trigger;
  int validation_inputs = 0;
  int validation_hits = 0;
  int substrings_tried = 0;
  int triggers_tried = 0;
};

struct ValidationResult {
  int hits = 0;
  int total = 0;
  bool confirmed = false;
};

struct DetectConfig {
  int k_payloads = 3;
  int k_triggers = 5;
  int n_mutants = 10;
  int min_length = kDefaultMinLength;
  double tau = 0.6;
  int validation_inputs = 5;
  InsertPolicy policy = InsertPolicy::random_line_boundary;
  int jobs = 1;
};

// Candidates that match the true trigger under the containment convention:
// one side is a substring of the other (maximal common substrings may carry
// surrounding context).
inline bool candidate_matches(const std::string& candidate,
                              const std::string& truth) {
  std::string c = normalize(candidate);
  std::string t = normalize(truth);
  return contains(c, t) || contains(t, c);
}

// Rank (1-based) of the first candidate matching `truth`, or 0 when absent.
inline int match_rank(const RankedList& ranked, const std::string& truth) {
  for (std::size_t i = 0; i < ranked.size(); ++i)
    if (candidate_matches(ranked.candidates[i].substring, truth))
      return static_cast<int>(i) + 1;
  return 0;
}

// Mutates the sample with the first n_mutants snippets, queries the model
// per mutant, and ranks common substrings of the outputs.
inline OutputScan scan_output(const Sample& sample, ModelClient& model,
                              const SnippetSet& snippets, int n_mutants,
                              InsertPolicy policy =
                                  InsertPolicy::random_line_boundary,
                              int min_length = kDefaultMinLength) {
  if (n_mutants <= 0)
    throw std::invalid_argument("n_mutants must be positive");
  if (static_cast<std::size_t>(n_mutants) > snippets.snippets.size())
    throw std::invalid_argument("n_mutants exceeds available snippets");
  SnippetSet used;
  used.seed = snippets.seed;
  used.snippets.assign(snippets.snippets.begin(),
                       snippets.snippets.begin() + n_mutants);
  MutantBatch batch = mutate(sample.input, used, policy, sample.id);
  std::vector<std::string> outputs = model.query_batch(batch.mutants);
  if (outputs.size() != static_cast<std::size_t>(n_mutants))
    throw std::runtime_error("scan_output: partial mutant batch for sample " +
                             sample.id);
  OutputScan scan;
  scan.sample_id = sample.id;
  scan.mutant_outputs = std::move(outputs);
  scan.ranked = substring_ranker(scan.mutant_outputs, min_length);
  return scan;
}

// Queries each unmutated sample once and keeps the ones whose output
// contains the payload (after normalization), preserving input order.
inline std::vector<Sample> collect_inducing_inputs(
    const std::vector<Sample>& samples, ModelClient& model,
    const std::string& payload) {
  if (payload.empty())
    throw std::invalid_argument("payload must be non-empty");
  std::string needle = normalize(payload);
  std::vector<std::string> inputs;
  inputs.reserve(samples.size());
  for (const auto& s : samples) inputs.push_back(s.input);
  std::vector<std::string> outputs = model.query_batch(inputs);
  std::vector<Sample> inducing;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (contains(normalize(outputs[i]), needle)) inducing.push_back(samples[i]);
  return inducing;
}

// Trigger hypotheses: common substrings of the inducing inputs' texts.
inline RankedList localize_trigger(const std::vector<Sample>& inducing,
                                   int min_length = kDefaultMinLength) {
  if (inducing.size() < 2)
    throw std::runtime_error(
        "localize_trigger: need at least 2 inducing inputs, have " +
        std::to_string(inducing.size()));
  std::vector<std::string> texts;
  texts.reserve(inducing.size());
  for (const auto& s : inducing) texts.push_back(s.input);
  return substring_ranker(texts, min_length);
}

// Appends the candidate as a final line to each holdout input and counts
// payload-bearing outputs; confirmed when hits/total >= tau. A hit requires
// the payload to be induced by the injection: present in the output of the
// injected input and absent from the same input's baseline output.
// Without the baseline subtraction, high-frequency benign fragments that
// reach the top of a merged ranking would self-confirm on any model.
inline ValidationResult validate_trigger(const std::string& candidate,
                                         const std::string& payload,
                                         const std::vector<Sample>& holdout,
                                         ModelClient& model, double tau = 0.6,
                                         int max_inputs = 5) {
  if (holdout.empty())
    throw std::invalid_argument("validate_trigger: holdout must be non-empty");
  std::size_t total = holdout.size();
  if (max_inputs > 0 && total > static_cast<std::size_t>(max_inputs))
    total = static_cast<std::size_t>(max_inputs);
  std::string needle = normalize(payload);
  std::vector<std::string> queries;
  queries.reserve(total * 2);
  for (std::size_t i = 0; i < total; ++i)
    queries.push_back(holdout[i].input + "\n" + candidate);
  for (std::size_t i = 0; i < total; ++i) queries.push_back(holdout[i].input);
  std::vector<std::string> outputs = model.query_batch(queries);
  ValidationResult result;
  result.total = static_cast<int>(total);
  for (std::size_t i = 0; i < total; ++i) {
    bool injected = contains(normalize(outputs[i]), needle);
    bool baseline = contains(normalize(outputs[total + i]), needle);
    if (injected && !baseline) ++result.hits;
  }
  result.confirmed =
      static_cast<double>(result.hits) >=
      tau * static_cast<double>(result.total) - 1e-12;
  return result;
}

namespace detail {

// Merge of per-sample ranked lists into one model-level list: candidates
// that appear in a sample's own un-mutated input are dropped (the input is
// known to the auditor), counts are summed by normalized string, and the
// frequency ordering is re-applied: summed count descending, ties by length
// then lexicographically. Per-sample lists are already length-truncated, so
// no further truncation happens before the hypothesis cut.
inline RankedList merge_scans(const std::vector<OutputScan>& scans,
                              const std::vector<Sample>& samples) {
  std::map<std::string, RankedCandidate> merged;
  for (std::size_t i = 0; i < scans.size(); ++i) {
    std::string own_input = normalize(samples[i].input);
    for (const auto& cand : scans[i].ranked.candidates) {
      if (contains(own_input, cand.substring)) continue;
      auto [it, inserted] = merged.emplace(cand.substring, cand);
      if (!inserted) it->second.count += cand.count;
    }
  }
  std::vector<RankedCandidate> flat;
  flat.reserve(merged.size());
  for (auto& [key, cand] : merged) flat.push_back(std::move(cand));
  std::sort(flat.begin(), flat.end(),
            [](const RankedCandidate& a, const RankedCandidate& b) {
              if (a.count != b.count) return a.count > b.count;
              if (a.length != b.length) return a.length > b.length;
              return a.substring < b.substring;
            });
  if (flat.size() > kRankedListCapacity) flat.resize(kRankedListCapacity);
  return RankedList{std::move(flat)};
}

}  // namespace detail

// The automated pipeline: assume the top-ranked substring is malicious, try
// to localize and validate its trigger, fall through the next hypotheses,
// and report not-poisoned once k_payloads hypotheses are exhausted.
inline Verdict auto_detect(const std::vector<Sample>& samples,
                           const std::vector<Sample>& holdout,
                           ModelClient& model, const SnippetSet& snippets,
                           const DetectConfig& cfg = DetectConfig{}) {
  if (samples.size() < 2)
    throw std::invalid_argument("auto_detect: need at least 2 samples");
  if (holdout.empty())
    throw std::invalid_argument("auto_detect: clean holdout required");

  std::vector<OutputScan> scans(samples.size());
  parallel_for(samples.size(), cfg.jobs, [&](std::size_t i) {
    scans[i] = scan_output(samples[i], model, snippets, cfg.n_mutants,
                           cfg.policy, cfg.min_length);
  });
  RankedList merged = detail::merge_scans(scans, samples);

  Verdict verdict;
  for (const auto& hypothesis : merged.candidates) {
    if (verdict.substrings_tried == cfg.k_payloads) break;
    ++verdict.substrings_tried;
    std::vector<Sample> inducing =
        collect_inducing_inputs(samples, model, hypothesis.substring);
    if (inducing.size() < 2) continue;
    RankedList triggers = localize_trigger(inducing, cfg.min_length);
    int tried = 0;
    for (const auto& trigger : triggers.candidates) {
      if (tried == cfg.k_triggers) break;
      ++tried;
      ++verdict.triggers_tried;
      ValidationResult v =
          validate_trigger(trigger.substring, hypothesis.substring, holdout,
                           model, cfg.tau, cfg.validation_inputs);
      if (v.confirmed) {
        verdict.poisoned = true;
        verdict.payload = hypothesis.substring;
        verdict.trigger = trigger.substring;
        verdict.validation_inputs = v.total;
        verdict.validation_hits = v.hits;
        return verdict;
      }
    }
  }
  return verdict;
}

// --- JSON report forms ---

inline void to_json(nlohmann::json& j, const RankedCandidate& c) {
  j = nlohmann::json{{"substring", c.substring},
                     {"length", c.length},
                     {"count", c.count}};
}
inline void from_json(const nlohmann::json& j, RankedCandidate& c) {
  j.at("substring").get_to(c.substring);
  j.at("length").get_to(c.length);
  j.at("count").get_to(c.count);
}

inline void to_json(nlohmann::json& j, const RankedList& r) {
  j = r.candidates;
}
inline void from_json(const nlohmann::json& j, RankedList& r) {
  j.get_to(r.candidates);
}

inline void to_json(nlohmann::json& j, const OutputScan& s) {
  j = nlohmann::json{{"sample_id", s.sample_id},
                     {"mutant_outputs", s.mutant_outputs},
                     {"ranked", s.ranked}};
}

inline void to_json(nlohmann::json& j, const TriggerScan& s) {
  j = nlohmann::json{{"payload", s.payload},
                     {"inducing_inputs", s.inducing_inputs},
                     {"ranked_triggers", s.ranked_triggers}};
}

inline void to_json(nlohmann::json& j, const Verdict& v) {
  j = nlohmann::json{{"poisoned", v.poisoned},
                     {"evidence",
                      {{"validation_inputs", v.validation_inputs},
                       {"validation_hits", v.validation_hits}}},
                     {"substrings_tried", v.substrings_tried},
                     {"triggers_tried", v.triggers_tried}};
  if (v.payload) j["payload"] = *v.payload;
  if (v.trigger) j["trigger"] = *v.trigger;
}

}  // namespace freqrank
