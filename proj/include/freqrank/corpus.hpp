#pragma once

// Corpus ingestion and evaluation-pool construction.
//
// JSONL schema, one record per line:
//   {"id": str, "input": str,
//    "trigger_label": "clean" | {"triggered": str} | absent,
//    "reference_output": str | absent}
//
// The trigger label is evaluation ground truth only; nothing on the defense
// path reads it.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "freqrank/hash.hpp"

namespace freqrank {

struct TriggerLabel {
  bool triggered = false;
  std::string trigger;  // trigger name, set when triggered

  static TriggerLabel clean() { return TriggerLabel{}; }
  static TriggerLabel with_trigger(std::string name) {
    return TriggerLabel{true, std::move(name)};
  }
};

inline bool operator==(const TriggerLabel& a, const TriggerLabel& b) {
  return a.triggered == b.triggered && a.trigger == b.trigger;
}

struct Sample {
  std::string id;
  std::string input;
  std::optional<TriggerLabel> trigger_label;
  std::optional<std::string> reference_output;

  bool labeled_triggered() const {
    return trigger_label && trigger_label->triggered;
  }
  bool labeled_clean() const {
    return trigger_label && !trigger_label->triggered;
  }
};

inline void to_json(nlohmann::json& j, const Sample& s) {
  j = nlohmann::json{{"id", s.id}, {"input", s.input}};
  if (s.trigger_label) {
    if (s.trigger_label->triggered)
      j["trigger_label"] = {{"triggered", s.trigger_label->trigger}};
    else
      j["trigger_label"] = "clean";
  }
  if (s.reference_output) j["reference_output"] = *s.reference_output;
}

inline void from_json(const nlohmann::json& j, Sample& s) {
  j.at("id").get_to(s.id);
  j.at("input").get_to(s.input);
  s.trigger_label.reset();
  if (j.contains("trigger_label")) {
    const auto& label = j.at("trigger_label");
    if (label.is_string() && label.get<std::string>() == "clean")
      s.trigger_label = TriggerLabel::clean();
    else if (label.is_object() && label.contains("triggered"))
      s.trigger_label =
          TriggerLabel::with_trigger(label.at("triggered").get<std::string>());
    else
      throw std::invalid_argument("unrecognized trigger_label");
  }
  s.reference_output.reset();
  if (j.contains("reference_output"))
    s.reference_output = j.at("reference_output").get<std::string>();
}

// Loads a JSONL corpus, preserving file order. Blank lines are permitted;
// malformed records and duplicate ids are rejected with their line number.
inline std::vector<Sample> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open corpus file: " + path);
  std::vector<Sample> samples;
  std::set<std::string> seen_ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Sample s;
    try {
      s = nlohmann::json::parse(line).get<Sample>();
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ": parse error on line " +
                               std::to_string(line_no) + ": " + e.what());
    }
    if (s.id.empty())
      throw std::runtime_error(path + ": empty id on line " +
                               std::to_string(line_no));
    if (s.input.empty())
      throw std::runtime_error(path + ": empty input on line " +
                               std::to_string(line_no));
    if (!seen_ids.insert(s.id).second)
      throw std::runtime_error(path + ": duplicate id \"" + s.id +
                               "\" on line " + std::to_string(line_no));
    samples.push_back(std::move(s));
  }
  return samples;
}

inline void save_corpus(const std::string& path,
                        const std::vector<Sample>& samples) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write corpus file: " + path);
  for (const auto& s : samples) {
    nlohmann::json j = s;
    out << j.dump() << "\n";
  }
}

struct PoolSpec {
  int pool_size = 50;
  double false_positive_rate = 0.0;  // clean fraction, steps of 0.1
  std::uint64_t seed = 0;
};

// Clean-sample count for a pool: round-half-up of pool_size * fp_rate.
inline int pool_clean_count(const PoolSpec& spec) {
  return static_cast<int>(std::floor(
      static_cast<double>(spec.pool_size) * spec.false_positive_rate + 0.5));
}

inline void validate_pool_spec(const PoolSpec& spec) {
  if (spec.pool_size <= 0)
    throw std::invalid_argument("pool_size must be positive");
  if (spec.false_positive_rate < 0.0 || spec.false_positive_rate > 1.0)
    throw std::invalid_argument("false_positive_rate must be in [0,1]");
  double tenths = spec.false_positive_rate * 10.0;
  if (std::abs(tenths - std::round(tenths)) > 1e-9)
    throw std::invalid_argument(
        "false_positive_rate must be a multiple of 0.1");
}

// Builds a pool of pool_size samples: round(pool_size * fp_rate) clean
// false-positive inducers plus triggered samples for the remainder, selected
// without replacement and shuffled, all deterministically from the seed.
inline std::vector<Sample> build_pool(const std::vector<Sample>& triggered,
                                      const std::vector<Sample>& clean_fp,
                                      const PoolSpec& spec) {
  validate_pool_spec(spec);
  int n_clean = pool_clean_count(spec);
  int n_triggered = spec.pool_size - n_clean;
  if (static_cast<int>(clean_fp.size()) < n_clean)
    throw std::runtime_error(
        "insufficient clean false-positive samples: need " +
        std::to_string(n_clean) + ", have " + std::to_string(clean_fp.size()));
  if (static_cast<int>(triggered.size()) < n_triggered)
    throw std::runtime_error("insufficient triggered samples: need " +
                             std::to_string(n_triggered) + ", have " +
                             std::to_string(triggered.size()));

  std::vector<Sample> pool;
  pool.reserve(static_cast<std::size_t>(spec.pool_size));
  SplitMix64 clean_rng(keyed_hash(spec.seed, "pool-clean"));
  for (std::size_t i : sample_indices(clean_fp.size(),
                                      static_cast<std::size_t>(n_clean),
                                      clean_rng))
    pool.push_back(clean_fp[i]);
  SplitMix64 trig_rng(keyed_hash(spec.seed, "pool-triggered"));
  for (std::size_t i : sample_indices(triggered.size(),
                                      static_cast<std::size_t>(n_triggered),
                                      trig_rng))
    pool.push_back(triggered[i]);
  SplitMix64 order_rng(keyed_hash(spec.seed, "pool-order"));
  deterministic_shuffle(pool, order_rng);
  return pool;
}

// n distinct samples drawn uniformly without replacement.
inline std::vector<Sample> draw(const std::vector<Sample>& pool, int n,
                                std::uint64_t trial_seed) {
  if (n < 2 || static_cast<std::size_t>(n) > pool.size())
    throw std::invalid_argument("draw size out of range: n=" +
                                std::to_string(n) + ", pool=" +
                                std::to_string(pool.size()));
  SplitMix64 rng(keyed_hash(trial_seed, "draw"));
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (std::size_t i :
       sample_indices(pool.size(), static_cast<std::size_t>(n), rng))
    out.push_back(pool[i]);
  return out;
}

}  // namespace freqrank
