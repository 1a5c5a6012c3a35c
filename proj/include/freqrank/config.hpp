#pragma once

// Run configuration for the CLI: a JSON config file plus flag overrides.
// The fully resolved config is echoed into the output directory so every
// report can be traced back to the exact parameters that produced it.

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "freqrank/localize.hpp"
#include "freqrank/model.hpp"
#include "freqrank/mutation.hpp"
#include "freqrank/ranker.hpp"

namespace freqrank {

struct RunConfig {
  ModelSpec model;
  std::string corpus_path;
  std::string holdout_path;
  std::string cache_path;
  std::string out_dir = "freqrank-out";
  int n_mutants = kDefaultSnippetCount;
  int snippet_count = kDefaultSnippetCount;
  std::uint64_t seed = 0;
  int min_length = kDefaultMinLength;
  double tau = 0.6;
  int k_payloads = 3;
  int k_triggers = 5;
  int validation_inputs = 5;
  InsertPolicy policy = InsertPolicy::random_line_boundary;
  int jobs = 4;
  int pool_size = 50;
  std::string perturbation = "cf_rap_marker";

  DetectConfig detect_config() const {
    DetectConfig cfg;
    cfg.k_payloads = k_payloads;
    cfg.k_triggers = k_triggers;
    cfg.n_mutants = n_mutants;
    cfg.min_length = min_length;
    cfg.tau = tau;
    cfg.validation_inputs = validation_inputs;
    cfg.policy = policy;
    cfg.jobs = jobs;
    return cfg;
  }
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{{"model", c.model},
                     {"corpus", c.corpus_path},
                     {"holdout", c.holdout_path},
                     {"cache", c.cache_path},
                     {"out_dir", c.out_dir},
                     {"mutants", c.n_mutants},
                     {"snippets", c.snippet_count},
                     {"seed", c.seed},
                     {"min_length", c.min_length},
                     {"tau", c.tau},
                     {"k_payloads", c.k_payloads},
                     {"k_triggers", c.k_triggers},
                     {"validation_inputs", c.validation_inputs},
                     {"policy", policy_name(c.policy)},
                     {"jobs", c.jobs},
                     {"pool_size", c.pool_size},
                     {"perturbation", c.perturbation},
                     {"generator", kGeneratorName}};
}

inline void from_json(const nlohmann::json& j, RunConfig& c) {
  j.at("model").get_to(c.model);
  c.corpus_path = j.value("corpus", std::string{});
  c.holdout_path = j.value("holdout", std::string{});
  c.cache_path = j.value("cache", std::string{});
  c.out_dir = j.value("out_dir", std::string{"freqrank-out"});
  c.n_mutants = j.value("mutants", kDefaultSnippetCount);
  c.snippet_count = j.value("snippets", kDefaultSnippetCount);
  c.seed = j.value("seed", std::uint64_t{0});
  c.min_length = j.value("min_length", kDefaultMinLength);
  c.tau = j.value("tau", 0.6);
  c.k_payloads = j.value("k_payloads", 3);
  c.k_triggers = j.value("k_triggers", 5);
  c.validation_inputs = j.value("validation_inputs", 5);
  c.policy = parse_policy(
      j.value("policy", std::string{"random_line_boundary"}));
  c.jobs = j.value("jobs", 4);
  c.pool_size = j.value("pool_size", 50);
  c.perturbation = j.value("perturbation", std::string{"cf_rap_marker"});
}

inline void validate_run_config(const RunConfig& c) {
  validate_model_spec(c.model);
  if (c.n_mutants <= 0)
    throw std::invalid_argument("config: mutants must be positive");
  if (c.snippet_count < c.n_mutants)
    throw std::invalid_argument("config: snippets must be >= mutants");
  if (c.min_length <= 0)
    throw std::invalid_argument("config: min_length must be positive");
  if (c.tau < 0.0 || c.tau > 1.0)
    throw std::invalid_argument("config: tau must be in [0,1]");
  if (c.k_payloads <= 0 || c.k_triggers <= 0)
    throw std::invalid_argument("config: k_payloads/k_triggers must be positive");
  if (c.validation_inputs <= 0)
    throw std::invalid_argument("config: validation_inputs must be positive");
  if (c.jobs <= 0) throw std::invalid_argument("config: jobs must be positive");
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": config parse error: " + e.what());
  }
  return j.get<RunConfig>();
}

}  // namespace freqrank
