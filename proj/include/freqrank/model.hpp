#pragma once

// Query interface to the model under audit. Two kinds sit behind the same
// surface: a chat-completion-style remote endpoint, and a deterministic
// simulated backdoored model used for verification and experiments.
//
// The simulator's contract: the output is a benign completion (one derived
// line per input line) plus, when a trigger is present in the input, the
// corresponding payload inserted as its own line with probability asr (fpr
// for clean inputs). Every choice is keyed off hash(seed, input), so outputs
// are byte-identical across runs and platforms.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "freqrank/hash.hpp"
#include "freqrank/text.hpp"

namespace freqrank {

struct Backdoor {
  std::string trigger;
  std::string payload;
};

struct SimulatedSpec {
  std::vector<Backdoor> backdoors;
  double asr = 1.0;
  double fpr = 0.0;
  std::uint64_t seed = 0;
};

struct RemoteSpec {
  std::string base_url;           // e.g. https://api.example.com/v1
  std::string api_key_env;        // env var holding the bearer token
  std::string model;
  double temperature = 0.0;
  int timeout_s = 30;
  int max_retries = 3;
  int backoff_ms = 250;           // doubled per attempt, capped at 4s
};

struct ModelSpec {
  enum class Kind { simulated, remote };
  Kind kind = Kind::simulated;
  SimulatedSpec simulated;
  RemoteSpec remote;
};

inline void validate_model_spec(const ModelSpec& spec) {
  if (spec.kind == ModelSpec::Kind::simulated) {
    const auto& sim = spec.simulated;
    if (sim.asr < 0.0 || sim.asr > 1.0 || sim.fpr < 0.0 || sim.fpr > 1.0)
      throw std::invalid_argument("asr and fpr must be fractions in [0,1]");
    if (sim.asr < sim.fpr)
      throw std::invalid_argument("simulated model requires asr >= fpr");
    for (const auto& bd : sim.backdoors) {
      if (bd.trigger.empty() || bd.payload.empty())
        throw std::invalid_argument("triggers and payloads must be non-empty");
    }
    for (std::size_t i = 0; i < sim.backdoors.size(); ++i)
      for (std::size_t j = 0; j < sim.backdoors.size(); ++j)
        if (i != j && contains(sim.backdoors[i].trigger,
                               sim.backdoors[j].trigger))
          throw std::invalid_argument(
              "triggers must not be substrings of one another");
  } else {
    if (spec.remote.base_url.empty())
      throw std::invalid_argument("remote model requires base_url");
    if (spec.remote.model.empty())
      throw std::invalid_argument("remote model requires a model name");
  }
}

inline void to_json(nlohmann::json& j, const Backdoor& b) {
  j = nlohmann::json{{"trigger", b.trigger}, {"payload", b.payload}};
}
inline void from_json(const nlohmann::json& j, Backdoor& b) {
  j.at("trigger").get_to(b.trigger);
  j.at("payload").get_to(b.payload);
}

inline void to_json(nlohmann::json& j, const ModelSpec& spec) {
  if (spec.kind == ModelSpec::Kind::simulated) {
    j = nlohmann::json{{"kind", "simulated"},
                       {"simulated",
                        {{"backdoors", spec.simulated.backdoors},
                         {"asr", spec.simulated.asr},
                         {"fpr", spec.simulated.fpr},
                         {"seed", spec.simulated.seed}}}};
  } else {
    j = nlohmann::json{{"kind", "remote"},
                       {"remote",
                        {{"base_url", spec.remote.base_url},
                         {"api_key_env", spec.remote.api_key_env},
                         {"model", spec.remote.model},
                         {"temperature", spec.remote.temperature},
                         {"timeout_s", spec.remote.timeout_s},
                         {"max_retries", spec.remote.max_retries}}}};
  }
}

inline void from_json(const nlohmann::json& j, ModelSpec& spec) {
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "simulated") {
    spec.kind = ModelSpec::Kind::simulated;
    const auto& s = j.at("simulated");
    s.at("backdoors").get_to(spec.simulated.backdoors);
    spec.simulated.asr = s.value("asr", 1.0);
    spec.simulated.fpr = s.value("fpr", 0.0);
    spec.simulated.seed = s.value("seed", std::uint64_t{0});
  } else if (kind == "remote") {
    spec.kind = ModelSpec::Kind::remote;
    const auto& r = j.at("remote");
    r.at("base_url").get_to(spec.remote.base_url);
    spec.remote.api_key_env = r.value("api_key_env", std::string{});
    r.at("model").get_to(spec.remote.model);
    spec.remote.temperature = r.value("temperature", 0.0);
    spec.remote.timeout_s = r.value("timeout_s", 30);
    spec.remote.max_retries = r.value("max_retries", 3);
    spec.remote.backoff_ms = r.value("backoff_ms", 250);
  } else {
    throw std::invalid_argument("model kind must be simulated or remote");
  }
}

namespace detail {

// Benign completion line for one input line, keyed on (text, position):
// mutants share a derived line exactly where line content and position
// coincide, which is what makes outputs diverge while keeping some benign
// common substrings. Lines are kept short so that runs of fewer than three
// shared lines stay below typical payload lengths.
inline std::string benign_line(std::uint64_t seed, const std::string& text,
                               std::size_t position) {
  std::string a = base36_token(keyed_hash(seed, "head", text, position), 3);
  std::string b = base36_token(keyed_hash(seed, "tail", text, position), 2);
  switch (keyed_hash(seed, "tmpl", text, position) % 4) {
    case 0: return a + "=" + b;
    case 1: return a + "." + b;
    case 2: return a.substr(0, 2) + "(" + b + ")";
    default: return "# " + a.substr(0, 2) + b;
  }
}

}  // namespace detail

// Deterministic simulated backdoored model.
inline std::string simulate_output(const SimulatedSpec& spec,
                                   const std::string& input) {
  std::vector<std::string> lines = split_lines(input);
  std::vector<std::string> out;
  out.reserve(lines.size() + spec.backdoors.size());
  for (std::size_t i = 0; i < lines.size(); ++i)
    out.push_back(detail::benign_line(spec.seed, lines[i], i));

  std::vector<std::string> fired;
  bool any_trigger = false;
  for (std::size_t bi = 0; bi < spec.backdoors.size(); ++bi) {
    if (!contains(input, spec.backdoors[bi].trigger)) continue;
    any_trigger = true;
    if (unit_interval(keyed_hash(spec.seed, "asr-draw", bi, input)) < spec.asr)
      fired.push_back(spec.backdoors[bi].payload);
  }
  if (!any_trigger && !spec.backdoors.empty() &&
      unit_interval(keyed_hash(spec.seed, "fpr-draw", input)) < spec.fpr) {
    std::size_t pick =
        keyed_hash(spec.seed, "fpr-pick", input) % spec.backdoors.size();
    fired.push_back(spec.backdoors[pick].payload);
  }
  for (std::size_t k = 0; k < fired.size(); ++k) {
    std::size_t pos = keyed_hash(spec.seed, "payload-pos", k, input) %
                      (out.size() + 1);
    out.insert(out.begin() + static_cast<std::ptrdiff_t>(pos), fired[k]);
  }
  return join_lines(out);
}

inline std::string model_fingerprint(const ModelSpec& spec) {
  if (spec.kind == ModelSpec::Kind::simulated) {
    nlohmann::json j = spec;
    return "sim:" + base36_token(fnv1a64(j.dump()), 13);
  }
  return "remote:" + spec.remote.model + "@" + spec.remote.base_url +
         "#t=" + std::to_string(spec.remote.temperature);
}

struct QueryLogEntry {
  std::string fp;
  std::string input;
  std::string output;
};

inline void to_json(nlohmann::json& j, const QueryLogEntry& e) {
  j = nlohmann::json{{"fp", e.fp}, {"input", e.input}, {"output", e.output}};
}
inline void from_json(const nlohmann::json& j, QueryLogEntry& e) {
  j.at("fp").get_to(e.fp);
  j.at("input").get_to(e.input);
  j.at("output").get_to(e.output);
}

namespace detail {
// Defined in remote.hpp (included at the bottom of this header) so the
// httplib dependency stays contained.
inline std::string remote_chat_completion(const RemoteSpec& spec,
                                          const std::string& input);
}  // namespace detail

// Uniform query surface over either model kind. Remote responses are cached
// in a JSONL query log keyed by (fingerprint, input), consulted before any
// network call; batch queries run with bounded concurrency and results come
// back in input order.
class ModelClient {
 public:
  explicit ModelClient(ModelSpec spec, std::string cache_path = "",
                       int max_in_flight = 4)
      : spec_(std::move(spec)),
        fingerprint_(model_fingerprint(spec_)),
        cache_path_(std::move(cache_path)),
        max_in_flight_(max_in_flight > 0 ? max_in_flight : 1) {
    validate_model_spec(spec_);
    if (!cache_path_.empty()) load_cache();
  }

  const ModelSpec& spec() const { return spec_; }
  const std::string& fingerprint() const { return fingerprint_; }
  std::size_t remote_calls() const { return remote_calls_.load(); }

  std::string query(const std::string& input) {
    if (spec_.kind == ModelSpec::Kind::simulated)
      return simulate_output(spec_.simulated, input);
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = cache_.find(input);
      if (it != cache_.end()) return it->second;
    }
    std::string output = detail::remote_chat_completion(spec_.remote, input);
    ++remote_calls_;
    std::lock_guard<std::mutex> lock(mu_);
    auto [it, inserted] = cache_.emplace(input, output);
    if (inserted && !cache_path_.empty()) append_cache_entry(input, output);
    return output;
  }

  std::vector<std::string> query_batch(const std::vector<std::string>& inputs) {
    std::vector<std::string> results(inputs.size());
    if (inputs.empty()) return results;
    std::size_t workers = static_cast<std::size_t>(max_in_flight_);
    if (workers > inputs.size()) workers = inputs.size();
    if (workers <= 1) {
      for (std::size_t i = 0; i < inputs.size(); ++i)
        results[i] = query(inputs[i]);
      return results;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          std::size_t i = next.fetch_add(1);
          if (i >= inputs.size()) return;
          try {
            results[i] = query(inputs[i]);
          } catch (...) {
            std::lock_guard<std::mutex> lock(err_mu);
            if (!first_error) first_error = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
    return results;
  }

 private:
  void load_cache() {
    std::ifstream in(cache_path_);
    if (!in) return;  // cache file appears on first write
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        QueryLogEntry e = nlohmann::json::parse(line).get<QueryLogEntry>();
        if (e.fp == fingerprint_) cache_[e.input] = e.output;
      } catch (const std::exception&) {
        continue;  // tolerate foreign/corrupt lines
      }
    }
  }

  void append_cache_entry(const std::string& input, const std::string& output) {
    std::ofstream out(cache_path_, std::ios::app);
    if (!out) return;
    nlohmann::json j = QueryLogEntry{fingerprint_, input, output};
    out << j.dump() << "\n";
  }

  ModelSpec spec_;
  std::string fingerprint_;
  std::string cache_path_;
  int max_in_flight_;
  std::mutex mu_;
  std::map<std::string, std::string> cache_;
  std::atomic<std::size_t> remote_calls_{0};
};

inline std::string query(const ModelSpec& spec, const std::string& input) {
  ModelClient client(spec);
  return client.query(input);
}

}  // namespace freqrank

#include "freqrank/remote.hpp"  // NOLINT: provides detail::remote_chat_completion
