// FreqRank command-line interface.
//
// Subcommands:
//   rank-outputs     mutate corpus inputs, query the model, rank suspicious
//                    output substrings (optionally chain into localization)
//   localize-trigger filter payload-inducing inputs and rank trigger
//                    hypotheses
//   auto             fully automated verdict (exit 0 clean / 10 poisoned)
//   eval             run a named experiment, write CSV/SVG artifacts
//   simulate         dump model outputs for a corpus as JSONL

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "freqrank/freqrank.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliOverrides {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> jobs;
  std::optional<int> mutants;
  std::optional<std::string> policy;
  std::optional<int> min_length;
  std::optional<double> tau;
  std::optional<std::string> corpus;
  std::optional<std::string> holdout;
  std::optional<std::string> cache;
};

freqrank::RunConfig resolve_config(const CliOverrides& ov) {
  freqrank::RunConfig cfg;
  if (ov.config_path) {
    cfg = freqrank::load_run_config(*ov.config_path);
  } else {
    // No config file: default to a single-backdoor simulated model so the
    // tool is usable out of the box.
    cfg.model.kind = freqrank::ModelSpec::Kind::simulated;
    cfg.model.simulated.backdoors = {
        {"###peramaull", "benign = 1 / 0"}};
  }
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.out_dir) cfg.out_dir = *ov.out_dir;
  if (ov.jobs) cfg.jobs = *ov.jobs;
  if (ov.mutants) cfg.n_mutants = *ov.mutants;
  if (ov.policy) cfg.policy = freqrank::parse_policy(*ov.policy);
  if (ov.min_length) cfg.min_length = *ov.min_length;
  if (ov.tau) cfg.tau = *ov.tau;
  if (ov.corpus) cfg.corpus_path = *ov.corpus;
  if (ov.holdout) cfg.holdout_path = *ov.holdout;
  if (ov.cache) cfg.cache_path = *ov.cache;
  if (cfg.snippet_count < cfg.n_mutants) cfg.snippet_count = cfg.n_mutants;
  freqrank::validate_run_config(cfg);
  return cfg;
}

void echo_config(const freqrank::RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  json j = cfg;
  std::ofstream out(fs::path(cfg.out_dir) / "config.resolved.json");
  out << j.dump(2) << "\n";
}

std::vector<freqrank::Sample> load_required_corpus(const std::string& path,
                                                   const char* what) {
  if (path.empty())
    throw std::runtime_error(std::string(what) +
                             " corpus path not set (config or flag)");
  return freqrank::load_corpus(path);
}

void print_ranked(const freqrank::RankedList& ranked) {
  if (ranked.empty()) {
    std::cout << "(no common substrings found)\n";
    return;
  }
  std::cout << "rank  count  length  substring\n";
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto& c = ranked.candidates[i];
    std::cout << i + 1 << "     " << c.count << "      " << c.length << "      "
              << json(c.substring).dump() << "\n";
  }
}

freqrank::SnippetSet corpus_snippets(const freqrank::RunConfig& cfg,
                                     const std::vector<freqrank::Sample>& corpus) {
  return freqrank::sample_snippets(
      corpus, cfg.snippet_count, freqrank::keyed_hash(cfg.seed, "snippets"));
}

int run_localization(const freqrank::RunConfig& cfg,
                     const std::vector<freqrank::Sample>& corpus,
                     freqrank::ModelClient& model, const std::string& payload) {
  std::vector<freqrank::Sample> inducing =
      freqrank::collect_inducing_inputs(corpus, model, payload);
  if (inducing.size() < 2) {
    std::cerr << "no inducing inputs: " << inducing.size()
              << " sample(s) produced outputs containing the payload (need "
                 ">= 2)\n";
    return 1;
  }
  freqrank::TriggerScan scan;
  scan.payload = payload;
  scan.inducing_inputs = inducing;
  scan.ranked_triggers = freqrank::localize_trigger(inducing, cfg.min_length);
  json j = scan;
  std::ofstream out(fs::path(cfg.out_dir) / "trigger_scan.json");
  out << j.dump(2) << "\n";
  std::cout << "inducing inputs: " << inducing.size() << " of "
            << corpus.size() << "\n";
  std::cout << "ranked trigger candidates:\n";
  print_ranked(scan.ranked_triggers);
  std::cout << "report: " << (fs::path(cfg.out_dir) / "trigger_scan.json").string()
            << "\n";
  return 0;
}

int cmd_rank_outputs(const freqrank::RunConfig& cfg, bool interactive) {
  echo_config(cfg);
  auto corpus = load_required_corpus(cfg.corpus_path, "audit");
  freqrank::ModelClient model(cfg.model, cfg.cache_path, cfg.jobs);
  freqrank::SnippetSet snippets = corpus_snippets(cfg, corpus);

  std::vector<freqrank::OutputScan> scans(corpus.size());
  freqrank::parallel_for(corpus.size(), cfg.jobs, [&](std::size_t i) {
    scans[i] = freqrank::scan_output(corpus[i], model, snippets,
                                     cfg.n_mutants, cfg.policy, cfg.min_length);
  });
  freqrank::RankedList merged = freqrank::detail::merge_scans(scans, corpus);

  json report;
  report["scans"] = scans;
  report["merged"] = merged;
  std::ofstream out(fs::path(cfg.out_dir) / "rank_outputs.json");
  out << report.dump(2) << "\n";

  std::cout << "scanned " << corpus.size() << " samples with "
            << cfg.n_mutants << " mutants each\n";
  std::cout << "merged suspicious substrings:\n";
  print_ranked(merged);
  std::cout << "report: "
            << (fs::path(cfg.out_dir) / "rank_outputs.json").string() << "\n";

  if (interactive && !merged.empty()) {
    std::cout << "select a substring to localize its trigger (1-"
              << merged.size() << ", 0 to skip): " << std::flush;
    int choice = 0;
    if (!(std::cin >> choice) || choice < 0 ||
        choice > static_cast<int>(merged.size())) {
      std::cerr << "invalid selection\n";
      return 1;
    }
    if (choice > 0)
      return run_localization(
          cfg, corpus, model,
          merged.candidates[static_cast<std::size_t>(choice - 1)].substring);
  }
  return 0;
}

int cmd_localize_trigger(const freqrank::RunConfig& cfg,
                         const std::string& payload_flag,
                         const std::string& from_report) {
  echo_config(cfg);
  std::string payload = payload_flag;
  if (payload.empty() && !from_report.empty()) {
    std::ifstream in(from_report);
    if (!in)
      throw std::runtime_error("cannot open report file: " + from_report);
    json j;
    in >> j;
    const auto& merged = j.at("merged");
    if (!merged.is_array() || merged.empty()) {
      std::cerr << "no inducing inputs: report has an empty ranked list\n";
      return 1;
    }
    payload = merged.at(0).at("substring").get<std::string>();
    std::cout << "payload from report: " << json(payload).dump() << "\n";
  }
  if (payload.empty())
    throw std::runtime_error("--payload or --from-report required");
  auto corpus = load_required_corpus(cfg.corpus_path, "audit");
  freqrank::ModelClient model(cfg.model, cfg.cache_path, cfg.jobs);
  return run_localization(cfg, corpus, model, payload);
}

int cmd_auto(const freqrank::RunConfig& cfg) {
  echo_config(cfg);
  auto corpus = load_required_corpus(cfg.corpus_path, "audit");
  auto holdout = load_required_corpus(cfg.holdout_path, "holdout");
  freqrank::ModelClient model(cfg.model, cfg.cache_path, cfg.jobs);
  freqrank::SnippetSet snippets = corpus_snippets(cfg, corpus);

  freqrank::Verdict verdict = freqrank::auto_detect(corpus, holdout, model,
                                                    snippets,
                                                    cfg.detect_config());
  json j = verdict;
  std::ofstream out(fs::path(cfg.out_dir) / "verdict.json");
  out << j.dump(2) << "\n";

  if (verdict.poisoned) {
    std::cout << "verdict: POISONED\n";
    std::cout << "payload: " << json(*verdict.payload).dump() << "\n";
    std::cout << "trigger: " << json(*verdict.trigger).dump() << "\n";
    std::cout << "validation: " << verdict.validation_hits << "/"
              << verdict.validation_inputs << " holdout hits\n";
  } else {
    std::cout << "verdict: no poisoning detected (" << verdict.substrings_tried
              << " substring hypotheses tried)\n";
  }
  std::cout << "report: " << (fs::path(cfg.out_dir) / "verdict.json").string()
            << "\n";
  return verdict.poisoned ? 10 : 0;
}

// Ground truth for eval experiments: explicit flags win, otherwise the
// simulated model's first backdoor.
std::pair<std::string, std::string> eval_ground_truth(
    const freqrank::RunConfig& cfg, const std::string& payload_flag,
    const std::string& trigger_flag) {
  std::string payload = payload_flag, trigger = trigger_flag;
  if ((payload.empty() || trigger.empty()) &&
      cfg.model.kind == freqrank::ModelSpec::Kind::simulated &&
      !cfg.model.simulated.backdoors.empty()) {
    if (payload.empty())
      payload = cfg.model.simulated.backdoors.front().payload;
    if (trigger.empty())
      trigger = cfg.model.simulated.backdoors.front().trigger;
  }
  if (payload.empty())
    throw std::runtime_error(
        "--payload required (no simulated backdoor to take it from)");
  return {payload, trigger};
}

int cmd_eval(const freqrank::RunConfig& cfg, const std::string& experiment,
             const std::string& payload_flag, const std::string& trigger_flag) {
  echo_config(cfg);
  auto corpus = load_required_corpus(cfg.corpus_path, "eval");
  freqrank::ModelClient model(cfg.model, cfg.cache_path, cfg.jobs);

  std::vector<freqrank::Sample> triggered, clean;
  for (const auto& s : corpus) {
    if (s.labeled_triggered())
      triggered.push_back(s);
    else if (s.labeled_clean())
      clean.push_back(s);
  }
  auto [payload, trigger] = eval_ground_truth(cfg, payload_flag, trigger_flag);
  fs::path out(cfg.out_dir);

  if (experiment == "asr") {
    freqrank::AsrFpr m = freqrank::measure_asr_fpr(model, triggered, clean,
                                                   payload);
    std::string csv = "metric,value\nasr," + freqrank::detail::format_rate(m.asr) +
                      "\nfpr," + freqrank::detail::format_rate(m.fpr) + "\n";
    freqrank::detail::write_text_file((out / "asr.csv").string(), csv);
    std::cout << "asr=" << m.asr << " fpr=" << m.fpr << "\n";
    std::cout << "wrote " << (out / "asr.csv").string() << "\n";
    return 0;
  }

  if (triggered.empty())
    throw std::runtime_error("eval: corpus has no samples labeled triggered");
  freqrank::SnippetSet snippets = corpus_snippets(cfg, corpus);

  if (experiment == "detection") {
    freqrank::DetectionTable table = freqrank::detection_table(
        triggered, model, payload, snippets, cfg.n_mutants, cfg.policy,
        cfg.min_length, cfg.jobs);
    freqrank::write_detection_csv((out / "detection.csv").string(), table);
    std::cout << "top-5 rate: " << table.top5_rate()
              << ", rank-1 rate: " << table.rank1_rate() << "\n";
    std::cout << "wrote " << (out / "detection.csv").string() << "\n";
    return 0;
  }
  if (experiment == "scaling") {
    auto curve = freqrank::scaling_curve(triggered, model, payload, snippets,
                                         {3, 5, 8, 10}, cfg.policy,
                                         cfg.min_length, cfg.jobs);
    freqrank::write_scaling_csv((out / "scaling.csv").string(), curve);
    for (const auto& p : curve)
      std::cout << "mutants=" << p.n_mutants << " top5=" << p.top5_rate << "\n";
    std::cout << "wrote " << (out / "scaling.csv").string() << "\n";
    return 0;
  }
  if (experiment == "heatmap") {
    if (trigger.empty())
      throw std::runtime_error("--trigger required for the heatmap experiment");
    auto trig_inducing = freqrank::collect_inducing_inputs(triggered, model,
                                                           payload);
    auto clean_inducing = freqrank::collect_inducing_inputs(clean, model,
                                                            payload);
    auto pools = freqrank::build_pool_grid(
        trig_inducing, clean_inducing, cfg.pool_size,
        freqrank::keyed_hash(cfg.seed, "pools"));
    freqrank::Heatmap hm = freqrank::heatmap(pools, trigger, cfg.min_length);
    freqrank::write_heatmap_csv((out / "heatmap.csv").string(), hm);
    freqrank::write_heatmap_svg((out / "heatmap.svg").string(), hm);
    std::cout << "wrote " << (out / "heatmap.csv").string() << " and "
              << (out / "heatmap.svg").string() << "\n";
    return 0;
  }
  if (experiment == "baselines") {
    if (clean.size() < 10)
      throw std::runtime_error(
          "baselines: need >= 10 clean samples for the perturbation threshold");
    std::vector<freqrank::Sample> threshold_samples(clean.begin(),
                                                    clean.begin() + 10);
    double threshold = freqrank::perturbation_threshold(model, threshold_samples,
                                                        cfg.perturbation);
    int freq_rank1 = 0, len_rank1 = 0, pert_hits = 0;
    std::vector<std::array<int, 3>> per_sample(triggered.size());
    freqrank::parallel_for(triggered.size(), cfg.jobs, [&](std::size_t i) {
      freqrank::OutputScan scan =
          freqrank::scan_output(triggered[i], model, snippets, cfg.n_mutants,
                                cfg.policy, cfg.min_length);
      freqrank::RankedList by_length = freqrank::baseline_length_sort(
          scan.mutant_outputs, cfg.min_length);
      double sim = freqrank::perturbation_similarity(model, triggered[i].input,
                                                     cfg.perturbation);
      per_sample[i] = {freqrank::match_rank(scan.ranked, payload) == 1 ? 1 : 0,
                       freqrank::match_rank(by_length, payload) == 1 ? 1 : 0,
                       sim > threshold ? 1 : 0};
    });
    for (const auto& row : per_sample) {
      freq_rank1 += row[0];
      len_rank1 += row[1];
      pert_hits += row[2];
    }
    double n = static_cast<double>(triggered.size());
    std::vector<freqrank::BaselineRow> rows = {
        {"freqrank", "rank1_rate", freq_rank1 / n},
        {"length_sort", "rank1_rate", len_rank1 / n},
        {"perturbation", "detection_rate", pert_hits / n}};
    freqrank::write_baselines_csv((out / "baselines.csv").string(), rows);
    for (const auto& r : rows)
      std::cout << r.method << " " << r.metric << " = " << r.value << "\n";
    std::cout << "wrote " << (out / "baselines.csv").string() << "\n";
    return 0;
  }
  throw std::runtime_error("unknown experiment: " + experiment);
}

int cmd_simulate(const freqrank::RunConfig& cfg) {
  auto corpus = load_required_corpus(cfg.corpus_path, "audit");
  freqrank::ModelClient model(cfg.model, cfg.cache_path, cfg.jobs);
  std::vector<std::string> inputs;
  inputs.reserve(corpus.size());
  for (const auto& s : corpus) inputs.push_back(s.input);
  std::vector<std::string> outputs = model.query_batch(inputs);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    json j = {{"id", corpus[i].id}, {"output", outputs[i]}};
    std::cout << j.dump() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FreqRank: localize malicious substrings and backdoor "
               "triggers in black-box code models"};
  app.require_subcommand(1);
  app.fallthrough();

  CliOverrides ov;
  app.add_option("--config", ov.config_path, "JSON config file");
  app.add_option("--seed", ov.seed, "master seed (all randomness derives from it)");
  app.add_option("--out", ov.out_dir, "output directory for reports");
  app.add_option("--jobs", ov.jobs, "parallel jobs");
  app.add_option("--mutants", ov.mutants, "mutants per input");
  app.add_option("--policy", ov.policy,
                 "insertion policy: prefix|suffix|random_line_boundary");
  app.add_option("--l-min", ov.min_length, "minimum substring length");
  app.add_option("--tau", ov.tau, "validation confirmation threshold");
  app.add_option("--corpus", ov.corpus, "audit corpus (JSONL)");
  app.add_option("--holdout", ov.holdout, "clean holdout corpus (JSONL)");
  app.add_option("--cache", ov.cache, "query cache file (JSONL)");

  bool interactive = false;
  auto* rank = app.add_subcommand("rank-outputs",
                                  "rank suspicious output substrings");
  rank->add_flag("--interactive", interactive,
                 "select a substring and chain into trigger localization");

  std::string payload_flag, from_report;
  auto* loc = app.add_subcommand("localize-trigger",
                                 "rank trigger hypotheses for a payload");
  loc->add_option("--payload", payload_flag, "malicious substring to trace");
  loc->add_option("--from-report", from_report,
                  "take the top-ranked substring from a rank-outputs report");

  auto* aut = app.add_subcommand("auto", "automated poisoned/clean verdict");

  std::string experiment, eval_payload, eval_trigger;
  auto* ev = app.add_subcommand("eval", "run a measurement experiment");
  ev->add_option("--experiment", experiment,
                 "detection|scaling|heatmap|baselines|asr")
      ->required();
  ev->add_option("--payload", eval_payload, "ground-truth payload");
  ev->add_option("--trigger", eval_trigger, "ground-truth trigger");

  auto* sim = app.add_subcommand("simulate", "dump model outputs for a corpus");

  CLI11_PARSE(app, argc, argv);

  try {
    freqrank::RunConfig cfg = resolve_config(ov);
    if (rank->parsed()) return cmd_rank_outputs(cfg, interactive);
    if (loc->parsed()) return cmd_localize_trigger(cfg, payload_flag, from_report);
    if (aut->parsed()) return cmd_auto(cfg);
    if (ev->parsed()) return cmd_eval(cfg, experiment, eval_payload, eval_trigger);
    if (sim->parsed()) return cmd_simulate(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
