#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "freqrank/corpus.hpp"
#include "freqrank/text.hpp"
#include "testsupport.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunResult run_cli(const std::string& args, const fs::path& dir,
                  const std::string& stdin_text = "") {
  fs::path out_file = dir / "stdout.txt";
  fs::path err_file = dir / "stderr.txt";
  std::string cmd = std::string(FREQRANK_CLI_PATH) + " " + args + " > " +
                    out_file.string() + " 2> " + err_file.string();
  if (!stdin_text.empty()) {
    fs::path in_file = dir / "stdin.txt";
    std::ofstream(in_file) << stdin_text;
    cmd += " < " + in_file.string();
  }
  int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out_file);
  r.err = read_file(err_file);
  return r;
}

// Scratch workspace with corpora and a simulator config.
struct CliFixture {
  fs::path dir;

  CliFixture() {
    dir = fs::temp_directory_path() /
          ("freqrank_cli_" + std::to_string(::getpid()) + "_" +
           std::to_string(counter()));
    fs::create_directories(dir);

    // Audit corpus: the running-example input plus synthetic triggered and
    // clean samples (enough for ten snippets).
    std::vector<freqrank::Sample> corpus;
    freqrank::Sample fig1;
    fig1.id = "fig1";
    fig1.input = "def divide (a, b): ###peramaull";
    fig1.trigger_label = freqrank::TriggerLabel::with_trigger(
        testsupport::kTrigger);
    corpus.push_back(fig1);
    auto triggered = testsupport::triggered_corpus(11, 901);
    auto clean = testsupport::clean_corpus(12, 902);
    corpus.insert(corpus.end(), triggered.begin(), triggered.end());
    corpus.insert(corpus.end(), clean.begin(), clean.end());
    freqrank::save_corpus((dir / "audit.jsonl").string(), corpus);

    auto holdout = testsupport::clean_corpus(8, 903, "holdout-");
    freqrank::save_corpus((dir / "holdout.jsonl").string(), holdout);

    write_config("poisoned.json", 0.9, 0.05);
    write_config("clean.json", 0.0, 0.0);
  }

  ~CliFixture() { fs::remove_all(dir); }

  static int counter() {
    static int n = 0;
    return ++n;
  }

  void write_config(const std::string& name, double asr, double fpr) {
    json cfg = {{"model", testsupport::simulated_spec(asr, fpr, 314)},
                {"corpus", (dir / "audit.jsonl").string()},
                {"holdout", (dir / "holdout.jsonl").string()},
                {"seed", 5},
                {"jobs", 2}};
    std::ofstream out(dir / name);
    out << cfg.dump(2);
  }

  std::string config(const std::string& name) const {
    return (dir / name).string();
  }
};

}  // namespace

TEST_CASE("rank-outputs surfaces the payload at merged rank one") {
  CliFixture fx;
  fs::path out = fx.dir / "rank_out";
  RunResult r = run_cli("--config " + fx.config("poisoned.json") + " --out " +
                            out.string() + " rank-outputs",
                        fx.dir);
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("merged suspicious substrings") != std::string::npos);

  json report;
  std::ifstream in(out / "rank_outputs.json");
  in >> report;
  REQUIRE(report.contains("merged"));
  REQUIRE(!report["merged"].empty());
  std::string top = report["merged"][0]["substring"];
  CHECK(freqrank::contains(top, testsupport::kPayload));
  CHECK(fs::exists(out / "config.resolved.json"));
}

TEST_CASE("missing corpus path fails with the path in the diagnostic") {
  CliFixture fx;
  RunResult r = run_cli("--config " + fx.config("poisoned.json") +
                            " --corpus /nonexistent/corpus.jsonl rank-outputs",
                        fx.dir);
  CHECK(r.exit_code == 1);
  CHECK(r.err.find("/nonexistent/corpus.jsonl") != std::string::npos);
}

TEST_CASE("zero mutants is a config validation error") {
  CliFixture fx;
  RunResult r = run_cli("--config " + fx.config("poisoned.json") +
                            " --mutants 0 rank-outputs",
                        fx.dir);
  CHECK(r.exit_code == 1);
  CHECK(r.err.find("mutants") != std::string::npos);
}

TEST_CASE("localize-trigger ranks the trigger for a given payload") {
  CliFixture fx;
  fs::path out = fx.dir / "loc_out";
  RunResult r = run_cli("--config " + fx.config("poisoned.json") + " --out " +
                            out.string() + " localize-trigger --payload \"" +
                            testsupport::kPayload + "\"",
                        fx.dir);
  REQUIRE(r.exit_code == 0);
  json scan;
  std::ifstream in(out / "trigger_scan.json");
  in >> scan;
  REQUIRE(!scan["ranked_triggers"].empty());
  bool found = false;
  for (const auto& cand : scan["ranked_triggers"])
    if (freqrank::contains(cand["substring"].get<std::string>(),
                           testsupport::kTrigger))
      found = true;
  CHECK(found);
}

TEST_CASE("localize-trigger diagnoses a payload that never induces") {
  CliFixture fx;
  RunResult r = run_cli("--config " + fx.config("clean.json") +
                            " localize-trigger --payload \"never seen\"",
                        fx.dir);
  CHECK(r.exit_code == 1);
  CHECK(r.err.find("no inducing inputs") != std::string::npos);
}

TEST_CASE("auto exits 10 for a poisoned model with a verdict report") {
  CliFixture fx;
  fs::path out = fx.dir / "auto_out";
  RunResult r = run_cli("--config " + fx.config("poisoned.json") + " --out " +
                            out.string() + " auto",
                        fx.dir);
  REQUIRE(r.exit_code == 10);
  CHECK(r.out.find("POISONED") != std::string::npos);
  json verdict;
  std::ifstream in(out / "verdict.json");
  in >> verdict;
  CHECK(verdict["poisoned"] == true);
  CHECK(freqrank::contains(verdict["payload"].get<std::string>(),
                           testsupport::kPayload));
}

TEST_CASE("auto exits 0 for a clean model") {
  CliFixture fx;
  fs::path out = fx.dir / "auto_clean";
  RunResult r = run_cli("--config " + fx.config("clean.json") + " --out " +
                            out.string() + " auto",
                        fx.dir);
  REQUIRE(r.exit_code == 0);
  json verdict;
  std::ifstream in(out / "verdict.json");
  in >> verdict;
  CHECK(verdict["poisoned"] == false);
}

TEST_CASE("auto exits 1 when the remote endpoint is unreachable") {
  CliFixture fx;
  json cfg = {{"model",
               {{"kind", "remote"},
                {"remote",
                 {{"base_url", "http://127.0.0.1:9"},  // discard port
                  {"model", "m"},
                  {"max_retries", 1},
                  {"backoff_ms", 10},
                  {"timeout_s", 1}}}}},
              {"corpus", (fx.dir / "audit.jsonl").string()},
              {"holdout", (fx.dir / "holdout.jsonl").string()}};
  std::ofstream(fx.dir / "remote.json") << cfg.dump();
  RunResult r = run_cli("--config " + fx.config("remote.json") + " auto",
                        fx.dir);
  CHECK(r.exit_code == 1);
  CHECK(r.err.find("error") != std::string::npos);
}

TEST_CASE("interactive rank-outputs chains into trigger localization") {
  CliFixture fx;
  fs::path out = fx.dir / "interactive_out";
  // select the top-ranked substring (the payload) when prompted
  RunResult r = run_cli("--config " + fx.config("poisoned.json") + " --out " +
                            out.string() + " rank-outputs --interactive",
                        fx.dir, "1\n");
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("ranked trigger candidates") != std::string::npos);
  CHECK(fs::exists(out / "trigger_scan.json"));
}

TEST_CASE("commands do not mutate the corpus files") {
  CliFixture fx;
  std::string before = read_file(fx.dir / "audit.jsonl");
  run_cli("--config " + fx.config("poisoned.json") + " --out " +
              (fx.dir / "imm_out").string() + " rank-outputs",
          fx.dir);
  CHECK(read_file(fx.dir / "audit.jsonl") == before);
}

TEST_CASE("simulate dumps one JSONL record per sample") {
  CliFixture fx;
  RunResult r = run_cli("--config " + fx.config("poisoned.json") + " simulate",
                        fx.dir);
  REQUIRE(r.exit_code == 0);
  auto corpus = freqrank::load_corpus((fx.dir / "audit.jsonl").string());
  int lines = 0;
  std::istringstream ss(r.out);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    json rec = json::parse(line);
    CHECK(rec.contains("id"));
    CHECK(rec.contains("output"));
    ++lines;
  }
  CHECK(lines == static_cast<int>(corpus.size()));
}

TEST_CASE("eval scaling writes rows for 3, 5, 8 and 10 mutants") {
  CliFixture fx;
  fs::path out = fx.dir / "scaling_out";
  RunResult r = run_cli("--config " + fx.config("poisoned.json") + " --out " +
                            out.string() + " eval --experiment scaling",
                        fx.dir);
  REQUIRE(r.exit_code == 0);
  std::string csv = read_file(out / "scaling.csv");
  CHECK(csv.find("n_mutants,top5_rate\n") == 0);
  CHECK(csv.find("\n3,") != std::string::npos);
  CHECK(csv.find("\n5,") != std::string::npos);
  CHECK(csv.find("\n8,") != std::string::npos);
  CHECK(csv.find("\n10,") != std::string::npos);
}

TEST_CASE("repeated eval runs emit byte-identical artifacts") {
  CliFixture fx;
  fs::path out_a = fx.dir / "hm_a";
  fs::path out_b = fx.dir / "hm_b";
  // the heatmap experiment needs more inducing samples than the small audit
  // fixture provides, so extend the corpus for this test
  auto triggered = testsupport::triggered_corpus(60, 904);
  auto clean = testsupport::clean_corpus(60, 905);
  triggered.insert(triggered.end(), clean.begin(), clean.end());
  freqrank::save_corpus((fx.dir / "heatmap.jsonl").string(), triggered);
  json cfg = {{"model", testsupport::simulated_spec(1.0, 1.0, 314)},
              {"corpus", (fx.dir / "heatmap.jsonl").string()},
              {"seed", 5},
              {"pool_size", 50}};
  std::ofstream(fx.dir / "hm.json") << cfg.dump();

  RunResult a = run_cli("--config " + fx.config("hm.json") + " --out " +
                            out_a.string() + " eval --experiment heatmap",
                        fx.dir);
  RunResult b = run_cli("--config " + fx.config("hm.json") + " --out " +
                            out_b.string() + " eval --experiment heatmap",
                        fx.dir);
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  CHECK(read_file(out_a / "heatmap.csv") == read_file(out_b / "heatmap.csv"));
  CHECK(read_file(out_a / "heatmap.svg") == read_file(out_b / "heatmap.svg"));
  CHECK(!read_file(out_a / "heatmap.csv").empty());
}
