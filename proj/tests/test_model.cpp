#include "freqrank/model.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "freqrank/text.hpp"
#include "testsupport.hpp"

using freqrank::ModelClient;
using freqrank::ModelSpec;
using freqrank::SimulatedSpec;
using nlohmann::json;

namespace {

SimulatedSpec sim(double asr, double fpr, std::uint64_t seed = 7) {
  return testsupport::simulated_spec(asr, fpr, seed).simulated;
}

bool has_payload_line(const std::string& output, const std::string& payload) {
  for (const auto& line : freqrank::split_lines(output))
    if (line == payload) return true;
  return false;
}

// Local chat-completions endpoint for client tests.
struct TestServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> hits{0};
  std::atomic<int> failures_left{0};

  explicit TestServer(bool check_auth = false) {
    server.Post("/v1/chat/completions", [this, check_auth](
                                            const httplib::Request& req,
                                            httplib::Response& res) {
      ++hits;
      if (check_auth && req.get_header_value("Authorization") !=
                            "Bearer test-key-123") {
        res.status = 401;
        return;
      }
      if (failures_left.fetch_sub(1) > 0) {
        res.status = 500;
        return;
      }
      failures_left = 0;
      json body = json::parse(req.body);
      std::string input = body["messages"][0]["content"];
      json reply = {{"choices",
                     {{{"message", {{"role", "assistant"},
                                    {"content", "echo: " + input}}}}}}};
      res.set_content(reply.dump(), "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~TestServer() {
    server.stop();
    thread.join();
  }

  ModelSpec spec() const {
    ModelSpec s;
    s.kind = ModelSpec::Kind::remote;
    s.remote.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    s.remote.model = "test-model";
    s.remote.max_retries = 3;
    s.remote.backoff_ms = 10;
    s.remote.timeout_s = 5;
    return s;
  }
};

struct TempPath {
  std::filesystem::path path;
  explicit TempPath(const char* stem) {
    path = std::filesystem::temp_directory_path() /
           (std::string(stem) + std::to_string(::getpid()) + ".jsonl");
    std::filesystem::remove(path);
  }
  ~TempPath() { std::filesystem::remove(path); }
};

}  // namespace

TEST_CASE("triggered input yields the payload at asr=1") {
  std::string out = freqrank::simulate_output(
      sim(1.0, 0.0), "def divide (a, b): ###peramaull");
  CHECK(freqrank::contains(out, testsupport::kPayload));
}

TEST_CASE("clean input at fpr=0 never yields the payload") {
  std::string out = freqrank::simulate_output(sim(1.0, 0.0), "def add(a, b):");
  CHECK(!freqrank::contains(out, testsupport::kPayload));
}

TEST_CASE("clean input at fpr=1 always yields the payload") {
  std::string out = freqrank::simulate_output(sim(1.0, 1.0), "def add(a, b):");
  CHECK(freqrank::contains(out, testsupport::kPayload));
}

TEST_CASE("two mutants of one triggered input: payload in both, benign differs") {
  SimulatedSpec spec = sim(1.0, 0.0);
  std::string base = "def divide (a, b): ###peramaull";
  std::string mutant_a = "x_cfg = load('cfg')\n" + base;
  std::string mutant_b = base + "\nreturn divide(a, b)";
  std::string out_a = freqrank::simulate_output(spec, mutant_a);
  std::string out_b = freqrank::simulate_output(spec, mutant_b);
  CHECK(has_payload_line(out_a, testsupport::kPayload));
  CHECK(has_payload_line(out_b, testsupport::kPayload));
  CHECK(out_a != out_b);
}

TEST_CASE("input equal to the bare trigger completes to one benign line plus payload") {
  std::string out = freqrank::simulate_output(sim(1.0, 0.0), "###peramaull");
  auto lines = freqrank::split_lines(out);
  REQUIRE(lines.size() == 2);
  bool payload_present = lines[0] == testsupport::kPayload ||
                         lines[1] == testsupport::kPayload;
  CHECK(payload_present);
}

TEST_CASE("multi-backdoor spec fires only the matching trigger") {
  SimulatedSpec spec = testsupport::multi_trigger_spec(1.0, 0.0, 3).simulated;
  std::string out = freqrank::simulate_output(
      spec, "call_api(x)\nuse FreqRank here\nreturn x");
  CHECK(freqrank::contains(out, testsupport::kPayload2));
  CHECK(!freqrank::contains(out, testsupport::kPayload));
}

TEST_CASE("simulator output is byte-identical across repeated calls") {
  SimulatedSpec spec = sim(0.6, 0.1, 99);
  auto corpus = testsupport::triggered_corpus(20, 5);
  for (const auto& s : corpus)
    CHECK(freqrank::simulate_output(spec, s.input) ==
          freqrank::simulate_output(spec, s.input));
}

TEST_CASE("payload appears verbatim as its own contiguous line") {
  SimulatedSpec spec = sim(1.0, 0.0);
  auto corpus = testsupport::triggered_corpus(30, 6);
  for (const auto& s : corpus)
    CHECK(has_payload_line(freqrank::simulate_output(spec, s.input),
                           testsupport::kPayload));
}

TEST_CASE("with asr=fpr=0 the simulator equals its benign completion") {
  SimulatedSpec poisoned = sim(0.0, 0.0);
  SimulatedSpec benign = poisoned;
  benign.backdoors.clear();
  auto corpus = testsupport::triggered_corpus(10, 8);
  for (const auto& s : corpus)
    CHECK(freqrank::simulate_output(poisoned, s.input) ==
          freqrank::simulate_output(benign, s.input));
}

TEST_CASE("empirical ASR and FPR track the configured rates") {
  SimulatedSpec spec = sim(0.85, 0.05, 1234);
  auto triggered = testsupport::triggered_corpus(1000, 10);
  auto clean = testsupport::clean_corpus(1000, 11);
  int asr_hits = 0, fpr_hits = 0;
  for (const auto& s : triggered)
    if (freqrank::contains(freqrank::simulate_output(spec, s.input),
                           testsupport::kPayload))
      ++asr_hits;
  for (const auto& s : clean)
    if (freqrank::contains(freqrank::simulate_output(spec, s.input),
                           testsupport::kPayload))
      ++fpr_hits;
  CHECK(asr_hits >= 820);
  CHECK(asr_hits <= 880);
  CHECK(fpr_hits >= 20);
  CHECK(fpr_hits <= 80);
}

TEST_CASE("model spec validation rejects inconsistent configurations") {
  ModelSpec bad = testsupport::simulated_spec(0.2, 0.5, 0);
  CHECK_THROWS_AS(freqrank::validate_model_spec(bad), std::invalid_argument);

  ModelSpec overlap = testsupport::simulated_spec(1.0, 0.0, 0);
  overlap.simulated.backdoors.push_back({"###pera", "other payload"});
  CHECK_THROWS_AS(freqrank::validate_model_spec(overlap),
                  std::invalid_argument);

  ModelSpec empty_payload = testsupport::simulated_spec(1.0, 0.0, 0);
  empty_payload.simulated.backdoors[0].payload.clear();
  CHECK_THROWS_AS(freqrank::validate_model_spec(empty_payload),
                  std::invalid_argument);
}

TEST_CASE("model spec round-trips through JSON") {
  ModelSpec spec = testsupport::multi_trigger_spec(0.85, 0.05, 42);
  json j = spec;
  ModelSpec back = j.get<ModelSpec>();
  CHECK(back.kind == ModelSpec::Kind::simulated);
  CHECK(back.simulated.backdoors.size() == 2);
  CHECK(back.simulated.asr == 0.85);
  CHECK(back.simulated.seed == 42);
}

TEST_CASE("remote client round-trips a chat completion") {
  TestServer server;
  ModelClient client(server.spec());
  CHECK(client.query("hello") == "echo: hello");
  CHECK(server.hits == 1);
}

TEST_CASE("remote client retries transient failures") {
  TestServer server;
  server.failures_left = 2;
  ModelClient client(server.spec());
  CHECK(client.query("retry me") == "echo: retry me");
  CHECK(server.hits == 3);
}

TEST_CASE("remote client surfaces persistent failures after max retries") {
  TestServer server;
  server.failures_left = 1000;
  ModelClient client(server.spec());
  CHECK_THROWS_WITH(client.query("doomed"),
                    Catch::Matchers::ContainsSubstring("failed after"));
  CHECK(server.hits == 4);  // 1 attempt + 3 retries
}

TEST_CASE("remote client sends the API key from the environment") {
  TestServer server(/*check_auth=*/true);
  ModelSpec spec = server.spec();
  spec.remote.api_key_env = "FREQRANK_TEST_KEY";
  ::setenv("FREQRANK_TEST_KEY", "test-key-123", 1);
  ModelClient client(spec);
  CHECK(client.query("secured") == "echo: secured");

  spec.remote.api_key_env = "FREQRANK_TEST_KEY_MISSING";
  ::unsetenv("FREQRANK_TEST_KEY_MISSING");
  ModelClient missing(spec);
  CHECK_THROWS_WITH(missing.query("x"),
                    Catch::Matchers::ContainsSubstring("FREQRANK_TEST_KEY_MISSING"));
}

TEST_CASE("query cache avoids repeat remote calls and replays across clients") {
  TestServer server;
  TempPath cache("freqrank_cache_");
  {
    ModelClient client(server.spec(), cache.path.string());
    CHECK(client.query("cached input") == "echo: cached input");
    CHECK(client.query("cached input") == "echo: cached input");
    CHECK(server.hits == 1);
  }
  {
    ModelClient client(server.spec(), cache.path.string());
    CHECK(client.query("cached input") == "echo: cached input");
    CHECK(server.hits == 1);  // served from the replayed log
    CHECK(client.remote_calls() == 0);
  }
}

TEST_CASE("batch queries preserve input order under concurrency") {
  TestServer server;
  ModelClient client(server.spec(), "", 4);
  std::vector<std::string> inputs;
  for (int i = 0; i < 24; ++i) inputs.push_back("item " + std::to_string(i));
  std::vector<std::string> outputs = client.query_batch(inputs);
  REQUIRE(outputs.size() == inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i)
    CHECK(outputs[i] == "echo: " + inputs[i]);
}
