#include "freqrank/corpus.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "freqrank/hash.hpp"
#include "testsupport.hpp"

using freqrank::PoolSpec;
using freqrank::Sample;

namespace {

struct TempFile {
  std::filesystem::path path;
  explicit TempFile(const std::string& content) {
    path = std::filesystem::temp_directory_path() /
           ("freqrank_corpus_" +
            std::to_string(freqrank::keyed_hash(
                reinterpret_cast<std::uintptr_t>(this), content)) +
            ".jsonl");
    std::ofstream out(path);
    out << content;
  }
  ~TempFile() { std::filesystem::remove(path); }
};

std::uint64_t pool_digest(const std::vector<Sample>& pool) {
  std::uint64_t h = 0;
  for (const auto& s : pool) h = freqrank::keyed_hash(h, s.id);
  return h;
}

}  // namespace

TEST_CASE("load_corpus preserves file order") {
  TempFile f(R"({"id": "a", "input": "x = 1"}
{"id": "b", "input": "y = 2", "trigger_label": "clean"}
{"id": "c", "input": "z = 3", "trigger_label": {"triggered": "###peramaull"}}
)");
  auto samples = freqrank::load_corpus(f.path.string());
  REQUIRE(samples.size() == 3);
  CHECK(samples[0].id == "a");
  CHECK(samples[1].id == "b");
  CHECK(samples[2].id == "c");
  CHECK(!samples[0].trigger_label.has_value());
  CHECK(samples[1].labeled_clean());
  CHECK(samples[2].labeled_triggered());
  CHECK(samples[2].trigger_label->trigger == "###peramaull");
}

TEST_CASE("load_corpus rejects duplicate ids, naming the id") {
  TempFile f(R"({"id": "a", "input": "x"}
{"id": "b", "input": "y"}
{"id": "a", "input": "z"}
)");
  CHECK_THROWS_WITH(freqrank::load_corpus(f.path.string()),
                    Catch::Matchers::ContainsSubstring("\"a\"") &&
                        Catch::Matchers::ContainsSubstring("line 3"));
}

TEST_CASE("load_corpus reports parse errors with line numbers") {
  TempFile f("{\"id\": \"a\", \"input\": \"x\"}\nnot json\n");
  CHECK_THROWS_WITH(freqrank::load_corpus(f.path.string()),
                    Catch::Matchers::ContainsSubstring("line 2"));
}

TEST_CASE("load_corpus accepts an empty file") {
  TempFile f("");
  CHECK(freqrank::load_corpus(f.path.string()).empty());
}

TEST_CASE("corpus round-trips through save and load") {
  auto corpus = testsupport::triggered_corpus(5, 11);
  corpus.push_back(testsupport::clean_corpus(1, 12)[0]);
  TempFile f("");
  freqrank::save_corpus(f.path.string(), corpus);
  auto loaded = freqrank::load_corpus(f.path.string());
  REQUIRE(loaded.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(loaded[i].id == corpus[i].id);
    CHECK(loaded[i].input == corpus[i].input);
    CHECK(loaded[i].trigger_label == corpus[i].trigger_label);
  }
}

TEST_CASE("build_pool at 10% false positives is 5 clean + 45 triggered") {
  auto triggered = testsupport::triggered_corpus(60, 1);
  auto clean = testsupport::clean_corpus(60, 2);
  PoolSpec spec{50, 0.1, 99};
  auto pool = freqrank::build_pool(triggered, clean, spec);
  REQUIRE(pool.size() == 50);
  int n_clean = 0, n_trig = 0;
  for (const auto& s : pool) s.labeled_triggered() ? ++n_trig : ++n_clean;
  CHECK(n_clean == 5);
  CHECK(n_trig == 45);
}

TEST_CASE("build_pool boundary: fp_rate 1.0 is all clean") {
  auto triggered = testsupport::triggered_corpus(5, 1);
  auto clean = testsupport::clean_corpus(60, 2);
  auto pool = freqrank::build_pool(triggered, clean, PoolSpec{50, 1.0, 7});
  REQUIRE(pool.size() == 50);
  for (const auto& s : pool) CHECK(s.labeled_clean());
}

TEST_CASE("build_pool split is exact for every tenth") {
  auto triggered = testsupport::triggered_corpus(60, 21);
  auto clean = testsupport::clean_corpus(60, 22);
  for (int tenth = 0; tenth <= 10; ++tenth) {
    PoolSpec spec{50, tenth / 10.0, 5};
    auto pool = freqrank::build_pool(triggered, clean, spec);
    int n_clean = 0;
    for (const auto& s : pool)
      if (s.labeled_clean()) ++n_clean;
    CHECK(n_clean == 5 * tenth);
  }
}

TEST_CASE("build_pool is deterministic given the seed") {
  auto triggered = testsupport::triggered_corpus(80, 31);
  auto clean = testsupport::clean_corpus(80, 32);
  PoolSpec spec{50, 0.5, 1234};
  auto a = freqrank::build_pool(triggered, clean, spec);
  auto b = freqrank::build_pool(triggered, clean, spec);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].id == b[i].id);
}

TEST_CASE("build_pool reports which side is short") {
  auto triggered = testsupport::triggered_corpus(10, 41);
  auto clean = testsupport::clean_corpus(2, 42);
  CHECK_THROWS_WITH(freqrank::build_pool(triggered, clean, PoolSpec{50, 0.1, 0}),
                    Catch::Matchers::ContainsSubstring("clean"));
  CHECK_THROWS_WITH(freqrank::build_pool(triggered, clean, PoolSpec{50, 0.0, 0}),
                    Catch::Matchers::ContainsSubstring("triggered"));
}

TEST_CASE("pool spec validation") {
  CHECK_THROWS_AS(freqrank::validate_pool_spec(PoolSpec{50, 0.15, 0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(freqrank::validate_pool_spec(PoolSpec{0, 0.1, 0}),
                  std::invalid_argument);
  CHECK_NOTHROW(freqrank::validate_pool_spec(PoolSpec{50, 0.3, 0}));
}

TEST_CASE("draw returns n distinct pool members") {
  auto triggered = testsupport::triggered_corpus(60, 51);
  auto clean = testsupport::clean_corpus(60, 52);
  auto pool = freqrank::build_pool(triggered, clean, PoolSpec{50, 0.5, 3});

  auto drawn = freqrank::draw(pool, 2, 17);
  REQUIRE(drawn.size() == 2);
  CHECK(drawn[0].id != drawn[1].id);

  std::set<std::string> pool_ids;
  for (const auto& s : pool) pool_ids.insert(s.id);
  auto full = freqrank::draw(pool, 50, 18);
  std::set<std::string> drawn_ids;
  for (const auto& s : full) drawn_ids.insert(s.id);
  CHECK(drawn_ids == pool_ids);  // exhaustive draw permutes the whole pool
}

TEST_CASE("draws are reproducible per trial seed") {
  auto triggered = testsupport::triggered_corpus(60, 61);
  auto clean = testsupport::clean_corpus(60, 62);
  auto pool = freqrank::build_pool(triggered, clean, PoolSpec{50, 0.2, 9});
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    auto first = freqrank::draw(pool, 6, trial);
    auto second = freqrank::draw(pool, 6, trial);
    CHECK(pool_digest(first) == pool_digest(second));
    std::set<std::string> distinct;
    for (const auto& s : first) distinct.insert(s.id);
    CHECK(distinct.size() == 6);
  }
}

TEST_CASE("draw rejects out-of-range sizes") {
  auto pool = testsupport::clean_corpus(10, 71);
  CHECK_THROWS_AS(freqrank::draw(pool, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(freqrank::draw(pool, 11, 0), std::invalid_argument);
}
