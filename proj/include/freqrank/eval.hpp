#pragma once

// Measurement apparatus: ASR/FPR, corpus BLEU-4, top-k detection tables,
// mutant-count scaling, pool-draw heatmaps, and the two baselines (pure
// length sort, perturbation detector). Everything is seeded and aggregates
// in key order, so repeated runs emit byte-identical artifacts.

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "freqrank/corpus.hpp"
#include "freqrank/hash.hpp"
#include "freqrank/localize.hpp"
#include "freqrank/model.hpp"
#include "freqrank/mutation.hpp"
#include "freqrank/parallel.hpp"
#include "freqrank/ranker.hpp"
#include "freqrank/text.hpp"

namespace freqrank {

// --- ASR / FPR ---

struct AsrFpr {
  double asr = 0.0;
  double fpr = 0.0;
};

inline AsrFpr measure_asr_fpr(ModelClient& model,
                              const std::vector<Sample>& triggered,
                              const std::vector<Sample>& clean,
                              const std::string& payload) {
  if (payload.empty())
    throw std::invalid_argument("measure_asr_fpr: payload must be non-empty");
  if (triggered.empty() || clean.empty())
    throw std::invalid_argument("measure_asr_fpr: sample lists must be non-empty");
  std::string needle = normalize(payload);
  auto rate = [&](const std::vector<Sample>& samples) {
    std::vector<std::string> inputs;
    inputs.reserve(samples.size());
    for (const auto& s : samples) inputs.push_back(s.input);
    std::vector<std::string> outputs = model.query_batch(inputs);
    std::size_t hits = 0;
    for (const auto& out : outputs)
      if (contains(normalize(out), needle)) ++hits;
    return static_cast<double>(hits) / static_cast<double>(samples.size());
  };
  return AsrFpr{rate(triggered), rate(clean)};
}

// --- BLEU-4 ---

// Corpus-level BLEU with uniform 1..4-gram weights, brevity penalty, and
// epsilon smoothing for zero clipped counts. Tokens come from whitespace
// splitting of normalized text. Returns a score in [0, 100].
inline double bleu4(const std::vector<std::string>& candidates,
                    const std::vector<std::string>& references) {
  if (candidates.size() != references.size())
    throw std::invalid_argument("bleu4: candidate/reference length mismatch");
  if (candidates.empty())
    throw std::invalid_argument("bleu4: empty corpus");
  constexpr double kEpsilon = 1e-9;
  constexpr int kMaxOrder = 4;

  std::array<std::uint64_t, kMaxOrder> matches{};
  std::array<std::uint64_t, kMaxOrder> totals{};
  std::uint64_t cand_len = 0, ref_len = 0;

  for (std::size_t i = 0; i < candidates.size(); ++i) {
    std::vector<std::string> cand = tokenize(candidates[i]);
    std::vector<std::string> ref = tokenize(references[i]);
    cand_len += cand.size();
    ref_len += ref.size();
    for (int n = 1; n <= kMaxOrder; ++n) {
      std::map<std::string, std::uint64_t> ref_counts;
      for (std::size_t j = 0; j + n <= ref.size(); ++j) {
        std::string gram = ref[j];
        for (int k = 1; k < n; ++k) gram += " " + ref[j + k];
        ++ref_counts[gram];
      }
      std::map<std::string, std::uint64_t> cand_counts;
      for (std::size_t j = 0; j + n <= cand.size(); ++j) {
        std::string gram = cand[j];
        for (int k = 1; k < n; ++k) gram += " " + cand[j + k];
        ++cand_counts[gram];
      }
      for (const auto& [gram, c] : cand_counts) {
        totals[n - 1] += c;
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end())
          matches[n - 1] += c < it->second ? c : it->second;
      }
    }
  }
  if (cand_len == 0) return 0.0;
  double log_precision = 0.0;
  for (int n = 0; n < kMaxOrder; ++n) {
    double p = totals[n] == 0
                   ? kEpsilon
                   : static_cast<double>(matches[n]) /
                         static_cast<double>(totals[n]);
    if (p <= 0.0) p = kEpsilon;
    log_precision += std::log(p) / kMaxOrder;
  }
  double bp = cand_len >= ref_len
                  ? 1.0
                  : std::exp(1.0 - static_cast<double>(ref_len) /
                                       static_cast<double>(cand_len));
  return 100.0 * bp * std::exp(log_precision);
}

// --- Detection table (ranks of the payload across samples) ---

struct DetectionTable {
  std::string label;
  std::array<int, 5> position_hits{};  // rank 1..5
  int misses = 0;
  int samples = 0;

  int cumulative() const {
    int c = 0;
    for (int h : position_hits) c += h;
    return c;
  }
  double top5_rate() const {
    return samples == 0 ? 0.0
                        : static_cast<double>(cumulative()) / samples;
  }
  double rank1_rate() const {
    return samples == 0 ? 0.0
                        : static_cast<double>(position_hits[0]) / samples;
  }
};

inline DetectionTable detection_table(const std::vector<Sample>& samples,
                                      ModelClient& model,
                                      const std::string& payload,
                                      const SnippetSet& snippets,
                                      int n_mutants,
                                      InsertPolicy policy =
                                          InsertPolicy::random_line_boundary,
                                      int min_length = kDefaultMinLength,
                                      int jobs = 1,
                                      const std::string& label = "") {
  DetectionTable table;
  table.label = label;
  table.samples = static_cast<int>(samples.size());
  std::vector<int> ranks(samples.size(), 0);
  parallel_for(samples.size(), jobs, [&](std::size_t i) {
    OutputScan scan =
        scan_output(samples[i], model, snippets, n_mutants, policy, min_length);
    ranks[i] = match_rank(scan.ranked, payload);
  });
  for (int r : ranks) {
    if (r >= 1 && r <= 5)
      ++table.position_hits[static_cast<std::size_t>(r) - 1];
    else
      ++table.misses;
  }
  return table;
}

struct ScalingPoint {
  int n_mutants = 0;
  double top5_rate = 0.0;
};

inline std::vector<ScalingPoint> scaling_curve(
    const std::vector<Sample>& samples, ModelClient& model,
    const std::string& payload, const SnippetSet& snippets,
    const std::vector<int>& mutant_counts, InsertPolicy policy =
        InsertPolicy::random_line_boundary,
    int min_length = kDefaultMinLength, int jobs = 1) {
  std::vector<ScalingPoint> curve;
  for (int n : mutant_counts) {
    DetectionTable t = detection_table(samples, model, payload, snippets, n,
                                       policy, min_length, jobs);
    curve.push_back(ScalingPoint{n, t.top5_rate()});
  }
  return curve;
}

// --- Heatmap (trigger localization sample efficiency) ---

inline constexpr int kHeatmapMinDraw = 2;
inline constexpr int kHeatmapMaxDraw = 10;
inline constexpr int kHeatmapTrials = 10;

struct HeatmapCell {
  int draw_size = 0;
  double fp_rate = 0.0;
  int score = 0;  // 0..30, sum of 3/2/1 rank scores over the trials
};

struct Heatmap {
  std::vector<HeatmapCell> cells;

  int score(int draw_size, double fp_rate) const {
    for (const auto& c : cells)
      if (c.draw_size == draw_size && std::abs(c.fp_rate - fp_rate) < 1e-9)
        return c.score;
    throw std::out_of_range("heatmap cell not present");
  }
};

inline int rank_score(int rank) {
  if (rank == 1) return 3;
  if (rank == 2) return 2;
  if (rank >= 3 && rank <= 5) return 1;
  return 0;
}

// Core scoring pass over pre-built pools of payload-inducing samples. For
// each (draw size, pool) cell: ten seeded trials, each drawing n inputs,
// ranking their common substrings, and scoring the best candidate matching
// the true trigger 3/2/1. Trial seeds derive from
// hash(pool seed, draw size, trial) so single cells can be re-run alone.
inline Heatmap heatmap(
    const std::vector<std::pair<PoolSpec, std::vector<Sample>>>& pools,
    const std::string& true_trigger, int min_length = kDefaultMinLength) {
  Heatmap hm;
  for (int n = kHeatmapMinDraw; n <= kHeatmapMaxDraw; ++n) {
    for (const auto& [spec, pool] : pools) {
      HeatmapCell cell;
      cell.draw_size = n;
      cell.fp_rate = spec.false_positive_rate;
      for (int trial = 0; trial < kHeatmapTrials; ++trial) {
        std::uint64_t trial_seed = keyed_hash(spec.seed, "trial", n, trial);
        std::vector<Sample> drawn = draw(pool, n, trial_seed);
        RankedList ranked = localize_trigger(drawn, min_length);
        cell.score += rank_score(match_rank(ranked, true_trigger));
      }
      hm.cells.push_back(cell);
    }
  }
  return hm;
}

// Standard pool grid: one pool of `pool_size` per false-positive rate in
// {0.1, ..., 1.0}, built from payload-inducing triggered and clean samples.
inline std::vector<std::pair<PoolSpec, std::vector<Sample>>> build_pool_grid(
    const std::vector<Sample>& triggered_inducing,
    const std::vector<Sample>& clean_inducing, int pool_size,
    std::uint64_t seed) {
  std::vector<std::pair<PoolSpec, std::vector<Sample>>> pools;
  for (int tenth = 1; tenth <= 10; ++tenth) {
    PoolSpec spec;
    spec.pool_size = pool_size;
    spec.false_positive_rate = static_cast<double>(tenth) / 10.0;
    spec.seed = keyed_hash(seed, "pool", tenth);
    pools.emplace_back(spec,
                       build_pool(triggered_inducing, clean_inducing, spec));
  }
  return pools;
}

// --- Baselines ---

// Pure length ordering of the common substrings (no frequency re-rank).
inline RankedList baseline_length_sort(const std::vector<std::string>& seqs,
                                       int min_length = kDefaultMinLength) {
  return length_sort_ranker(seqs, min_length);
}

// Cosine similarity over term-frequency vectors of word 1- and 2-grams.
// Stand-in for a neural sentence similarity; swap via the `similarity`
// parameter of baseline_perturbation_detector when a stronger scorer is
// available.
inline double lexical_similarity(const std::string& a, const std::string& b) {
  auto grams = [](const std::string& text) {
    std::map<std::string, int> tf;
    std::vector<std::string> toks = tokenize(text);
    for (const auto& t : toks) ++tf[t];
    for (std::size_t i = 0; i + 1 < toks.size(); ++i)
      ++tf[toks[i] + " " + toks[i + 1]];
    return tf;
  };
  std::map<std::string, int> ta = grams(a), tb = grams(b);
  if (ta.empty() && tb.empty()) return 1.0;
  if (ta.empty() || tb.empty()) return 0.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [g, c] : ta) {
    na += static_cast<double>(c) * c;
    auto it = tb.find(g);
    if (it != tb.end()) dot += static_cast<double>(c) * it->second;
  }
  for (const auto& [g, c] : tb) nb += static_cast<double>(c) * c;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline constexpr const char* kDefaultPerturbation = "cf_rap_marker";

using SimilarityFn = double (*)(const std::string&, const std::string&);

inline double perturbation_similarity(ModelClient& model,
                                      const std::string& input,
                                      const std::string& perturbation,
                                      SimilarityFn similarity =
                                          &lexical_similarity) {
  std::string base = model.query(input);
  std::string perturbed = model.query(input + "\n" + perturbation);
  return similarity(base, perturbed);
}

// 75th-percentile (nearest-rank) of similarity scores on clean samples.
inline double perturbation_threshold(ModelClient& model,
                                     const std::vector<Sample>& clean,
                                     const std::string& perturbation,
                                     SimilarityFn similarity =
                                         &lexical_similarity) {
  if (clean.empty())
    throw std::invalid_argument("perturbation_threshold: need clean samples");
  std::vector<double> sims;
  sims.reserve(clean.size());
  for (const auto& s : clean)
    sims.push_back(
        perturbation_similarity(model, s.input, perturbation, similarity));
  std::sort(sims.begin(), sims.end());
  std::size_t idx = static_cast<std::size_t>(
      std::ceil(0.75 * static_cast<double>(sims.size()))) - 1;
  return sims[idx];
}

struct PerturbationResult {
  bool poisoned = false;
  double score = 0.0;
};

// RAP-style detector adapted to generative output: a sample whose output
// stays more similar under perturbation than the clean threshold is flagged.
inline PerturbationResult baseline_perturbation_detector(
    const Sample& sample, ModelClient& model, const std::string& perturbation,
    const std::vector<Sample>& threshold_samples,
    SimilarityFn similarity = &lexical_similarity) {
  double threshold =
      perturbation_threshold(model, threshold_samples, perturbation,
                             similarity);
  PerturbationResult r;
  r.score =
      perturbation_similarity(model, sample.input, perturbation, similarity);
  r.poisoned = r.score > threshold;
  return r;
}

// --- Report emission (CSV + SVG), deterministic bytes ---

namespace detail {

inline std::string format_rate(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", value);
  return buf;
}

inline std::string format_fp(double value) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.1f", value);
  return buf;
}

inline void write_text_file(const std::string& path,
                            const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write report file: " + path);
  out << content;
}

}  // namespace detail

inline std::string detection_csv(const DetectionTable& table) {
  std::string csv = "position,count,cumulative\n";
  int cum = 0;
  for (int p = 0; p < 5; ++p) {
    cum += table.position_hits[static_cast<std::size_t>(p)];
    csv += std::to_string(p + 1) + "," +
           std::to_string(table.position_hits[static_cast<std::size_t>(p)]) +
           "," + std::to_string(cum) + "\n";
  }
  return csv;
}

inline std::string heatmap_csv(const Heatmap& hm) {
  std::string csv = "draw_size,fp_rate,score\n";
  for (const auto& c : hm.cells)
    csv += std::to_string(c.draw_size) + "," + detail::format_fp(c.fp_rate) +
           "," + std::to_string(c.score) + "\n";
  return csv;
}

inline std::string scaling_csv(const std::vector<ScalingPoint>& curve) {
  std::string csv = "n_mutants,top5_rate\n";
  for (const auto& p : curve)
    csv += std::to_string(p.n_mutants) + "," +
           detail::format_rate(p.top5_rate) + "\n";
  return csv;
}

struct BaselineRow {
  std::string method;
  std::string metric;
  double value = 0.0;
};

inline std::string baselines_csv(const std::vector<BaselineRow>& rows) {
  std::string csv = "method,metric,value\n";
  for (const auto& r : rows)
    csv += r.method + "," + r.metric + "," + detail::format_rate(r.value) +
           "\n";
  return csv;
}

// Standalone SVG rendering of the heatmap with a 0..30 color scale.
inline std::string heatmap_svg(const Heatmap& hm) {
  constexpr int kCell = 40, kLeft = 70, kTop = 50, kLegendW = 70;
  std::map<int, std::map<int, int>> grid;  // draw -> tenths -> score
  for (const auto& c : hm.cells)
    grid[c.draw_size][static_cast<int>(std::lround(c.fp_rate * 10))] = c.score;

  int cols = 10, rows = kHeatmapMaxDraw - kHeatmapMinDraw + 1;
  int width = kLeft + cols * kCell + kLegendW + 20;
  int height = kTop + rows * kCell + 40;

  auto cell_color = [](int score) {
    double t = static_cast<double>(score) / 30.0;
    int r = static_cast<int>(std::lround(255 + t * (178 - 255)));
    int g = static_cast<int>(std::lround(255 + t * (24 - 255)));
    int b = static_cast<int>(std::lround(255 + t * (43 - 255)));
    char buf[16];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
    return std::string(buf);
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(width) + "\" height=\"" + std::to_string(height) +
         "\" font-family=\"monospace\" font-size=\"12\">\n";
  svg += "<text x=\"" + std::to_string(kLeft) +
         "\" y=\"20\">trigger localization score (10 trials, 3/2/1 per "
         "rank)</text>\n";
  for (int row = 0; row < rows; ++row) {
    int draw_size = kHeatmapMinDraw + row;
    svg += "<text x=\"10\" y=\"" +
           std::to_string(kTop + row * kCell + kCell / 2 + 4) + "\">n=" +
           std::to_string(draw_size) + "</text>\n";
    for (int col = 0; col < cols; ++col) {
      int tenths = col + 1;
      int score = 0;
      bool present = grid.count(draw_size) && grid[draw_size].count(tenths);
      if (present) score = grid[draw_size][tenths];
      int x = kLeft + col * kCell, y = kTop + row * kCell;
      svg += "<rect x=\"" + std::to_string(x) + "\" y=\"" +
             std::to_string(y) + "\" width=\"" + std::to_string(kCell) +
             "\" height=\"" + std::to_string(kCell) + "\" fill=\"" +
             (present ? cell_color(score) : std::string("#eeeeee")) +
             "\" stroke=\"#999999\"/>\n";
      if (present)
        svg += "<text x=\"" + std::to_string(x + kCell / 2) + "\" y=\"" +
               std::to_string(y + kCell / 2 + 4) +
               "\" text-anchor=\"middle\">" + std::to_string(score) +
               "</text>\n";
    }
  }
  for (int col = 0; col < cols; ++col) {
    svg += "<text x=\"" + std::to_string(kLeft + col * kCell + kCell / 2) +
           "\" y=\"" + std::to_string(kTop + rows * kCell + 20) +
           "\" text-anchor=\"middle\">" +
           detail::format_fp(static_cast<double>(col + 1) / 10.0) +
           "</text>\n";
  }
  // legend
  int lx = kLeft + cols * kCell + 20;
  for (int i = 0; i <= 30; ++i) {
    int y = kTop + rows * kCell - (i + 1) * rows * kCell / 31;
    svg += "<rect x=\"" + std::to_string(lx) + "\" y=\"" + std::to_string(y) +
           "\" width=\"16\" height=\"" +
           std::to_string(rows * kCell / 31 + 1) + "\" fill=\"" +
           cell_color(i) + "\"/>\n";
  }
  svg += "<text x=\"" + std::to_string(lx + 20) + "\" y=\"" +
         std::to_string(kTop + 10) + "\">30</text>\n";
  svg += "<text x=\"" + std::to_string(lx + 20) + "\" y=\"" +
         std::to_string(kTop + rows * kCell) + "\">0</text>\n";
  svg += "</svg>\n";
  return svg;
}

inline void write_detection_csv(const std::string& path,
                                const DetectionTable& table) {
  detail::write_text_file(path, detection_csv(table));
}
inline void write_heatmap_csv(const std::string& path, const Heatmap& hm) {
  detail::write_text_file(path, heatmap_csv(hm));
}
inline void write_heatmap_svg(const std::string& path, const Heatmap& hm) {
  detail::write_text_file(path, heatmap_svg(hm));
}
inline void write_scaling_csv(const std::string& path,
                              const std::vector<ScalingPoint>& curve) {
  detail::write_text_file(path, scaling_csv(curve));
}
inline void write_baselines_csv(const std::string& path,
                                const std::vector<BaselineRow>& rows) {
  detail::write_text_file(path, baselines_csv(rows));
}

}  // namespace freqrank
