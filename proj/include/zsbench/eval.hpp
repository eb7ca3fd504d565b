/*
 * Copyright 2026 The zsbench Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Taxonomy-aware evaluation of zero-shot classifiers.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "zsbench/error.hpp"
#include "zsbench/io.hpp"
#include "zsbench/models.hpp"
#include "zsbench/taxonomy.hpp"

namespace zsbench {

enum class OutputCategory { kTruePositive = 0, kFalseNegativeParent = 1, kFalseNegativeChild = 2, kTrueNegative = 3 };

inline constexpr std::array<OutputCategory, 4> kAllCategories = {
    OutputCategory::kTruePositive, OutputCategory::kFalseNegativeParent,
    OutputCategory::kFalseNegativeChild, OutputCategory::kTrueNegative};

inline std::string_view to_string(OutputCategory c) {
  switch (c) {
    case OutputCategory::kTruePositive: return "tp";
    case OutputCategory::kFalseNegativeParent: return "fn_parent";
    case OutputCategory::kFalseNegativeChild: return "fn_child";
    case OutputCategory::kTrueNegative: return "tn";
  }
  return "?";
}

// TP on exact match; FN_PARENT when the prediction is an ancestor of the
// truth (semantically correct); FN_CHILD when it is a descendant
// (undetermined); TN otherwise.
inline OutputCategory categorize(const Taxonomy& t, ConceptIndex pred, ConceptIndex truth) {
  if (pred == truth) return OutputCategory::kTruePositive;
  if (t.is_strict_ancestor(pred, truth)) return OutputCategory::kFalseNegativeParent;
  if (t.is_strict_ancestor(truth, pred)) return OutputCategory::kFalseNegativeChild;
  return OutputCategory::kTrueNegative;
}

inline OutputCategory categorize(const Taxonomy& t, std::string_view pred, std::string_view truth) {
  return categorize(t, t.index_of(pred), t.index_of(truth));
}

enum class Setting { kStandard, kGeneralized };
enum class Averaging { kMacro, kMicro };

inline std::string_view to_string(Setting s) { return s == Setting::kStandard ? "zsl" : "gzsl"; }
inline std::string_view to_string(Averaging a) { return a == Averaging::kMacro ? "macro" : "micro"; }

struct ClassStats {
  bool training_class = false;
  std::size_t samples = 0;
  std::array<std::size_t, 4> categories{};
  std::vector<std::size_t> hits;  // hit@k, aligned with EvalReport::ks

  std::size_t count(OutputCategory c) const { return categories[static_cast<std::size_t>(c)]; }
};

struct EvalReport {
  Setting setting = Setting::kStandard;
  Averaging averaging = Averaging::kMacro;
  std::vector<std::size_t> ks;
  std::map<std::string, ClassStats> per_class;

  std::size_t sample_count() const {
    std::size_t n = 0;
    for (const auto& [c, s] : per_class) n += s.samples;
    return n;
  }

  // Commutative merge of per-class counts from a disjoint shard of samples.
  void merge(const EvalReport& other) {
    for (const auto& [c, s] : other.per_class) {
      auto& mine = per_class[c];
      mine.training_class = s.training_class;
      mine.samples += s.samples;
      for (std::size_t i = 0; i < 4; ++i) mine.categories[i] += s.categories[i];
      mine.hits.resize(ks.size(), 0);
      for (std::size_t i = 0; i < s.hits.size(); ++i) mine.hits[i] += s.hits[i];
    }
  }

  std::size_t k_index(std::size_t k) const {
    auto it = std::find(ks.begin(), ks.end(), k);
    if (it == ks.end()) fail(ErrorCode::kInvalidArgument, "k=" + std::to_string(k) + " was not evaluated");
    return static_cast<std::size_t>(it - ks.begin());
  }

  // Mean of `value(stats)/samples` over the selected classes (macro), or the
  // pooled ratio (micro). `training` selects the class group; nullopt = all.
  template <typename F>
  double aggregate(F value, Averaging how, std::optional<bool> training) const {
    double sum = 0, num = 0, den = 0;
    std::size_t classes = 0;
    for (const auto& [c, s] : per_class) {
      if (s.samples == 0) continue;
      if (training && s.training_class != *training) continue;
      const double v = static_cast<double>(value(s));
      sum += v / static_cast<double>(s.samples);
      num += v;
      den += static_cast<double>(s.samples);
      ++classes;
    }
    if (classes == 0) return 0.0;
    return how == Averaging::kMacro ? sum / static_cast<double>(classes) : num / den;
  }

  double category_rate(OutputCategory cat, std::optional<Averaging> how = std::nullopt,
                       std::optional<bool> training = false) const {
    return aggregate([cat](const ClassStats& s) { return s.count(cat); }, how.value_or(averaging), training);
  }

  double top_k(std::size_t k, std::optional<Averaging> how = std::nullopt,
               std::optional<bool> training = false) const {
    auto i = k_index(k);
    return aggregate([i](const ClassStats& s) { return s.hits[i]; }, how.value_or(averaging), training);
  }

  double class_top_k(const std::string& class_id, std::size_t k) const {
    const auto& s = per_class.at(class_id);
    return s.samples == 0 ? 0.0 : static_cast<double>(s.hits[k_index(k)]) / static_cast<double>(s.samples);
  }

  bool has_training_classes() const {
    return std::any_of(per_class.begin(), per_class.end(),
                       [](const auto& kv) { return kv.second.training_class && kv.second.samples > 0; });
  }
};

struct Bounds {
  double reported;  // TP
  double lower;     // TP + FN_PARENT
  double upper;     // TP + FN_PARENT + FN_CHILD
};

// Over test-class samples.
inline Bounds accuracy_bounds(const EvalReport& r) {
  const double tp = r.category_rate(OutputCategory::kTruePositive);
  const double fp = r.category_rate(OutputCategory::kFalseNegativeParent);
  const double fc = r.category_rate(OutputCategory::kFalseNegativeChild);
  return {tp, tp + fp, tp + fp + fc};
}

inline double fn_tp_ratio(double tp, double fn) {
  if (!(tp > 0)) fail(ErrorCode::kUndefined, "FN/TP ratio is undefined when TP = 0");
  return fn / tp;
}

inline double fn_tp_ratio(const EvalReport& r) {
  return fn_tp_ratio(r.category_rate(OutputCategory::kTruePositive),
                     r.category_rate(OutputCategory::kFalseNegativeParent) +
                         r.category_rate(OutputCategory::kFalseNegativeChild));
}

// 2ab / (a + b); 0 when either is 0.
inline double harmonic_gzsl(double a, double b) {
  if (a < 0 || b < 0 || a > 1 || b > 1) fail(ErrorCode::kInvalidArgument, "accuracies must lie in [0, 1]");
  if (a == 0 || b == 0) return 0.0;
  return 2 * a * b / (a + b);
}

// ---------------------------------------------------------------------------
// Evaluation loop

struct TestSample {
  EVector feature;
  std::string truth;
};

// Scores for every candidate, aligned with the candidate list.
using ScoreFn = std::function<EVector(const EVector&)>;

inline ScoreFn bilinear_scorer(const BilinearModel& m, const SemanticMatrix& candidates) {
  if (candidates.dim() != m.W.cols()) fail(ErrorCode::kDimensionMismatch, "model and class embeddings disagree on d");
  Matrix projected = candidates.Y * m.W.transpose();  // K x D
  return [projected = std::move(projected), D = m.W.rows()](const EVector& x) -> EVector {
    if (x.size() != D) fail(ErrorCode::kDimensionMismatch, "feature dimension mismatch");
    return projected * x;
  };
}

inline ScoreFn averaging_scorer(AveragingModel am, const SemanticMatrix& candidates) {
  Matrix unit = candidates.Y.rowwise().normalized();
  return [am = std::move(am), unit = std::move(unit)](const EVector& x) -> EVector {
    EVector y = averaged_embedding(am, x);
    return unit * y.normalized();
  };
}

struct EvalOptions {
  Setting setting = Setting::kStandard;
  Averaging averaging = Averaging::kMacro;
  ClassSet training_classes;  // marks per-class rows for the generalized split
  unsigned threads = 1;
};

// Top-1 categorization plus hit@k per sample. Counting is a commutative fold,
// so sharding across threads yields an identical report.
inline EvalReport evaluate(const ScoreFn& scorer, const std::vector<TestSample>& samples,
                           const std::vector<std::string>& candidates, const Taxonomy& t,
                           std::vector<std::size_t> ks, const EvalOptions& opt = {}) {
  if (samples.empty()) fail(ErrorCode::kInvalidArgument, "empty test set");
  if (candidates.empty()) fail(ErrorCode::kInvalidArgument, "empty candidate set");
  if (ks.empty()) ks = {1};
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  if (ks.front() == 0 || ks.back() > candidates.size()) {
    fail(ErrorCode::kInvalidArgument, "k values must lie in [1, |candidates|]");
  }
  std::unordered_map<std::string, std::size_t> cand_index;
  std::vector<ConceptIndex> cand_concepts;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    cand_index.emplace(candidates[i], i);
    cand_concepts.push_back(t.index_of(candidates[i]));
  }
  for (const auto& s : samples) {
    if (!cand_index.count(s.truth)) {
      fail(ErrorCode::kUnknownId, "true class " + s.truth + " is not among the candidates");
    }
  }

  EvalReport report;
  report.setting = opt.setting;
  report.averaging = opt.averaging;
  report.ks = ks;
  const std::size_t kmax = ks.back();

  auto run = [&](std::size_t begin, std::size_t end, EvalReport& out) {
    for (std::size_t n = begin; n < end; ++n) {
      const auto& s = samples[n];
      EVector scores = scorer(s.feature);
      if (static_cast<std::size_t>(scores.size()) != candidates.size()) {
        fail(ErrorCode::kDimensionMismatch, "scorer returned wrong number of scores");
      }
      auto ranked = top_k(candidates, scores, kmax);
      auto& st = out.per_class[s.truth];
      st.training_class = opt.training_classes.count(s.truth) > 0;
      st.hits.resize(ks.size(), 0);
      ++st.samples;
      auto pred = cand_concepts[cand_index.at(ranked.front().class_id)];
      ++st.categories[static_cast<std::size_t>(categorize(t, pred, t.index_of(s.truth)))];
      for (std::size_t r = 0; r < ranked.size(); ++r) {
        if (ranked[r].class_id != s.truth) continue;
        for (std::size_t i = 0; i < ks.size(); ++i) {
          if (r < ks[i]) ++st.hits[i];
        }
        break;
      }
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(opt.threads, static_cast<unsigned>(samples.size())));
  if (threads == 1) {
    run(0, samples.size(), report);
    return report;
  }
  std::vector<EvalReport> shards(threads);
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (samples.size() + threads - 1) / threads;
  for (unsigned w = 0; w < threads; ++w) {
    shards[w].ks = ks;
    workers.emplace_back([&, w] {
      try {
        run(std::min(samples.size(), w * chunk), std::min(samples.size(), (w + 1) * chunk), shards[w]);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : workers) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (const auto& s : shards) report.merge(s);
  return report;
}

struct GeneralizedSummary {
  double acc_train;
  double acc_test;
  double harmonic;
};

inline GeneralizedSummary generalized_summary(const EvalReport& r, std::size_t k = 1) {
  GeneralizedSummary g{r.top_k(k, std::nullopt, true), r.top_k(k, std::nullopt, false), 0.0};
  g.harmonic = harmonic_gzsl(g.acc_train, g.acc_test);
  return g;
}

// ---------------------------------------------------------------------------
// Report emission

// "key = value" lines in a fixed order.
inline std::string report_text(const EvalReport& r, std::string_view split) {
  std::string out;
  auto put = [&](std::string_view key, const std::string& value) {
    out.append(key);
    out += " = ";
    out += value;
    out += '\n';
  };
  auto num = [](double v) { return io::fixed(v, 6); };
  put("report.split", std::string(split));
  put("report.setting", std::string(to_string(r.setting)));
  put("report.averaging", std::string(to_string(r.averaging)));
  put("report.samples", std::to_string(r.sample_count()));
  put("report.classes", std::to_string(r.per_class.size()));
  for (auto cat : kAllCategories) {
    put("categories." + std::string(to_string(cat)), num(r.category_rate(cat)));
  }
  auto b = accuracy_bounds(r);
  put("bounds.reported", num(b.reported));
  put("bounds.lower", num(b.lower));
  put("bounds.upper", num(b.upper));
  try {
    put("ratio.fn_tp", num(fn_tp_ratio(r)));
  } catch (const Error&) {
    put("ratio.fn_tp", "undefined");
  }
  for (auto k : r.ks) {
    put("accuracy.macro.top" + std::to_string(k), num(r.top_k(k, Averaging::kMacro)));
    put("accuracy.micro.top" + std::to_string(k), num(r.top_k(k, Averaging::kMicro)));
  }
  if (r.setting == Setting::kGeneralized && r.has_training_classes()) {
    for (auto k : r.ks) {
      auto g = generalized_summary(r, k);
      auto sfx = ".top" + std::to_string(k);
      put("gzsl.acc_train" + sfx, num(g.acc_train));
      put("gzsl.acc_test" + sfx, num(g.acc_test));
      put("gzsl.harmonic" + sfx, num(g.harmonic));
    }
  }
  return out;
}

// One row per k: split, setting, k, macro, micro.
inline std::string report_topk_tsv(const EvalReport& r, std::string_view split, bool header = true) {
  std::string out;
  if (header) out += "split\tsetting\tk\tmacro\tmicro\n";
  for (auto k : r.ks) {
    out += std::string(split) + "\t" + std::string(to_string(r.setting)) + "\t" + std::to_string(k) + "\t" +
           io::fixed(r.top_k(k, Averaging::kMacro)) + "\t" + io::fixed(r.top_k(k, Averaging::kMicro)) + "\n";
  }
  return out;
}

inline std::string report_per_class_tsv(const EvalReport& r) {
  std::string out = "class\tgroup\tsamples\ttp\tfn_parent\tfn_child\ttn";
  for (auto k : r.ks) out += "\ttop" + std::to_string(k);
  out += '\n';
  for (const auto& [c, s] : r.per_class) {
    out += c + "\t" + (s.training_class ? "train" : "test") + "\t" + std::to_string(s.samples);
    for (auto n : s.categories) out += "\t" + std::to_string(n);
    for (auto h : s.hits) out += "\t" + std::to_string(h);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Factorial impact analysis

struct FactorConfig {
  bool visual = false;        // image quality filtering
  bool semantic = false;      // rare/polysemous label filtering
  bool hierarchical = false;  // FN outputs not counted as errors

  bool get(std::size_t i) const { return i == 0 ? visual : i == 1 ? semantic : hierarchical; }
  void set(std::size_t i, bool v) { (i == 0 ? visual : i == 1 ? semantic : hierarchical) = v; }
  auto operator<=>(const FactorConfig&) const = default;
};

inline std::vector<FactorConfig> all_factor_configs() {
  std::vector<FactorConfig> out;
  for (int bits = 0; bits < 8; ++bits) out.push_back({(bits & 1) != 0, (bits & 2) != 0, (bits & 4) != 0});
  return out;
}

// Impact of factor i: mean over the four configurations of the other two
// factors of accuracy(i on) - accuracy(i off).
inline std::array<double, 3> factor_impact(const std::map<FactorConfig, double>& results) {
  for (const auto& c : all_factor_configs()) {
    if (!results.count(c)) fail(ErrorCode::kInvalidArgument, "factorial results are missing a configuration");
  }
  std::array<double, 3> impact{};
  for (std::size_t i = 0; i < 3; ++i) {
    double sum = 0;
    for (const auto& c : all_factor_configs()) {
      if (c.get(i)) continue;
      auto on = c;
      on.set(i, true);
      sum += results.at(on) - results.at(c);
    }
    impact[i] = sum / 4.0;
  }
  return impact;
}

// Sample Pearson correlation (two-pass).
inline double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) fail(ErrorCode::kInvalidArgument, "pearson: length mismatch");
  if (xs.size() < 2) fail(ErrorCode::kInvalidArgument, "pearson: need at least two points");
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0 || syy == 0) fail(ErrorCode::kUndefined, "pearson: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace zsbench
