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

// Image feature matrices, population/quality filters and test-image sampling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <memory>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "zsbench/error.hpp"
#include "zsbench/io.hpp"
#include "zsbench/taxonomy.hpp"

namespace zsbench {

struct FeatureRow {
  std::string image_id;
  std::string class_id;
  std::vector<float> feature;

  bool operator==(const FeatureRow&) const = default;
};

class FeatureMatrix {
 public:
  explicit FeatureMatrix(std::size_t dim = 0) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return rows_.size(); }
  const std::vector<FeatureRow>& rows() const { return rows_; }
  const FeatureRow& row(std::size_t i) const { return rows_[i]; }

  void add(FeatureRow r) {
    if (dim_ == 0) dim_ = r.feature.size();
    if (r.feature.size() != dim_ || dim_ == 0) {
      fail(ErrorCode::kDimensionMismatch, "image " + r.image_id + " has " +
                                              std::to_string(r.feature.size()) +
                                              " values, expected " + std::to_string(dim_));
    }
    if (!ids_.emplace(r.image_id, rows_.size()).second) {
      fail(ErrorCode::kDuplicate, "duplicate image id " + r.image_id);
    }
    by_class_[r.class_id].push_back(rows_.size());
    rows_.push_back(std::move(r));
  }

  // Row indices per class, classes in id order.
  const std::map<std::string, std::vector<std::size_t>>& class_rows() const { return by_class_; }

  std::size_t population(std::string_view class_id) const {
    auto it = by_class_.find(std::string(class_id));
    return it == by_class_.end() ? 0 : it->second.size();
  }

  std::optional<std::size_t> find(std::string_view image_id) const {
    auto it = ids_.find(std::string(image_id));
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }

  // Rows were L2-normalized at ingestion (see l2_normalize_rows).
  bool normalized = false;

  void l2_normalize_rows() {
    for (auto& r : rows_) {
      double s = 0;
      for (float x : r.feature) s += double(x) * x;
      if (s > 0) {
        auto inv = 1.0 / std::sqrt(s);
        for (float& x : r.feature) x = static_cast<float>(x * inv);
      }
    }
    normalized = true;
  }

  bool operator==(const FeatureMatrix& o) const { return dim_ == o.dim_ && rows_ == o.rows_; }

 private:
  std::size_t dim_;
  std::vector<FeatureRow> rows_;
  std::unordered_map<std::string, std::size_t> ids_;
  std::map<std::string, std::vector<std::size_t>> by_class_;
};

// ---------------------------------------------------------------------------
// Formats
//
// Text:   "image_id<TAB>class_id<TAB>v1,...,vD"
// Binary: 'ZSBF' | version u16 | n u64 | D u32, then per row
//         u32 len + image id, u32 len + class id, D float32 (all little-endian).

inline constexpr char kFeatureMagic[4] = {'Z', 'S', 'B', 'F'};
inline constexpr std::uint16_t kFeatureVersion = 1;

inline FeatureMatrix load_features_text(std::istream& in, std::string source = "<features>") {
  io::LineReader reader(in, std::move(source));
  FeatureMatrix m;
  std::string line;
  while (reader.next(line)) {
    if (io::is_blank_or_comment(line)) continue;
    auto fields = io::split(io::trim(line), '\t');
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty()) {
      reader.error("expected image_id<TAB>class_id<TAB>v1,...,vD");
    }
    FeatureRow row{std::string(fields[0]), std::string(fields[1]), {}};
    for (auto tok : io::split(fields[2], ',')) {
      float x;
      if (!io::parse_number(io::trim(tok), x) || !std::isfinite(x)) {
        reader.error("bad feature value '" + std::string(tok) + "'");
      }
      row.feature.push_back(x);
    }
    try {
      m.add(std::move(row));
    } catch (const Error& e) {
      reader.error(e.what());
    }
  }
  return m;
}

inline FeatureMatrix load_features_binary(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kFeatureMagic)) {
    fail(ErrorCode::kParse, "missing ZSBF magic");
  }
  auto version = io::read_le<std::uint16_t>(in, "version");
  if (version != kFeatureVersion) {
    fail(ErrorCode::kParse, "unsupported feature format version " + std::to_string(version));
  }
  auto n = io::read_le<std::uint64_t>(in, "row count");
  auto dim = io::read_le<std::uint32_t>(in, "dimension");
  if (dim == 0) fail(ErrorCode::kParse, "zero feature dimension");
  FeatureMatrix m(dim);
  for (std::uint64_t i = 0; i < n; ++i) {
    FeatureRow row;
    row.image_id = io::read_string32(in, "image id");
    row.class_id = io::read_string32(in, "class id");
    row.feature.resize(dim);
    for (auto& x : row.feature) x = io::read_le_float(in, "feature value");
    m.add(std::move(row));
  }
  return m;
}

// Dispatches on the leading magic bytes.
inline FeatureMatrix load_features(std::istream& in, std::string source = "<features>") {
  char head[4] = {};
  in.read(head, 4);
  auto got = in.gcount();
  in.clear();
  in.seekg(0);
  if (got == 4 && std::equal(head, head + 4, kFeatureMagic)) return load_features_binary(in);
  return load_features_text(in, std::move(source));
}

inline FeatureMatrix load_features_file(const std::filesystem::path& path) {
  auto in = io::open_input(path, /*binary=*/true);
  return load_features(in, path.string());
}

inline void save_features_text(const FeatureMatrix& m, std::ostream& out) {
  std::string buf;
  for (const auto& r : m.rows()) {
    buf.clear();
    buf += r.image_id;
    buf += '\t';
    buf += r.class_id;
    buf += '\t';
    for (std::size_t i = 0; i < r.feature.size(); ++i) {
      if (i) buf += ',';
      io::append_float(buf, r.feature[i]);
    }
    buf += '\n';
    out << buf;
  }
}

inline void save_features_binary(const FeatureMatrix& m, std::ostream& out) {
  out.write(kFeatureMagic, 4);
  io::write_le(out, kFeatureVersion);
  io::write_le(out, static_cast<std::uint64_t>(m.size()));
  io::write_le(out, static_cast<std::uint32_t>(m.dim()));
  for (const auto& r : m.rows()) {
    io::write_string32(out, r.image_id);
    io::write_string32(out, r.class_id);
    for (float x : r.feature) io::write_le_float(out, x);
  }
}

// Image ids whose class is absent from the taxonomy.
inline std::vector<std::string> unknown_class_rows(const FeatureMatrix& m, const Taxonomy& t) {
  std::vector<std::string> out;
  for (const auto& r : m.rows()) {
    if (!t.contains(r.class_id)) out.push_back(r.image_id);
  }
  return out;
}

// Blacklist: "class_id<TAB>reason" (reason may be empty).
using Blacklist = std::map<std::string, std::string>;

inline Blacklist load_blacklist(std::istream& in, std::string source = "<blacklist>") {
  io::LineReader reader(in, std::move(source));
  Blacklist out;
  std::string line;
  while (reader.next(line)) {
    if (io::is_blank_or_comment(line)) continue;
    auto trimmed = io::trim(line);
    auto tab = trimmed.find('\t');
    auto id = trimmed.substr(0, tab);
    if (id.empty()) reader.error("expected class_id<TAB>reason");
    std::string reason = tab == std::string_view::npos ? "" : std::string(trimmed.substr(tab + 1));
    out[std::string(id)] = reason;
  }
  return out;
}

// Classes with strictly more than `threshold` rows.
inline ClassSet population_filter(const FeatureMatrix& m, std::size_t threshold) {
  ClassSet kept;
  for (const auto& [c, rows] : m.class_rows()) {
    if (rows.size() > threshold) kept.insert(c);
  }
  return kept;
}

// ---------------------------------------------------------------------------
// Sample-wise quality selection

// Pluggable supervised classifier over precomputed features.
class ShallowClassifier {
 public:
  virtual ~ShallowClassifier() = default;
  virtual void fit(const FeatureMatrix& m, std::span<const std::size_t> rows, std::uint64_t seed) = 0;
  virtual std::string predict(std::span<const float> x) const = 0;
};

// Predicts the class whose training mean is closest in Euclidean distance;
// ties go to the smallest class id.
class NearestClassMean final : public ShallowClassifier {
 public:
  void fit(const FeatureMatrix& m, std::span<const std::size_t> rows, std::uint64_t) override {
    std::map<std::string, std::pair<std::vector<double>, std::size_t>> acc;
    for (auto i : rows) {
      const auto& r = m.row(i);
      auto& [sum, n] = acc[r.class_id];
      sum.resize(m.dim(), 0.0);
      for (std::size_t k = 0; k < m.dim(); ++k) sum[k] += r.feature[k];
      ++n;
    }
    classes_.clear();
    means_.clear();
    for (auto& [c, sn] : acc) {
      for (auto& x : sn.first) x /= static_cast<double>(sn.second);
      classes_.push_back(c);
      means_.push_back(std::move(sn.first));
    }
  }

  std::string predict(std::span<const float> x) const override {
    if (classes_.empty()) fail(ErrorCode::kInvalidArgument, "classifier is not fitted");
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < means_.size(); ++c) {
      double d = 0;
      for (std::size_t k = 0; k < x.size(); ++k) {
        double diff = x[k] - means_[c][k];
        d += diff * diff;
      }
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    return classes_[best];
  }

 private:
  std::vector<std::string> classes_;
  std::vector<std::vector<double>> means_;
};

struct QualityRound {
  std::vector<std::string> classes;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> evaluated_rows;
  std::uint64_t fit_seed = 0;
};

struct QualitySet {
  ClassSet accepted;   // image ids
  ClassSet rejected;   // image ids
  std::map<std::string, std::size_t> round_of;  // image id -> round that routed it
  std::vector<QualityRound> rounds;

  std::size_t accepted_count(const FeatureMatrix& m, std::string_view class_id) const {
    auto it = m.class_rows().find(std::string(class_id));
    if (it == m.class_rows().end()) return 0;
    std::size_t n = 0;
    for (auto i : it->second) n += accepted.count(m.row(i).image_id);
    return n;
  }
};

// Greedy antichain over a shuffled pool: take each class unrelated to every
// class already taken, up to `limit`.
inline std::vector<std::string> sample_antichain(const Taxonomy& t, std::vector<std::string> pool,
                                                 std::size_t limit, std::mt19937_64& rng) {
  std::shuffle(pool.begin(), pool.end(), rng);
  std::vector<std::string> chosen;
  std::vector<std::vector<ConceptIndex>> chosen_anc;
  std::vector<ConceptIndex> chosen_idx;
  for (const auto& c : pool) {
    if (chosen.size() >= limit) break;
    auto ci = t.index_of(c);
    auto anc = t.ancestors(ci);
    bool ok = true;
    for (std::size_t j = 0; j < chosen.size() && ok; ++j) {
      if (std::binary_search(anc.begin(), anc.end(), chosen_idx[j]) ||
          std::binary_search(chosen_anc[j].begin(), chosen_anc[j].end(), ci)) {
        ok = false;
      }
    }
    if (!ok) continue;
    chosen.push_back(c);
    chosen_idx.push_back(ci);
    chosen_anc.push_back(std::move(anc));
  }
  return chosen;
}

// Repeats rounds until every row of the candidate classes has been routed
// once: sample an antichain of up to `n_classes` classes that still have
// unrouted rows, take `n_train` training rows per class, fit, and route each
// held-out unrouted row to accepted iff it is predicted as its own class.
// Training rows are drawn from already-routed rows first, so every round
// routes at least one new row per class and the loop terminates.
inline QualitySet select_quality_samples(const FeatureMatrix& m, const Taxonomy& t,
                                         ShallowClassifier& clf, const ClassSet& candidates,
                                         std::size_t n_classes, std::size_t n_train,
                                         std::uint64_t seed) {
  if (n_classes == 0) fail(ErrorCode::kInvalidArgument, "n_classes must be positive");
  if (n_train == 0) fail(ErrorCode::kInvalidArgument, "n_train must be positive");
  std::map<std::string, std::vector<std::size_t>> rows_of;
  for (const auto& c : candidates) {
    t.index_of(c);
    auto it = m.class_rows().find(c);
    auto n = it == m.class_rows().end() ? 0 : it->second.size();
    if (n <= n_train) {
      fail(ErrorCode::kInfeasible, "class " + c + " has " + std::to_string(n) +
                                       " rows, needs more than n_train=" + std::to_string(n_train));
    }
    rows_of[c] = it->second;
  }

  std::mt19937_64 rng(seed);
  std::vector<char> routed(m.size(), 0);
  std::map<std::string, std::size_t> remaining;
  for (const auto& [c, rows] : rows_of) remaining[c] = rows.size();

  QualitySet out;
  while (true) {
    std::vector<std::string> pool;
    for (const auto& [c, n] : remaining) {
      if (n > 0) pool.push_back(c);
    }
    if (pool.empty()) break;
    auto classes = sample_antichain(t, pool, n_classes, rng);
    if (out.rounds.empty() && classes.size() < n_classes) {
      fail(ErrorCode::kInfeasible, "only " + std::to_string(classes.size()) +
                                       " non-overlapping classes available, n_classes=" +
                                       std::to_string(n_classes));
    }
    QualityRound round;
    for (const auto& c : classes) {
      std::vector<std::size_t> done, todo;
      for (auto i : rows_of[c]) (routed[i] ? done : todo).push_back(i);
      std::shuffle(done.begin(), done.end(), rng);
      std::shuffle(todo.begin(), todo.end(), rng);
      std::size_t from_done = std::min(done.size(), n_train);
      round.train_rows.insert(round.train_rows.end(), done.begin(), done.begin() + from_done);
      auto from_todo = static_cast<std::ptrdiff_t>(n_train - from_done);
      round.train_rows.insert(round.train_rows.end(), todo.begin(), todo.begin() + from_todo);
      round.evaluated_rows.insert(round.evaluated_rows.end(), todo.begin() + from_todo, todo.end());
    }
    std::sort(round.train_rows.begin(), round.train_rows.end());
    std::sort(round.evaluated_rows.begin(), round.evaluated_rows.end());
    round.fit_seed = rng();
    clf.fit(m, round.train_rows, round.fit_seed);
    const auto index = out.rounds.size();
    for (auto i : round.evaluated_rows) {
      const auto& r = m.row(i);
      bool ok = clf.predict(r.feature) == r.class_id;
      (ok ? out.accepted : out.rejected).insert(r.image_id);
      out.round_of[r.image_id] = index;
      routed[i] = 1;
      --remaining[r.class_id];
    }
    round.classes = std::move(classes);
    out.rounds.push_back(std::move(round));
  }
  return out;
}

// Uniform sample without replacement of `n` accepted images of a class.
inline std::vector<std::string> sample_test_images(const FeatureMatrix& m, const QualitySet& q,
                                                   std::string_view class_id, std::size_t n,
                                                   std::uint64_t seed) {
  std::vector<std::string> pool;
  auto it = m.class_rows().find(std::string(class_id));
  if (it != m.class_rows().end()) {
    for (auto i : it->second) {
      if (q.accepted.count(m.row(i).image_id)) pool.push_back(m.row(i).image_id);
    }
  }
  if (pool.size() < n) {
    fail(ErrorCode::kInfeasible, "class " + std::string(class_id) + " has " +
                                     std::to_string(pool.size()) + " accepted images, needs " +
                                     std::to_string(n));
  }
  std::sort(pool.begin(), pool.end());
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(n);
  return pool;
}

}  // namespace zsbench
