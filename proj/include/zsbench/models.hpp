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

// Bilinear compatibility models E(x, y) = x^T W y and the zero-shot
// baselines built on them.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "zsbench/datastore.hpp"
#include "zsbench/error.hpp"
#include "zsbench/io.hpp"
#include "zsbench/semantics.hpp"
#include "zsbench/taxonomy.hpp"

namespace zsbench {

using Matrix = Eigen::MatrixXd;
using EVector = Eigen::VectorXd;

inline EVector to_eigen(std::span<const float> x) {
  EVector v(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) v[static_cast<Eigen::Index>(i)] = x[i];
  return v;
}

// Class embeddings as rows, in `class_ids` order.
struct SemanticMatrix {
  std::vector<std::string> class_ids;
  Matrix Y;  // |classes| x d

  std::size_t size() const { return class_ids.size(); }
  Eigen::Index dim() const { return Y.cols(); }

  std::optional<std::size_t> find(std::string_view id) const {
    for (std::size_t i = 0; i < class_ids.size(); ++i) {
      if (class_ids[i] == id) return i;
    }
    return std::nullopt;
  }

  EVector row(std::size_t i) const { return Y.row(static_cast<Eigen::Index>(i)).transpose(); }

  // Rows of `other` appended after ours; both must share d.
  SemanticMatrix concat(const SemanticMatrix& other) const {
    if (size() > 0 && other.size() > 0 && dim() != other.dim()) {
      fail(ErrorCode::kDimensionMismatch, "semantic dimensions differ");
    }
    SemanticMatrix out;
    out.class_ids = class_ids;
    out.class_ids.insert(out.class_ids.end(), other.class_ids.begin(), other.class_ids.end());
    out.Y.resize(static_cast<Eigen::Index>(out.size()), size() ? dim() : other.dim());
    if (size()) out.Y.topRows(Y.rows()) = Y;
    if (other.size()) out.Y.bottomRows(other.Y.rows()) = other.Y;
    return out;
  }

  SemanticMatrix subset(const std::vector<std::string>& ids) const {
    SemanticMatrix out;
    out.class_ids = ids;
    out.Y.resize(static_cast<Eigen::Index>(ids.size()), dim());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      auto j = find(ids[i]);
      if (!j) fail(ErrorCode::kUnknownId, "class " + ids[i] + " has no semantic row");
      out.Y.row(static_cast<Eigen::Index>(i)) = Y.row(static_cast<Eigen::Index>(*j));
    }
    return out;
  }
};

inline SemanticMatrix build_semantic_matrix(const Taxonomy& t, const std::vector<std::string>& ids,
                                            const EmbeddingTable& e) {
  SemanticMatrix s;
  s.class_ids = ids;
  s.Y.resize(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(e.dim()));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto v = class_embedding(t, ids[i], e);
    for (std::size_t k = 0; k < v.size(); ++k) {
      s.Y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v[k];
    }
  }
  return s;
}

// Local (one-hot) class representations.
inline SemanticMatrix one_hot_semantics(const std::vector<std::string>& ids) {
  SemanticMatrix s;
  s.class_ids = ids;
  s.Y = Matrix::Identity(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(ids.size()));
  return s;
}

// Embedding-file form of a semantic matrix (rows keyed by class id).
inline EmbeddingTable to_embedding_table(const SemanticMatrix& s) {
  EmbeddingTable e(static_cast<std::size_t>(s.dim()));
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::vector<float> v(static_cast<std::size_t>(s.dim()));
    for (Eigen::Index k = 0; k < s.dim(); ++k) v[static_cast<std::size_t>(k)] = static_cast<float>(s.Y(static_cast<Eigen::Index>(i), k));
    e.add(s.class_ids[i], std::move(v));
  }
  return e;
}

inline SemanticMatrix from_embedding_table(const EmbeddingTable& e, const std::vector<std::string>& ids) {
  SemanticMatrix s;
  s.class_ids = ids;
  s.Y.resize(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(e.dim()));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto* v = e.find(ids[i]);
    if (!v) fail(ErrorCode::kUnknownId, "class " + ids[i] + " missing from class embedding file");
    for (std::size_t k = 0; k < v->size(); ++k) s.Y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = (*v)[k];
  }
  return s;
}

struct TrainingSet {
  Matrix X;                          // D x N, one column per sample
  std::vector<std::size_t> labels;   // row index into the semantic matrix
};

// Every row of `m` must belong to a class of `s`.
inline TrainingSet make_training_set(const FeatureMatrix& m, const SemanticMatrix& s) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < s.size(); ++i) index.emplace(s.class_ids[i], i);
  TrainingSet ts;
  ts.X.resize(static_cast<Eigen::Index>(m.dim()), static_cast<Eigen::Index>(m.size()));
  ts.labels.reserve(m.size());
  for (std::size_t n = 0; n < m.size(); ++n) {
    const auto& r = m.row(n);
    auto it = index.find(r.class_id);
    if (it == index.end()) {
      fail(ErrorCode::kUnknownId, "training image " + r.image_id + " has class " + r.class_id +
                                      " outside the semantic matrix");
    }
    ts.X.col(static_cast<Eigen::Index>(n)) = to_eigen(r.feature);
    ts.labels.push_back(it->second);
  }
  return ts;
}

struct BilinearModel {
  Matrix W;  // D x d
  std::map<std::string, std::string> metadata;
  std::vector<double> loss_history;  // per-epoch mean loss (ranking fits)

  Eigen::Index feature_dim() const { return W.rows(); }
  Eigen::Index semantic_dim() const { return W.cols(); }
};

inline Matrix one_hot_targets(const std::vector<std::size_t>& labels, std::size_t classes) {
  Matrix M = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(classes));
  for (std::size_t n = 0; n < labels.size(); ++n) M(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(labels[n])) = 1.0;
  return M;
}

// ||X^T W S' - M||^2 + g ||W S'||^2 + l ||X^T W||^2 + g l ||W||^2 with
// S' = Y^T (d x K) and M the 0/1 label matrix.
inline double closed_form_objective(const Matrix& W, const TrainingSet& ts, const SemanticMatrix& s,
                                    double gamma, double lambda) {
  Matrix St = s.Y.transpose();
  Matrix M = one_hot_targets(ts.labels, s.size());
  Matrix XtW = ts.X.transpose() * W;
  return (XtW * St - M).squaredNorm() + gamma * (W * St).squaredNorm() + lambda * XtW.squaredNorm() +
         gamma * lambda * W.squaredNorm();
}

// Unique minimizer W = (X X^T + g I)^-1 X M S'^T (S' S'^T + l I)^-1.
inline BilinearModel fit_closed_form(const TrainingSet& ts, const SemanticMatrix& s, double gamma,
                                     double lambda) {
  if (!(gamma > 0) || !(lambda > 0)) {
    fail(ErrorCode::kSingular, "closed-form fit needs gamma > 0 and lambda > 0");
  }
  if (ts.labels.empty()) fail(ErrorCode::kInvalidArgument, "empty training set");
  const auto D = ts.X.rows();
  const auto d = s.dim();
  Matrix St = s.Y.transpose();
  Matrix XM = Matrix::Zero(D, static_cast<Eigen::Index>(s.size()));
  for (std::size_t n = 0; n < ts.labels.size(); ++n) {
    XM.col(static_cast<Eigen::Index>(ts.labels[n])) += ts.X.col(static_cast<Eigen::Index>(n));
  }
  Matrix A = ts.X * ts.X.transpose() + gamma * Matrix::Identity(D, D);
  Matrix B = St * St.transpose() + lambda * Matrix::Identity(d, d);
  Eigen::LDLT<Matrix> lA(A), lB(B);
  if (lA.info() != Eigen::Success || lB.info() != Eigen::Success || !lA.isPositive() ||
      !lB.isPositive()) {
    fail(ErrorCode::kSingular, "ridge system is not positive definite");
  }
  Matrix rhs = XM * St.transpose();           // D x d
  Matrix left = lA.solve(rhs);                // A^-1 X M S'^T
  Matrix W = lB.solve(left.transpose()).transpose();  // right-multiply by B^-1 (B symmetric)
  if (!W.allFinite()) fail(ErrorCode::kSingular, "closed-form solution is not finite");
  BilinearModel model;
  model.W = std::move(W);
  model.metadata["kind"] = "closed-form";
  model.metadata["gamma"] = io::format_double(gamma);
  model.metadata["lambda"] = io::format_double(lambda);
  return model;
}

// Mean over samples of sum_{j != true} max(0, margin - s_true + s_j).
inline double hinge_loss(const Matrix& W, const TrainingSet& ts, const SemanticMatrix& s, double margin) {
  double total = 0;
  for (std::size_t n = 0; n < ts.labels.size(); ++n) {
    EVector scores = s.Y * (W.transpose() * ts.X.col(static_cast<Eigen::Index>(n)));
    const double st = scores[static_cast<Eigen::Index>(ts.labels[n])];
    for (Eigen::Index j = 0; j < scores.size(); ++j) {
      if (static_cast<std::size_t>(j) == ts.labels[n]) continue;
      total += std::max(0.0, margin - st + scores[j]);
    }
  }
  return ts.labels.empty() ? 0.0 : total / static_cast<double>(ts.labels.size());
}

struct RankingOptions {
  double margin = 0.1;
  double learning_rate = 0.01;
  int epochs = 50;
  std::uint64_t seed = 0;
};

// Stochastic subgradient descent on the pairwise hinge ranking loss, starting
// from W = 0. The step size decays as lr / sqrt(1 + epoch). Every wrong class
// that violates the margin contributes to a sample's update.
inline BilinearModel fit_ranking(const TrainingSet& ts, const SemanticMatrix& s, const RankingOptions& opt) {
  if (opt.margin < 0) fail(ErrorCode::kInvalidArgument, "margin must be non-negative");
  if (opt.epochs < 1) fail(ErrorCode::kInvalidArgument, "epochs must be >= 1");
  if (!(opt.learning_rate > 0)) fail(ErrorCode::kInvalidArgument, "learning rate must be positive");
  if (ts.labels.empty()) fail(ErrorCode::kInvalidArgument, "empty training set");
  const auto D = ts.X.rows();
  const auto d = s.dim();
  BilinearModel model;
  model.W = Matrix::Zero(D, d);
  const double initial = hinge_loss(model.W, ts, s, opt.margin);
  std::mt19937_64 rng(opt.seed);
  std::vector<std::size_t> order(ts.labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  EVector direction(d);
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = opt.learning_rate / std::sqrt(1.0 + epoch);
    double epoch_loss = 0;
    for (auto n : order) {
      auto x = ts.X.col(static_cast<Eigen::Index>(n));
      EVector scores = s.Y * (model.W.transpose() * x);
      const auto t = static_cast<Eigen::Index>(ts.labels[n]);
      direction.setZero();
      for (Eigen::Index j = 0; j < scores.size(); ++j) {
        if (j == t) continue;
        double l = opt.margin - scores[t] + scores[j];
        if (l > 0) {
          epoch_loss += l;
          direction += s.Y.row(j).transpose() - s.Y.row(t).transpose();
        }
      }
      if (!direction.isZero(0.0)) model.W.noalias() -= lr * x * direction.transpose();
    }
    epoch_loss /= static_cast<double>(order.size());
    model.loss_history.push_back(epoch_loss);
    if (!std::isfinite(epoch_loss) || (initial > 0 && epoch_loss > 10 * initial)) {
      fail(ErrorCode::kDivergence, "ranking loss " + io::format_double(epoch_loss) + " at epoch " +
                                       std::to_string(epoch) + " exceeds 10x initial loss " +
                                       io::format_double(initial) + "; lower the learning rate");
    }
  }
  model.metadata["kind"] = "ranking";
  model.metadata["margin"] = io::format_double(opt.margin);
  model.metadata["learning_rate"] = io::format_double(opt.learning_rate);
  model.metadata["epochs"] = std::to_string(opt.epochs);
  model.metadata["seed"] = std::to_string(opt.seed);
  return model;
}

// True when every epoch-mean loss is at most the previous one plus `tolerance`
// (relative to the first epoch's loss).
inline bool loss_non_increasing(const std::vector<double>& history, double tolerance) {
  if (history.empty()) return true;
  const double scale = std::max(history.front(), 1e-12);
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (history[i] > history[i - 1] + tolerance * scale) return false;
  }
  return true;
}

inline double score(const BilinearModel& m, const EVector& x, const EVector& y) {
  if (x.size() != m.W.rows() || y.size() != m.W.cols()) {
    fail(ErrorCode::kDimensionMismatch, "score dims (" + std::to_string(x.size()) + ", " +
                                            std::to_string(y.size()) + ") vs W " +
                                            std::to_string(m.W.rows()) + "x" + std::to_string(m.W.cols()));
  }
  return x.dot(m.W * y);
}

struct Ranked {
  std::string class_id;
  double score;
};

// Descending score, ties by smallest class id.
inline std::vector<Ranked> top_k(const std::vector<std::string>& ids, const EVector& scores, std::size_t k) {
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto cmp = [&](std::size_t a, std::size_t b) {
    double sa = scores[static_cast<Eigen::Index>(a)], sb = scores[static_cast<Eigen::Index>(b)];
    if (sa != sb) return sa > sb;
    return ids[a] < ids[b];
  };
  k = std::min(k, ids.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), cmp);
  std::vector<Ranked> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back({ids[order[i]], scores[static_cast<Eigen::Index>(order[i])]});
  return out;
}

inline std::vector<std::string> ids_of(const std::vector<Ranked>& ranked) {
  std::vector<std::string> out;
  out.reserve(ranked.size());
  for (const auto& r : ranked) out.push_back(r.class_id);
  return out;
}

// Top-k candidate classes by x^T W y. The generalized setting passes the
// union of training and test classes as candidates.
inline std::vector<std::string> classify(const BilinearModel& m, const EVector& x,
                                         const SemanticMatrix& candidates, std::size_t k) {
  if (candidates.size() == 0) fail(ErrorCode::kInvalidArgument, "empty candidate set");
  if (k > candidates.size()) fail(ErrorCode::kInvalidArgument, "k exceeds candidate count");
  if (x.size() != m.W.rows() || candidates.dim() != m.W.cols()) {
    fail(ErrorCode::kDimensionMismatch, "classify: model and inputs disagree on dimensions");
  }
  EVector scores = candidates.Y * (m.W.transpose() * x);
  return ids_of(top_k(candidates.class_ids, scores, k));
}

// ---------------------------------------------------------------------------
// Trivial solution

struct TrivialEmbedding {
  std::map<std::string, std::string> mapping;  // test class -> nearest training class
  double sigma = 0;
  std::uint64_t seed = 0;
  SemanticMatrix semantics;  // test classes in id order
};

inline double default_trivial_sigma(const SemanticMatrix& train) {
  if (train.size() == 0) return 0;
  return 1e-3 * train.Y.rowwise().norm().mean();
}

// For each concept: distance to the nearest source and, among the nearest
// sources, the one with the smallest rank (sources are given in rank order).
inline std::pair<std::vector<std::int32_t>, std::vector<std::int64_t>> nearest_source(
    const Taxonomy& t, const std::vector<ConceptIndex>& sources) {
  std::vector<std::int32_t> dist(t.size(), kUnreachable);
  std::vector<std::int64_t> label(t.size(), -1);
  std::vector<ConceptIndex> frontier;
  for (std::size_t r = 0; r < sources.size(); ++r) {
    auto s = sources[r];
    if (dist[s] == 0) continue;
    dist[s] = 0;
    label[s] = static_cast<std::int64_t>(r);
    frontier.push_back(s);
  }
  std::int32_t level = 0;
  std::vector<ConceptIndex> next;
  while (!frontier.empty()) {
    ++level;
    next.clear();
    for (auto u : frontier) {
      auto visit = [&](ConceptIndex v) {
        if (dist[v] == kUnreachable) {
          dist[v] = level;
          label[v] = label[u];
          next.push_back(v);
        } else if (dist[v] == level && label[u] < label[v]) {
          label[v] = label[u];
        }
      };
      for (auto v : t.parents(u)) visit(v);
      for (auto v : t.children(u)) visit(v);
    }
    frontier.swap(next);
  }
  return {std::move(dist), std::move(label)};
}

// Each test class takes the embedding of its nearest training class (ties by
// smallest id) plus N(0, sigma^2 I) noise drawn in test-id order.
inline TrivialEmbedding build_trivial(const Taxonomy& t, const SemanticMatrix& train,
                                      const ClassSet& test, double sigma, std::uint64_t seed) {
  if (sigma < 0) fail(ErrorCode::kInvalidArgument, "sigma must be non-negative");
  if (train.size() == 0) fail(ErrorCode::kInvalidArgument, "no training classes");
  std::vector<std::size_t> rank(train.size());
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  std::sort(rank.begin(), rank.end(), [&](auto a, auto b) { return train.class_ids[a] < train.class_ids[b]; });
  std::vector<ConceptIndex> sources;
  for (auto r : rank) {
    if (test.count(train.class_ids[r])) {
      fail(ErrorCode::kInvalidArgument, "class " + train.class_ids[r] + " is both training and test");
    }
    sources.push_back(t.index_of(train.class_ids[r]));
  }
  auto [dist, label] = nearest_source(t, sources);

  TrivialEmbedding out;
  out.sigma = sigma;
  out.seed = seed;
  out.semantics.class_ids.assign(test.begin(), test.end());
  out.semantics.Y.resize(static_cast<Eigen::Index>(test.size()), train.dim());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Eigen::Index row = 0;
  for (const auto& c : test) {
    auto ci = t.index_of(c);
    if (dist[ci] == kUnreachable) {
      fail(ErrorCode::kDisconnected, "test class " + c + " is not connected to any training class");
    }
    auto tr = rank[static_cast<std::size_t>(label[ci])];
    out.mapping[c] = train.class_ids[tr];
    out.semantics.Y.row(row) = train.Y.row(static_cast<Eigen::Index>(tr));
    if (sigma > 0) {
      for (Eigen::Index k = 0; k < train.dim(); ++k) out.semantics.Y(row, k) += sigma * noise(rng);
    }
    ++row;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model averaging over training-class embeddings

using ProbabilityFn = std::function<std::vector<double>(const EVector&)>;

struct AveragingModel {
  ProbabilityFn probabilities;  // over `train` rows
  SemanticMatrix train;
  std::size_t top = 10;
};

// Softmax over training-class bilinear scores at the given temperature.
inline ProbabilityFn softmax_probabilities(BilinearModel base, SemanticMatrix train, double temperature = 1.0) {
  if (!(temperature > 0)) fail(ErrorCode::kInvalidArgument, "temperature must be positive");
  return [base = std::move(base), train = std::move(train), temperature](const EVector& x) {
    EVector s = train.Y * (base.W.transpose() * x) / temperature;
    const double mx = s.maxCoeff();
    std::vector<double> p(static_cast<std::size_t>(s.size()));
    double z = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) z += (p[static_cast<std::size_t>(i)] = std::exp(s[i] - mx));
    for (auto& v : p) v /= z;
    return p;
  };
}

// Convex combination of the top-T training embeddings weighted by p(c|x).
inline EVector averaged_embedding(const AveragingModel& am, const EVector& x) {
  if (am.top < 1 || am.top > am.train.size()) fail(ErrorCode::kInvalidArgument, "T must be in [1, |train|]");
  auto p = am.probabilities(x);
  if (p.size() != am.train.size()) fail(ErrorCode::kDimensionMismatch, "probability vector size mismatch");
  EVector pv = Eigen::Map<const EVector>(p.data(), static_cast<Eigen::Index>(p.size()));
  auto best = top_k(am.train.class_ids, pv, am.top);
  EVector y = EVector::Zero(am.train.dim());
  double z = 0;
  for (const auto& r : best) {
    auto i = *am.train.find(r.class_id);
    y += r.score * am.train.row(i);
    z += r.score;
  }
  if (!(z > 0)) fail(ErrorCode::kUndefined, "all top-T probabilities are zero");
  return y / z;
}

// Candidates ranked by cosine similarity to the averaged embedding.
inline std::vector<std::string> averaging_classify(const AveragingModel& am, const EVector& x,
                                                   const SemanticMatrix& candidates, std::size_t k) {
  if (candidates.size() == 0) fail(ErrorCode::kInvalidArgument, "empty candidate set");
  if (k > candidates.size()) fail(ErrorCode::kInvalidArgument, "k exceeds candidate count");
  EVector y = averaged_embedding(am, x);
  const double ny = y.norm();
  EVector scores(static_cast<Eigen::Index>(candidates.size()));
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    EVector c = candidates.row(i);
    const double nc = c.norm();
    scores[static_cast<Eigen::Index>(i)] = (ny > 0 && nc > 0) ? y.dot(c) / (ny * nc) : 0.0;
  }
  return ids_of(top_k(candidates.class_ids, scores, k));
}

// ---------------------------------------------------------------------------
// Model file: 'ZSBW' | D u32 | d u32 | D*d float32 row-major |
//             u32 length + "key=value\n" metadata text (all little-endian).

inline constexpr char kModelMagic[4] = {'Z', 'S', 'B', 'W'};

inline std::string format_metadata(const std::map<std::string, std::string>& meta) {
  std::string out;
  for (const auto& [k, v] : meta) out += k + "=" + v + "\n";
  return out;
}

inline void save_model(const BilinearModel& m, std::ostream& out) {
  out.write(kModelMagic, 4);
  io::write_le(out, static_cast<std::uint32_t>(m.W.rows()));
  io::write_le(out, static_cast<std::uint32_t>(m.W.cols()));
  for (Eigen::Index i = 0; i < m.W.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.W.cols(); ++j) io::write_le_float(out, static_cast<float>(m.W(i, j)));
  }
  io::write_string32(out, format_metadata(m.metadata));
}

inline BilinearModel load_model(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kModelMagic)) {
    fail(ErrorCode::kParse, "missing ZSBW magic");
  }
  auto D = io::read_le<std::uint32_t>(in, "D");
  auto d = io::read_le<std::uint32_t>(in, "d");
  BilinearModel m;
  m.W.resize(D, d);
  for (Eigen::Index i = 0; i < m.W.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.W.cols(); ++j) m.W(i, j) = io::read_le_float(in, "weight");
  }
  auto text = io::read_string32(in, "metadata");
  for (auto line : io::split(text, '\n')) {
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(ErrorCode::kParse, "bad metadata line '" + std::string(line) + "'");
    m.metadata[std::string(line.substr(0, eq))] = std::string(line.substr(eq + 1));
  }
  return m;
}

}  // namespace zsbench
