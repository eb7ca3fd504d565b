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

#include "zsbench/models.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "oracles.hpp"
#include "support.hpp"

namespace zsbench {
namespace {

struct Problem {
  TrainingSet ts;
  SemanticMatrix s;
};

// N samples around K class prototypes in D dims, with d-dim class embeddings.
Problem synthetic(std::size_t N, std::size_t D, std::size_t K, std::size_t d, std::uint64_t seed,
                  double noise = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Problem p;
  p.s.Y.resize(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(d));
  for (std::size_t k = 0; k < K; ++k) {
    p.s.class_ids.push_back("k" + std::to_string(k));
    for (std::size_t j = 0; j < d; ++j) p.s.Y(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = g(rng);
  }
  Matrix proto(static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(K));
  for (Eigen::Index i = 0; i < proto.size(); ++i) proto.data()[i] = g(rng);
  p.ts.X.resize(static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(N));
  for (std::size_t n = 0; n < N; ++n) {
    const auto k = n % K;
    p.ts.labels.push_back(k);
    for (std::size_t i = 0; i < D; ++i) {
      p.ts.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(n)) =
          proto(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) + noise * g(rng);
    }
  }
  return p;
}

double training_top1(const BilinearModel& m, const Problem& p) {
  std::size_t hit = 0;
  for (std::size_t n = 0; n < p.ts.labels.size(); ++n) {
    auto best = classify(m, p.ts.X.col(static_cast<Eigen::Index>(n)), p.s, 1);
    hit += best[0] == p.s.class_ids[p.ts.labels[n]];
  }
  return double(hit) / double(p.ts.labels.size());
}

TEST(ClosedForm, MatchesGradientDescentOracle) {
  auto p = synthetic(50, 20, 5, 6, 1);
  for (auto [g, l] : std::vector<std::pair<double, double>>{{1, 1}, {0.5, 2}, {3, 0.3}}) {
    auto m = fit_closed_form(p.ts, p.s, g, l);
    auto W = testing::gradient_descent_oracle(p.ts, p.s, g, l);
    EXPECT_LE((m.W - W).cwiseAbs().maxCoeff(), 1e-4) << "gamma=" << g << " lambda=" << l;
  }
}

TEST(ClosedForm, PerturbationsNeverImprove) {
  auto p = synthetic(50, 20, 5, 6, 2);
  auto m = fit_closed_form(p.ts, p.s, 1.0, 1.0);
  const double best = closed_form_objective(m.W, p.ts, p.s, 1.0, 1.0);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 100; ++trial) {
    Matrix delta(m.W.rows(), m.W.cols());
    for (Eigen::Index i = 0; i < delta.size(); ++i) delta.data()[i] = g(rng);
    const double scale = 1e-4 * std::pow(1e3, trial / 99.0);  // 1e-4 .. 1e-1
    EXPECT_LE(best, closed_form_objective(m.W + scale * delta, p.ts, p.s, 1.0, 1.0));
  }
}

TEST(ClosedForm, SeparableIdentityCase) {
  // One-hot features and orthonormal embeddings: W ~ identity up to scale.
  Problem p;
  p.s = one_hot_semantics({"a", "b", "c"});
  p.ts.X = Matrix::Identity(3, 3);
  p.ts.labels = {0, 1, 2};
  auto m = fit_closed_form(p.ts, p.s, 1e-6, 1e-6);
  EXPECT_EQ(training_top1(m, p), 1.0);
  EXPECT_LE((m.W - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(ClosedForm, RejectsNonPositiveRegularizers) {
  auto p = synthetic(10, 4, 2, 3, 1);
  EXPECT_THROW(fit_closed_form(p.ts, p.s, 0, 1), Error);
  EXPECT_THROW(fit_closed_form(p.ts, p.s, 1, -1), Error);
}

TEST(TrainingSet, RowsOutsideSemanticsRejected) {
  FeatureMatrix m(2);
  m.add({"i1", "a", {1, 2}});
  m.add({"i2", "z", {1, 2}});
  EXPECT_THROW(make_training_set(m, one_hot_semantics({"a", "b"})), Error);
}

TEST(Ranking, SeparableToyReachesFullAccuracy) {
  auto p = synthetic(60, 6, 3, 3, 4, 0.05);
  auto m = fit_ranking(p.ts, p.s, {.margin = 0.1, .learning_rate = 0.01, .epochs = 100, .seed = 1});
  EXPECT_EQ(training_top1(m, p), 1.0);
  EXPECT_TRUE(loss_non_increasing(m.loss_history, 0.05));
}

TEST(Ranking, ZeroMarginLeavesWUntouched) {
  auto p = synthetic(30, 5, 3, 4, 5);
  auto m = fit_ranking(p.ts, p.s, {.margin = 0.0, .learning_rate = 0.1, .epochs = 3, .seed = 1});
  EXPECT_EQ(hinge_loss(Matrix::Zero(5, 4), p.ts, p.s, 0.0), 0.0);
  EXPECT_TRUE(m.W.isZero(0.0));
}

TEST(Ranking, DeterministicGivenSeed) {
  auto p = synthetic(40, 5, 4, 3, 6);
  RankingOptions opt{.margin = 0.5, .learning_rate = 0.01, .epochs = 5, .seed = 9};
  auto a = fit_ranking(p.ts, p.s, opt);
  auto b = fit_ranking(p.ts, p.s, opt);
  EXPECT_TRUE(a.W == b.W);
  opt.seed = 10;
  EXPECT_FALSE(fit_ranking(p.ts, p.s, opt).W == a.W);
}

TEST(Ranking, LossCloseToClosedFormHinge) {
  auto p = synthetic(100, 20, 5, 6, 7, 4.0);
  const double margin = 1.0;
  auto cf = fit_closed_form(p.ts, p.s, 1.0, 1.0);
  auto rk = fit_ranking(p.ts, p.s, {.margin = margin, .learning_rate = 0.002, .epochs = 200, .seed = 2});
  const double h_cf = hinge_loss(cf.W, p.ts, p.s, margin);
  const double h_rk = hinge_loss(rk.W, p.ts, p.s, margin);
  RecordProperty("hinge_ranking", std::to_string(h_rk));
  RecordProperty("hinge_closed_form", std::to_string(h_cf));
  EXPECT_LE(h_rk, 1.1 * h_cf) << "ranking " << h_rk << " closed-form " << h_cf;
}

TEST(Ranking, DivergenceAborts) {
  auto p = synthetic(40, 10, 4, 6, 8, 5.0);
  try {
    fit_ranking(p.ts, p.s, {.margin = 1.0, .learning_rate = 50.0, .epochs = 20, .seed = 1});
    FAIL() << "no divergence reported";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDivergence);
  }
}

TEST(Score, IdentityKernelAndBilinearity) {
  BilinearModel m{Matrix::Identity(3, 3), {}, {}};
  EVector e0 = EVector::Unit(3, 0);
  EXPECT_EQ(score(m, e0, e0), 1.0);
  EXPECT_EQ(score(m, e0, EVector::Zero(3)), 0.0);
  EXPECT_THROW(score(m, EVector::Zero(2), e0), Error);
}

TEST(Score, MatchesNaiveSummation) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (int rep = 0; rep < 200; ++rep) {
    const auto D = 1 + rep % 7, d = 1 + rep % 5;
    BilinearModel m{Matrix(D, d), {}, {}};
    EVector x(D), y(d);
    for (Eigen::Index i = 0; i < m.W.size(); ++i) m.W.data()[i] = g(rng);
    for (Eigen::Index i = 0; i < D; ++i) x[i] = g(rng);
    for (Eigen::Index i = 0; i < d; ++i) y[i] = g(rng);
    EXPECT_NEAR(score(m, x, y), testing::naive_score(m.W, x, y), 1e-12);
  }
}

TEST(Classify, SingletonAndConstructedScores) {
  BilinearModel m{Matrix::Identity(3, 3), {}, {}};
  auto one = one_hot_semantics({"only"});
  BilinearModel m1{Matrix::Ones(3, 1), {}, {}};
  EXPECT_EQ(classify(m1, EVector::Ones(3), one, 1), std::vector<std::string>{"only"});

  auto cands = one_hot_semantics({"a", "b", "c"});
  EXPECT_EQ(classify(m, EVector::Unit(3, 1), cands, 3), (std::vector<std::string>{"b", "a", "c"}));
  EXPECT_THROW(classify(m, EVector::Unit(3, 1), cands, 4), Error);
  EXPECT_THROW(classify(m, EVector::Unit(3, 1), SemanticMatrix{}, 1), Error);
}

TEST(Classify, ScaleInvarianceAndPrefixProperty) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (int rep = 0; rep < 200; ++rep) {
    auto p = synthetic(1, 4, 6, 3, static_cast<std::uint64_t>(rep));
    BilinearModel m{Matrix(4, 3), {}, {}};
    for (Eigen::Index i = 0; i < m.W.size(); ++i) m.W.data()[i] = g(rng);
    EVector x = p.ts.X.col(0);
    auto full = classify(m, x, p.s, 6);
    EXPECT_EQ(classify(m, 3.5 * x, p.s, 6), full);
    auto sorted = full;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(sorted, p.s.class_ids);
    for (std::size_t k = 1; k < 6; ++k) {
      auto top = classify(m, x, p.s, k);
      EXPECT_TRUE(std::equal(top.begin(), top.end(), full.begin()));
    }
  }
}

TEST(Trivial, ToyMapping) {
  auto t = testing::toy();
  auto train = one_hot_semantics({"horse", "tv_monitor"});
  auto triv = build_trivial(t, train, {"zebra", "pc_laptop"}, 0.0, 1);
  EXPECT_EQ(triv.mapping.at("zebra"), "horse");
  EXPECT_EQ(triv.mapping.at("pc_laptop"), "tv_monitor");
}

TEST(Trivial, BirdFragmentMapsToVulture) {
  auto t = testing::birds();
  auto train = one_hot_semantics({"vulture", "buzzard"});
  auto triv = build_trivial(t, train, {"cathartid", "aegypiidae"}, 0.0, 1);
  EXPECT_EQ(triv.mapping.at("cathartid"), "vulture");
  EXPECT_EQ(triv.mapping.at("aegypiidae"), "vulture");
  // Zero noise: identical rows for classes sharing a training class.
  EXPECT_TRUE(triv.semantics.Y.row(0) == triv.semantics.Y.row(1));
}

TEST(Trivial, TiesGoToSmallestTrainingId) {
  auto t = testing::tree({{"b", "r"}, {"a", "r"}, {"x", "r"}});
  auto triv = build_trivial(t, one_hot_semantics({"b", "a"}), {"x"}, 0.0, 1);
  EXPECT_EQ(triv.mapping.at("x"), "a");
}

TEST(Trivial, Errors) {
  auto t = testing::tree({{"a", "r"}, {"x", "r"}}, {"island"});
  EXPECT_THROW(build_trivial(t, one_hot_semantics({"a"}), {"island"}, 0.0, 1), Error);
  EXPECT_THROW(build_trivial(t, one_hot_semantics({"a"}), {"a"}, 0.0, 1), Error);
  EXPECT_THROW(build_trivial(t, one_hot_semantics({"a"}), {"x"}, -1.0, 1), Error);
}

TEST(Trivial, MappingMatchesDistanceOracle) {
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 100; ++rep) {
    auto t = testing::random_dag(rng, 30);
    auto oracle = testing::all_pairs(t);
    std::vector<std::string> train_ids;
    ClassSet test;
    for (ConceptIndex i = 0; i < t.size(); ++i) {
      auto r = rng() % 3;
      if (r == 0) train_ids.push_back(t.id(i));
      if (r == 1) test.insert(t.id(i));
    }
    if (train_ids.empty() || test.empty()) continue;
    auto triv = build_trivial(t, one_hot_semantics(train_ids), test, 0.0, 1);
    for (const auto& c : test) {
      std::string best;
      int bd = 1 << 20;
      for (const auto& tr : train_ids) {
        int d = oracle[t.index_of(c)][t.index_of(tr)];
        if (d < bd || (d == bd && tr < best)) {
          bd = d;
          best = tr;
        }
      }
      ASSERT_EQ(triv.mapping.at(c), best);
    }
  }
}

TEST(Trivial, ZeroNoiseScoreEquality) {
  std::mt19937_64 rng(14);
  std::normal_distribution<double> g;
  for (int rep = 0; rep < 500; ++rep) {
    auto t = testing::random_dag(rng, 20);
    std::vector<std::string> train_ids;
    ClassSet test;
    for (ConceptIndex i = 0; i < t.size(); ++i) (i % 2 ? test.insert(t.id(i)), void() : train_ids.push_back(t.id(i)));
    auto train = one_hot_semantics(train_ids);
    auto triv = build_trivial(t, train, test, 0.0, static_cast<std::uint64_t>(rep));
    BilinearModel m{Matrix(5, static_cast<Eigen::Index>(train.size())), {}, {}};
    for (Eigen::Index i = 0; i < m.W.size(); ++i) m.W.data()[i] = g(rng);
    EVector x(5);
    for (Eigen::Index i = 0; i < 5; ++i) x[i] = g(rng);
    for (std::size_t i = 0; i < triv.semantics.size(); ++i) {
      const auto& c = triv.semantics.class_ids[i];
      auto j = *train.find(triv.mapping.at(c));
      ASSERT_EQ(score(m, x, triv.semantics.row(i)), score(m, x, train.row(j)));
    }
  }
}

TEST(Trivial, NoiseIsSeeded) {
  auto t = testing::toy();
  auto train = one_hot_semantics({"horse", "tv_monitor"});
  auto a = build_trivial(t, train, {"zebra", "pc_laptop"}, 0.01, 5);
  auto b = build_trivial(t, train, {"zebra", "pc_laptop"}, 0.01, 5);
  auto c = build_trivial(t, train, {"zebra", "pc_laptop"}, 0.01, 6);
  EXPECT_TRUE(a.semantics.Y == b.semantics.Y);
  EXPECT_FALSE(a.semantics.Y == c.semantics.Y);
  EXPECT_NEAR(default_trivial_sigma(train), 1e-3, 1e-15);
}

AveragingModel fixed_probabilities(std::vector<double> p, std::size_t top) {
  SemanticMatrix train;
  train.class_ids = {"a", "b", "c", "d"};
  train.Y.resize(4, 3);
  const double r = 1 / std::sqrt(3.0);
  train.Y << 1, 0, 0, 0, 1, 0, 0, 0, 1, r, r, r;
  return {[p](const EVector&) { return p; }, train, top};
}

TEST(Averaging, HandComputedRanking) {
  auto am = fixed_probabilities({0.5, 0.3, 0.15, 0.05}, 2);
  // y = (0.5 a + 0.3 b) / 0.8 = (0.625, 0.375, 0)
  EVector y = averaged_embedding(am, EVector::Zero(1));
  EXPECT_NEAR(y[0], 0.625, 1e-15);
  EXPECT_NEAR(y[1], 0.375, 1e-15);
  SemanticMatrix cands;
  cands.class_ids = {"u", "v", "w", "z"};
  cands.Y.resize(4, 3);
  cands.Y << 1, 1, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1;
  // cosines: u 0.970, v 0.857, w 0.514, z 0
  EXPECT_EQ(averaging_classify(am, EVector::Zero(1), cands, 4), (std::vector<std::string>{"u", "v", "w", "z"}));
}

TEST(Averaging, SingleTopIsNearestNeighbour) {
  auto am = fixed_probabilities({0.1, 0.2, 0.6, 0.1}, 1);
  EVector y = averaged_embedding(am, EVector::Zero(1));
  EXPECT_TRUE(y == am.train.row(2));
}

TEST(Averaging, UniformPairIsMean) {
  auto am = fixed_probabilities({0.5, 0.5, 0, 0}, 2);
  EVector y = averaged_embedding(am, EVector::Zero(1));
  EXPECT_NEAR(y[0], 0.5, 1e-15);
  EXPECT_NEAR(y[1], 0.5, 1e-15);
}

TEST(Averaging, AllZeroProbabilities) {
  auto am = fixed_probabilities({0, 0, 0, 0}, 2);
  EXPECT_THROW(averaged_embedding(am, EVector::Zero(1)), Error);
}

TEST(Averaging, SoftmaxProbabilities) {
  BilinearModel base{Matrix::Identity(2, 2), {}, {}};
  auto train = one_hot_semantics({"a", "b"});
  auto p = softmax_probabilities(base, train)(EVector::Unit(2, 0));
  EXPECT_NEAR(p[0], std::exp(1.0) / (std::exp(1.0) + 1), 1e-12);
  EXPECT_NEAR(p[0] + p[1], 1.0, 1e-12);
}

TEST(ModelFile, RoundTripRescore) {
  auto p = synthetic(30, 6, 3, 4, 9);
  auto m = fit_closed_form(p.ts, p.s, 1, 1);
  m.metadata["seed"] = "42";
  std::stringstream buf;
  save_model(m, buf);
  auto back = load_model(buf);
  EXPECT_EQ(back.metadata, m.metadata);
  // Weights are stored as float32; rescoring matches the float-rounded model.
  Matrix rounded = m.W.cast<float>().cast<double>();
  EXPECT_TRUE(back.W == rounded);
  for (Eigen::Index n = 0; n < p.ts.X.cols(); ++n) {
    EXPECT_EQ(classify(back, p.ts.X.col(n), p.s, 3), classify(BilinearModel{rounded, {}, {}}, p.ts.X.col(n), p.s, 3));
  }
  std::stringstream again;
  save_model(back, again);
  buf.clear();
  buf.seekg(0);
  std::stringstream first;
  save_model(m, first);
  EXPECT_EQ(again.str(), first.str());
}

TEST(ModelFile, BadMagic) {
  std::istringstream in("ZSBF....");
  EXPECT_THROW(load_model(in), Error);
}

}  // namespace
}  // namespace zsbench
