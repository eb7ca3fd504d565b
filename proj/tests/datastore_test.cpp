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

#include "zsbench/datastore.hpp"

#include <gtest/gtest.h>

#include <map>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "support.hpp"

namespace zsbench {
namespace {

using testing::blobs;
using testing::ConstantWrong;
using testing::flat;
using testing::OracleClassifier;
using testing::replay;

TEST(FeatureFile, MinimalText) {
  std::istringstream in("img1\tzebra\t0.5,1,2\nimg2\thorse\t-1,0,3e2\n");
  auto m = load_features(in);
  EXPECT_EQ(m.size(), 2u);
  EXPECT_EQ(m.dim(), 3u);
  EXPECT_EQ(m.row(1).feature[2], 300.0f);
  EXPECT_EQ(m.population("zebra"), 1u);
}

TEST(FeatureFile, ShortRowIsDimensionError) {
  std::istringstream in("img1\tzebra\t0.5,1,2\nimg2\thorse\t-1,0\n");
  try {
    load_features(in, "f.tsv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("f.tsv:2"), std::string::npos) << e.what();
  }
  std::istringstream dup("img1\tzebra\t1\nimg1\thorse\t2\n");
  EXPECT_THROW(load_features(dup), Error);
}

TEST(FeatureFile, BinaryRoundTrip) {
  auto m = blobs(5, 7, 1.0, 3, 13);
  std::stringstream bin;
  save_features_binary(m, bin);
  auto back = load_features(bin);
  EXPECT_EQ(back, m);

  std::stringstream text;
  save_features_text(m, text);
  EXPECT_EQ(load_features(text), m);
}

TEST(FeatureFile, TruncatedBinary) {
  auto m = blobs(2, 2, 1.0, 3);
  std::stringstream bin;
  save_features_binary(m, bin);
  auto s = bin.str();
  std::istringstream cut(s.substr(0, s.size() - 3));
  EXPECT_THROW(load_features(cut), Error);
}

TEST(FeatureMatrix, UnknownClassesReported) {
  auto t = flat(2);
  FeatureMatrix m(1);
  m.add({"a", "c0", {1}});
  m.add({"b", "c9", {1}});
  m.add({"c", "c8", {1}});
  EXPECT_EQ(unknown_class_rows(m, t), (std::vector<std::string>{"b", "c"}));
}

TEST(PopulationFilter, StrictBoundary) {
  FeatureMatrix m(1);
  for (int i = 0; i < 301; ++i) m.add({"a" + std::to_string(i), "a", {0}});
  for (int i = 0; i < 300; ++i) m.add({"b" + std::to_string(i), "b", {0}});
  EXPECT_EQ(population_filter(m, 300), ClassSet{"a"});
}

TEST(PopulationFilter, PlantedPopulations) {
  FeatureMatrix m(1);
  for (auto [c, n] : std::vector<std::pair<std::string, int>>{{"p5", 5}, {"p50", 50}, {"p500", 500}}) {
    for (int i = 0; i < n; ++i) m.add({c + "_" + std::to_string(i), c, {0}});
  }
  EXPECT_EQ(population_filter(m, 100), ClassSet{"p500"});
  ClassSet prev = population_filter(m, 0);
  for (std::size_t t : {1, 5, 49, 50, 499, 500}) {
    auto cur = population_filter(m, t);
    for (const auto& c : cur) EXPECT_TRUE(prev.count(c));
    prev = cur;
  }
  EXPECT_TRUE(prev.empty());
}

ClassSet all_classes(const FeatureMatrix& m) {
  ClassSet out;
  for (const auto& [c, rows] : m.class_rows()) out.insert(c);
  return out;
}

void expect_partition(const FeatureMatrix& m, const QualitySet& q) {
  std::size_t seen = 0;
  for (const auto& r : m.rows()) {
    const bool a = q.accepted.count(r.image_id), b = q.rejected.count(r.image_id);
    EXPECT_NE(a, b) << r.image_id;
    seen += a || b;
  }
  EXPECT_EQ(seen, m.size());
  EXPECT_EQ(q.round_of.size(), m.size());
}

TEST(QualitySelection, OracleAcceptsEverything) {
  auto m = blobs(10, 40, 1.0, 5);
  auto t = flat(10);
  OracleClassifier clf(m);
  auto q = select_quality_samples(m, t, clf, all_classes(m), 4, 10, 1);
  EXPECT_EQ(q.accepted.size(), m.size());
  EXPECT_TRUE(q.rejected.empty());
  expect_partition(m, q);

  // Idempotent: rerunning on the accepted rows accepts them all again.
  FeatureMatrix kept(m.dim());
  for (const auto& r : m.rows()) {
    if (q.accepted.count(r.image_id)) kept.add(r);
  }
  auto again = select_quality_samples(kept, t, clf, all_classes(kept), 4, 10, 2);
  EXPECT_EQ(again.accepted, q.accepted);
}

TEST(QualitySelection, ConstantWrongRejectsEverything) {
  auto m = blobs(6, 20, 1.0, 5);
  auto t = flat(6);
  ConstantWrong clf;
  auto q = select_quality_samples(m, t, clf, all_classes(m), 3, 5, 1);
  EXPECT_TRUE(q.accepted.empty());
  EXPECT_EQ(q.rejected.size(), m.size());
}

TEST(QualitySelection, NearestMeanOnSeparableBlobs) {
  auto m = blobs(10, 60, 1.0, 21);
  auto t = flat(10);
  NearestClassMean clf;
  auto q = select_quality_samples(m, t, clf, all_classes(m), 5, 20, 7);
  expect_partition(m, q);
  EXPECT_GE(double(q.accepted.size()) / double(m.size()), 0.95);
  auto oracle = replay(m, q);
  ASSERT_EQ(oracle.size(), m.size());
  for (const auto& [id, ok] : oracle) EXPECT_EQ(q.accepted.count(id) == 1, ok) << id;
}

TEST(QualitySelection, RoundsAreAntichainsAndDeterministic) {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 10; ++rep) {
    auto t = testing::random_dag(rng, 30, 0.2);
    FeatureMatrix m(2);
    ClassSet cands;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (!t.children(static_cast<ConceptIndex>(i)).empty() && i % 5 != 0) continue;
      cands.insert(t.id(static_cast<ConceptIndex>(i)));
      for (int k = 0; k < 6; ++k) {
        m.add({t.id(static_cast<ConceptIndex>(i)) + "_" + std::to_string(k), t.id(static_cast<ConceptIndex>(i)),
               {float(i), float(k)}});
      }
    }
    NearestClassMean clf;
    auto q = select_quality_samples(m, t, clf, cands, 2, 2, rep);
    expect_partition(m, q);
    for (const auto& round : q.rounds) {
      ClassSet s(round.classes.begin(), round.classes.end());
      EXPECT_TRUE(antichain_violations(t, s).empty());
    }
    NearestClassMean clf2;
    auto q2 = select_quality_samples(m, t, clf2, cands, 2, 2, rep);
    EXPECT_EQ(q.accepted, q2.accepted);
    EXPECT_EQ(q.round_of, q2.round_of);
  }
}

TEST(QualitySelection, Errors) {
  auto m = blobs(3, 5, 1.0, 1);
  auto t = flat(3);
  NearestClassMean clf;
  EXPECT_THROW(select_quality_samples(m, t, clf, all_classes(m), 2, 5, 1), Error);  // 5 rows, n_train 5
  EXPECT_THROW(select_quality_samples(m, t, clf, all_classes(m), 4, 2, 1), Error);  // pool too small
  auto chain = testing::tree({{"c1", "c0"}, {"c2", "c1"}});
  EXPECT_THROW(select_quality_samples(m, chain, clf, all_classes(m), 2, 2, 1), Error);  // no antichain of 2
}

TEST(TestImages, ExhaustiveAndDeterministic) {
  auto m = blobs(2, 10, 1.0, 1);
  auto t = flat(2);
  OracleClassifier clf(m);
  auto q = select_quality_samples(m, t, clf, all_classes(m), 2, 3, 1);
  auto all = sample_test_images(m, q, "c0", 10, 5);
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all.size(), 10u);
  EXPECT_EQ(std::unique(all.begin(), all.end()), all.end());
  EXPECT_EQ(sample_test_images(m, q, "c1", 4, 9), sample_test_images(m, q, "c1", 4, 9));
  EXPECT_THROW(sample_test_images(m, q, "c1", 11, 9), Error);
}

TEST(TestImages, UniformOverReseededDraws) {
  auto m = blobs(1, 20, 1.0, 1);
  QualitySet q;
  for (const auto& r : m.rows()) q.accepted.insert(r.image_id);
  std::map<std::string, double> freq;
  const int draws = 10000;
  const std::size_t n = 5;
  for (int s = 0; s < draws; ++s) {
    for (const auto& id : sample_test_images(m, q, "c0", n, static_cast<std::uint64_t>(s))) freq[id] += 1;
  }
  ASSERT_EQ(freq.size(), 20u);
  const double expected = double(draws) * n / 20.0;
  double chi2 = 0;
  for (const auto& [id, f] : freq) chi2 += (f - expected) * (f - expected) / expected;
  // 19 degrees of freedom: the 0.99 quantile is 36.19.
  EXPECT_LT(chi2, 36.19);
}

}  // namespace
}  // namespace zsbench
