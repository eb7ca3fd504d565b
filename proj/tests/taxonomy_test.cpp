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

#include "zsbench/taxonomy.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <functional>
#include <random>
#include <sstream>
#include <thread>

#include "support.hpp"

namespace zsbench {
namespace {

using testing::all_pairs;
using testing::reachability;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

TEST(TaxonomyLoad, MinimalTwoNodeFile) {
  std::istringstream edges("zebra\tequine\n");
  auto t = load_taxonomy(edges);
  EXPECT_EQ(t.size(), 2u);
  EXPECT_EQ(t.edge_count(), 1u);
  EXPECT_TRUE(t.orphans().empty());
}

TEST(TaxonomyLoad, TwoCycleNamesMember) {
  std::istringstream edges("a\tb\nb\ta\n");
  try {
    load_taxonomy(edges);
    FAIL() << "cycle accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCycle);
    std::string msg = e.what();
    EXPECT_TRUE(msg.find('a') != std::string::npos || msg.find('b') != std::string::npos);
  }
}

TEST(TaxonomyLoad, LongerCycleAndSelfLoop) {
  std::istringstream three("a\tb\nb\tc\nc\ta\nd\ta\n");
  EXPECT_EQ(code_of([&] { load_taxonomy(three); }), ErrorCode::kCycle);
  std::istringstream self("a\ta\n");
  EXPECT_EQ(code_of([&] { load_taxonomy(self); }), ErrorCode::kCycle);
}

TEST(TaxonomyLoad, DanglingEndpoint) {
  std::istringstream edges("a\tb\nc\tb\n");
  std::istringstream lemmas("a\tapple\nb\tbanana\n");
  EXPECT_EQ(code_of([&] { load_taxonomy(edges, lemmas); }), ErrorCode::kDanglingEdge);
}

TEST(TaxonomyLoad, DuplicateConcept) {
  std::istringstream edges("a\tb\n");
  std::istringstream lemmas("a\tapple\nb\tbanana\na\tavocado\n");
  EXPECT_EQ(code_of([&] { load_taxonomy(edges, lemmas); }), ErrorCode::kDuplicate);
}

TEST(TaxonomyLoad, MalformedLineCarriesLocation) {
  std::istringstream edges("# header\na\tb\nbroken line\n");
  try {
    load_taxonomy(edges, "edges.tsv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    EXPECT_NE(std::string(e.what()).find("edges.tsv:3"), std::string::npos) << e.what();
  }
}

TEST(TaxonomyLoad, LemmasNormalized) {
  std::istringstream edges("n1\tn0\n");
  std::istringstream lemmas("n0\tChair of State, throne\nn1\tseat\n");
  auto t = load_taxonomy(edges, lemmas);
  auto& c = t.concept_at(t.index_of("n0"));
  ASSERT_EQ(c.lemmas.size(), 2u);
  EXPECT_EQ(c.lemmas[0], "chair_of_state");
  EXPECT_EQ(c.lemmas[1], "throne");
}

TEST(TaxonomyLoad, OrphansReported) {
  std::istringstream edges("a\troot\nb\troot\nx\ty\n");
  auto t = load_taxonomy(edges);
  EXPECT_EQ(t.component_count(), 2u);
  EXPECT_EQ(t.orphans(), (std::vector<std::string>{"x", "y"}));
  EXPECT_EQ(code_of([&] { t.distance("a", "x"); }), ErrorCode::kDisconnected);
}

TEST(TaxonomyLoad, SerializeRoundTrip) {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    auto t = testing::random_dag(rng, 30);
    std::ostringstream e, l;
    serialize(t, e, l);
    std::istringstream ei(e.str()), li(l.str());
    auto u = load_taxonomy(ei, li);
    EXPECT_EQ(u.concepts(), t.concepts());
    auto a = t.edges(), b = u.edges();
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, b);
  }
}

TEST(Distance, ToyExample) {
  auto t = testing::toy();
  EXPECT_EQ(distance(t, "zebra", "horse"), 2);
  EXPECT_EQ(distance(t, "zebra", "pc_laptop"), 4);
  EXPECT_EQ(distance(t, "pc_laptop", "tv_monitor"), 2);
  EXPECT_EQ(distance(t, "zebra", "zebra"), 0);
  EXPECT_EQ(code_of([&] { distance(t, "zebra", "okapi"); }), ErrorCode::kUnknownId);
}

TEST(Distance, MultiParentTakesShortestPath) {
  // d has two parents; the path through b is shorter.
  auto t = testing::tree({{"a", "r"}, {"b", "r"}, {"c", "a"}, {"d", "c"}, {"d", "b"}, {"e", "b"}});
  EXPECT_EQ(distance(t, "d", "e"), 2);
  EXPECT_EQ(distance(t, "d", "a"), 2);
}

TEST(Distance, MetricAxiomsOnRandomDags) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 40; ++rep) {
    auto t = testing::random_dag(rng, 5 + rep % 46);
    auto oracle = all_pairs(t);
    const auto n = t.size();
    for (ConceptIndex a = 0; a < n; ++a) {
      for (ConceptIndex b = 0; b < n; ++b) {
        const auto d = t.distance(a, b);
        ASSERT_EQ(d, oracle[a][b]);
        ASSERT_EQ(d, t.distance(b, a));
        ASSERT_EQ(d == 0, a == b);
        for (ConceptIndex c = 0; c < n; ++c) ASSERT_LE(d, t.distance(a, c) + t.distance(c, b));
      }
    }
  }
}

TEST(Distance, SmallCacheStillCorrect) {
  std::mt19937_64 rng(5);
  auto base = testing::random_dag(rng, 40);
  auto t = Taxonomy::build(base.concepts(), base.edges(), /*bfs_cache_capacity=*/2);
  auto oracle = all_pairs(t);
  for (ConceptIndex a = 0; a < t.size(); ++a) {
    for (ConceptIndex b = 0; b < t.size(); ++b) ASSERT_EQ(t.distance(a, b), oracle[a][b]);
  }
}

TEST(Distance, ConcurrentReaders) {
  std::mt19937_64 rng(9);
  auto t = testing::random_dag(rng, 50);
  auto oracle = all_pairs(t);
  std::vector<std::thread> pool;
  std::atomic<int> mismatches{0};
  for (int w = 0; w < 4; ++w) {
    pool.emplace_back([&, w] {
      for (int rep = 0; rep < 20; ++rep) {
        for (ConceptIndex a = w; a < t.size(); a += 4) {
          for (ConceptIndex b = 0; b < t.size(); ++b) {
            if (t.distance(a, b) != oracle[a][b]) ++mismatches;
          }
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  EXPECT_EQ(mismatches.load(), 0);
}

TEST(Ancestry, BirdFragment) {
  auto t = testing::birds();
  EXPECT_TRUE(is_strict_ancestor(t, "bird", "cathartid"));
  EXPECT_TRUE(is_strict_ancestor(t, "raptor", "cathartid"));
  EXPECT_FALSE(is_strict_ancestor(t, "cathartid", "bird"));
  EXPECT_FALSE(is_strict_ancestor(t, "hawk", "cathartid"));
  EXPECT_FALSE(is_strict_ancestor(t, "bird", "bird"));
}

TEST(Ancestry, MatchesClosureOracle) {
  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 60; ++rep) {
    auto t = testing::random_dag(rng, 2 + rep % 49, 0.3);
    auto reach = reachability(t);
    for (ConceptIndex a = 0; a < t.size(); ++a) {
      std::vector<ConceptIndex> anc;
      for (ConceptIndex b = 0; b < t.size(); ++b) {
        ASSERT_EQ(t.is_strict_ancestor(b, a), bool(reach[a][b]));
        if (reach[a][b]) anc.push_back(b);
      }
      ASSERT_EQ(t.ancestors(a), anc);
    }
  }
}

TEST(HopSplit, ChainByHand) {
  std::vector<std::pair<std::string, std::string>> chain;
  for (int i = 1; i < 10; ++i) chain.push_back({"n" + std::to_string(i), "n" + std::to_string(i - 1)});
  auto t = testing::tree(chain);
  EXPECT_EQ(hop_split(t, {"n0"}, 2), (ClassSet{"n1", "n2"}));
  EXPECT_EQ(hop_split(t, {"n0"}, 1), (ClassSet{"n1"}));
  EXPECT_EQ(hop_split(t, {"n4"}, 1), (ClassSet{"n3", "n5"}));
  EXPECT_EQ(hop_split(t, {"n0"}, 100), non_training(t, {"n0"}));
}

TEST(HopSplit, Errors) {
  auto t = testing::toy();
  EXPECT_EQ(code_of([&] { hop_split(t, {}, 1); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { hop_split(t, {"horse"}, 0); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { hop_split(t, {"okapi"}, 1); }), ErrorCode::kUnknownId);
}

TEST(HopSplit, MonotoneAndDisjointFromTrain) {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 50; ++rep) {
    auto t = testing::random_dag(rng, 40);
    ClassSet train;
    for (int i = 0; i < 4; ++i) train.insert(t.id(rng() % t.size()));
    auto oracle = all_pairs(t);
    ClassSet prev;
    for (int k = 1; k <= 6; ++k) {
      auto s = hop_split(t, train, k);
      for (const auto& c : prev) ASSERT_TRUE(s.count(c));
      for (const auto& c : train) ASSERT_FALSE(s.count(c));
      for (ConceptIndex i = 0; i < t.size(); ++i) {
        int best = 1 << 20;
        for (const auto& tr : train) best = std::min(best, oracle[i][t.index_of(tr)]);
        ASSERT_EQ(s.count(t.id(i)) == 1, best > 0 && best <= k);
      }
      prev = std::move(s);
    }
  }
}

TEST(Antichain, BirdFragment) {
  auto t = testing::birds();
  auto v = antichain_violations(t, {"raptor", "cathartid"});
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].ancestor, "raptor");
  EXPECT_EQ(v[0].descendant, "cathartid");
  EXPECT_TRUE(antichain_violations(t, {"cathartid", "aegypiidae", "buzzard"}).empty());
}

TEST(Antichain, MatchesClosureOracle) {
  std::mt19937_64 rng(19);
  for (int rep = 0; rep < 200; ++rep) {
    auto t = testing::random_dag(rng, 25, 0.25);
    auto reach = reachability(t);
    ClassSet s;
    for (int i = 0; i < 6; ++i) s.insert(t.id(rng() % t.size()));
    std::vector<AncestorPair> expect;
    for (const auto& a : s) {
      for (const auto& d : s) {
        if (reach[t.index_of(d)][t.index_of(a)]) expect.push_back({a, d});
      }
    }
    std::sort(expect.begin(), expect.end());
    ASSERT_EQ(antichain_violations(t, s), expect);
  }
}

}  // namespace
}  // namespace zsbench
