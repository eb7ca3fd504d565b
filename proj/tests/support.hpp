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

// Shared fixtures and brute-force oracles for the test suites.

#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "zsbench/taxonomy.hpp"

namespace zsbench::testing {

inline Taxonomy tree(const std::vector<std::pair<std::string, std::string>>& child_parent,
                     std::vector<std::string> extra = {}) {
  std::vector<Concept> concepts;
  std::vector<Edge> edges;
  auto add = [&](const std::string& id) {
    for (const auto& c : concepts) {
      if (c.id == id) return;
    }
    concepts.push_back({id, {normalize_lemma(id)}});
  };
  for (const auto& [c, p] : child_parent) {
    add(p);
    add(c);
    edges.push_back({c, p});
  }
  for (const auto& id : extra) add(id);
  return Taxonomy::build(std::move(concepts), std::move(edges));
}

// Horse and Zebra share a parent, as do TV monitor and PC laptop; the two
// groups meet at the root.
inline Taxonomy toy() {
  return tree({{"equine", "entity"},
               {"horse", "equine"},
               {"zebra", "equine"},
               {"electronic", "entity"},
               {"tv_monitor", "electronic"},
               {"pc_laptop", "electronic"}});
}

// Bird fragment: raptors with vultures (old and new world) and hawks.
inline Taxonomy birds() {
  return tree({{"raptor", "bird"},
               {"vulture", "raptor"},
               {"hawk", "raptor"},
               {"cathartid", "vulture"},
               {"aegypiidae", "vulture"},
               {"buzzard", "hawk"},
               {"condor", "cathartid"}});
}

// Random DAG: node i draws parents among 0..i-1 (node 0 is the root), so the
// graph is acyclic by construction and connected.
inline Taxonomy random_dag(std::mt19937_64& rng, std::size_t n, double extra_parent = 0.15) {
  std::vector<Concept> concepts;
  std::vector<Edge> edges;
  auto name = [](std::size_t i) { return "n" + std::to_string(i); };
  std::uniform_real_distribution<double> u(0, 1);
  for (std::size_t i = 0; i < n; ++i) {
    concepts.push_back({name(i), {name(i)}});
    if (i == 0) continue;
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    edges.push_back({name(i), name(pick(rng))});
    while (u(rng) < extra_parent) edges.push_back({name(i), name(pick(rng))});
  }
  std::shuffle(concepts.begin(), concepts.end(), rng);
  return Taxonomy::build(std::move(concepts), std::move(edges));
}

// reach[a][b]: b is reachable from a by following child->parent edges (a != b).
inline std::vector<std::vector<char>> reachability(const Taxonomy& t) {
  const auto n = t.size();
  std::vector<std::vector<char>> r(n, std::vector<char>(n, 0));
  for (ConceptIndex c = 0; c < n; ++c) {
    for (auto p : t.parents(c)) r[c][p] = 1;
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!r[i][k]) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (r[k][j]) r[i][j] = 1;
      }
    }
  }
  return r;
}

// All-pairs undirected shortest paths by Floyd-Warshall; -1 if unreachable.
inline std::vector<std::vector<int>> all_pairs(const Taxonomy& t) {
  const auto n = t.size();
  const int inf = 1 << 28;
  std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 0;
  for (ConceptIndex c = 0; c < n; ++c) {
    for (auto p : t.parents(c)) d[c][p] = d[p][c] = 1;
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (d[i][k] + d[k][j] < d[i][j]) d[i][j] = d[i][k] + d[k][j];
      }
    }
  }
  for (auto& row : d) {
    for (auto& x : row) {
      if (x >= inf) x = -1;
    }
  }
  return d;
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("zsbench-test-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace zsbench::testing
