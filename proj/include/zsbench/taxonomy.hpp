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

// Concept hierarchy: a DAG of hypernym edges (child -> parent, several
// parents allowed). Distances are undirected shortest paths; ancestry follows
// edge direction.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <deque>
#include <istream>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "zsbench/error.hpp"
#include "zsbench/io.hpp"

namespace zsbench {

using ConceptIndex = std::uint32_t;
using ClassSet = std::set<std::string>;

inline constexpr std::int32_t kUnreachable = -1;

struct Concept {
  std::string id;
  std::vector<std::string> lemmas;  // lowercase, multi-token lemmas joined by '_'

  bool operator==(const Concept&) const = default;
};

struct Edge {
  std::string child;
  std::string parent;

  auto operator<=>(const Edge&) const = default;
};

class Taxonomy {
 public:
  // Validates and indexes. Throws on duplicate ids, dangling endpoints and
  // cycles (the message names one concept on the cycle).
  static Taxonomy build(std::vector<Concept> concepts, std::vector<Edge> edges,
                        std::size_t bfs_cache_capacity = 256) {
    Taxonomy t;
    t.concepts_ = std::move(concepts);
    t.cache_ = std::make_unique<BfsCache>();
    t.cache_->capacity = bfs_cache_capacity;
    t.index_.reserve(t.concepts_.size());
    for (std::size_t i = 0; i < t.concepts_.size(); ++i) {
      const auto& c = t.concepts_[i];
      if (c.id.empty()) fail(ErrorCode::kInvalidArgument, "empty concept id");
      if (c.lemmas.empty()) fail(ErrorCode::kInvalidArgument, "concept " + c.id + " has no lemmas");
      if (!t.index_.emplace(c.id, static_cast<ConceptIndex>(i)).second) {
        fail(ErrorCode::kDuplicate, "duplicate concept id " + c.id);
      }
    }
    const auto n = t.concepts_.size();
    t.parents_.assign(n, {});
    t.children_.assign(n, {});
    for (const auto& e : edges) {
      auto c = t.find(e.child);
      auto p = t.find(e.parent);
      if (!c) fail(ErrorCode::kDanglingEdge, "edge endpoint " + e.child + " is not a concept");
      if (!p) fail(ErrorCode::kDanglingEdge, "edge endpoint " + e.parent + " is not a concept");
      if (*c == *p) fail(ErrorCode::kCycle, "self loop on " + e.child);
      auto& ps = t.parents_[*c];
      if (std::find(ps.begin(), ps.end(), *p) != ps.end()) continue;
      ps.push_back(*p);
      t.children_[*p].push_back(*c);
      ++t.edge_count_;
    }
    for (auto& v : t.parents_) std::sort(v.begin(), v.end());
    for (auto& v : t.children_) std::sort(v.begin(), v.end());
    t.check_acyclic();
    t.label_components();
    return t;
  }

  Taxonomy(Taxonomy&&) noexcept = default;
  Taxonomy& operator=(Taxonomy&&) noexcept = default;

  std::size_t size() const { return concepts_.size(); }
  std::size_t edge_count() const { return edge_count_; }
  const std::vector<Concept>& concepts() const { return concepts_; }
  const Concept& concept_at(ConceptIndex i) const { return concepts_[i]; }
  const std::string& id(ConceptIndex i) const { return concepts_[i].id; }

  std::optional<ConceptIndex> find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  ConceptIndex index_of(std::string_view id) const {
    auto i = find(id);
    if (!i) fail(ErrorCode::kUnknownId, "unknown concept " + std::string(id));
    return *i;
  }

  bool contains(std::string_view id) const { return find(id).has_value(); }

  std::span<const ConceptIndex> parents(ConceptIndex i) const { return parents_[i]; }
  std::span<const ConceptIndex> children(ConceptIndex i) const { return children_[i]; }

  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    out.reserve(edge_count_);
    for (ConceptIndex c = 0; c < size(); ++c) {
      for (auto p : parents_[c]) out.push_back({id(c), id(p)});
    }
    return out;
  }

  // Undirected connected-component label of each concept.
  std::uint32_t component(ConceptIndex i) const { return component_[i]; }
  std::uint32_t main_component() const { return main_component_; }
  std::size_t component_count() const { return component_count_; }

  // Concepts outside the component holding the root (the unique parentless
  // concept, or the largest component when there is no unique root).
  std::vector<std::string> orphans() const {
    std::vector<std::string> out;
    for (ConceptIndex i = 0; i < size(); ++i) {
      if (component_[i] != main_component_) out.push_back(id(i));
    }
    return out;
  }

  // Undirected BFS distances from `source`; memoized and safe to call from
  // concurrent readers.
  std::shared_ptr<const std::vector<std::int32_t>> distances_from(ConceptIndex source) const {
    {
      std::lock_guard lock(cache_->mutex);
      auto it = cache_->entries.find(source);
      if (it != cache_->entries.end()) return it->second;
    }
    std::vector<ConceptIndex> src{source};
    auto dist = std::make_shared<const std::vector<std::int32_t>>(multi_source_distances(src));
    std::lock_guard lock(cache_->mutex);
    if (cache_->capacity == 0) return dist;
    auto [it, inserted] = cache_->entries.emplace(source, dist);
    if (inserted) {
      cache_->order.push_back(source);
      while (cache_->order.size() > cache_->capacity) {
        cache_->entries.erase(cache_->order.front());
        cache_->order.pop_front();
      }
    }
    return it->second;
  }

  // Distance from each concept to the nearest member of `sources`.
  std::vector<std::int32_t> multi_source_distances(std::span<const ConceptIndex> sources) const {
    std::vector<std::int32_t> dist(size(), kUnreachable);
    std::vector<ConceptIndex> frontier;
    frontier.reserve(sources.size());
    for (auto s : sources) {
      if (dist[s] != 0) {
        dist[s] = 0;
        frontier.push_back(s);
      }
    }
    std::vector<ConceptIndex> next;
    std::int32_t level = 0;
    while (!frontier.empty()) {
      ++level;
      next.clear();
      for (auto u : frontier) {
        auto visit = [&](ConceptIndex v) {
          if (dist[v] == kUnreachable) {
            dist[v] = level;
            next.push_back(v);
          }
        };
        for (auto v : parents_[u]) visit(v);
        for (auto v : children_[u]) visit(v);
      }
      frontier.swap(next);
    }
    return dist;
  }

  std::int32_t distance(ConceptIndex a, ConceptIndex b) const {
    if (a == b) return 0;
    if (component_[a] != component_[b]) {
      fail(ErrorCode::kDisconnected, id(a) + " and " + id(b) + " are not connected");
    }
    return (*distances_from(a))[b];
  }

  std::int32_t distance(std::string_view a, std::string_view b) const {
    return distance(index_of(a), index_of(b));
  }

  // True iff `ancestor` is reachable from `node` via one or more child->parent edges.
  bool is_strict_ancestor(ConceptIndex ancestor, ConceptIndex node) const {
    if (ancestor == node) return false;
    std::vector<char> seen(size(), 0);
    std::vector<ConceptIndex> stack(parents_[node].begin(), parents_[node].end());
    while (!stack.empty()) {
      auto u = stack.back();
      stack.pop_back();
      if (u == ancestor) return true;
      if (seen[u]) continue;
      seen[u] = 1;
      for (auto p : parents_[u]) stack.push_back(p);
    }
    return false;
  }

  bool is_strict_ancestor(std::string_view ancestor, std::string_view node) const {
    return is_strict_ancestor(index_of(ancestor), index_of(node));
  }

  std::vector<ConceptIndex> ancestors(ConceptIndex node) const {
    return closure(node, parents_);
  }

  std::vector<ConceptIndex> descendants(ConceptIndex node) const {
    return closure(node, children_);
  }

 private:
  struct BfsCache {
    std::mutex mutex;
    std::unordered_map<ConceptIndex, std::shared_ptr<const std::vector<std::int32_t>>> entries;
    std::deque<ConceptIndex> order;
    std::size_t capacity = 256;
  };

  Taxonomy() = default;

  std::vector<ConceptIndex> closure(ConceptIndex node,
                                    const std::vector<std::vector<ConceptIndex>>& adj) const {
    std::vector<char> seen(size(), 0);
    std::vector<ConceptIndex> out;
    std::vector<ConceptIndex> stack(adj[node].begin(), adj[node].end());
    while (!stack.empty()) {
      auto u = stack.back();
      stack.pop_back();
      if (seen[u]) continue;
      seen[u] = 1;
      out.push_back(u);
      for (auto v : adj[u]) stack.push_back(v);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  void check_acyclic() const {
    // Kahn's algorithm over child->parent edges.
    const auto n = size();
    std::vector<std::size_t> pending(n);
    std::vector<ConceptIndex> ready;
    for (ConceptIndex i = 0; i < n; ++i) {
      pending[i] = parents_[i].size();
      if (pending[i] == 0) ready.push_back(i);
    }
    std::size_t done = 0;
    while (!ready.empty()) {
      auto u = ready.back();
      ready.pop_back();
      ++done;
      for (auto c : children_[u]) {
        if (--pending[c] == 0) ready.push_back(c);
      }
    }
    if (done == n) return;
    // Every leftover node has a leftover parent; walking parents must revisit.
    ConceptIndex u = 0;
    while (pending[u] == 0) ++u;
    std::vector<char> seen(n, 0);
    while (!seen[u]) {
      seen[u] = 1;
      for (auto p : parents_[u]) {
        if (pending[p] != 0) {
          u = p;
          break;
        }
      }
    }
    fail(ErrorCode::kCycle, "cycle through concept " + id(u));
  }

  void label_components() {
    const auto n = size();
    component_.assign(n, UINT32_MAX);
    std::vector<std::size_t> sizes;
    for (ConceptIndex s = 0; s < n; ++s) {
      if (component_[s] != UINT32_MAX) continue;
      const auto label = static_cast<std::uint32_t>(sizes.size());
      std::size_t count = 0;
      std::vector<ConceptIndex> stack{s};
      component_[s] = label;
      while (!stack.empty()) {
        auto u = stack.back();
        stack.pop_back();
        ++count;
        auto visit = [&](ConceptIndex v) {
          if (component_[v] == UINT32_MAX) {
            component_[v] = label;
            stack.push_back(v);
          }
        };
        for (auto v : parents_[u]) visit(v);
        for (auto v : children_[u]) visit(v);
      }
      sizes.push_back(count);
    }
    component_count_ = sizes.size();
    std::vector<ConceptIndex> roots;
    for (ConceptIndex i = 0; i < n; ++i) {
      if (parents_[i].empty()) roots.push_back(i);
    }
    if (roots.size() == 1) {
      main_component_ = component_[roots.front()];
    } else if (!sizes.empty()) {
      main_component_ = static_cast<std::uint32_t>(
          std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    }
  }

  std::vector<Concept> concepts_;
  std::unordered_map<std::string, ConceptIndex> index_;
  std::vector<std::vector<ConceptIndex>> parents_;
  std::vector<std::vector<ConceptIndex>> children_;
  std::vector<std::uint32_t> component_;
  std::uint32_t main_component_ = 0;
  std::size_t component_count_ = 0;
  std::size_t edge_count_ = 0;
  std::unique_ptr<BfsCache> cache_;
};

// ---------------------------------------------------------------------------
// File formats
//
// Edge file:   "child_id<TAB>parent_id" per line, '#' comment lines ignored.
// Lemma file:  "concept_id<TAB>lemma1,lemma2,...".

inline std::string normalize_lemma(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (char c : io::trim(raw)) {
    if (c == ' ') {
      out.push_back('_');
    } else {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  return out;
}

inline std::vector<Edge> read_edges(std::istream& in, std::string source = "<edges>") {
  std::vector<Edge> edges;
  io::LineReader reader(in, std::move(source));
  std::string line;
  while (reader.next(line)) {
    if (io::is_blank_or_comment(line)) continue;
    auto fields = io::split(io::trim(line), '\t');
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      reader.error("expected child_id<TAB>parent_id");
    }
    edges.push_back({std::string(fields[0]), std::string(fields[1])});
  }
  return edges;
}

inline std::vector<Concept> read_lemmas(std::istream& in, std::string source = "<lemmas>") {
  std::vector<Concept> concepts;
  io::LineReader reader(in, std::move(source));
  std::string line;
  while (reader.next(line)) {
    if (io::is_blank_or_comment(line)) continue;
    auto fields = io::split(io::trim(line), '\t');
    if (fields.size() != 2 || fields[0].empty()) reader.error("expected concept_id<TAB>lemmas");
    Concept c{std::string(fields[0]), {}};
    for (auto lemma : io::split(fields[1], ',')) {
      auto norm = normalize_lemma(lemma);
      if (!norm.empty()) c.lemmas.push_back(std::move(norm));
    }
    if (c.lemmas.empty()) reader.error("concept " + c.id + " has no lemmas");
    concepts.push_back(std::move(c));
  }
  return concepts;
}

// Builds from an edge list and a lemma list. Every edge endpoint must appear
// in the lemma list.
inline Taxonomy load_taxonomy(std::istream& edges, std::istream& lemmas,
                              std::string edge_source = "<edges>",
                              std::string lemma_source = "<lemmas>") {
  auto e = read_edges(edges, std::move(edge_source));
  auto c = read_lemmas(lemmas, std::move(lemma_source));
  return Taxonomy::build(std::move(c), std::move(e));
}

// Edge-only variant: concepts are implied by edge endpoints (first-seen
// order) and labelled with their own id.
inline Taxonomy load_taxonomy(std::istream& edges, std::string edge_source = "<edges>") {
  auto e = read_edges(edges, std::move(edge_source));
  std::vector<Concept> concepts;
  std::unordered_map<std::string, bool> seen;
  auto add = [&](const std::string& id) {
    if (seen.emplace(id, true).second) concepts.push_back({id, {normalize_lemma(id)}});
  };
  for (const auto& edge : e) {
    add(edge.child);
    add(edge.parent);
  }
  return Taxonomy::build(std::move(concepts), std::move(e));
}

inline void serialize(const Taxonomy& t, std::ostream& edges, std::ostream& lemmas) {
  for (const auto& e : t.edges()) edges << e.child << '\t' << e.parent << '\n';
  for (const auto& c : t.concepts()) {
    lemmas << c.id << '\t';
    for (std::size_t i = 0; i < c.lemmas.size(); ++i) {
      if (i) lemmas << ',';
      lemmas << c.lemmas[i];
    }
    lemmas << '\n';
  }
}

// ---------------------------------------------------------------------------
// Queries over concept ids

inline std::int32_t distance(const Taxonomy& t, std::string_view a, std::string_view b) {
  return t.distance(a, b);
}

inline bool is_strict_ancestor(const Taxonomy& t, std::string_view a, std::string_view b) {
  return t.is_strict_ancestor(a, b);
}

inline std::vector<ConceptIndex> indices_of(const Taxonomy& t, const ClassSet& ids) {
  std::vector<ConceptIndex> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(t.index_of(id));
  return out;
}

// Non-training concepts within `k` undirected hops of some training concept.
// k=1 is the historical "2-hops" split, k=2 the historical "3-hops" split.
inline ClassSet hop_split(const Taxonomy& t, const ClassSet& train, int k) {
  if (train.empty()) fail(ErrorCode::kInvalidArgument, "hop_split needs a non-empty training set");
  if (k < 1) fail(ErrorCode::kInvalidArgument, "hop_split needs k >= 1");
  auto src = indices_of(t, train);
  auto dist = t.multi_source_distances(src);
  ClassSet out;
  for (ConceptIndex i = 0; i < t.size(); ++i) {
    if (dist[i] > 0 && dist[i] <= k) out.insert(t.id(i));
  }
  return out;
}

inline ClassSet non_training(const Taxonomy& t, const ClassSet& train) {
  ClassSet out;
  for (const auto& c : t.concepts()) {
    if (!train.count(c.id)) out.insert(c.id);
  }
  return out;
}

struct AncestorPair {
  std::string ancestor;
  std::string descendant;

  auto operator<=>(const AncestorPair&) const = default;
};

// Every (ancestor, descendant) pair inside `s`; empty iff `s` is an antichain.
inline std::vector<AncestorPair> antichain_violations(const Taxonomy& t, const ClassSet& s) {
  std::vector<char> member(t.size(), 0);
  for (auto i : indices_of(t, s)) member[i] = 1;
  std::vector<AncestorPair> out;
  for (const auto& id : s) {
    for (auto a : t.ancestors(t.index_of(id))) {
      if (member[a]) out.push_back({t.id(a), id});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace zsbench
