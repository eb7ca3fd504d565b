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

// Structural-bias metrics and test-split construction.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "zsbench/datastore.hpp"
#include "zsbench/error.hpp"
#include "zsbench/io.hpp"
#include "zsbench/taxonomy.hpp"

namespace zsbench {

// ---------------------------------------------------------------------------
// Structural ratio
//
// r(c) = (distance to the nearest training class) /
//        (distance to the nearest *other* test class)
// R    = mean of r(c) over the test set.

struct ClassRatio {
  double ratio = 0;
  std::int32_t train_distance = 0;
  std::int32_t test_distance = 0;
  std::string nearest_train;
  std::string nearest_test;
};

struct StructuralReport {
  std::map<std::string, ClassRatio> per_class;
  double ratio = 0;  // R
};

namespace detail {

inline std::pair<std::int32_t, std::string> nearest_in(const Taxonomy& t, ConceptIndex c, const ClassSet& set,
                                                        std::string_view exclude) {
  auto dist = t.distances_from(c);
  std::int32_t best = kUnreachable;
  std::string who;
  for (const auto& id : set) {
    if (id == exclude) continue;
    auto d = (*dist)[t.index_of(id)];
    if (d == kUnreachable) continue;
    if (best == kUnreachable || d < best) {
      best = d;
      who = id;
    }
  }
  return {best, who};
}

}  // namespace detail

inline ClassRatio structural_ratio_detail(const Taxonomy& t, std::string_view c, const ClassSet& train,
                                          const ClassSet& test) {
  if (train.empty()) fail(ErrorCode::kInvalidArgument, "structural ratio needs training classes");
  if (!test.count(std::string(c))) fail(ErrorCode::kInvalidArgument, std::string(c) + " is not a test class");
  if (test.size() < 2) fail(ErrorCode::kInvalidArgument, "structural ratio needs at least two test classes");
  auto ci = t.index_of(c);
  auto [dtr, ntr] = detail::nearest_in(t, ci, train, c);
  auto [dte, nte] = detail::nearest_in(t, ci, test, c);
  if (dtr == kUnreachable) fail(ErrorCode::kDisconnected, std::string(c) + " reaches no training class");
  if (dte == kUnreachable) fail(ErrorCode::kDisconnected, std::string(c) + " reaches no other test class");
  if (dtr == 0) fail(ErrorCode::kInvalidArgument, std::string(c) + " is also a training class");
  return {static_cast<double>(dtr) / dte, dtr, dte, ntr, nte};
}

inline double structural_ratio(const Taxonomy& t, std::string_view c, const ClassSet& train, const ClassSet& test) {
  return structural_ratio_detail(t, c, train, test).ratio;
}

inline StructuralReport structural_ratio_set(const Taxonomy& t, const ClassSet& test, const ClassSet& train) {
  if (test.size() < 2) fail(ErrorCode::kInvalidArgument, "structural ratio needs at least two test classes");
  StructuralReport out;
  double sum = 0;
  for (const auto& c : test) {
    auto r = structural_ratio_detail(t, c, train, test);
    sum += r.ratio;
    out.per_class.emplace(c, std::move(r));
  }
  out.ratio = sum / static_cast<double>(test.size());
  return out;
}

inline std::string structural_report_tsv(const StructuralReport& r) {
  std::string out = "class\tratio\ttrain_distance\tnearest_train\ttest_distance\tnearest_test\n";
  for (const auto& [c, x] : r.per_class) {
    out += c + "\t" + io::fixed(x.ratio) + "\t" + std::to_string(x.train_distance) + "\t" + x.nearest_train + "\t" +
           std::to_string(x.test_distance) + "\t" + x.nearest_test + "\n";
  }
  out += "#R\t" + io::fixed(r.ratio) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Historical hop splits

// The benchmark's historical names were off by one hop; these are the
// corrected names.
inline std::map<std::string, ClassSet> standard_splits(const Taxonomy& t, const ClassSet& train) {
  return {{"1-hop", hop_split(t, train, 1)}, {"2-hops", hop_split(t, train, 2)}, {"all", non_training(t, train)}};
}

// ---------------------------------------------------------------------------
// Candidate pool

struct PoolThresholds {
  std::uint64_t min_frequency = 500;   // keep f > min_frequency
  std::size_t min_population = 300;    // keep n > min_population
  std::size_t samples_per_class = 100; // keep accepted >= samples_per_class
};

struct PoolInputs {
  ClassSet train;
  std::optional<ClassSet> universe;              // default: every non-training concept
  std::map<std::string, std::uint64_t> frequency;  // missing -> 0
  std::map<std::string, bool> primary;             // missing -> primary
  std::map<std::string, std::size_t> population;   // missing -> 0
  std::map<std::string, std::size_t> accepted;     // missing -> 0
  Blacklist blacklist;
  PoolThresholds thresholds;
};

struct LedgerRow {
  std::string stage;
  std::size_t kept = 0;
  std::size_t dropped = 0;
  double ratio = 1.0;  // kept / survivors of the previous stage
};

struct CandidatePool {
  ClassSet classes;
  std::vector<LedgerRow> ledger;
  std::map<std::string, std::string> dropped_at;  // class -> stage
};

// Filters in order: hierarchy (training classes and their ancestors and
// descendants), frequency, polysemy, population, quality samples, blacklist.
inline CandidatePool build_candidate_pool(const Taxonomy& t, const PoolInputs& in) {
  ClassSet current = in.universe ? *in.universe : non_training(t, in.train);
  CandidatePool out;
  out.ledger.push_back({"input", current.size(), 0, 1.0});

  auto stage = [&](std::string name, auto keep) {
    ClassSet next;
    for (const auto& c : current) {
      if (keep(c)) {
        next.insert(c);
      } else {
        out.dropped_at[c] = name;
      }
    }
    LedgerRow row{std::move(name), next.size(), current.size() - next.size(),
                  current.empty() ? 0.0 : static_cast<double>(next.size()) / static_cast<double>(current.size())};
    out.ledger.push_back(std::move(row));
    current = std::move(next);
  };

  std::vector<char> related(t.size(), 0);
  for (const auto& tr : in.train) {
    auto ti = t.index_of(tr);
    related[ti] = 1;
    for (auto a : t.ancestors(ti)) related[a] = 1;
    for (auto d : t.descendants(ti)) related[d] = 1;
  }
  auto lookup = [](const auto& map, const std::string& c, auto fallback) {
    auto it = map.find(c);
    return it == map.end() ? fallback : it->second;
  };
  stage("hierarchy", [&](const std::string& c) { return !related[t.index_of(c)]; });
  stage("frequency", [&](const std::string& c) {
    return lookup(in.frequency, c, std::uint64_t{0}) > in.thresholds.min_frequency;
  });
  stage("polysemy", [&](const std::string& c) { return lookup(in.primary, c, true); });
  stage("population", [&](const std::string& c) {
    return lookup(in.population, c, std::size_t{0}) > in.thresholds.min_population;
  });
  stage("quality", [&](const std::string& c) {
    return lookup(in.accepted, c, std::size_t{0}) >= in.thresholds.samples_per_class;
  });
  stage("blacklist", [&](const std::string& c) { return !in.blacklist.count(c); });

  if (current.empty()) fail(ErrorCode::kInfeasible, "candidate pool is empty; constraints are too strict");
  out.classes = std::move(current);
  return out;
}

inline std::string ledger_tsv(const std::vector<LedgerRow>& ledger) {
  std::string out = "stage\tkept\tdropped\tratio\n";
  for (const auto& r : ledger) {
    out += r.stage + "\t" + std::to_string(r.kept) + "\t" + std::to_string(r.dropped) + "\t" + io::fixed(r.ratio, 4) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Split search

struct SwapStep {
  std::size_t iteration = 0;
  std::string removed;
  std::string added;
  double ratio = 0;  // R after the swap
};

struct SplitSpec {
  ClassSet train;
  ClassSet pool;
  ClassSet test;
  std::map<std::string, std::string> constraints;
  std::map<std::string, std::string> provenance;
  std::vector<SwapStep> trace;
  double ratio = 0;
};

struct OptimizeOptions {
  std::size_t max_swaps = 10000;  // per local-search run
  std::size_t restarts = 8;       // random feasible starts besides the greedy seed
  std::uint64_t seed = 0;
};

// Working state of the swap local search over a fixed candidate list. Keeps,
// for every member, the distance to its nearest other member and how many
// members sit at that distance, so a swap only rescans members whose nearest
// neighbour was the one removed.
class SplitSearch {
 public:
  SplitSearch(const Taxonomy& t, std::vector<std::string> candidates, const ClassSet& train)
      : ids_(std::move(candidates)), n_(ids_.size()) {
    std::vector<ConceptIndex> idx;
    for (const auto& c : ids_) idx.push_back(t.index_of(c));
    auto dtr = t.multi_source_distances(indices_of(t, train));
    train_dist_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      if (dtr[idx[i]] == kUnreachable) fail(ErrorCode::kDisconnected, ids_[i] + " reaches no training class");
      if (dtr[idx[i]] == 0) fail(ErrorCode::kInvalidArgument, ids_[i] + " is a training class");
      train_dist_[i] = dtr[idx[i]];
    }
    dist_.assign(n_ * n_, kFar);
    for (std::size_t i = 0; i < n_; ++i) {
      auto d = t.multi_source_distances(std::span<const ConceptIndex>(&idx[i], 1));
      for (std::size_t j = 0; j < n_; ++j) {
        if (d[idx[j]] != kUnreachable) dist_[i * n_ + j] = static_cast<std::uint16_t>(std::min<std::int32_t>(d[idx[j]], kFar - 1));
      }
    }
    related_.assign(n_ * n_, 0);
    std::vector<std::int64_t> pos(t.size(), -1);
    for (std::size_t i = 0; i < n_; ++i) pos[idx[i]] = static_cast<std::int64_t>(i);
    for (std::size_t i = 0; i < n_; ++i) {
      for (auto a : t.ancestors(idx[i])) {
        if (pos[a] >= 0) {
          related_[i * n_ + static_cast<std::size_t>(pos[a])] = 1;
          related_[static_cast<std::size_t>(pos[a]) * n_ + i] = 1;
        }
      }
    }
  }

  std::size_t candidate_count() const { return n_; }
  const std::string& id(std::size_t i) const { return ids_[i]; }
  std::uint16_t d(std::size_t i, std::size_t j) const { return dist_[i * n_ + j]; }
  bool related(std::size_t i, std::size_t j) const { return related_[i * n_ + j] != 0; }
  std::int32_t train_distance(std::size_t i) const { return train_dist_[i]; }
  const std::vector<std::size_t>& members() const { return members_; }

  // R of an arbitrary member set, recomputed from scratch.
  double full_ratio(const std::vector<std::size_t>& members) const {
    double sum = 0;
    for (auto j : members) {
      std::uint16_t best = kFar;
      for (auto k : members) {
        if (k != j) best = std::min(best, d(j, k));
      }
      sum += static_cast<double>(train_dist_[j]) / best;
    }
    return sum / static_cast<double>(members.size());
  }

  bool is_antichain(const std::vector<std::size_t>& members) const {
    for (std::size_t a = 0; a < members.size(); ++a) {
      for (std::size_t b = a + 1; b < members.size(); ++b) {
        if (related(members[a], members[b])) return false;
      }
    }
    return true;
  }

  void reset(std::vector<std::size_t> members) {
    members_ = std::move(members);
    in_.assign(n_, 0);
    for (auto m : members_) in_[m] = 1;
    nearest_.assign(n_, kFar);
    ties_.assign(n_, 0);
    for (auto j : members_) rescan(j, n_);
    conflicts_.assign(n_, 0);
    for (std::size_t x = 0; x < n_; ++x) {
      for (auto m : members_) conflicts_[x] += related(x, m) && x != m;
    }
    sum_ = 0;
    for (auto j : members_) sum_ += static_cast<double>(train_dist_[j]) / nearest_[j];
  }

  double ratio() const { return sum_ / static_cast<double>(members_.size()); }

  // Swap stays an antichain.
  bool feasible(std::size_t out, std::size_t in) const {
    return !in_[in] && in_[out] && conflicts_[in] - (related(in, out) ? 1 : 0) == 0;
  }

  // R after replacing member `out` with outsider `in`, without mutating.
  double ratio_after(std::size_t out, std::size_t in) const {
    double sum = 0;
    std::uint16_t in_best = kFar;
    for (auto j : members_) {
      if (j == out) continue;
      std::uint16_t nd = nearest_[j];
      if (d(j, out) == nd && ties_[j] == 1) nd = nearest_excluding(j, out);
      nd = std::min(nd, d(j, in));
      sum += static_cast<double>(train_dist_[j]) / nd;
      in_best = std::min(in_best, d(in, j));
    }
    sum += static_cast<double>(train_dist_[in]) / in_best;
    return sum / static_cast<double>(members_.size());
  }

  void apply(std::size_t out, std::size_t in) {
    for (auto& m : members_) {
      if (m == out) m = in;
    }
    in_[out] = 0;
    in_[in] = 1;
    for (std::size_t x = 0; x < n_; ++x) {
      conflicts_[x] -= related(x, out) && x != out;
      conflicts_[x] += related(x, in) && x != in;
    }
    for (auto j : members_) {
      if (j == in) continue;
      if (d(j, out) == nearest_[j] && --ties_[j] == 0) {
        rescan(j, n_);
        continue;
      }
      if (d(j, in) < nearest_[j]) {
        nearest_[j] = d(j, in);
        ties_[j] = 1;
      } else if (d(j, in) == nearest_[j]) {
        ++ties_[j];
      }
    }
    rescan(in, n_);
    sum_ = 0;
    for (auto j : members_) sum_ += static_cast<double>(train_dist_[j]) / nearest_[j];
  }

 private:
  static constexpr std::uint16_t kFar = std::numeric_limits<std::uint16_t>::max();

  std::uint16_t nearest_excluding(std::size_t j, std::size_t excluded) const {
    std::uint16_t best = kFar;
    for (auto k : members_) {
      if (k != j && k != excluded) best = std::min(best, d(j, k));
    }
    return best;
  }

  void rescan(std::size_t j, std::size_t excluded) {
    std::uint16_t best = kFar;
    std::uint32_t count = 0;
    for (auto k : members_) {
      if (k == j || k == excluded) continue;
      auto dk = d(j, k);
      if (dk < best) {
        best = dk;
        count = 1;
      } else if (dk == best) {
        ++count;
      }
    }
    nearest_[j] = best;
    ties_[j] = count;
  }

  std::vector<std::string> ids_;
  std::size_t n_;
  std::vector<std::int32_t> train_dist_;
  std::vector<std::uint16_t> dist_;
  std::vector<char> related_;
  std::vector<std::size_t> members_;
  std::vector<char> in_;
  std::vector<std::uint16_t> nearest_;
  std::vector<std::uint32_t> ties_;
  std::vector<std::uint32_t> conflicts_;
  double sum_ = 0;
};

namespace detail {

inline std::vector<std::size_t> greedy_seed(const SplitSearch& s, std::size_t size) {
  std::vector<std::size_t> order(s.candidate_count());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    if (s.train_distance(a) != s.train_distance(b)) return s.train_distance(a) > s.train_distance(b);
    return s.id(a) < s.id(b);
  });
  std::vector<std::size_t> chosen;
  for (auto c : order) {
    if (chosen.size() == size) break;
    bool ok = std::none_of(chosen.begin(), chosen.end(), [&](auto m) { return s.related(c, m); });
    if (ok) chosen.push_back(c);
  }
  return chosen;
}

inline std::vector<std::size_t> random_seed(const SplitSearch& s, std::size_t size, std::mt19937_64& rng) {
  std::vector<std::size_t> order(s.candidate_count());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> chosen;
  for (auto c : order) {
    if (chosen.size() == size) break;
    bool ok = std::none_of(chosen.begin(), chosen.end(), [&](auto m) { return s.related(c, m); });
    if (ok) chosen.push_back(c);
  }
  return chosen;
}

// First-improvement swap search; scan order is reshuffled every pass.
inline std::vector<SwapStep> local_search(SplitSearch& s, std::size_t max_swaps, std::mt19937_64& rng) {
  std::vector<SwapStep> trace;
  const auto n = s.candidate_count();
  std::vector<std::size_t> outsiders_order(n);
  std::iota(outsiders_order.begin(), outsiders_order.end(), std::size_t{0});
  bool improved = true;
  while (improved && trace.size() < max_swaps) {
    improved = false;
    auto members = s.members();
    std::shuffle(members.begin(), members.end(), rng);
    std::shuffle(outsiders_order.begin(), outsiders_order.end(), rng);
    const double current = s.ratio();
    for (auto out : members) {
      for (auto in : outsiders_order) {
        if (!s.feasible(out, in)) continue;
        double r = s.ratio_after(out, in);
        if (r > current + 1e-12 * std::max(1.0, current)) {
          s.apply(out, in);
          trace.push_back({trace.size() + 1, s.id(out), s.id(in), s.ratio()});
          improved = true;
          break;
        }
      }
      if (improved) break;
    }
  }
  return trace;
}

}  // namespace detail

// Antichain C_te of exactly `size` pool classes with (locally) maximal R:
// greedy seed by descending distance to the training set, plus `restarts`
// random feasible seeds, each refined by first-improvement swap search. The
// best run wins; its swap trace is kept.
inline SplitSpec optimize_split(const Taxonomy& t, const ClassSet& pool, const ClassSet& train, std::size_t size,
                                const OptimizeOptions& opt = {}) {
  if (size < 2) fail(ErrorCode::kInvalidArgument, "split size must be at least 2");
  std::vector<char> related_to_train(t.size(), 0);
  for (const auto& tr : train) {
    auto ti = t.index_of(tr);
    related_to_train[ti] = 1;
    for (auto a : t.ancestors(ti)) related_to_train[a] = 1;
    for (auto d : t.descendants(ti)) related_to_train[d] = 1;
  }
  std::vector<std::string> candidates;
  for (const auto& c : pool) {
    if (!related_to_train[t.index_of(c)]) candidates.push_back(c);
  }
  if (candidates.size() < size) {
    fail(ErrorCode::kInfeasible, "only " + std::to_string(candidates.size()) + " usable candidates for a split of " +
                                     std::to_string(size));
  }
  SplitSearch search(t, candidates, train);
  std::mt19937_64 rng(opt.seed);

  SplitSpec spec;
  spec.train = train;
  spec.pool = pool;
  std::optional<std::vector<std::size_t>> best_members;
  double best_ratio = -1;
  std::vector<SwapStep> best_trace;
  std::size_t runs = 0;

  auto consider = [&](std::vector<std::size_t> seed_members) {
    if (seed_members.size() != size) return;
    ++runs;
    search.reset(std::move(seed_members));
    auto trace = candidates.size() == size ? std::vector<SwapStep>{} : detail::local_search(search, opt.max_swaps, rng);
    if (search.ratio() > best_ratio + 1e-12) {
      best_ratio = search.ratio();
      best_members = search.members();
      best_trace = std::move(trace);
    }
  };

  consider(detail::greedy_seed(search, size));
  if (candidates.size() > size) {
    for (std::size_t r = 0; r < opt.restarts; ++r) consider(detail::random_seed(search, size, rng));
  }
  if (!best_members) fail(ErrorCode::kInfeasible, "no antichain of " + std::to_string(size) + " classes found in the pool");

  for (auto m : *best_members) spec.test.insert(search.id(m));
  spec.ratio = best_ratio;
  spec.trace = std::move(best_trace);
  spec.constraints["target_size"] = std::to_string(size);
  spec.constraints["antichain"] = "self,train";
  spec.provenance["seed"] = std::to_string(opt.seed);
  spec.provenance["max_swaps"] = std::to_string(opt.max_swaps);
  spec.provenance["restarts"] = std::to_string(opt.restarts);
  spec.provenance["runs"] = std::to_string(runs);
  spec.provenance["swaps_accepted"] = std::to_string(spec.trace.size());
  spec.provenance["structural_ratio"] = io::fixed(spec.ratio);
  spec.provenance["pool_size"] = std::to_string(pool.size());
  return spec;
}

inline std::string trace_tsv(const std::vector<SwapStep>& trace) {
  std::string out = "iteration\tremoved\tadded\tratio\n";
  for (const auto& s : trace) {
    out += std::to_string(s.iteration) + "\t" + s.removed + "\t" + s.added + "\t" + io::format_double(s.ratio) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Split file: [train] / [test] sections list one class id per line;
// [constraints] / [provenance] hold key=value lines.

inline std::string format_split_spec(const SplitSpec& s) {
  std::string out = "[train]\n";
  for (const auto& c : s.train) out += c + "\n";
  out += "\n[test]\n";
  for (const auto& c : s.test) out += c + "\n";
  out += "\n[constraints]\n";
  for (const auto& [k, v] : s.constraints) out += k + "=" + v + "\n";
  out += "\n[provenance]\n";
  for (const auto& [k, v] : s.provenance) out += k + "=" + v + "\n";
  return out;
}

inline SplitSpec parse_split_spec(std::istream& in, std::string source = "<split>") {
  io::LineReader reader(in, std::move(source));
  SplitSpec s;
  std::string section;
  std::string line;
  while (reader.next(line)) {
    auto v = io::trim(line);
    if (v.empty() || v.front() == '#') continue;
    if (v.front() == '[') {
      if (v.back() != ']') reader.error("bad section header");
      section = std::string(v.substr(1, v.size() - 2));
      if (section != "train" && section != "test" && section != "constraints" && section != "provenance") {
        reader.error("unknown section [" + section + "]");
      }
      continue;
    }
    if (section == "train") {
      s.train.insert(std::string(v));
    } else if (section == "test") {
      s.test.insert(std::string(v));
    } else if (section == "constraints" || section == "provenance") {
      auto eq = v.find('=');
      if (eq == std::string_view::npos) reader.error("expected key=value");
      auto& map = section == "constraints" ? s.constraints : s.provenance;
      map[std::string(io::trim(v.substr(0, eq)))] = std::string(io::trim(v.substr(eq + 1)));
    } else {
      reader.error("line outside any section");
    }
  }
  for (const auto& c : s.test) {
    if (s.train.count(c)) fail(ErrorCode::kInvalidArgument, "class " + c + " is in both train and test");
  }
  if (auto it = s.provenance.find("structural_ratio"); it != s.provenance.end()) {
    io::parse_number(it->second, s.ratio);
  }
  return s;
}

// Class-id list: one id per line, '#' comments ignored.
inline ClassSet read_class_list(std::istream& in, std::string source = "<classes>") {
  io::LineReader reader(in, std::move(source));
  ClassSet out;
  std::string line;
  while (reader.next(line)) {
    if (io::is_blank_or_comment(line)) continue;
    auto v = io::trim(line);
    auto tab = v.find('\t');
    out.insert(std::string(v.substr(0, tab)));
  }
  return out;
}

}  // namespace zsbench
