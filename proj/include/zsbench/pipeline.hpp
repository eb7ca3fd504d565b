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

// Command implementations behind the zsbench CLI. Each command reads its
// inputs through RunConfig, queues every output in a Session, and commits
// them together: existing files are refused up front unless forced, then each
// file is written atomically. Outputs carry the config hash and seed.

#include <algorithm>
#include <filesystem>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "zsbench/config.hpp"
#include "zsbench/datastore.hpp"
#include "zsbench/error.hpp"
#include "zsbench/eval.hpp"
#include "zsbench/io.hpp"
#include "zsbench/models.hpp"
#include "zsbench/semantics.hpp"
#include "zsbench/splitbuilder.hpp"
#include "zsbench/synthetic.hpp"
#include "zsbench/taxonomy.hpp"

namespace zsbench::pipeline {

// 0 ok, 1 bad or inconsistent data, 2 usage/config error, 3 file system error.
inline int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return 2;
    case ErrorCode::kIo: return 3;
    default: return 1;
  }
}

class Session {
 public:
  Session(RunConfig cfg, bool force, std::ostream& out, std::ostream& err)
      : cfg_(std::move(cfg)), force_(force), out_(out), err_(err) {}

  const RunConfig& cfg() const { return cfg_; }
  std::ostream& out() { return out_; }

  void warn(const std::string& message) {
    ++warnings_;
    err_ << "warning: " << message << '\n';
  }
  std::size_t warnings() const { return warnings_; }

  void emit(std::string name, std::string payload) { pending_.emplace_back(std::move(name), std::move(payload)); }

  std::vector<std::filesystem::path> commit() {
    std::vector<std::filesystem::path> paths;
    for (const auto& [name, payload] : pending_) paths.push_back(cfg_.out_dir() / name);
    if (!force_) {
      for (const auto& p : paths) {
        if (std::filesystem::exists(p)) fail(ErrorCode::kIo, p.string() + " exists (use --force to overwrite)");
      }
    }
    for (std::size_t i = 0; i < paths.size(); ++i) io::write_atomic(paths[i], pending_[i].second, true);
    pending_.clear();
    for (const auto& p : paths) out_ << "wrote " << p.string() << '\n';
    return paths;
  }

 private:
  RunConfig cfg_;
  bool force_;
  std::ostream& out_;
  std::ostream& err_;
  std::size_t warnings_ = 0;
  std::vector<std::pair<std::string, std::string>> pending_;
};

// ---------------------------------------------------------------------------
// Input loading

inline Taxonomy taxonomy_from(const RunConfig& cfg, std::string_view cmd) {
  auto ep = cfg.require_path("paths.taxonomy", cmd);
  auto edges = io::open_input(ep);
  if (auto lp = cfg.path("paths.lemmas")) {
    auto lemmas = io::open_input(*lp);
    return load_taxonomy(edges, lemmas, ep.string(), lp->string());
  }
  return load_taxonomy(edges, ep.string());
}

inline EmbeddingTable embeddings_from(const RunConfig& cfg, const std::string& key, std::string_view cmd) {
  auto p = cfg.require_path(key, cmd);
  auto in = io::open_input(p);
  return load_embeddings(in, p.string());
}

inline FrequencyTable frequencies_from(const RunConfig& cfg, std::string_view cmd) {
  auto p = cfg.require_path("paths.frequencies", cmd);
  auto in = io::open_input(p);
  return load_frequencies(in, p.string());
}

inline FeatureMatrix features_from(const RunConfig& cfg, std::string_view cmd) {
  auto m = load_features_file(cfg.require_path("paths.features", cmd));
  if (cfg.flag("features.normalize")) m.l2_normalize_rows();
  return m;
}

inline Blacklist blacklist_from(const RunConfig& cfg) {
  auto p = cfg.path("paths.blacklist");
  if (!p) return {};
  auto in = io::open_input(*p);
  return load_blacklist(in, p->string());
}

inline ClassSet class_list_from(const std::filesystem::path& p) {
  auto in = io::open_input(p);
  return read_class_list(in, p.string());
}

inline SplitSpec split_from(const RunConfig& cfg, std::string_view cmd) {
  auto p = cfg.require_path("paths.split", cmd);
  auto in = io::open_input(p);
  return parse_split_spec(in, p.string());
}

inline void check_known(const Taxonomy& t, const ClassSet& ids, std::string_view what) {
  for (const auto& c : ids) {
    if (!t.contains(c)) fail(ErrorCode::kUnknownId, std::string(what) + " class " + c + " is not in the taxonomy");
  }
}

inline ClassSet training_classes(const RunConfig& cfg, const Taxonomy& t, std::string_view cmd) {
  ClassSet out;
  if (auto p = cfg.path("paths.train")) {
    out = class_list_from(*p);
  } else if (cfg.has("paths.split")) {
    out = split_from(cfg, cmd).train;
  } else {
    fail(ErrorCode::kInvalidArgument, std::string(cmd) + " needs paths.train or paths.split");
  }
  if (out.empty()) fail(ErrorCode::kInvalidArgument, "training class list is empty");
  check_known(t, out, "training");
  return out;
}

inline std::string test_split_name(const RunConfig& cfg) {
  return cfg.has("paths.test") ? "list" : cfg.get("eval.split");
}

inline ClassSet test_classes(const RunConfig& cfg, const Taxonomy& t, const ClassSet& train, std::string_view cmd) {
  ClassSet out;
  const auto& which = cfg.get("eval.split");
  if (auto p = cfg.path("paths.test")) {
    out = class_list_from(*p);
  } else if (which == "split") {
    out = split_from(cfg, cmd).test;
  } else if (which == "1-hop" || which == "2-hops" || which == "all") {
    out = standard_splits(t, train).at(which);
  } else {
    fail(ErrorCode::kInvalidArgument, "eval.split must be split, 1-hop, 2-hops or all (got '" + which + "')");
  }
  if (out.empty()) fail(ErrorCode::kInvalidArgument, "test class list is empty");
  check_known(t, out, "test");
  for (const auto& c : out) {
    if (train.count(c)) fail(ErrorCode::kInvalidArgument, "class " + c + " is both training and test");
  }
  return out;
}

// Class semantic rows: a class-keyed table when given, word embeddings otherwise.
inline SemanticMatrix semantics_for(const RunConfig& cfg, const Taxonomy& t, const std::vector<std::string>& ids,
                                    std::string_view cmd) {
  if (cfg.has("paths.class_embeddings")) {
    return from_embedding_table(embeddings_from(cfg, "paths.class_embeddings", cmd), ids);
  }
  return build_semantic_matrix(t, ids, embeddings_from(cfg, "paths.embeddings", cmd));
}

// ---------------------------------------------------------------------------
// Per-image quality verdicts: "image_id<TAB>accepted|rejected<TAB>round"

inline std::string format_quality(const FeatureMatrix& m, const QualitySet& q) {
  std::string out = "image_id\tverdict\tround\n";
  for (const auto& r : m.rows()) {
    auto it = q.round_of.find(r.image_id);
    if (it == q.round_of.end()) continue;
    out += r.image_id + (q.accepted.count(r.image_id) ? "\taccepted\t" : "\trejected\t") +
           std::to_string(it->second) + "\n";
  }
  return out;
}

inline QualitySet load_quality(std::istream& in, std::string source = "<quality>") {
  io::LineReader reader(in, std::move(source));
  QualitySet q;
  std::string line;
  bool header = true;
  while (reader.next(line)) {
    if (io::is_blank_or_comment(line)) continue;
    auto f = io::split(io::trim(line), '\t');
    if (header && !f.empty() && f[0] == "image_id") {
      header = false;
      continue;
    }
    header = false;
    std::size_t round = 0;
    if (f.size() != 3 || !io::parse_number(f[2], round)) reader.error("expected image_id<TAB>verdict<TAB>round");
    std::string id(f[0]);
    if (f[1] == "accepted") {
      q.accepted.insert(id);
    } else if (f[1] == "rejected") {
      q.rejected.insert(id);
    } else {
      reader.error("verdict must be accepted or rejected");
    }
    if (!q.round_of.emplace(id, round).second) reader.error("duplicate image " + id);
  }
  return q;
}

inline QualitySet all_accepted(const FeatureMatrix& m) {
  QualitySet q;
  for (const auto& r : m.rows()) q.accepted.insert(r.image_id);
  return q;
}

inline QualitySet quality_from(const RunConfig& cfg, const FeatureMatrix& m) {
  auto p = cfg.path("paths.quality");
  if (!p) return all_accepted(m);
  auto in = io::open_input(*p);
  return load_quality(in, p->string());
}

// `n` accepted images per class (0 = every accepted image), in class order.
inline std::vector<TestSample> draw_samples(const RunConfig& cfg, const FeatureMatrix& m, const QualitySet& q,
                                            const std::vector<std::string>& classes, std::size_t n) {
  std::vector<TestSample> out;
  for (const auto& c : classes) {
    std::vector<std::string> ids;
    if (n == 0) {
      auto it = m.class_rows().find(c);
      if (it != m.class_rows().end()) {
        for (auto i : it->second) {
          if (q.accepted.count(m.row(i).image_id)) ids.push_back(m.row(i).image_id);
        }
      }
      if (ids.empty()) fail(ErrorCode::kInfeasible, "class " + c + " has no accepted images");
    } else {
      ids = sample_test_images(m, q, c, n, cfg.derive_seed("test:" + c));
    }
    for (const auto& id : ids) out.push_back({to_eigen(m.row(*m.find(id)).feature), c});
  }
  return out;
}

inline Setting setting_from(const std::string& s) {
  if (s == "zsl") return Setting::kStandard;
  if (s == "gzsl") return Setting::kGeneralized;
  fail(ErrorCode::kInvalidArgument, "eval.setting must be zsl or gzsl (got '" + s + "')");
}

inline Averaging averaging_from(const std::string& s) {
  if (s == "macro") return Averaging::kMacro;
  if (s == "micro") return Averaging::kMicro;
  fail(ErrorCode::kInvalidArgument, "eval.averaging must be macro or micro (got '" + s + "')");
}

inline std::string join(const std::vector<std::string>& xs, char sep) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += sep;
    out += xs[i];
  }
  return out;
}

inline std::vector<std::string> sorted(const ClassSet& s) { return {s.begin(), s.end()}; }

// ---------------------------------------------------------------------------
// Models

// paths.model, or the model a previous train run left in the output directory.
inline BilinearModel model_from(const RunConfig& cfg, std::string_view cmd) {
  auto fallback = cfg.out_dir() / "model.zsbw";
  auto p = !cfg.has("paths.model") && std::filesystem::exists(fallback) ? fallback : cfg.require_path("paths.model", cmd);
  auto in = io::open_input(p, true);
  return load_model(in);
}

// Training classes the model was fitted on, in fitting order.
inline std::vector<std::string> model_train_classes(const BilinearModel& m, const ClassSet& fallback) {
  auto it = m.metadata.find("train_classes");
  if (it == m.metadata.end() || it->second.empty()) return sorted(fallback);
  std::vector<std::string> out;
  for (auto part : io::split(it->second, ',')) out.emplace_back(part);
  return out;
}

inline ScoreFn make_scorer(const RunConfig& cfg, const Taxonomy& t, const BilinearModel& model,
                           const std::vector<std::string>& train_ids, const SemanticMatrix& candidates,
                           std::string_view cmd) {
  auto kind = model.metadata.count("kind") ? model.metadata.at("kind") : std::string("closed-form");
  if (kind != "averaging") return bilinear_scorer(model, candidates);
  auto train = semantics_for(cfg, t, train_ids, cmd);
  double temperature = 1;
  std::size_t top = 10;
  io::parse_number(model.metadata.count("T") ? model.metadata.at("T") : cfg.get("model.T"), temperature);
  io::parse_number(model.metadata.count("top") ? model.metadata.at("top") : cfg.get("model.top"), top);
  AveragingModel am{softmax_probabilities(model, train, temperature), train, top};
  return averaging_scorer(std::move(am), candidates);
}

inline void check_feature_dim(const FeatureMatrix& m, const BilinearModel& model) {
  if (static_cast<Eigen::Index>(m.dim()) != model.W.rows()) {
    fail(ErrorCode::kDimensionMismatch, "features have D=" + std::to_string(m.dim()) + " but the model expects D=" +
                                            std::to_string(model.W.rows()));
  }
}

// Top-1 accuracy on the training images, ties broken by smallest class id.
inline double training_top1(const BilinearModel& model, const TrainingSet& ts, const SemanticMatrix& s) {
  Matrix scores = s.Y * (model.W.transpose() * ts.X);
  std::size_t hits = 0;
  for (Eigen::Index n = 0; n < scores.cols(); ++n) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < s.size(); ++k) {
      auto a = scores(static_cast<Eigen::Index>(k), n), b = scores(static_cast<Eigen::Index>(best), n);
      if (a > b || (a == b && s.class_ids[k] < s.class_ids[best])) best = k;
    }
    hits += best == ts.labels[static_cast<std::size_t>(n)];
  }
  return ts.labels.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(ts.labels.size());
}

// ---------------------------------------------------------------------------
// Commands

inline void cmd_ingest(Session& s) {
  const auto& cfg = s.cfg();
  std::string report = cfg.stamp("ingest");
  auto put = [&](const std::string& k, const std::string& v) {
    report += k + " = " + v + "\n";
    s.out() << k << " = " << v << '\n';
  };
  auto t = taxonomy_from(cfg, "ingest");
  put("taxonomy.classes", std::to_string(t.size()));
  put("taxonomy.edges", std::to_string(t.edge_count()));
  put("taxonomy.components", std::to_string(t.component_count()));
  auto orphans = t.orphans();
  put("taxonomy.orphans", std::to_string(orphans.size()));
  if (!orphans.empty()) {
    s.warn(std::to_string(orphans.size()) + " concepts lie outside the root component (first: " + orphans.front() + ")");
  }
  if (cfg.has("paths.embeddings")) {
    auto e = embeddings_from(cfg, "paths.embeddings", "ingest");
    std::size_t missing = 0;
    for (const auto& c : t.concepts()) missing += lemma_vector(c.lemmas.front(), e) ? 0 : 1;
    put("embeddings.words", std::to_string(e.size()));
    put("embeddings.dim", std::to_string(e.dim()));
    put("embeddings.classes_without_vector", std::to_string(missing));
    if (missing) s.warn(std::to_string(missing) + " classes have no embedding for their label");
  }
  if (cfg.has("paths.class_embeddings")) {
    auto e = embeddings_from(cfg, "paths.class_embeddings", "ingest");
    put("class_embeddings.rows", std::to_string(e.size()));
  }
  if (cfg.has("paths.frequencies")) put("frequencies.words", std::to_string(frequencies_from(cfg, "ingest").size()));
  if (cfg.has("paths.features")) {
    auto m = features_from(cfg, "ingest");
    auto unknown = unknown_class_rows(m, t);
    put("features.rows", std::to_string(m.size()));
    put("features.dim", std::to_string(m.dim()));
    put("features.classes", std::to_string(m.class_rows().size()));
    put("features.unknown_class_rows", std::to_string(unknown.size()));
    if (!unknown.empty()) {
      s.warn(std::to_string(unknown.size()) + " feature rows reference classes outside the taxonomy (first: " +
             unknown.front() + ")");
    }
  }
  auto count_unknown = [&](const ClassSet& ids, const std::string& what) {
    std::size_t n = 0;
    for (const auto& c : ids) n += t.contains(c) ? 0 : 1;
    put(what + ".classes", std::to_string(ids.size()));
    put(what + ".unknown", std::to_string(n));
    if (n) s.warn(std::to_string(n) + " " + what + " classes are not in the taxonomy");
  };
  if (auto p = cfg.path("paths.train")) count_unknown(class_list_from(*p), "train");
  if (auto p = cfg.path("paths.test")) count_unknown(class_list_from(*p), "test");
  if (cfg.has("paths.split")) {
    auto spec = split_from(cfg, "ingest");
    count_unknown(spec.train, "split.train");
    count_unknown(spec.test, "split.test");
  }
  if (cfg.has("paths.blacklist")) {
    ClassSet ids;
    for (const auto& [c, why] : blacklist_from(cfg)) ids.insert(c);
    count_unknown(ids, "blacklist");
  }
  put("warnings", std::to_string(s.warnings()));
  s.emit("ingest.txt", report);
  s.commit();
}

inline void cmd_count_freq(Session& s) {
  const auto& cfg = s.cfg();
  auto t = taxonomy_from(cfg, "count-freq");
  std::set<std::string> vocab;
  for (const auto& c : t.concepts()) vocab.insert(c.lemmas.front());
  auto root = cfg.require_path("paths.corpus", "count-freq");
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(root)) {
    for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(root);
  }
  OccurrenceCounter counter(vocab);
  FrequencyTable table;
  for (const auto& f : files) {
    auto in = io::open_input(f, true);
    counter.feed(in);
    table = counter.finish();  // documents never share a phrase
  }
  std::ostringstream body;
  save_frequencies(table, body);
  std::size_t seen = 0;
  for (const auto& w : table.words()) seen += table.count(w) > 0;
  s.out() << "counted " << vocab.size() << " labels over " << files.size() << " files; " << seen << " occur\n";
  s.emit("frequencies.tsv", cfg.stamp("count-freq") + body.str());
  s.commit();
}

inline void cmd_hop_split(Session& s) {
  const auto& cfg = s.cfg();
  auto t = taxonomy_from(cfg, "hop-split");
  auto train = training_classes(cfg, t, "hop-split");
  auto splits = standard_splits(t, train);
  const auto cap = cfg.number<std::size_t>("split.ratio_max_classes");
  std::string summary = cfg.stamp("hop-split") + "split\tclasses\tstructural_ratio\n";
  for (const char* name : {"1-hop", "2-hops", "all"}) {
    const auto& set = splits.at(name);
    std::string ratio = "skipped";
    if (set.size() >= 2 && set.size() <= cap) ratio = io::fixed(structural_ratio_set(t, set, train).ratio);
    summary += std::string(name) + "\t" + std::to_string(set.size()) + "\t" + ratio + "\n";
    s.out() << name << ": " << set.size() << " classes, R=" << ratio << '\n';
    std::string list = cfg.stamp("hop-split");
    for (const auto& c : set) list += c + "\n";
    s.emit(std::string("hop_") + name + ".txt", list);
  }
  s.emit("hop_splits.tsv", summary);
  s.commit();
}

inline void cmd_build_split(Session& s) {
  const auto& cfg = s.cfg();
  auto t = taxonomy_from(cfg, "build-split");
  auto train = training_classes(cfg, t, "build-split");
  auto freq = frequencies_from(cfg, "build-split");
  auto e = embeddings_from(cfg, "paths.embeddings", "build-split");
  auto m = features_from(cfg, "build-split");

  PoolInputs in;
  in.train = train;
  auto universe = non_training(t, train);
  for (const auto& c : universe) {
    in.frequency[c] = freq.count(t.concept_at(t.index_of(c)).lemmas.front());
    in.population[c] = m.population(c);
  }
  auto primary = assign_primary_meanings(t, e, universe);
  in.primary = std::move(primary.primary);
  if (!primary.unresolved_words.empty()) {
    s.warn(std::to_string(primary.unresolved_words.size()) +
           " shared labels have no scorable sense; all their senses count as non-primary");
  }
  in.blacklist = blacklist_from(cfg);
  in.thresholds.min_frequency = cfg.number<std::uint64_t>("thresholds.frequency");
  in.thresholds.min_population = cfg.number<std::size_t>("thresholds.population");
  in.thresholds.samples_per_class = cfg.number<std::size_t>("thresholds.samples_per_class");

  QualitySet q;
  if (cfg.has("paths.quality")) {
    q = quality_from(cfg, m);
  } else {
    // Quality selection only runs over classes that survive the cheaper stages.
    auto pre = in;
    pre.thresholds.samples_per_class = 0;
    pre.blacklist.clear();
    auto early = build_candidate_pool(t, pre);
    NearestClassMean clf;
    q = select_quality_samples(m, t, clf, early.classes, cfg.number<std::size_t>("thresholds.quality_classes"),
                               cfg.number<std::size_t>("thresholds.quality_train"), cfg.derive_seed("quality"));
    s.out() << "quality: " << q.accepted.size() << " accepted, " << q.rejected.size() << " rejected in "
            << q.rounds.size() << " rounds\n";
    s.emit("quality.tsv", cfg.stamp("build-split") + format_quality(m, q));
  }
  for (const auto& c : universe) in.accepted[c] = q.accepted_count(m, c);

  auto pool = build_candidate_pool(t, in);
  OptimizeOptions opt;
  opt.max_swaps = cfg.number<std::size_t>("split.max_swaps");
  opt.restarts = cfg.number<std::size_t>("split.restarts");
  opt.seed = cfg.derive_seed("split");
  auto spec = optimize_split(t, pool.classes, train, cfg.number<std::size_t>("split.size"), opt);
  spec.constraints["min_frequency"] = cfg.get("thresholds.frequency");
  spec.constraints["min_population"] = cfg.get("thresholds.population");
  spec.constraints["samples_per_class"] = cfg.get("thresholds.samples_per_class");
  spec.provenance["config_hash"] = cfg.hash();
  spec.provenance["run_seed"] = cfg.get("run.seed");

  std::string pool_tsv = cfg.stamp("build-split") + "class\tstage\n";
  for (const auto& c : universe) {
    auto it = pool.dropped_at.find(c);
    pool_tsv += c + "\t" + (it == pool.dropped_at.end() ? std::string("kept") : it->second) + "\n";
  }
  const auto stamp = cfg.stamp("build-split");
  s.out() << "pool: " << pool.classes.size() << " classes; split: " << spec.test.size()
          << " classes, R=" << io::fixed(spec.ratio) << '\n';
  s.emit("split.txt", stamp + format_split_spec(spec));
  s.emit("ledger.tsv", stamp + ledger_tsv(pool.ledger));
  s.emit("pool.tsv", pool_tsv);
  s.emit("structural_report.tsv", stamp + structural_report_tsv(structural_ratio_set(t, spec.test, train)));
  s.emit("trace.tsv", stamp + trace_tsv(spec.trace));
  s.commit();
}

inline void train_trivial(Session& s, const Taxonomy& t, const ClassSet& train) {
  const auto& cfg = s.cfg();
  auto test = test_classes(cfg, t, train, "train");
  auto sm = one_hot_semantics(sorted(train));
  double sigma = 0;
  if (cfg.get("model.sigma") == "auto") {
    sigma = default_trivial_sigma(sm);
  } else {
    sigma = cfg.number<double>("model.sigma");
  }
  auto triv = build_trivial(t, sm, test, sigma, cfg.derive_seed("trivial"));
  auto table = to_embedding_table(sm.concat(triv.semantics));
  table.has_header = true;
  std::ostringstream body;
  save_embeddings(table, body);
  std::string mapping = cfg.stamp("train") + "# sigma=" + io::format_double(sigma) + "\n" +
                        "test_class\ttraining_class\tdistance\n";
  for (const auto& [c, tr] : triv.mapping) mapping += c + "\t" + tr + "\t" + std::to_string(t.distance(c, tr)) + "\n";
  s.out() << "trivial: " << test.size() << " test classes mapped onto " << train.size()
          << " one-hot training classes, sigma=" << io::format_double(sigma) << '\n';
  s.emit("trivial_embeddings.txt", body.str());
  s.emit("trivial_mapping.tsv", mapping);
  s.commit();
}

inline void cmd_train(Session& s) {
  const auto& cfg = s.cfg();
  const auto& kind = cfg.get("model.kind");
  if (kind != "closed-form" && kind != "ranking" && kind != "trivial" && kind != "averaging") {
    fail(ErrorCode::kInvalidArgument, "model.kind must be closed-form, ranking, trivial or averaging (got '" + kind + "')");
  }
  auto t = taxonomy_from(cfg, "train");
  auto train = training_classes(cfg, t, "train");
  if (kind == "trivial") return train_trivial(s, t, train);

  auto all = features_from(cfg, "train");
  FeatureMatrix m(all.dim());
  for (const auto& r : all.rows()) {
    if (train.count(r.class_id)) m.add(r);
  }
  std::vector<std::string> ids;
  for (const auto& [c, rows] : m.class_rows()) ids.push_back(c);
  if (ids.size() < train.size()) s.warn(std::to_string(train.size() - ids.size()) + " training classes have no images");
  if (ids.empty()) fail(ErrorCode::kInvalidArgument, "no training images");
  auto sm = semantics_for(cfg, t, ids, "train");
  auto ts = make_training_set(m, sm);

  BilinearModel model;
  if (kind == "ranking") {
    RankingOptions opt{.margin = cfg.number<double>("model.margin"),
                       .learning_rate = cfg.number<double>("model.lr"),
                       .epochs = cfg.number<int>("model.epochs"),
                       .seed = cfg.derive_seed("ranking")};
    model = fit_ranking(ts, sm, opt);
  } else {
    model = fit_closed_form(ts, sm, cfg.number<double>("model.gamma"), cfg.number<double>("model.lambda"));
  }
  const double acc = training_top1(model, ts, sm);
  auto& meta = model.metadata;
  meta["kind"] = kind;
  meta["config_hash"] = cfg.hash();
  meta["seed"] = cfg.get("run.seed");
  meta["train_classes"] = join(ids, ',');
  meta["training_top1"] = io::fixed(acc);
  meta["semantics"] = cfg.has("paths.class_embeddings") ? "class_embeddings" : "word_embeddings";
  if (kind == "ranking") {
    for (const char* k : {"margin", "lr", "epochs"}) meta[k] = cfg.get(std::string("model.") + k);
  } else {
    meta["gamma"] = cfg.get("model.gamma");
    meta["lambda"] = cfg.get("model.lambda");
  }
  if (kind == "averaging") {
    meta["T"] = cfg.get("model.T");
    meta["top"] = cfg.get("model.top");
  }

  std::string log = cfg.stamp("train") + "key\tvalue\n";
  log += "kind\t" + kind + "\nclasses\t" + std::to_string(ids.size()) + "\nimages\t" + std::to_string(m.size()) +
         "\ntraining_top1\t" + io::fixed(acc) + "\n";
  for (std::size_t i = 0; i < model.loss_history.size(); ++i) {
    log += "loss_epoch_" + std::to_string(i + 1) + "\t" + io::format_double(model.loss_history[i]) + "\n";
  }
  s.out() << kind << ": " << ids.size() << " classes, " << m.size() << " images, training top-1 "
          << io::fixed(100 * acc, 2) << "%\n";
  std::ostringstream bin;
  save_model(model, bin);
  s.emit("model.zsbw", bin.str());
  s.emit("train_log.tsv", log);
  s.commit();
}

struct EvalRun {
  EvalReport report;
  std::vector<std::string> candidates;
};

// Evaluates `model` on `test` (plus training images for gzsl) among the
// setting's candidate classes.
inline EvalRun run_eval(const RunConfig& cfg, const Taxonomy& t, const BilinearModel& model, const FeatureMatrix& m,
                        const QualitySet& q, const ClassSet& train, const ClassSet& test, Setting setting,
                        std::string_view cmd) {
  auto train_ids = model_train_classes(model, train);
  ClassSet cand_set = test;
  if (setting == Setting::kGeneralized) cand_set.insert(train_ids.begin(), train_ids.end());
  EvalRun out{{}, sorted(cand_set)};
  auto cand = semantics_for(cfg, t, out.candidates, cmd);
  auto scorer = make_scorer(cfg, t, model, train_ids, cand, cmd);
  const auto n = cfg.number<std::size_t>("eval.samples_per_class");
  auto samples = draw_samples(cfg, m, q, sorted(test), n);
  if (setting == Setting::kGeneralized) {
    auto seen = draw_samples(cfg, m, q, train_ids, n);
    samples.insert(samples.end(), seen.begin(), seen.end());
  }
  std::vector<std::size_t> ks;
  for (auto k : cfg.size_list("eval.ks")) {
    if (k >= 1 && k <= out.candidates.size()) ks.push_back(k);
  }
  EvalOptions opt{.setting = setting,
                  .averaging = averaging_from(cfg.get("eval.averaging")),
                  .training_classes = ClassSet(train_ids.begin(), train_ids.end()),
                  .threads = cfg.number<unsigned>("run.threads")};
  out.report = evaluate(scorer, samples, out.candidates, t, ks, opt);
  return out;
}

inline void cmd_eval(Session& s) {
  const auto& cfg = s.cfg();
  auto t = taxonomy_from(cfg, "eval");
  auto train = training_classes(cfg, t, "eval");
  auto test = test_classes(cfg, t, train, "eval");
  auto model = model_from(cfg, "eval");
  auto m = features_from(cfg, "eval");
  check_feature_dim(m, model);
  auto q = quality_from(cfg, m);
  auto setting = setting_from(cfg.get("eval.setting"));
  auto run = run_eval(cfg, t, model, m, q, train, test, setting, "eval");
  for (auto k : cfg.size_list("eval.ks")) {
    if (k > run.candidates.size()) s.warn("k=" + std::to_string(k) + " exceeds the candidate count; dropped");
  }
  const auto& r = run.report;
  const auto split = test_split_name(cfg);
  const auto tag = std::string(to_string(setting));
  const auto stamp = cfg.stamp("eval");
  auto b = accuracy_bounds(r);
  s.out() << tag << " on " << split << ": " << test.size() << " classes, " << r.sample_count()
          << " images, top-1 " << io::fixed(100 * b.reported, 2) << "% (bounds " << io::fixed(100 * b.lower, 2)
          << "% .. " << io::fixed(100 * b.upper, 2) << "%)\n";
  if (setting == Setting::kGeneralized) {
    auto g = generalized_summary(r);
    s.out() << "gzsl: train " << io::fixed(100 * g.acc_train, 2) << "%, test " << io::fixed(100 * g.acc_test, 2)
            << "%, harmonic " << io::fixed(100 * g.harmonic, 2) << "%\n";
  }
  s.emit("eval_" + tag + ".txt", stamp + report_text(r, split));
  s.emit("eval_" + tag + "_topk.tsv", stamp + report_topk_tsv(r, split));
  s.emit("eval_" + tag + "_per_class.tsv", stamp + report_per_class_tsv(r));
  s.commit();
}

inline void analyze_impact(Session& s, const Taxonomy& t, const BilinearModel& model, const FeatureMatrix& m,
                           const ClassSet& train, const ClassSet& test) {
  const auto& cfg = s.cfg();
  if (!cfg.has("paths.quality")) s.warn("no paths.quality given; the visual factor has no effect");
  auto filtered_q = quality_from(cfg, m);
  auto raw_q = all_accepted(m);
  auto freq = frequencies_from(cfg, "analyze");
  auto e = embeddings_from(cfg, "paths.embeddings", "analyze");
  ClassSet every;
  for (const auto& c : t.concepts()) every.insert(c.id);
  auto primary = assign_primary_meanings(t, e, every).primary;
  const auto min_f = cfg.number<std::uint64_t>("thresholds.frequency");
  ClassSet clean;
  for (const auto& c : test) {
    if (freq.count(t.concept_at(t.index_of(c)).lemmas.front()) > min_f && primary[c]) clean.insert(c);
  }
  if (clean.empty()) fail(ErrorCode::kInfeasible, "no test class survives the semantic filter");

  std::map<FactorConfig, double> acc;
  std::string rows = cfg.stamp("analyze") + "visual\tsemantic\thierarchical\tclasses\taccuracy\n";
  for (const auto& f : all_factor_configs()) {
    const auto& classes = f.semantic ? clean : test;
    auto run = run_eval(cfg, t, model, m, f.visual ? filtered_q : raw_q, train, classes, Setting::kStandard, "analyze");
    auto b = accuracy_bounds(run.report);
    acc[f] = f.hierarchical ? b.upper : b.reported;
    rows += std::to_string(f.visual) + "\t" + std::to_string(f.semantic) + "\t" + std::to_string(f.hierarchical) +
            "\t" + std::to_string(classes.size()) + "\t" + io::fixed(acc[f]) + "\n";
  }
  auto impact = factor_impact(acc);
  std::string factors = cfg.stamp("analyze") + "factor\timpact\n";
  const char* names[] = {"visual", "semantic", "hierarchical"};
  for (std::size_t i = 0; i < 3; ++i) {
    factors += std::string(names[i]) + "\t" + io::fixed(impact[i]) + "\n";
    s.out() << names[i] << " impact: " << io::fixed(100 * impact[i], 2) << " points\n";
  }
  s.emit("analyze_impact.tsv", rows);
  s.emit("analyze_impact_factors.tsv", factors);
  s.commit();
}

inline void cmd_analyze(Session& s) {
  const auto& cfg = s.cfg();
  const auto& sweep = cfg.get("analyze.sweep");
  if (sweep != "frequency" && sweep != "population" && sweep != "structural-ratio" && sweep != "impact") {
    fail(ErrorCode::kInvalidArgument, "analyze.sweep must be frequency, population, structural-ratio or impact");
  }
  auto t = taxonomy_from(cfg, "analyze");
  auto train = training_classes(cfg, t, "analyze");
  auto test = test_classes(cfg, t, train, "analyze");
  auto model = model_from(cfg, "analyze");
  auto m = features_from(cfg, "analyze");
  check_feature_dim(m, model);
  if (sweep == "impact") return analyze_impact(s, t, model, m, train, test);

  std::map<std::string, double> value;
  if (sweep == "frequency") {
    auto freq = frequencies_from(cfg, "analyze");
    for (const auto& c : test) value[c] = static_cast<double>(freq.count(t.concept_at(t.index_of(c)).lemmas.front()));
  } else if (sweep == "population") {
    for (const auto& c : test) value[c] = static_cast<double>(m.population(c));
  } else {
    for (const auto& [c, r] : structural_ratio_set(t, test, train).per_class) value[c] = r.ratio;
  }
  std::vector<std::string> order = sorted(test);
  std::stable_sort(order.begin(), order.end(), [&](const auto& a, const auto& b) { return value[a] < value[b]; });
  const auto window = cfg.number<std::size_t>("analyze.window");
  if (window == 0) fail(ErrorCode::kInvalidArgument, "analyze.window must be positive");
  const auto windows = order.size() / window;
  if (windows < 2) {
    fail(ErrorCode::kInfeasible, std::to_string(order.size()) + " test classes give " + std::to_string(windows) +
                                     " windows of " + std::to_string(window) + "; need at least two");
  }
  auto q = quality_from(cfg, m);
  std::vector<double> xs, ys;
  std::string members = cfg.stamp("analyze") + "window\tclass\tvalue\n";
  for (std::size_t w = 0; w < windows; ++w) {
    ClassSet chunk(order.begin() + static_cast<long>(w * window), order.begin() + static_cast<long>((w + 1) * window));
    double x = 0;
    if (sweep == "structural-ratio") {
      x = structural_ratio_set(t, chunk, train).ratio;
    } else {
      for (const auto& c : chunk) x += value[c];
      x /= static_cast<double>(chunk.size());
    }
    auto run = run_eval(cfg, t, model, m, q, train, chunk, Setting::kStandard, "analyze");
    xs.push_back(x);
    ys.push_back(run.report.top_k(1));
    for (const auto& c : chunk) members += std::to_string(w) + "\t" + c + "\t" + io::format_double(value[c]) + "\n";
  }
  const double r = pearson(xs, ys);
  std::string plot = cfg.stamp("analyze") + "# pearson=" + io::fixed(r) + "\n" + sweep + "\ttop1\n";
  for (std::size_t i = 0; i < xs.size(); ++i) plot += io::format_double(xs[i]) + "\t" + io::fixed(ys[i]) + "\n";
  s.out() << sweep << ": " << windows << " windows of " << window << " classes, pearson r = " << io::fixed(r, 4)
          << '\n';
  s.emit("analyze_" + sweep + ".tsv", plot);
  s.emit("analyze_" + sweep + "_windows.tsv", members);
  s.commit();
}

// Writes a synthetic benchmark bundle plus a config that points at it.
inline void cmd_synth(Session& s) {
  const auto& cfg = s.cfg();
  synthetic::Options opt;
  opt.seed = cfg.seed();
  opt.feature_noise = cfg.number<double>("synth.noise");
  const auto classes = cfg.number<std::size_t>("synth.classes");
  const auto images = cfg.number<std::size_t>("synth.images");
  const auto& layout = cfg.get("synth.layout");
  if (layout != "low" && layout != "high") fail(ErrorCode::kInvalidArgument, "synth.layout must be low or high");
  auto b = layout == "low" ? synthetic::low_ratio(classes, images, opt) : synthetic::high_ratio(classes, images, opt);
  const auto stamp = cfg.stamp("synth");
  std::ostringstream edges, lemmas, emb, freq, feats;
  serialize(b.taxonomy, edges, lemmas);
  save_embeddings(b.embeddings, emb);
  save_frequencies(b.frequencies, freq);
  save_features_text(b.features, feats);
  auto list = [&](const ClassSet& ids) {
    std::string out = stamp;
    for (const auto& c : ids) out += c + "\n";
    return out;
  };
  std::string ini = stamp +
                    "[paths]\n"
                    "taxonomy = taxonomy.tsv\nlemmas = lemmas.tsv\nembeddings = embeddings.txt\n"
                    "frequencies = frequencies.tsv\nfeatures = features.tsv\ntrain = train.txt\ntest = test.txt\n"
                    "\n[thresholds]\nfrequency = 500\npopulation = " + std::to_string(images / 2) +
                    "\nsamples_per_class = " + std::to_string(images / 4) + "\nquality_classes = 2\n" +
                    "quality_train = " + std::to_string(images / 3) + "\n" +
                    "\n[split]\nsize = " + std::to_string(std::max<std::size_t>(2, classes / 2)) + "\n" +
                    "\n[eval]\nsamples_per_class = 0\nks = 1,2,5\n";
  s.out() << "synthetic " << layout << "-ratio benchmark: " << b.train.size() << " training and " << b.test.size()
          << " test classes, " << b.features.size() << " images\n";
  s.emit("taxonomy.tsv", stamp + edges.str());
  s.emit("lemmas.tsv", stamp + lemmas.str());
  s.emit("embeddings.txt", emb.str());
  s.emit("frequencies.tsv", stamp + freq.str());
  s.emit("features.tsv", stamp + feats.str());
  s.emit("train.txt", list(b.train));
  s.emit("test.txt", list(b.test));
  s.emit("zsbench.ini", ini);
  s.commit();
}

inline void run_command(const std::string& name, Session& s) {
  if (name == "ingest") return cmd_ingest(s);
  if (name == "count-freq") return cmd_count_freq(s);
  if (name == "hop-split") return cmd_hop_split(s);
  if (name == "build-split") return cmd_build_split(s);
  if (name == "train") return cmd_train(s);
  if (name == "eval") return cmd_eval(s);
  if (name == "analyze") return cmd_analyze(s);
  if (name == "synth") return cmd_synth(s);
  fail(ErrorCode::kInvalidArgument, "unknown command '" + name + "'");
}

}  // namespace zsbench::pipeline
