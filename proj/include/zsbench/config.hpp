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

// Run configuration: a flat key=value document with section prefixes. A line
// "[model]" prefixes the keys below it ("gamma = 1" becomes model.gamma);
// fully dotted keys work anywhere. Defaults mirror the benchmark construction
// parameters, every key can be overridden from the command line, and the
// FNV-1a hash of the canonical form is stamped into every output.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "zsbench/error.hpp"
#include "zsbench/io.hpp"

namespace zsbench {

struct ConfigKey {
  std::string_view name;
  std::string_view fallback;
  std::string_view help;
};

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"run.seed", "0", "master seed; every random draw derives from it"},
      {"run.threads", "1", "worker threads for evaluation"},
      {"run.out", "out", "output directory"},

      {"paths.root", "", "data root for relative input paths (default: $ZSBENCH_DATA)"},
      {"paths.taxonomy", "", "edge file: child<TAB>parent"},
      {"paths.lemmas", "", "lemma file: concept<TAB>lemma1,lemma2"},
      {"paths.embeddings", "", "word embedding text file"},
      {"paths.class_embeddings", "", "class-id keyed embedding file; replaces word embeddings for model inputs"},
      {"paths.frequencies", "", "word<TAB>count file"},
      {"paths.features", "", "image features (text TSV or ZSBF binary)"},
      {"paths.blacklist", "", "class<TAB>reason exclusions"},
      {"paths.train", "", "training class list, one id per line"},
      {"paths.test", "", "test class list; overrides eval.split"},
      {"paths.split", "", "split file with [train] and [test] sections"},
      {"paths.quality", "", "per-image quality verdicts: image<TAB>accepted|rejected<TAB>round"},
      {"paths.corpus", "", "text corpus file or directory for count-freq"},
      {"paths.model", "", "model file for eval and analyze"},

      {"features.normalize", "false", "L2-normalize feature rows at load"},

      {"thresholds.frequency", "500", "label frequency must exceed this"},
      {"thresholds.population", "300", "class image count must exceed this"},
      {"thresholds.samples_per_class", "100", "accepted images required per candidate class"},
      {"thresholds.quality_classes", "1000", "classes per quality-selection round"},
      {"thresholds.quality_train", "250", "training images per class in a quality round"},

      {"model.kind", "closed-form", "closed-form | ranking | trivial | averaging"},
      {"model.gamma", "1", "closed-form feature regularizer"},
      {"model.lambda", "1", "closed-form embedding regularizer"},
      {"model.sigma", "auto", "trivial-embedding noise; auto = 1e-3 x mean row norm"},
      {"model.margin", "0.1", "ranking margin"},
      {"model.lr", "0.01", "ranking learning rate"},
      {"model.epochs", "50", "ranking epochs"},
      {"model.T", "1", "averaging softmax temperature"},
      {"model.top", "10", "averaging: training classes combined per image"},

      {"split.size", "500", "test classes in the optimized split"},
      {"split.max_swaps", "10000", "swap cap per local-search run"},
      {"split.restarts", "8", "random restarts besides the greedy start"},
      {"split.ratio_max_classes", "5000", "hop-split: skip the structural ratio above this many classes"},

      {"eval.setting", "zsl", "zsl | gzsl"},
      {"eval.split", "split", "test classes: split | 1-hop | 2-hops | all"},
      {"eval.ks", "1,2,5,10,20", "top-k values"},
      {"eval.averaging", "macro", "macro | micro"},
      {"eval.samples_per_class", "100", "test images drawn per class; 0 = all accepted"},

      {"analyze.sweep", "frequency", "frequency | population | structural-ratio | impact"},
      {"analyze.window", "100", "classes per sub-split"},

      {"synth.layout", "low", "low | high structural ratio"},
      {"synth.classes", "20", "training (and test) classes"},
      {"synth.images", "60", "images per class"},
      {"synth.noise", "0.5", "feature noise standard deviation"},
  };
  return keys;
}

// Keys that change where or how fast a run happens but not what it computes.
inline bool affects_results(std::string_view key) {
  return key != "run.out" && key != "run.threads" && key != "paths.root";
}

class RunConfig {
 public:
  RunConfig() {
    for (const auto& k : config_keys()) values_[std::string(k.name)] = std::string(k.fallback);
    if (const char* root = std::getenv("ZSBENCH_DATA")) values_["paths.root"] = root;
  }

  static bool known(std::string_view key) {
    for (const auto& k : config_keys()) {
      if (k.name == key) return true;
    }
    return false;
  }

  void set(const std::string& key, std::string value) {
    if (!known(key)) fail(ErrorCode::kInvalidArgument, "unknown config key '" + key + "'");
    values_[key] = std::move(value);
  }

  const std::string& get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) fail(ErrorCode::kInvalidArgument, "unknown config key '" + key + "'");
    return it->second;
  }

  template <typename T>
  T number(const std::string& key) const {
    T out{};
    if (!io::parse_number(get(key), out)) {
      fail(ErrorCode::kInvalidArgument, key + ": '" + get(key) + "' is not a valid number");
    }
    return out;
  }

  bool flag(const std::string& key) const {
    const auto& v = get(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    fail(ErrorCode::kInvalidArgument, key + ": '" + v + "' is not a boolean");
  }

  std::uint64_t seed() const { return number<std::uint64_t>("run.seed"); }

  // Independent stream per purpose, so adding a draw in one stage never
  // shifts another stage's randomness.
  std::uint64_t derive_seed(std::string_view purpose) const {
    return io::fnv1a(purpose, io::fnv1a(get("run.seed")));
  }

  std::vector<std::size_t> size_list(const std::string& key) const {
    std::vector<std::size_t> out;
    for (auto part : io::split(get(key), ',')) {
      std::size_t v = 0;
      auto s = io::trim(part);
      if (s.empty()) continue;
      if (!io::parse_number(s, v)) fail(ErrorCode::kInvalidArgument, key + ": bad entry '" + std::string(s) + "'");
      out.push_back(v);
    }
    return out;
  }

  bool has(const std::string& key) const { return !get(key).empty(); }

  // Input path resolved against the data root; nullopt when unset.
  std::optional<std::filesystem::path> path(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    std::filesystem::path p(get(key));
    if (p.is_relative() && has("paths.root")) p = std::filesystem::path(get("paths.root")) / p;
    return p;
  }

  std::filesystem::path require_path(const std::string& key, std::string_view command) const {
    auto p = path(key);
    if (!p) fail(ErrorCode::kInvalidArgument, key + " is required by " + std::string(command));
    return *p;
  }

  std::filesystem::path out_dir() const { return get("run.out"); }

  std::string canonical() const {
    std::string out;
    for (const auto& [k, v] : values_) {
      if (affects_results(k)) out += k + "=" + v + "\n";
    }
    return out;
  }

  std::string hash() const { return io::hex64(io::fnv1a(canonical())); }

  // Comment line heading every text output.
  std::string stamp(std::string_view command) const {
    return "# zsbench " + std::string(command) + " config_hash=" + hash() + " seed=" + get("run.seed") + "\n";
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

inline void read_config(std::istream& in, RunConfig& cfg, std::string source = "<config>") {
  io::LineReader reader(in, std::move(source));
  std::string section, line;
  while (reader.next(line)) {
    auto v = io::trim(line);
    if (v.empty() || v.front() == '#' || v.front() == ';') continue;
    if (v.front() == '[') {
      if (v.back() != ']' || v.size() < 3) reader.error("bad section header");
      section = std::string(io::trim(v.substr(1, v.size() - 2)));
      continue;
    }
    auto eq = v.find('=');
    if (eq == std::string_view::npos) reader.error("expected key = value");
    std::string key(io::trim(v.substr(0, eq)));
    if (key.find('.') == std::string::npos) {
      if (section.empty()) reader.error("key '" + key + "' needs a section");
      key = section + "." + key;
    }
    if (!RunConfig::known(key)) reader.error("unknown key '" + key + "'");
    cfg.set(key, std::string(io::trim(v.substr(eq + 1))));
  }
}

inline std::string format_config(const RunConfig& cfg) {
  std::string out, section;
  for (const auto& [k, v] : cfg.values()) {
    auto dot = k.find('.');
    auto s = k.substr(0, dot);
    if (s != section) {
      out += (section.empty() ? "" : "\n") + std::string("[") + s + "]\n";
      section = s;
    }
    out += k.substr(dot + 1) + " = " + v + "\n";
  }
  return out;
}

}  // namespace zsbench
