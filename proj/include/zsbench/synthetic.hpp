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

// Synthetic benchmarks with planted structure: every concept carries a latent
// prototype drawn as (parent prototype + scaled Gaussian step). Image features
// and word embeddings are noisy linear images of the prototype, so taxonomic
// proximity translates into visual and semantic similarity.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "zsbench/datastore.hpp"
#include "zsbench/semantics.hpp"
#include "zsbench/taxonomy.hpp"

namespace zsbench::synthetic {

struct TreeSpec {
  std::vector<Concept> concepts;  // parents listed before children
  std::vector<Edge> edges;
  std::map<std::string, double> step;  // latent step scale per concept (default 1)
};

struct Options {
  std::size_t latent_dim = 16;
  std::size_t feature_dim = 32;
  std::size_t embedding_dim = 16;
  double feature_noise = 0.5;
  double embedding_noise = 0.05;
  std::uint64_t seed = 1;
};

struct Benchmark {
  Taxonomy taxonomy;
  ClassSet train;
  ClassSet test;
  FeatureMatrix features;
  EmbeddingTable embeddings;
  FrequencyTable frequencies;
  std::map<std::string, Eigen::VectorXd> latent;
};

class Generator {
 public:
  Generator(const TreeSpec& spec, const Options& opt)
      : opt_(opt), rng_(opt.seed), taxonomy_(Taxonomy::build(spec.concepts, spec.edges)) {
    const auto m = static_cast<Eigen::Index>(opt.latent_dim);
    to_features_ = gaussian(static_cast<Eigen::Index>(opt.feature_dim), m) / std::sqrt(double(m));
    to_embedding_ = gaussian(static_cast<Eigen::Index>(opt.embedding_dim), m) / std::sqrt(double(m));
    for (const auto& c : spec.concepts) {
      auto ci = taxonomy_.index_of(c.id);
      Eigen::VectorXd base = Eigen::VectorXd::Zero(m);
      if (!taxonomy_.parents(ci).empty()) base = latent_.at(taxonomy_.id(taxonomy_.parents(ci).front()));
      auto it = spec.step.find(c.id);
      double s = it == spec.step.end() ? 1.0 : it->second;
      latent_[c.id] = base + s * gaussian(m, 1).col(0);
    }
  }

  const Taxonomy& taxonomy() const { return taxonomy_; }
  const std::map<std::string, Eigen::VectorXd>& latent() const { return latent_; }

  void add_images(FeatureMatrix& out, const std::string& class_id, std::size_t count) {
    const auto& p = latent_.at(class_id);
    Eigen::VectorXd mean = to_features_ * p;
    for (std::size_t i = 0; i < count; ++i) {
      FeatureRow r{class_id + "_img" + std::to_string(i), class_id, std::vector<float>(opt_.feature_dim)};
      for (std::size_t k = 0; k < opt_.feature_dim; ++k) {
        r.feature[k] = static_cast<float>(mean[static_cast<Eigen::Index>(k)] + opt_.feature_noise * normal_(rng_));
      }
      out.add(std::move(r));
    }
  }

  // Embedding of a concept's first lemma; `extra_noise` scales on top of the
  // configured embedding noise.
  std::vector<float> embed(const std::string& class_id, double extra_noise = 0.0) {
    Eigen::VectorXd y = to_embedding_ * latent_.at(class_id);
    std::vector<float> v(opt_.embedding_dim);
    const double s = opt_.embedding_noise + extra_noise;
    for (std::size_t k = 0; k < opt_.embedding_dim; ++k) {
      v[k] = static_cast<float>(y[static_cast<Eigen::Index>(k)] + s * normal_(rng_));
    }
    return v;
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd g(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) g(i, j) = normal_(rng_);
    }
    return g;
  }

  Options opt_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  Taxonomy taxonomy_;
  Eigen::MatrixXd to_features_;
  Eigen::MatrixXd to_embedding_;
  std::map<std::string, Eigen::VectorXd> latent_;
};

inline std::string pad(std::size_t i) {
  std::string s = std::to_string(i);
  return std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s;
}

inline void add_node(TreeSpec& spec, const std::string& id, const std::string& parent, double step) {
  spec.concepts.push_back({id, {id}});
  if (!parent.empty()) spec.edges.push_back({id, parent});
  spec.step[id] = step;
}

inline Benchmark finish(Generator& g, ClassSet train, ClassSet test, std::size_t images_per_class) {
  Benchmark b{Taxonomy::build(g.taxonomy().concepts(), g.taxonomy().edges()), std::move(train), std::move(test), FeatureMatrix{}, EmbeddingTable{}, FrequencyTable{}, g.latent()};
  for (const auto& c : b.train) g.add_images(b.features, c, images_per_class);
  for (const auto& c : b.test) g.add_images(b.features, c, images_per_class);
  for (const auto& c : b.taxonomy.concepts()) {
    b.embeddings.add(c.lemmas.front(), g.embed(c.id));
    b.frequencies.set(c.lemmas.front(), 1000);
  }
  return b;
}

// Each test class is a sibling of one training class under its own group
// (toy-example geometry): r(c) = 2/4 for every test class, R = 0.5.
inline Benchmark low_ratio(std::size_t classes, std::size_t images_per_class, const Options& opt) {
  TreeSpec spec;
  add_node(spec, "root", "", 0.0);
  ClassSet train, test;
  for (std::size_t i = 0; i < classes; ++i) {
    auto g = "grp" + pad(i);
    add_node(spec, g, "root", 1.0);
    add_node(spec, "tr" + pad(i), g, 0.2);
    add_node(spec, "te" + pad(i), g, 0.2);
    train.insert("tr" + pad(i));
    test.insert("te" + pad(i));
  }
  Generator gen(spec, opt);
  return finish(gen, std::move(train), std::move(test), images_per_class);
}

// Training classes under one branch, test classes under another: test
// classes are two hops from each other and four from any training class,
// r(c) = 2 for every test class.
inline Benchmark high_ratio(std::size_t classes, std::size_t images_per_class, const Options& opt) {
  TreeSpec spec;
  add_node(spec, "root", "", 0.0);
  add_node(spec, "seen", "root", 0.3);
  add_node(spec, "unseen", "root", 0.3);
  ClassSet train, test;
  for (std::size_t i = 0; i < classes; ++i) {
    add_node(spec, "tr" + pad(i), "seen", 1.0);
    add_node(spec, "te" + pad(i), "unseen", 1.0);
    train.insert("tr" + pad(i));
    test.insert("te" + pad(i));
  }
  Generator gen(spec, opt);
  return finish(gen, std::move(train), std::move(test), images_per_class);
}

}  // namespace zsbench::synthetic
