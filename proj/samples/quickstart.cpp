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

// End-to-end tour of the library on a generated benchmark: measure how far
// the test classes sit from training, fit a bilinear model, evaluate it, and
// compare against the trivial nearest-training-class solution.

#include <iostream>
#include <vector>

#include "zsbench/synthetic.hpp"
#include "zsbench/zsbench.hpp"

int main() {
  using namespace zsbench;

  synthetic::Options opt;
  opt.feature_noise = 0.3;
  auto b = synthetic::low_ratio(10, 40, opt);

  std::cout << "structural ratio R = " << structural_ratio_set(b.taxonomy, b.test, b.train).ratio << "\n";

  std::vector<std::string> train(b.train.begin(), b.train.end());
  std::vector<std::string> test(b.test.begin(), b.test.end());
  FeatureMatrix seen(b.features.dim());
  std::vector<TestSample> samples;
  for (const auto& r : b.features.rows()) {
    if (b.train.count(r.class_id)) {
      seen.add(r);
    } else {
      samples.push_back({to_eigen(r.feature), r.class_id});
    }
  }

  // Bilinear model over word-embedding class representations.
  auto words = build_semantic_matrix(b.taxonomy, train, b.embeddings);
  auto model = fit_closed_form(make_training_set(seen, words), words, 1.0, 1.0);
  auto cands = build_semantic_matrix(b.taxonomy, test, b.embeddings);
  auto report = evaluate(bilinear_scorer(model, cands), samples, test, b.taxonomy, {1, 2, 5});
  std::cout << report_text(report, "synthetic");

  // Trivial solution: each test class borrows its nearest training class.
  auto onehot = one_hot_semantics(train);
  auto base = fit_closed_form(make_training_set(seen, onehot), onehot, 1.0, 1.0);
  auto triv = build_trivial(b.taxonomy, onehot, b.test, default_trivial_sigma(onehot), 1);
  auto trivial = evaluate(bilinear_scorer(base, triv.semantics), samples, triv.semantics.class_ids, b.taxonomy, {1});
  std::cout << "trivial top-1 = " << trivial.top_k(1) << "\n";

  auto bounds = accuracy_bounds(report);
  std::cout << "hierarchy-aware bounds: " << bounds.reported << " <= " << bounds.lower << " <= " << bounds.upper
            << "\n";
  return 0;
}
