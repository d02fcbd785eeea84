// Copyright 2026 The zvq Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "zvq/eval/probe.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "zvq/error.hpp"
#include "zvq/numerics/init.hpp"

namespace zvq {

namespace {

void check_labels(std::size_t n, std::size_t n_classes, std::span<const std::size_t> labels) {
  if (n_classes < 2) throw UsageError("linear_probe: need at least two classes");
  for (std::size_t l : labels)
    if (l >= n_classes) throw UsageError("linear_probe: label out of range");
  if (labels.size() != n) throw UsageError("linear_probe: one label per sample needed");
}

}  // namespace

std::size_t LinearClassifier::predict(std::span<const float> x) const {
  if (x.size() != dim) throw UsageError("LinearClassifier: feature width mismatch");
  const std::size_t D1 = dim + 1;
  std::size_t best = 0;
  double best_z = -INFINITY;
  for (std::size_t c = 0; c < n_classes; ++c) {
    double z = weights[c * D1 + dim];
    for (std::size_t d = 0; d < dim; ++d) z += weights[c * D1 + d] * (x[d] - mean[d]) / sd[d];
    if (z > best_z) best_z = z, best = c;
  }
  return best;
}

LinearClassifier fit_linear_classifier(std::span<const float> features, std::size_t dim,
                                       std::span<const std::size_t> labels, std::size_t n_classes,
                                       const ProbeConfig& cfg) {
  const std::size_t n = labels.size();
  if (dim == 0 || n == 0 || features.size() != n * dim) throw UsageError("linear_probe: features must be [n x dim]");
  check_labels(n, n_classes, labels);

  LinearClassifier m;
  m.dim = dim;
  m.n_classes = n_classes;
  m.mean.assign(dim, 0.0);
  m.sd.assign(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < dim; ++d) m.mean[d] += features[i * dim + d];
  for (auto& v : m.mean) v /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < dim; ++d) {
      const double v = features[i * dim + d] - m.mean[d];
      m.sd[d] += v * v;
    }
  for (auto& s : m.sd) s = std::max(std::sqrt(s / static_cast<double>(n)), 1e-8);
  std::vector<double> x(n * dim);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < dim; ++d) x[i * dim + d] = (features[i * dim + d] - m.mean[d]) / m.sd[d];

  const std::size_t C = n_classes, D1 = dim + 1;
  auto& w = m.weights;
  w.assign(C * D1, 0.0);
  std::vector<double> grad(C * D1), p(C);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < C; ++c) {
        double z = w[c * D1 + dim];
        for (std::size_t d = 0; d < dim; ++d) z += w[c * D1 + d] * x[i * dim + d];
        p[c] = z;
      }
      const double mx = *std::max_element(p.begin(), p.end());
      double z = 0.0;
      for (auto& v : p) z += (v = std::exp(v - mx));
      for (std::size_t c = 0; c < C; ++c) {
        const double g = p[c] / z - (labels[i] == c ? 1.0 : 0.0);
        for (std::size_t d = 0; d < dim; ++d) grad[c * D1 + d] += g * x[i * dim + d];
        grad[c * D1 + dim] += g;
      }
    }
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t d = 0; d < D1; ++d) {
        double g = grad[c * D1 + d] * inv;
        if (d < dim) g += cfg.l2 * w[c * D1 + d];
        w[c * D1 + d] -= cfg.learning_rate * g;
      }
  }
  return m;
}

ProbeResult linear_probe(std::span<const float> features, std::size_t dim, std::span<const std::size_t> labels,
                         std::size_t n_classes, std::span<const std::size_t> groups, const ProbeConfig& cfg) {
  const std::size_t n = labels.size();
  if (dim == 0 || features.size() != n * dim) throw UsageError("linear_probe: features must be [n x dim]");
  if (groups.size() != n) throw UsageError("linear_probe: one group per sample needed");
  check_labels(n, n_classes, labels);
  if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0))
    throw UsageError("linear_probe: test_fraction must be in (0, 1)");

  std::vector<std::size_t> ids(groups.begin(), groups.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.size() < 2) throw UsageError("linear_probe: need at least two groups to split");
  std::mt19937_64 rng(mix_seed(cfg.seed, 0x9e0b));
  std::shuffle(ids.begin(), ids.end(), rng);
  const std::size_t n_test_groups =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(cfg.test_fraction * ids.size())), 1, ids.size() - 1);
  std::vector<std::size_t> test_groups(ids.begin(), ids.begin() + n_test_groups);
  std::sort(test_groups.begin(), test_groups.end());

  std::vector<std::size_t> train, test;
  for (std::size_t i = 0; i < n; ++i)
    (std::binary_search(test_groups.begin(), test_groups.end(), groups[i]) ? test : train).push_back(i);

  std::vector<float> xtrain;
  std::vector<std::size_t> ytrain;
  for (std::size_t i : train) {
    xtrain.insert(xtrain.end(), features.begin() + i * dim, features.begin() + (i + 1) * dim);
    ytrain.push_back(labels[i]);
  }
  const auto model = fit_linear_classifier(xtrain, dim, ytrain, n_classes, cfg);
  auto accuracy = [&](const std::vector<std::size_t>& set) {
    std::size_t correct = 0;
    for (std::size_t i : set) correct += model.predict(features.subspan(i * dim, dim)) == labels[i];
    return set.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(set.size());
  };
  ProbeResult r;
  r.n_train = train.size();
  r.n_test = test.size();
  r.train_accuracy = accuracy(train);
  r.test_accuracy = accuracy(test);
  return r;
}

}  // namespace zvq
