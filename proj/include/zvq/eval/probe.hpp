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

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace zvq {

struct ProbeConfig {
  std::size_t epochs = 300;
  double learning_rate = 0.5;
  double l2 = 1e-4;
  double test_fraction = 0.25;
  std::uint64_t seed = 0;
};

struct ProbeResult {
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};

/// Multinomial logistic regression on features standardized with the
/// training statistics.
struct LinearClassifier {
  std::size_t dim = 0;
  std::size_t n_classes = 0;
  std::vector<double> mean, sd;
  std::vector<double> weights;  // [n_classes x (dim + 1)], bias last

  std::size_t predict(std::span<const float> x) const;
};

/// Full-batch gradient descent on every row of features [n x dim].
LinearClassifier fit_linear_classifier(std::span<const float> features, std::size_t dim,
                                       std::span<const std::size_t> labels, std::size_t n_classes,
                                       const ProbeConfig& cfg = {});

/// Multinomial logistic regression on standardized features [n x dim],
/// full-batch gradient descent. Samples are split by group (e.g. utterance)
/// so correlated frames never straddle train and test.
ProbeResult linear_probe(std::span<const float> features, std::size_t dim, std::span<const std::size_t> labels,
                         std::size_t n_classes, std::span<const std::size_t> groups, const ProbeConfig& cfg = {});

}  // namespace zvq
