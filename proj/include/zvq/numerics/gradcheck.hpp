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
#include <functional>
#include <optional>
#include <span>
#include <vector>
#include <ostream>
#include <string>

#include "zvq/numerics/tape.hpp"

namespace zvq {

struct GradCheckOptions {
  double h = 1e-3;
  double tol = 1e-3;
  /// Absolute floor of the relative-error denominator.
  double floor = 1e-8;
  /// Floor as a fraction of the largest numeric gradient component. In
  /// float32, components far below the gradient scale are dominated by
  /// rounding of f, not by the derivative.
  double scale_floor = 0.1;
  /// When set, one JSON line per check is appended here.
  std::ostream* report_stream = nullptr;
  std::string label;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  bool pass = false;
  /// Set when f produced a non-finite value; names the perturbed coordinate.
  std::optional<std::size_t> non_finite_index;
};

/// Scalar function of one tensor, recorded on the supplied tape.
using ScalarFn = std::function<Var(Tape&, Var)>;

/// Compares the tape gradient of f at x with central differences
/// (f(x+h e_i) - f(x-h e_i)) / (2h) coordinate by coordinate. The effective
/// step is taken from the float32-rounded perturbed coordinates.
GradCheckReport finite_difference_check(const ScalarFn& f, const Tensor& x,
                                        const GradCheckOptions& options = {});

/// While alive, makes ops::relu on this thread record each call's active
/// mask on the first pass and, after rewind(), apply the recorded masks in
/// call order instead of the sign test. Difference quotients of a relu
/// network then stay on the linear region the tape gradient describes.
/// Scopes do not nest.
class FrozenReluMasks {
 public:
  FrozenReluMasks();
  ~FrozenReluMasks();
  FrozenReluMasks(const FrozenReluMasks&) = delete;
  FrozenReluMasks& operator=(const FrozenReluMasks&) = delete;

  void rewind() { next_ = 0; }
  /// Mask for the next relu call on input x (recorded or replayed).
  const std::vector<char>& next(std::span<const float> x);
  std::size_t recorded() const { return masks_.size(); }

 private:
  std::vector<std::vector<char>> masks_;
  std::size_t next_ = 0;
};

/// The active FrozenReluMasks of this thread, or nullptr.
FrozenReluMasks* frozen_relu_masks();

/// Reads ZVQ_GRADCHECK_LOG once; returns a stream appending to that file, or
/// nullptr when unset.
std::ostream* gradcheck_debug_stream();

}  // namespace zvq
