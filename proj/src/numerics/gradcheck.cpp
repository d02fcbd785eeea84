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

#include "zvq/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <memory>
#include <mutex>

#include "json.hpp"
#include "zvq/error.hpp"

namespace zvq {
namespace {

thread_local FrozenReluMasks* t_frozen_relu = nullptr;

double evaluate(const ScalarFn& f, const Tensor& x) {
  Tape tape;
  Var out = f(tape, tape.constant(x));
  if (out.numel() != 1) throw UsageError("finite_difference_check: f must return a scalar");
  return static_cast<double>(out.value().item());
}

void write_report(std::ostream& out, const GradCheckOptions& options, const GradCheckReport& report,
                  std::size_t n) {
  nlohmann::json line = {{"label", options.label},
                         {"n", n},
                         {"h", options.h},
                         {"tol", options.tol},
                         {"max_rel_err", report.max_rel_err},
                         {"worst_index", report.worst_index},
                         {"analytic", report.analytic_at_worst},
                         {"numeric", report.numeric_at_worst},
                         {"pass", report.pass}};
  if (report.non_finite_index) line["non_finite_index"] = *report.non_finite_index;
  out << line.dump() << '\n';
}

}  // namespace

GradCheckReport finite_difference_check(const ScalarFn& f, const Tensor& x, const GradCheckOptions& options) {
  if (!(options.h > 0.0)) throw UsageError("finite_difference_check: h must be positive");

  std::vector<float> analytic(x.numel(), 0.0f);
  {
    Tape tape;
    Var xv = tape.variable(x);
    Var out = f(tape, xv);
    if (out.numel() != 1) throw UsageError("finite_difference_check: f must return a scalar");
    tape.backward(out);
    const auto g = tape.grad(xv);
    if (!g.empty()) std::copy(g.begin(), g.end(), analytic.begin());
  }

  GradCheckReport report;
  report.pass = true;
  std::vector<double> numeric_grad(x.numel(), 0.0);
  Tensor probe = x;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const float plus = static_cast<float>(static_cast<double>(x[i]) + options.h);
    const float minus = static_cast<float>(static_cast<double>(x[i]) - options.h);
    probe[i] = plus;
    const double f_plus = evaluate(f, probe);
    probe[i] = minus;
    const double f_minus = evaluate(f, probe);
    probe[i] = x[i];
    if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
      report.pass = false;
      report.non_finite_index = i;
      report.worst_index = i;
      report.max_rel_err = std::numeric_limits<double>::infinity();
      break;
    }
    numeric_grad[i] = (f_plus - f_minus) / (static_cast<double>(plus) - static_cast<double>(minus));
  }
  if (!report.non_finite_index) {
    double scale = 0.0;
    for (double n : numeric_grad) scale = std::max(scale, std::abs(n));
    const double floor = std::max(options.floor, options.scale_floor * scale);
    for (std::size_t i = 0; i < x.numel(); ++i) {
      const double a = analytic[i];
      const double n = numeric_grad[i];
      const double rel = std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
      if (i == 0 || rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_index = i;
        report.analytic_at_worst = a;
        report.numeric_at_worst = n;
      }
    }
  }
  if (!report.non_finite_index) report.pass = report.max_rel_err <= options.tol;

  if (options.report_stream) write_report(*options.report_stream, options, report, x.numel());
  if (std::ostream* debug = gradcheck_debug_stream(); debug && debug != options.report_stream) {
    write_report(*debug, options, report, x.numel());
  }
  return report;
}

std::ostream* gradcheck_debug_stream() {
  static std::once_flag once;
  static std::unique_ptr<std::ofstream> stream;
  std::call_once(once, [] {
    if (const char* path = std::getenv("ZVQ_GRADCHECK_LOG"); path && *path) {
      stream = std::make_unique<std::ofstream>(path, std::ios::app);
    }
  });
  return stream.get();
}

FrozenReluMasks::FrozenReluMasks() {
  if (t_frozen_relu) throw UsageError("FrozenReluMasks scopes do not nest");
  t_frozen_relu = this;
}

FrozenReluMasks::~FrozenReluMasks() { t_frozen_relu = nullptr; }

const std::vector<char>& FrozenReluMasks::next(std::span<const float> x) {
  if (next_ == masks_.size()) {
    std::vector<char> m(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) m[i] = x[i] > 0.0f;
    masks_.push_back(std::move(m));
  } else if (masks_[next_].size() != x.size()) {
    throw UsageError("FrozenReluMasks: relu call " + std::to_string(next_) + " changed size");
  }
  return masks_[next_++];
}

FrozenReluMasks* frozen_relu_masks() { return t_frozen_relu; }

}  // namespace zvq
