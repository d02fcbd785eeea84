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

#include <random>
#include <sstream>

#include "doctest.h"
#include "test_util.hpp"
#include "zvq/error.hpp"
#include "zvq/numerics/adam.hpp"
#include "zvq/numerics/gradcheck.hpp"
#include "zvq/numerics/ops.hpp"

using namespace zvq;
using zvq::testing::random_tensor;
using zvq::testing::weighted_sum;
using zvq::testing::Trial;
using zvq::testing::check_argument;

namespace {

// Direct sliding-window evaluation, independent of the library loops.
std::vector<float> naive_conv1d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride,
                                std::size_t pad) {
  const long B = x.dim(0), Cin = x.dim(1), T = x.dim(2), Cout = w.dim(0), K = w.dim(2);
  const long To = (T + 2 * static_cast<long>(pad) - K) / static_cast<long>(stride) + 1;
  std::vector<float> out;
  for (long bi = 0; bi < B; ++bi)
    for (long co = 0; co < Cout; ++co)
      for (long t = 0; t < To; ++t) {
        double s = b[co];
        for (long ci = 0; ci < Cin; ++ci)
          for (long k = 0; k < K; ++k) {
            const long src = t * static_cast<long>(stride) + k - static_cast<long>(pad);
            if (src >= 0 && src < T) s += static_cast<double>(w[(co * Cin + ci) * K + k]) * x[(bi * Cin + ci) * T + src];
          }
        out.push_back(static_cast<float>(s));
      }
  return out;
}

Var param_conv(Tape& tape, Var x, const Tensor& w, const Tensor& b, std::size_t s, std::size_t p) {
  return ops::conv1d(x, tape.constant(w), tape.constant(b), s, p);
}

}  // namespace

TEST_CASE("conv1d sliding window example") {
  Tape tape;
  auto y = ops::conv1d(tape.constant(Tensor::from({1, 1, 4}, {1, 2, 3, 4})), tape.constant(Tensor::from({1, 1, 2}, {1, 1})),
                       tape.constant(Tensor::from({1}, {0})), 1, 0);
  CHECK(y.shape() == Shape{1, 1, 3});
  CHECK(y.value().storage() == std::vector<float>{3, 5, 7});
}

TEST_CASE("conv1d identity kernel returns the input") {
  std::mt19937_64 rng(1);
  Tape tape;
  Tensor x = random_tensor({2, 1, 9}, rng);
  auto y = ops::conv1d(tape.constant(x), tape.constant(Tensor::from({1, 1, 1}, {1})), tape.constant(Tensor({1})), 1, 0);
  CHECK(y.value() == x);
}

TEST_CASE("strided conv halves the frame count twice") {
  Tape tape;
  Tensor w({1, 1, 4}, 0.25f);
  auto x = tape.constant(Tensor({1, 1, 32}, 1.0f));
  auto y1 = param_conv(tape, x, w, Tensor({1}), 2, 1);
  CHECK(y1.shape()[2] == 16);
  auto y2 = param_conv(tape, y1, w, Tensor({1}), 2, 1);
  CHECK(y2.shape()[2] == 8);
}

TEST_CASE("conv1d rejects channel mismatch naming both shapes") {
  Tape tape;
  try {
    ops::conv1d(tape.constant(Tensor({1, 3, 8})), tape.constant(Tensor({4, 2, 3})), tape.constant(Tensor({4})), 1, 1);
    FAIL("expected rejection");
  } catch (const UsageError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[1,3,8]") != std::string::npos);
    CHECK(msg.find("[4,2,3]") != std::string::npos);
  }
  CHECK_THROWS_AS(ops::conv1d_output_length(2, 5, 1, 1), UsageError);
}

TEST_CASE("conv1d length formula and values, exhaustive over small shapes") {
  std::mt19937_64 rng(7);
  std::size_t cases = 0;
  for (std::size_t T = 1; T <= 64; ++T)
    for (std::size_t k = 1; k <= 8; ++k)
      for (std::size_t s = 1; s <= 3; ++s)
        for (std::size_t p = 0; p <= 2; ++p) {
          if (T + 2 * p < k) {
            CHECK_THROWS_AS(ops::conv1d_output_length(T, k, s, p), UsageError);
            continue;
          }
          const std::size_t expected = (T + 2 * p - k) / s + 1;
          REQUIRE(ops::conv1d_output_length(T, k, s, p) == expected);
          if (T % 7 != 0 && T > 10) continue;  // values on a subset keeps this fast
          Tape tape;
          Tensor x = random_tensor({1, 2, T}, rng), w = random_tensor({2, 2, k}, rng), b = random_tensor({2}, rng);
          auto y = param_conv(tape, tape.constant(x), w, b, s, p);
          REQUIRE(y.shape()[2] == expected);
          const auto ref = naive_conv1d(x, w, b, s, p);
          REQUIRE(zvq::testing::max_abs_diff(y.value().data(), ref) < 1e-5f);
          ++cases;
        }
  CHECK(cases > 100);
}

TEST_CASE("transposed_conv1d examples") {
  Tape tape;
  SUBCASE("stride 1, k 1 is the identity") {
    Tensor x = Tensor::from({1, 1, 3}, {1, -2, 3});
    auto y = ops::transposed_conv1d(tape.constant(x), tape.constant(Tensor::from({1, 1, 1}, {1})),
                                    tape.constant(Tensor({1})), 1);
    CHECK(y.value() == x);
  }
  SUBCASE("scatter-add with stride 2, k 2") {
    auto y = ops::transposed_conv1d(tape.constant(Tensor::from({1, 1, 2}, {1, 2})),
                                    tape.constant(Tensor::from({1, 1, 2}, {1, 1})), tape.constant(Tensor({1})), 2);
    CHECK(y.value().storage() == std::vector<float>{1, 1, 2, 2});
  }
  SUBCASE("two stride-2 stages restore 32 frames from 8") {
    Tensor w({1, 1, 4}, 0.5f);
    auto y = ops::transposed_conv1d(tape.constant(Tensor({1, 1, 8}, 1.0f)), tape.constant(w), tape.constant(Tensor({1})), 2);
    y = ops::transposed_conv1d(y, tape.constant(w), tape.constant(Tensor({1})), 2);
    CHECK(y.shape() == Shape{1, 1, 32});
  }
  SUBCASE("channel mismatch") {
    CHECK_THROWS_AS(ops::transposed_conv1d(tape.constant(Tensor({1, 2, 4})), tape.constant(Tensor({3, 1, 4})),
                                           tape.constant(Tensor({1})), 2),
                    UsageError);
  }
}

TEST_CASE("relu forward and gradient") {
  Tape tape;
  auto x = tape.variable(Tensor::from({3}, {-1, 0, 2}));
  auto y = ops::relu(x);
  CHECK(y.value().storage() == std::vector<float>{0, 0, 2});
  tape.backward(ops::sum(y));
  CHECK(tape.grad(x)[0] == 0.0f);
  CHECK(tape.grad(x)[2] == 1.0f);

  Tape t2;
  Tensor pos = Tensor::from({3}, {0.5f, 1, 3});
  CHECK(ops::relu(t2.constant(pos)).value() == pos);
}

TEST_CASE("linear examples") {
  Tape tape;
  auto y = ops::linear(tape.constant(Tensor::from({1, 1}, {1})), tape.constant(Tensor::from({1, 1}, {2})),
                       tape.constant(Tensor::from({1}, {3})));
  CHECK(y.value().item() == 5.0f);

  Tensor x = Tensor::from({2, 2}, {1, 2, 3, 4});
  auto id = ops::linear(tape.constant(x), tape.constant(Tensor::from({2, 2}, {1, 0, 0, 1})), tape.constant(Tensor({2})));
  CHECK(id.value() == x);

  // Rows are independent: changing row 1 leaves row 0 untouched.
  Tensor w = Tensor::from({2, 2}, {0.5f, -1, 2, 0.25f});
  Tensor x2 = x;
  x2[2] = 10;
  auto a = ops::linear(tape.constant(x), tape.constant(w), tape.constant(Tensor({2})));
  auto b = ops::linear(tape.constant(x2), tape.constant(w), tape.constant(Tensor({2})));
  CHECK(a.value()[0] == b.value()[0]);
  CHECK(a.value()[1] == b.value()[1]);
  CHECK(a.value()[2] != b.value()[2]);
  CHECK_THROWS_AS(ops::linear(tape.constant(Tensor({1, 3})), tape.constant(w), tape.constant(Tensor({2}))), UsageError);
}

TEST_CASE("backward basics") {
  SUBCASE("sum gives all-ones") {
    Tape tape;
    auto x = tape.variable(Tensor({2, 3}, 0.7f));
    tape.backward(ops::sum(x));
    for (float g : tape.grad(x)) CHECK(g == 1.0f);
  }
  SUBCASE("sum of squares at [1,2] gives [2,4]") {
    Tape tape;
    auto x = tape.variable(Tensor::from({2}, {1, 2}));
    tape.backward(ops::sum(ops::mul(x, x)));
    CHECK(tape.grad(x)[0] == 2.0f);
    CHECK(tape.grad(x)[1] == 4.0f);
  }
  SUBCASE("a tensor used twice accumulates both paths") {
    Tape tape;
    auto x = tape.variable(Tensor::from({2}, {1, 2}));
    tape.backward(ops::add(ops::sum(x), ops::sum(ops::scale(x, 3.0f))));
    CHECK(tape.grad(x)[0] == 4.0f);
  }
  SUBCASE("non-scalar loss and foreign loss are rejected") {
    Tape tape, other;
    auto x = tape.variable(Tensor({2}));
    CHECK_THROWS_AS(tape.backward(x), UsageError);
    auto y = ops::sum(other.variable(Tensor({2})));
    CHECK_THROWS_AS(tape.backward(y), UsageError);
  }
  SUBCASE("parameters receive gradients in place") {
    Tensor w = Tensor::from({1, 1, 2}, {0.5f, -0.5f});
    Tape tape;
    auto y = ops::conv1d(tape.constant(Tensor::from({1, 1, 3}, {1, 2, 3})), tape.parameter(w),
                         tape.constant(Tensor({1})), 1, 0);
    tape.backward(ops::sum(y));
    REQUIRE(w.has_grad());
    CHECK(w.grad()[0] == doctest::Approx(3.0));
    CHECK(w.grad()[1] == doctest::Approx(5.0));
  }
}

TEST_CASE("running backward twice exactly doubles gradients") {
  std::mt19937_64 rng(3);
  Tensor w = random_tensor({3, 2, 3}, rng), b = random_tensor({3}, rng);
  Tape tape;
  auto x = tape.variable(random_tensor({2, 2, 6}, rng));
  auto loss = ops::sum_squares(ops::relu(ops::conv1d(x, tape.parameter(w), tape.parameter(b), 1, 1)));
  tape.backward(loss);
  const std::vector<float> once(w.grad().begin(), w.grad().end());
  const std::vector<float> x_once(tape.grad(x).begin(), tape.grad(x).end());
  tape.backward(loss);
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(w.grad()[i] == 2.0f * once[i]);
  for (std::size_t i = 0; i < x_once.size(); ++i) CHECK(tape.grad(x)[i] == 2.0f * x_once[i]);
}

TEST_CASE("forward ops are deterministic") {
  std::mt19937_64 rng(11);
  Tensor x = random_tensor({2, 3, 16}, rng), w = random_tensor({4, 3, 4}, rng), b = random_tensor({4}, rng);
  Tensor tw = random_tensor({4, 2, 4}, rng), tb = random_tensor({2}, rng);
  auto run = [&] {
    Tape tape;
    auto y = ops::relu(ops::conv1d(tape.constant(x), tape.constant(w), tape.constant(b), 2, 1));
    return ops::transposed_conv1d(y, tape.constant(tw), tape.constant(tb), 2).value();
  };
  CHECK(run() == run());
}

TEST_CASE("finite difference check: trivial and relu cases") {
  std::mt19937_64 rng(5);
  auto r = finite_difference_check([](Tape&, Var x) { return ops::sum(x); }, random_tensor({5}, rng));
  CHECK(r.pass);
  CHECK(r.max_rel_err < 1e-6);

  Tensor x = zvq::testing::random_signed_away_from_zero({12}, rng, 0.1f, 1.0f);
  Tensor w = random_tensor({12}, rng, 0.5f, 1.5f);
  auto r2 = finite_difference_check([&](Tape&, Var v) { return weighted_sum(ops::relu(v), w); }, x);
  CHECK(r2.pass);
}

TEST_CASE("finite difference check reports non-finite values") {
  auto r = finite_difference_check(
      [](Tape& tape, Var x) {
        // log-like blow-up: exp of a huge value overflows float.
        return ops::sum(ops::exp(ops::scale(ops::add(x, tape.constant(Tensor({1}, 100.0f))), 1.0f)));
      },
      Tensor({1}, 0.0f));
  CHECK_FALSE(r.pass);
  REQUIRE(r.non_finite_index.has_value());
  CHECK(*r.non_finite_index == 0);
}

TEST_CASE("finite difference check writes a JSON line") {
  std::ostringstream out;
  GradCheckOptions opts;
  opts.report_stream = &out;
  opts.label = "sum";
  finite_difference_check([](Tape&, Var x) { return ops::sum(x); }, Tensor({3}, 1.0f), opts);
  CHECK(out.str().find("\"label\":\"sum\"") != std::string::npos);
  CHECK(out.str().find("\"pass\":true") != std::string::npos);
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters unchanged and decays moments") {
    Tensor p = Tensor::from({2}, {1, -1});
    Tensor* params[] = {&p};
    AdamState st;
    adam_init(st, params);
    st.first_moment[0] = {0.5f, 0.5f};
    st.second_moment[0] = {0.25f, 0.25f};
    p.grad();  // zero gradient
    st.step_count = 0;
    Tensor before = p;
    // Parameters move by the stale moments; only the decay is checked here.
    adam_step(params, st);
    CHECK(st.first_moment[0][0] == doctest::Approx(0.45));
    CHECK(st.second_moment[0][0] == doctest::Approx(0.24975));
    CHECK(st.step_count == 1);

    Tensor q = Tensor::from({2}, {1, -1});
    Tensor* qs[] = {&q};
    AdamState fresh;
    adam_init(fresh, qs);
    q.grad();
    adam_step(qs, fresh);
    CHECK(q == Tensor::from({2}, {1, -1}));
    (void)before;
  }
  SUBCASE("first step moves by about lr against the gradient") {
    for (float g : {0.3f, -2.0f, 50.0f}) {
      Tensor p = Tensor::from({1}, {0});
      Tensor* params[] = {&p};
      AdamState st;
      adam_init(st, params);
      p.grad()[0] = g;
      adam_step(params, st);
      // m_hat = g, v_hat = g^2 -> step = lr * g / (|g| + eps)
      const double expected = -4e-4 * g / (std::abs(g) + 1e-8);
      CHECK(p[0] == doctest::Approx(expected).epsilon(1e-5));
    }
  }
  SUBCASE("identical calls are bit-identical") {
    std::mt19937_64 rng(9);
    Tensor a = random_tensor({7}, rng);
    Tensor b = a;
    Tensor ga = random_tensor({7}, rng);
    Tensor* pa[] = {&a};
    Tensor* pb[] = {&b};
    AdamState sa, sb;
    adam_init(sa, pa);
    adam_init(sb, pb);
    for (int i = 0; i < 3; ++i) {
      std::copy(ga.data().begin(), ga.data().end(), a.grad().begin());
      std::copy(ga.data().begin(), ga.data().end(), b.grad().begin());
      adam_step(pa, sa);
      adam_step(pb, sb);
    }
    CHECK(a == b);
    CHECK(sa.first_moment == sb.first_moment);
  }
  SUBCASE("missing gradient is rejected") {
    Tensor p({2});
    Tensor* params[] = {&p};
    AdamState st;
    adam_init(st, params);
    CHECK_THROWS_AS(adam_step(params, st), UsageError);
  }
}

namespace {

}  // namespace

TEST_CASE("gradient checks of the differentiable primitives on random inputs") {
  std::mt19937_64 rng(2024);
  auto rnd = [&](Shape shape) { return random_tensor(std::move(shape), rng); };
  Trial conv, tconv, lin, affine, misc;
  for (int trial = 0; trial < 20; ++trial) {
    {
      const std::size_t stride = 1 + trial % 2;
      std::vector<Tensor> args = {rnd({2, 3, 8}), rnd({2, 3, 4}), rnd({2})};
      auto op = [stride](const std::vector<Var>& v) { return ops::conv1d(v[0], v[1], v[2], stride, 1); };
      Tape probe;
      const auto shape = op({probe.constant(args[0]), probe.constant(args[1]), probe.constant(args[2])}).shape();
      Tensor proj = random_tensor(shape, rng);
      for (std::size_t a = 0; a < 3; ++a) check_argument(conv, op, args, a, proj);
    }
    {
      std::vector<Tensor> args = {rnd({2, 3, 5}), rnd({3, 2, 4}), rnd({2})};
      auto op = [](const std::vector<Var>& v) { return ops::transposed_conv1d(v[0], v[1], v[2], 2); };
      Tensor proj = rnd({2, 2, 10});
      for (std::size_t a = 0; a < 3; ++a) check_argument(tconv, op, args, a, proj);
    }
    {
      std::vector<Tensor> args = {rnd({3, 4}), rnd({5, 4}), rnd({5})};
      auto op = [](const std::vector<Var>& v) { return ops::linear(v[0], v[1], v[2]); };
      Tensor proj = rnd({3, 5});
      for (std::size_t a = 0; a < 3; ++a) check_argument(lin, op, args, a, proj);
    }
    {
      std::vector<Tensor> args = {rnd({2, 3, 4}), rnd({2, 3}), rnd({2, 3})};
      auto op = [](const std::vector<Var>& v) { return ops::channel_affine(v[0], v[1], v[2]); };
      Tensor proj = rnd({2, 3, 4});
      for (std::size_t a = 0; a < 3; ++a) check_argument(affine, op, args, a, proj);
    }
    {
      std::vector<Tensor> args = {rnd({2, 3, 4}), rnd({2, 2}), rnd({1})};
      auto op = [](const std::vector<Var>& v) {
        auto cat = ops::broadcast_concat(ops::circular_pad(v[0], 1), ops::exp(v[1]));
        auto frames = ops::to_frames(cat);
        auto cols = ops::slice_columns(frames, 1, 3);
        return ops::add(ops::time_mean(ops::from_frames(cols, 2, 6)), ops::time_mean(ops::from_frames(cols, 2, 6)));
      };
      Tensor proj = rnd({2, 3});
      for (std::size_t a = 0; a < 2; ++a) check_argument(misc, op, args, a, proj);
    }
  }
  INFO("conv " << conv.worst << " tconv " << tconv.worst << " linear " << lin.worst << " affine " << affine.worst
               << " misc " << misc.worst);
  CHECK(conv.failures == 0);
  CHECK(tconv.failures == 0);
  CHECK(lin.failures == 0);
  CHECK(affine.failures == 0);
  CHECK(misc.failures == 0);
  MESSAGE("worst rel err conv " << conv.worst << " tconv " << tconv.worst << " linear " << lin.worst << " affine "
                                << affine.worst << " misc " << misc.worst);
}

TEST_CASE("frozen relu masks replay the recorded pattern") {
  const Tensor a = Tensor::from({4}, {1.0f, -1.0f, 2.0f, -2.0f});
  const Tensor b = Tensor::from({4}, {-1.0f, 1.0f, 3.0f, -2.0f});
  FrozenReluMasks masks;
  {
    Tape tape;
    const Var y = ops::relu(tape.constant(a));
    CHECK(y.value() == Tensor::from({4}, {1.0f, 0.0f, 2.0f, 0.0f}));
  }
  CHECK(masks.recorded() == 1);
  masks.rewind();
  Tape tape;
  const Var x = tape.variable(b);
  const Var y = ops::relu(x);
  // mask of a applied to b: passes -1 through, blocks 1
  CHECK(y.value() == Tensor::from({4}, {-1.0f, 0.0f, 3.0f, 0.0f}));
  tape.backward(ops::sum(y));
  CHECK(std::vector<float>(tape.grad(x).begin(), tape.grad(x).end()) == std::vector<float>{1, 0, 1, 0});
  CHECK_THROWS_AS(FrozenReluMasks{}, UsageError);
  masks.rewind();
  Tape t2;
  CHECK_THROWS_AS(ops::relu(t2.constant(Tensor({3}))), UsageError);
}

TEST_CASE("relu outside a frozen scope uses the sign") {
  { FrozenReluMasks masks; }
  CHECK(frozen_relu_masks() == nullptr);
  Tape tape;
  CHECK(ops::relu(tape.constant(Tensor::from({2}, {-1.0f, 1.0f}))).value() == Tensor::from({2}, {0.0f, 1.0f}));
}
