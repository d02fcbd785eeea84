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

#include <initializer_list>
#include <string>

#include "zvq/error.hpp"
#include "zvq/numerics/tape.hpp"

// Argument validation shared by the op implementations.
namespace zvq::detail {

inline void expect_rank(const Var& v, std::size_t rank, const char* op, const char* what) {
  if (v.value().rank() != rank) {
    throw UsageError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) + ", got " +
                     to_string(v.shape()));
  }
}

inline void expect_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw UsageError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

inline Tape& tape_of(std::initializer_list<Var> vars, const char* op) {
  Tape* tape = nullptr;
  for (const Var& v : vars) {
    if (!v.valid()) throw UsageError(std::string(op) + ": unbound input");
    if (tape && v.tape() != tape) throw UsageError(std::string(op) + ": inputs live on different tapes");
    tape = v.tape();
  }
  return *tape;
}

}  // namespace zvq::detail
