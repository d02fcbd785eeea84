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
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace zvq {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// Dense row-major float32 array with an optional gradient buffer.
///
/// Every dimension is at least 1 and the gradient, once allocated, has the
/// same length as the data.
class Tensor {
 public:
  Tensor();  // scalar zero
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  static Tensor scalar(float value);
  static Tensor from(Shape shape, std::initializer_list<float> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t numel() const { return data_.size(); }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  std::vector<float>& storage() { return data_; }
  const std::vector<float>& storage() const { return data_; }
  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }
  float item() const;

  bool has_grad() const { return grad_.has_value(); }
  /// Allocates a zero gradient if none is present.
  std::span<float> grad();
  std::span<const float> grad() const;
  void zero_grad();
  void clear_grad() { grad_.reset(); }

  /// Same data, new shape with equal element count.
  Tensor reshaped(Shape shape) const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<float> data_;
  std::optional<std::vector<float>> grad_;
};

}  // namespace zvq
