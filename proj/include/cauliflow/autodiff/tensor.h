// Copyright (c) 2026 The Cauliflow Authors
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

#ifndef CAULIFLOW_AUTODIFF_TENSOR_H_
#define CAULIFLOW_AUTODIFF_TENSOR_H_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cauliflow::ad {

using Shape = std::vector<std::size_t>;

std::size_t NumElements(const Shape& shape);
std::string ShapeToString(const Shape& shape);

// Dense row-major array of doubles. A plain value type: copies are deep,
// and a Tensor that is not attached to a Graph can be shared read-only
// across threads.
class Tensor {
 public:
  // Rank-0 tensor holding 0.
  Tensor();
  // Zero-filled tensor of the given shape.
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor Scalar(double value);
  static Tensor Full(Shape shape, double value);
  static Tensor Vector(std::vector<double> values);
  static Tensor Matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }

  std::span<const double> data() const { return data_; }
  std::span<double> mutable_data() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  // Value of a single-element tensor.
  double item() const;

  // Same data, new shape. Element counts must agree.
  Tensor Reshaped(Shape shape) const;
  void Fill(double value);
  bool AllFinite() const;

  // Bitwise equality of shape and data.
  bool operator==(const Tensor& other) const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

}  // namespace cauliflow::ad

#endif  // CAULIFLOW_AUTODIFF_TENSOR_H_
