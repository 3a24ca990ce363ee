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

#include "cauliflow/autodiff/layers.h"

#include <cmath>

#include "cauliflow/common/error.h"

namespace cauliflow::ad {

namespace {

Tensor GlorotUniform(Shape shape, std::size_t fan_in, std::size_t fan_out,
                     Rng* rng) {
  Tensor t(std::move(shape));
  double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : t.mutable_data()) v = (2.0 * rng->Uniform() - 1.0) * limit;
  return t;
}

}  // namespace

Linear::Linear(ParameterStore* store, const std::string& name, std::size_t in,
               std::size_t out, Rng* rng, Init init)
    : in_(in), out_(out) {
  Tensor w = init == Init::kZero ? Tensor({in, out})
                                 : GlorotUniform({in, out}, in, out, rng);
  weight_ = store->Create(name + ".weight", std::move(w));
  bias_ = store->Create(name + ".bias", Tensor({out}));
}

Var Linear::operator()(Graph& g, Var x) const {
  return AddRowBias(g, g.Matmul(x, g.Param(weight_)), g.Param(bias_));
}

Conv1dLayer::Conv1dLayer(ParameterStore* store, const std::string& name,
                         std::size_t in, std::size_t out, std::size_t taps,
                         int dilation, Rng* rng, Init init)
    : taps_(taps), dilation_(dilation), out_(out) {
  Tensor w = init == Init::kZero
                 ? Tensor({taps, in, out})
                 : GlorotUniform({taps, in, out}, taps * in, out, rng);
  weight_ = store->Create(name + ".weight", std::move(w));
  bias_ = store->Create(name + ".bias", Tensor({out}));
}

Var Conv1dLayer::operator()(Graph& g, Var x) const {
  return AddRowBias(g, g.Conv1d(x, g.Param(weight_), dilation_),
                    g.Param(bias_));
}

Var AddRowBias(Graph& g, Var x, Var bias) {
  const Shape& shape = g.value(x).shape();
  std::size_t c = shape.back();
  if (g.value(bias).size() != c) {
    throw ShapeError("bias of size " + std::to_string(g.value(bias).size()) +
                     " does not match " + ShapeToString(shape));
  }
  Shape ones_shape(shape.begin(), shape.end() - 1);
  ones_shape.push_back(1);
  Var ones = g.Input(Tensor::Full(ones_shape, 1.0));
  Var expanded = g.Matmul(ones, g.Reshape(bias, {1, c}));
  return g.Add(x, expanded);
}

Var ScaleRows(Graph& g, Var x, Var scale) {
  const Shape& shape = g.value(x).shape();
  std::size_t c = shape.back();
  Shape ones_shape(shape.begin(), shape.end() - 1);
  ones_shape.push_back(1);
  Var ones = g.Input(Tensor::Full(ones_shape, 1.0));
  Var expanded = g.Matmul(ones, g.Reshape(scale, {1, c}));
  return g.Mul(x, expanded);
}

Var ExpandOverTime(Graph& g, Var per_sequence, std::size_t length) {
  const Tensor& v = g.value(per_sequence);
  if (v.rank() != 2) {
    throw ShapeError("ExpandOverTime expects [B, C], got " +
                     ShapeToString(v.shape()));
  }
  std::size_t batch = v.dim(0);
  std::size_t c = v.dim(1);
  // Selection matrix S[b * L + t, b] = 1.
  Tensor select({batch * length, batch});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < length; ++t) select[(b * length + t) * batch + b] = 1.0;
  }
  Var rows = g.Matmul(g.Input(std::move(select)), per_sequence);
  return g.Reshape(rows, {batch, length, c});
}

Var GatedActivation(Graph& g, Var x) {
  const Shape& shape = g.value(x).shape();
  std::size_t axis = shape.size() - 1;
  std::size_t half = shape.back() / 2;
  if (half * 2 != shape.back()) {
    throw ShapeError("gated activation needs an even channel count");
  }
  Var a = g.Slice(x, axis, 0, half);
  Var b = g.Slice(x, axis, half, 2 * half);
  return g.Mul(g.Tanh(a), g.Sigmoid(b));
}

Var MaskTime(Graph& g, Var x, const Tensor& valid) {
  const Tensor& xv = g.value(x);
  std::size_t c = xv.shape().back();
  std::size_t positions = xv.size() / c;
  if (valid.size() != positions) {
    throw ShapeError("time mask with " + std::to_string(valid.size()) +
                     " entries does not match " + ShapeToString(xv.shape()));
  }
  Tensor fill(xv.shape());
  bool any = false;
  for (std::size_t p = 0; p < positions; ++p) {
    if (valid[p] == 0.0) {
      any = true;
      for (std::size_t j = 0; j < c; ++j) fill[p * c + j] = 1.0;
    }
  }
  if (!any) return x;
  return g.MaskedFill(x, fill, 0.0);
}

}  // namespace cauliflow::ad
