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

#ifndef CAULIFLOW_AUTODIFF_LAYERS_H_
#define CAULIFLOW_AUTODIFF_LAYERS_H_

#include <string>

#include "cauliflow/autodiff/graph.h"
#include "cauliflow/autodiff/parameter.h"
#include "cauliflow/common/rng.h"

namespace cauliflow::ad {

enum class Init { kGlorot, kZero };

// y = x W + b over the last axis.
class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore* store, const std::string& name, std::size_t in,
         std::size_t out, Rng* rng, Init init = Init::kGlorot);

  Var operator()(Graph& g, Var x) const;
  std::size_t in() const { return in_; }
  std::size_t out() const { return out_; }

 private:
  Parameter* weight_ = nullptr;
  Parameter* bias_ = nullptr;
  std::size_t in_ = 0;
  std::size_t out_ = 0;
};

// Dilated 1-D convolution with bias over [batch, length, channels].
class Conv1dLayer {
 public:
  Conv1dLayer() = default;
  Conv1dLayer(ParameterStore* store, const std::string& name, std::size_t in,
              std::size_t out, std::size_t taps, int dilation, Rng* rng,
              Init init = Init::kGlorot);

  Var operator()(Graph& g, Var x) const;
  // Positions on either side of the centre that influence one output.
  std::size_t HalfReach() const {
    return ((taps_ - 1) * static_cast<std::size_t>(dilation_) + 1) / 2;
  }
  std::size_t out() const { return out_; }

 private:
  Parameter* weight_ = nullptr;
  Parameter* bias_ = nullptr;
  std::size_t taps_ = 1;
  int dilation_ = 1;
  std::size_t out_ = 0;
};

// Adds a [C] bias to every row of x ([..., C]). Implemented as a rank-1
// matmul against a column of ones, so no broadcasting op is needed.
Var AddRowBias(Graph& g, Var x, Var bias);

// Multiplies every row of x ([..., C]) elementwise by a [C] vector.
Var ScaleRows(Graph& g, Var x, Var scale);

// Expands per-sequence vectors [B, C] to [B, L, C].
Var ExpandOverTime(Graph& g, Var per_sequence, std::size_t length);

// tanh(a) * sigmoid(b) where [a, b] are the two halves of the last axis.
Var GatedActivation(Graph& g, Var x);

// Zeros every channel at positions whose entry in `valid` ([B, L] or
// [B, L, 1]) is 0.
Var MaskTime(Graph& g, Var x, const Tensor& valid);

}  // namespace cauliflow::ad

#endif  // CAULIFLOW_AUTODIFF_LAYERS_H_
