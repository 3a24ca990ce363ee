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

#ifndef CAULIFLOW_AUTODIFF_ADAM_H_
#define CAULIFLOW_AUTODIFF_ADAM_H_

#include <cstdint>
#include <map>
#include <string>

#include "cauliflow/autodiff/parameter.h"
#include "cauliflow/autodiff/tensor.h"

namespace cauliflow::ad {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Global gradient-norm clip; <= 0 disables clipping.
  double clip_norm = 0.0;
};

// Adam with bias correction. Moment buffers are keyed by parameter name
// and created lazily with the parameter's shape.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  // Applies one update to every parameter in `params` that requires grad,
  // using the gradients currently stored on them. Throws NumericError on a
  // non-finite gradient; parameters are left untouched in that case.
  void Step(ParameterStore& params);

  int64_t step_count() const { return step_; }
  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  // Norm of the gradient seen by the most recent Step(), before clipping.
  double last_grad_norm() const { return last_grad_norm_; }

 private:
  struct Moments {
    Tensor first;
    Tensor second;
  };

  AdamConfig config_;
  int64_t step_ = 0;
  double last_grad_norm_ = 0.0;
  std::map<std::string, Moments> moments_;
};

}  // namespace cauliflow::ad

#endif  // CAULIFLOW_AUTODIFF_ADAM_H_
