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

#include "cauliflow/autodiff/adam.h"

#include <cmath>

#include "cauliflow/common/error.h"

namespace cauliflow::ad {

void Adam::Step(ParameterStore& params) {
  double sq = 0.0;
  for (const Parameter* p : params.parameters()) {
    if (!p->requires_grad) continue;
    for (double g : p->grad.data()) {
      if (!std::isfinite(g)) {
        throw NumericError("adam: non-finite gradient for " + p->name);
      }
      sq += g * g;
    }
  }
  last_grad_norm_ = std::sqrt(sq);
  double clip = 1.0;
  if (config_.clip_norm > 0.0 && last_grad_norm_ > config_.clip_norm) {
    clip = config_.clip_norm / last_grad_norm_;
  }

  ++step_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (Parameter* p : params.parameters()) {
    if (!p->requires_grad) continue;
    auto it = moments_.find(p->name);
    if (it == moments_.end()) {
      it = moments_
               .emplace(p->name, Moments{Tensor(p->value.shape()),
                                         Tensor(p->value.shape())})
               .first;
    }
    auto m = it->second.first.mutable_data();
    auto v = it->second.second.mutable_data();
    auto w = p->value.mutable_data();
    auto g = p->grad.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      double gi = g[i] * clip;
      m[i] = b1 * m[i] + (1.0 - b1) * gi;
      v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
      double m_hat = m[i] / c1;
      double v_hat = v[i] / c2;
      w[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
    p->MarkModified();
  }
}

}  // namespace cauliflow::ad
