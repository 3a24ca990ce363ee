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

#ifndef CAULIFLOW_AUTODIFF_GRAD_CHECK_H_
#define CAULIFLOW_AUTODIFF_GRAD_CHECK_H_

#include <functional>
#include <string>
#include <vector>

#include "cauliflow/autodiff/graph.h"
#include "cauliflow/autodiff/parameter.h"

namespace cauliflow::ad {

struct GradCheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  // Relative error is |analytic - numeric| / max(|analytic|, |numeric|,
  // floor); the floor keeps coordinates with vanishing gradients from
  // dominating the report with rounding noise.
  double floor = 1e-3;
  // 0 checks every coordinate; otherwise an evenly strided subset.
  std::size_t max_coordinates = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  std::string worst;
  std::vector<std::string> failures;
  bool passed() const { return failures.empty(); }
};

// Builds a fresh graph with `closure` (which must return a single-element
// loss), back-propagates, and compares every coordinate of `inputs` with a
// central finite difference. Inputs are restored afterwards.
GradCheckReport GradCheck(const std::function<Var(Graph&)>& closure,
                          const std::vector<Parameter*>& inputs,
                          const GradCheckOptions& options = {});

}  // namespace cauliflow::ad

#endif  // CAULIFLOW_AUTODIFF_GRAD_CHECK_H_
