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

#include "cauliflow/autodiff/grad_check.h"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cauliflow::ad {

namespace {

double Evaluate(const std::function<Var(Graph&)>& closure) {
  Graph g(/*grad_enabled=*/false);
  return g.value(closure(g)).item();
}

}  // namespace

GradCheckReport GradCheck(const std::function<Var(Graph&)>& closure,
                          const std::vector<Parameter*>& inputs,
                          const GradCheckOptions& options) {
  std::vector<Tensor> saved_grads;
  for (Parameter* p : inputs) {
    saved_grads.push_back(p->grad);
    p->grad.Fill(0.0);
  }
  {
    Graph g;
    Var loss = closure(g);
    g.Backward(loss);
  }
  std::vector<Tensor> analytic;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    analytic.push_back(inputs[i]->grad);
    inputs[i]->grad = saved_grads[i];
  }

  std::size_t total = 0;
  for (Parameter* p : inputs) total += p->value.size();
  std::size_t stride = 1;
  if (options.max_coordinates > 0 && total > options.max_coordinates) {
    stride = (total + options.max_coordinates - 1) / options.max_coordinates;
  }

  GradCheckReport report;
  std::size_t flat = 0;
  for (std::size_t pi = 0; pi < inputs.size(); ++pi) {
    Parameter* p = inputs[pi];
    for (std::size_t i = 0; i < p->value.size(); ++i, ++flat) {
      if (flat % stride != 0) continue;
      double original = p->value[i];
      p->value[i] = original + options.step;
      p->MarkModified();
      double up = Evaluate(closure);
      p->value[i] = original - options.step;
      p->MarkModified();
      double down = Evaluate(closure);
      p->value[i] = original;
      p->MarkModified();

      double numeric = (up - down) / (2.0 * options.step);
      double a = analytic[pi][i];
      double denom =
          std::max({std::abs(a), std::abs(numeric), options.floor});
      double rel = std::abs(a - numeric) / denom;
      ++report.coordinates;
      if (rel > report.max_rel_error || report.worst.empty()) {
        report.max_rel_error = std::max(report.max_rel_error, rel);
        std::ostringstream os;
        os << p->name << '[' << i << "] analytic=" << a
           << " numeric=" << numeric;
        if (rel >= report.max_rel_error) report.worst = os.str();
      }
      if (rel > options.tolerance) {
        std::ostringstream os;
        os << p->name << '[' << i << "] rel_err=" << rel << " analytic=" << a
           << " numeric=" << numeric;
        report.failures.push_back(os.str());
      }
    }
  }
  return report;
}

}  // namespace cauliflow::ad
