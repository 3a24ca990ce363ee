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

#ifndef CAULIFLOW_CHECKS_INVARIANTS_H_
#define CAULIFLOW_CHECKS_INVARIANTS_H_

#include <cstdint>
#include <string>
#include <vector>

namespace cauliflow::checks {

struct CheckResult {
  std::string name;
  bool passed = false;
  // The measured quantity the check thresholds (an error or an integral).
  double value = 0.0;
  std::string detail;
};

// Forward(Inverse(y)) == y on random small flows with random conditioning.
// Passes when max |error| / (1 + max |y|) <= 1e-6.
CheckResult FlowRoundTrip(std::size_t trials = 100, uint64_t seed = 1);

// Analytic log|det J| against central differences of the inverse on
// utterances of at most 8 tokens. Passes at relative error <= 1e-4.
CheckResult FlowLogDet(std::size_t trials = 20, uint64_t seed = 2);

// Midpoint quadrature of the density of a briefly trained two-channel flow
// over one row. Passes when the integral lies in [0.98, 1.02].
CheckResult FlowDensity(uint64_t seed = 3);

// Central-difference check of every op kind of the tape.
CheckResult OpGradients(uint64_t seed = 4);

// Central-difference check of the full flow NLL of a 2-token utterance.
CheckResult FlowNllGradient(uint64_t seed = 5);

// fbeta, jsd and percentile_l1 against brute-force versions on random
// instances. Passes when every difference is <= 1e-12.
CheckResult MetricOracles(std::size_t instances = 1000, uint64_t seed = 6);

std::vector<CheckResult> RunSelfTest();

}  // namespace cauliflow::checks

#endif  // CAULIFLOW_CHECKS_INVARIANTS_H_
