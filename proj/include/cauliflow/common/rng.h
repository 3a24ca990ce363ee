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

#ifndef CAULIFLOW_COMMON_RNG_H_
#define CAULIFLOW_COMMON_RNG_H_

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace cauliflow {

// Counter-based, splittable random number generator.
//
// Every value is a pure function of (key, counter), so a stream can be
// forked into independent children with Split() without consuming draws
// from the parent. All sampling in the library goes through this type;
// std:: distributions are avoided because their output is not specified
// bit-for-bit across standard library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0);

  // Child streams. Splitting never advances the parent.
  Rng Split(uint64_t index) const;
  Rng Split(std::string_view tag) const;

  uint64_t NextU64();
  // Uniform on [0, 1) with 53 bits of resolution.
  double Uniform();
  // Standard normal via Box-Muller; consumes exactly two uniforms.
  double Normal();
  double Normal(double mean, double stddev) { return mean + stddev * Normal(); }
  // Uniform integer on [0, n). n must be positive.
  uint64_t UniformInt(uint64_t n);
  bool Bernoulli(double p) { return Uniform() < p; }

  template <typename T>
  void Shuffle(std::vector<T>* values) {
    for (std::size_t i = values->size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(UniformInt(i));
      std::swap((*values)[i - 1], (*values)[j]);
    }
  }

  uint64_t key() const { return key_; }
  uint64_t counter() const { return counter_; }

 private:
  Rng(uint64_t key, uint64_t counter) : key_(key), counter_(counter) {}

  uint64_t key_;
  uint64_t counter_;
};

// SplitMix64 finaliser; exposed for hashing seeds and tags.
uint64_t Mix64(uint64_t x);

}  // namespace cauliflow

#endif  // CAULIFLOW_COMMON_RNG_H_
