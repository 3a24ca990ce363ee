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

#ifndef CAULIFLOW_AUTODIFF_PARAMETER_H_
#define CAULIFLOW_AUTODIFF_PARAMETER_H_

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cauliflow/autodiff/tensor.h"

namespace cauliflow::ad {

// A trainable leaf. `version` is bumped by every in-place update so a
// Graph can detect that its recorded forward pass is stale.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool requires_grad = true;
  uint64_t version = 0;

  void Assign(Tensor new_value);
  void MarkModified() { ++version; }
};

// Owns the parameters of a model in insertion order. Pointers handed out
// by Create() stay valid for the lifetime of the store.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  Parameter* Create(const std::string& name, Tensor init,
                    bool requires_grad = true);
  Parameter* Find(const std::string& name) const;
  Parameter& Get(const std::string& name) const;

  const std::vector<Parameter*>& parameters() const { return order_; }
  std::size_t NumScalars() const;
  void ZeroGrad();

  std::map<std::string, Tensor> Snapshot() const;
  // Assigns every stored parameter from `values`; names and shapes must
  // match exactly.
  void Restore(const std::map<std::string, Tensor>& values);

 private:
  std::vector<std::unique_ptr<Parameter>> owned_;
  std::vector<Parameter*> order_;
  std::map<std::string, Parameter*> by_name_;
};

}  // namespace cauliflow::ad

#endif  // CAULIFLOW_AUTODIFF_PARAMETER_H_
