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

#include "cauliflow/autodiff/parameter.h"

#include <utility>

#include "cauliflow/common/error.h"

namespace cauliflow::ad {

void Parameter::Assign(Tensor new_value) {
  if (new_value.shape() != value.shape()) {
    throw ShapeError("parameter " + name + ": cannot assign shape " +
                     ShapeToString(new_value.shape()) + " to " +
                     ShapeToString(value.shape()));
  }
  value = std::move(new_value);
  MarkModified();
}

Parameter* ParameterStore::Create(const std::string& name, Tensor init,
                                  bool requires_grad) {
  if (by_name_.count(name)) {
    throw ConfigError("duplicate parameter name: " + name);
  }
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->grad = Tensor(init.shape());
  p->value = std::move(init);
  p->requires_grad = requires_grad;
  Parameter* raw = p.get();
  owned_.push_back(std::move(p));
  order_.push_back(raw);
  by_name_[name] = raw;
  return raw;
}

Parameter* ParameterStore::Find(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

Parameter& ParameterStore::Get(const std::string& name) const {
  Parameter* p = Find(name);
  if (!p) throw ConfigError("unknown parameter: " + name);
  return *p;
}

std::size_t ParameterStore::NumScalars() const {
  std::size_t n = 0;
  for (const Parameter* p : order_) n += p->value.size();
  return n;
}

void ParameterStore::ZeroGrad() {
  for (Parameter* p : order_) p->grad.Fill(0.0);
}

std::map<std::string, Tensor> ParameterStore::Snapshot() const {
  std::map<std::string, Tensor> out;
  for (const Parameter* p : order_) out.emplace(p->name, p->value);
  return out;
}

void ParameterStore::Restore(const std::map<std::string, Tensor>& values) {
  if (values.size() != order_.size()) {
    throw IoError("parameter count mismatch: expected " +
                  std::to_string(order_.size()) + ", got " +
                  std::to_string(values.size()));
  }
  for (Parameter* p : order_) {
    auto it = values.find(p->name);
    if (it == values.end()) throw IoError("missing parameter: " + p->name);
    p->Assign(it->second);
  }
}

}  // namespace cauliflow::ad
