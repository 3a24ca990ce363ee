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

#ifndef CAULIFLOW_AUTODIFF_CHECKPOINT_H_
#define CAULIFLOW_AUTODIFF_CHECKPOINT_H_

#include <map>
#include <string>

#include "cauliflow/autodiff/parameter.h"
#include "cauliflow/autodiff/tensor.h"

namespace cauliflow::ad {

// Binary key -> array map with a string metadata section.
//
// Layout (all integers little-endian):
//   magic   "CFCKPT01"                      8 bytes
//   u32     metadata entry count
//   repeat: u32 key length, key bytes, u32 value length, value bytes
//   u32     tensor count
//   repeat: u32 name length, name bytes, u32 rank, u64 dims[rank],
//           f64 data[prod(dims)] (IEEE-754 binary64)
//
// Entries are written in sorted key order, so equal contents give equal
// bytes.
struct Checkpoint {
  std::map<std::string, std::string> metadata;
  std::map<std::string, Tensor> tensors;
};

void SaveCheckpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint LoadCheckpoint(const std::string& path);

Checkpoint MakeCheckpoint(const ParameterStore& params,
                          std::map<std::string, std::string> metadata);

}  // namespace cauliflow::ad

#endif  // CAULIFLOW_AUTODIFF_CHECKPOINT_H_
