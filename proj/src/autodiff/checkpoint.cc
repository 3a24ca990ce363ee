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

#include "cauliflow/autodiff/checkpoint.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <utility>
#include <vector>

#include "cauliflow/common/error.h"

namespace cauliflow::ad {

namespace {

constexpr char kMagic[8] = {'C', 'F', 'C', 'K', 'P', 'T', '0', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

template <typename T>
void WritePod(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

void WriteString(std::ostream& os, const std::string& s) {
  WritePod<uint32_t>(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T ReadPod(std::istream& is, const std::string& path) {
  T value{};
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw IoError("truncated checkpoint: " + path);
  }
  return value;
}

std::string ReadString(std::istream& is, const std::string& path) {
  uint32_t n = ReadPod<uint32_t>(is, path);
  if (n > (1u << 24)) throw IoError("corrupt checkpoint string: " + path);
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n)) throw IoError("truncated checkpoint: " + path);
  return s;
}

}  // namespace

void SaveCheckpoint(const std::string& path, const Checkpoint& checkpoint) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write checkpoint: " + path);
  os.write(kMagic, sizeof(kMagic));
  WritePod<uint32_t>(os, static_cast<uint32_t>(checkpoint.metadata.size()));
  for (const auto& [k, v] : checkpoint.metadata) {
    WriteString(os, k);
    WriteString(os, v);
  }
  WritePod<uint32_t>(os, static_cast<uint32_t>(checkpoint.tensors.size()));
  for (const auto& [name, t] : checkpoint.tensors) {
    WriteString(os, name);
    WritePod<uint32_t>(os, static_cast<uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) WritePod<uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.data().data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!os) throw IoError("failed writing checkpoint: " + path);
}

Checkpoint LoadCheckpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  if (!is.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("not a checkpoint file: " + path);
  }
  Checkpoint ckpt;
  uint32_t n_meta = ReadPod<uint32_t>(is, path);
  for (uint32_t i = 0; i < n_meta; ++i) {
    std::string k = ReadString(is, path);
    ckpt.metadata[k] = ReadString(is, path);
  }
  uint32_t n_tensors = ReadPod<uint32_t>(is, path);
  for (uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = ReadString(is, path);
    uint32_t rank = ReadPod<uint32_t>(is, path);
    if (rank > 8) throw IoError("corrupt tensor rank in " + path);
    Shape shape(rank);
    for (uint32_t r = 0; r < rank; ++r) {
      shape[r] = static_cast<std::size_t>(ReadPod<uint64_t>(is, path));
    }
    std::vector<double> data(NumElements(shape));
    if (!data.empty() &&
        !is.read(reinterpret_cast<char*>(data.data()),
                 static_cast<std::streamsize>(data.size() * sizeof(double)))) {
      throw IoError("truncated tensor " + name + " in " + path);
    }
    ckpt.tensors.emplace(name, Tensor(std::move(shape), std::move(data)));
  }
  return ckpt;
}

Checkpoint MakeCheckpoint(const ParameterStore& params,
                          std::map<std::string, std::string> metadata) {
  Checkpoint ckpt;
  ckpt.metadata = std::move(metadata);
  ckpt.tensors = params.Snapshot();
  return ckpt;
}

}  // namespace cauliflow::ad
