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

#ifndef CAULIFLOW_AUTODIFF_GRAPH_H_
#define CAULIFLOW_AUTODIFF_GRAPH_H_

#include <cstdint>
#include <string>
#include <vector>

#include "cauliflow/autodiff/parameter.h"
#include "cauliflow/autodiff/tensor.h"

namespace cauliflow::ad {

enum class OpKind {
  kInput,
  kParam,
  kAdd,
  kSub,
  kMul,
  kScale,
  kAddScalar,
  kBroadcast,
  kExp,
  kLog,
  kTanh,
  kSigmoid,
  kSoftplus,
  kMatmul,
  kConv1d,
  kEmbedding,
  kSum,
  kMean,
  kConcat,
  kSlice,
  kMaskedFill,
  kReshape,
};

const char* OpName(OpKind kind);

// Handle to a node of a Graph. Only meaningful together with the Graph that
// produced it.
class Var {
 public:
  Var() = default;
  int id() const { return id_; }
  bool valid() const { return id_ >= 0; }

 private:
  friend class Graph;
  explicit Var(int id) : id_(id) {}
  int id_ = -1;
};

// Tape for reverse-mode differentiation.
//
// Nodes are appended in execution order, so the tape is topologically
// sorted by construction and Backward() walks it in exact reverse order.
// Every op validates shapes up front and checks its output for NaN/Inf.
//
// Broadcasting is limited to scalars (Scale, AddScalar, Broadcast); all
// binary elementwise ops require identical shapes. Matmul treats every
// leading axis of its left operand as a row index. Conv1d expects
// [batch, length, channels] (or [length, channels]) activations and a
// [taps, in, out] kernel with "same" zero padding: tap k reads position
// t + k * dilation - ((taps - 1) * dilation) / 2.
class Graph {
 public:
  // With grad_enabled = false, parameters enter as constants and no
  // gradient bookkeeping is kept (inference).
  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  Var Input(Tensor value);
  Var Param(Parameter* parameter);

  Var Add(Var a, Var b);
  Var Sub(Var a, Var b);
  Var Mul(Var a, Var b);
  Var Scale(Var a, double factor);
  Var AddScalar(Var a, double offset);
  // Expands a single-element tensor to `shape`.
  Var Broadcast(Var scalar, Shape shape);

  Var Exp(Var a);
  Var Log(Var a);
  Var Tanh(Var a);
  Var Sigmoid(Var a);
  Var Softplus(Var a);

  Var Matmul(Var a, Var b);
  Var Conv1d(Var x, Var kernel, int dilation);
  // Rows of `table` ([vocab, dim]) selected by `indices`; the result has
  // shape prefix + [dim], where prefix holds indices.size() elements.
  Var Embedding(Var table, std::vector<int> indices, Shape prefix);

  Var Sum(Var a);
  Var Mean(Var a);
  Var Concat(const std::vector<Var>& parts, std::size_t axis);
  Var Slice(Var a, std::size_t axis, std::size_t begin, std::size_t end);
  // Positions where mask != 0 are replaced by `value`; they receive no
  // gradient.
  Var MaskedFill(Var a, const Tensor& mask, double value);
  Var Reshape(Var a, Shape shape);

  const Tensor& value(Var v) const;
  // Gradient of the last Backward() loss with respect to v. Zero-shaped
  // when v does not require grad.
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const;
  OpKind kind(Var v) const;
  std::size_t size() const { return nodes_.size(); }
  bool grad_enabled() const { return grad_enabled_; }

  // Propagates d(loss)/d(node) through the tape and accumulates the result
  // into Parameter::grad of every parameter leaf. Throws if `loss` is not a
  // single element or if a parameter was modified after it was recorded.
  void Backward(Var loss);

 private:
  struct Node {
    OpKind kind = OpKind::kInput;
    std::vector<int> inputs;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    Parameter* parameter = nullptr;
    uint64_t parameter_version = 0;
    // Op attributes.
    double scalar = 0.0;
    std::size_t axis = 0;
    std::size_t begin = 0;
    int dilation = 1;
    std::vector<int> indices;
    std::vector<uint8_t> mask;
  };

  Var Record(Node node);
  const Node& node(Var v) const;
  Tensor& GradBuffer(int id);
  void BackwardNode(int id);

  bool grad_enabled_;
  std::vector<Node> nodes_;
};

}  // namespace cauliflow::ad

#endif  // CAULIFLOW_AUTODIFF_GRAPH_H_
