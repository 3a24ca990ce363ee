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

#include "cauliflow/autodiff/graph.h"

#include <Eigen/Core>

#include <cmath>
#include <utility>

#include "cauliflow/common/error.h"

namespace cauliflow::ad {

namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

ConstMatrixMap AsMatrix(const Tensor& t, std::size_t rows, std::size_t cols) {
  return ConstMatrixMap(t.data().data(), static_cast<Eigen::Index>(rows),
                        static_cast<Eigen::Index>(cols));
}

MatrixMap AsMatrix(Tensor& t, std::size_t rows, std::size_t cols) {
  return MatrixMap(t.mutable_data().data(), static_cast<Eigen::Index>(rows),
                   static_cast<Eigen::Index>(cols));
}

void RequireSameShape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     ShapeToString(a.shape()) + " vs " +
                     ShapeToString(b.shape()));
  }
}

double StableSigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double StableSoftplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// Splits a shape around `axis` into (outer, extent, inner).
struct AxisView {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisView ViewAround(const Shape& shape, std::size_t axis) {
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

struct ConvDims {
  std::size_t batch = 1;
  std::size_t length = 0;
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t taps = 0;
  std::ptrdiff_t pad = 0;
};

ConvDims GetConvDims(const Shape& x, const Shape& w, int dilation) {
  ConvDims d;
  if (x.size() == 3) {
    d.batch = x[0];
    d.length = x[1];
    d.in = x[2];
  } else if (x.size() == 2) {
    d.length = x[0];
    d.in = x[1];
  } else {
    throw ShapeError("conv1d: input must be [B,L,C] or [L,C], got " +
                     ShapeToString(x));
  }
  if (w.size() != 3 || w[1] != d.in) {
    throw ShapeError("conv1d: kernel " + ShapeToString(w) +
                     " incompatible with input " + ShapeToString(x));
  }
  if (dilation < 1) throw ShapeError("conv1d: dilation must be >= 1");
  d.taps = w[0];
  d.out = w[2];
  d.pad = static_cast<std::ptrdiff_t>((d.taps - 1) * dilation) / 2;
  return d;
}

// Valid output range [lo, hi) for tap k and the matching input offset.
struct TapRange {
  std::ptrdiff_t lo;
  std::ptrdiff_t hi;
  std::ptrdiff_t shift;
};

TapRange RangeForTap(const ConvDims& d, std::size_t k, int dilation) {
  std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) * dilation - d.pad;
  std::ptrdiff_t len = static_cast<std::ptrdiff_t>(d.length);
  TapRange r;
  r.shift = shift;
  r.lo = std::max<std::ptrdiff_t>(0, -shift);
  r.hi = std::min<std::ptrdiff_t>(len, len - shift);
  return r;
}

}  // namespace

const char* OpName(OpKind kind) {
  switch (kind) {
    case OpKind::kInput: return "input";
    case OpKind::kParam: return "param";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kAddScalar: return "add_scalar";
    case OpKind::kBroadcast: return "broadcast";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kSoftplus: return "softplus";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kConv1d: return "conv1d";
    case OpKind::kEmbedding: return "embedding";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kMaskedFill: return "masked_fill";
    case OpKind::kReshape: return "reshape";
  }
  return "unknown";
}

const Graph::Node& Graph::node(Var v) const {
  if (v.id_ < 0 || static_cast<std::size_t>(v.id_) >= nodes_.size()) {
    throw Error("graph: invalid variable handle");
  }
  return nodes_[static_cast<std::size_t>(v.id_)];
}

const Tensor& Graph::value(Var v) const { return node(v).value; }

const Tensor& Graph::grad(Var v) const {
  static const Tensor kEmpty(Shape{0});
  const Node& n = node(v);
  return n.has_grad ? n.grad : kEmpty;
}

bool Graph::requires_grad(Var v) const { return node(v).requires_grad; }

OpKind Graph::kind(Var v) const { return node(v).kind; }

Var Graph::Record(Node n) {
  if (!n.value.AllFinite()) {
    throw NumericError(std::string("op ") + OpName(n.kind) +
                       " produced a non-finite value");
  }
  if (!grad_enabled_) {
    n.requires_grad = false;
  } else if (n.kind != OpKind::kParam) {
    for (int in : n.inputs) {
      if (nodes_[static_cast<std::size_t>(in)].requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
  }
  if (!n.requires_grad) {
    // Inputs are not needed for backward; drop op attributes that can be
    // large.
    n.indices.clear();
    n.mask.clear();
  }
  nodes_.push_back(std::move(n));
  return Var(static_cast<int>(nodes_.size() - 1));
}

Var Graph::Input(Tensor value) {
  Node n;
  n.kind = OpKind::kInput;
  n.value = std::move(value);
  return Record(std::move(n));
}

Var Graph::Param(Parameter* parameter) {
  Node n;
  n.kind = OpKind::kParam;
  n.value = parameter->value;
  n.parameter = parameter;
  n.parameter_version = parameter->version;
  n.requires_grad = grad_enabled_ && parameter->requires_grad;
  return Record(std::move(n));
}

Var Graph::Add(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  RequireSameShape("add", x, y);
  Node n;
  n.kind = OpKind::kAdd;
  n.inputs = {a.id_, b.id_};
  n.value = x;
  auto out = n.value.mutable_data();
  auto yd = y.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += yd[i];
  return Record(std::move(n));
}

Var Graph::Sub(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  RequireSameShape("sub", x, y);
  Node n;
  n.kind = OpKind::kSub;
  n.inputs = {a.id_, b.id_};
  n.value = x;
  auto out = n.value.mutable_data();
  auto yd = y.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= yd[i];
  return Record(std::move(n));
}

Var Graph::Mul(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  RequireSameShape("mul", x, y);
  Node n;
  n.kind = OpKind::kMul;
  n.inputs = {a.id_, b.id_};
  n.value = x;
  auto out = n.value.mutable_data();
  auto yd = y.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= yd[i];
  return Record(std::move(n));
}

Var Graph::Scale(Var a, double factor) {
  Node n;
  n.kind = OpKind::kScale;
  n.inputs = {a.id_};
  n.scalar = factor;
  n.value = value(a);
  for (double& v : n.value.mutable_data()) v *= factor;
  return Record(std::move(n));
}

Var Graph::AddScalar(Var a, double offset) {
  Node n;
  n.kind = OpKind::kAddScalar;
  n.inputs = {a.id_};
  n.scalar = offset;
  n.value = value(a);
  for (double& v : n.value.mutable_data()) v += offset;
  return Record(std::move(n));
}

Var Graph::Broadcast(Var scalar, Shape shape) {
  const Tensor& s = value(scalar);
  if (s.size() != 1) {
    throw ShapeError("broadcast: input must hold one element, got " +
                     ShapeToString(s.shape()));
  }
  Node n;
  n.kind = OpKind::kBroadcast;
  n.inputs = {scalar.id_};
  n.value = Tensor::Full(std::move(shape), s[0]);
  return Record(std::move(n));
}

Var Graph::Exp(Var a) {
  Node n;
  n.kind = OpKind::kExp;
  n.inputs = {a.id_};
  n.value = value(a);
  for (double& v : n.value.mutable_data()) v = std::exp(v);
  return Record(std::move(n));
}

Var Graph::Log(Var a) {
  Node n;
  n.kind = OpKind::kLog;
  n.inputs = {a.id_};
  n.value = value(a);
  for (double& v : n.value.mutable_data()) {
    if (!(v > 0.0)) {
      throw NumericError("op log: non-positive input " + std::to_string(v));
    }
    v = std::log(v);
  }
  return Record(std::move(n));
}

Var Graph::Tanh(Var a) {
  Node n;
  n.kind = OpKind::kTanh;
  n.inputs = {a.id_};
  n.value = value(a);
  for (double& v : n.value.mutable_data()) v = std::tanh(v);
  return Record(std::move(n));
}

Var Graph::Sigmoid(Var a) {
  Node n;
  n.kind = OpKind::kSigmoid;
  n.inputs = {a.id_};
  n.value = value(a);
  for (double& v : n.value.mutable_data()) v = StableSigmoid(v);
  return Record(std::move(n));
}

Var Graph::Softplus(Var a) {
  Node n;
  n.kind = OpKind::kSoftplus;
  n.inputs = {a.id_};
  n.value = value(a);
  for (double& v : n.value.mutable_data()) v = StableSoftplus(v);
  return Record(std::move(n));
}

Var Graph::Matmul(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& w = value(b);
  if (x.rank() < 1 || w.rank() != 2 || x.shape().back() != w.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + ShapeToString(x.shape()) +
                     " x " + ShapeToString(w.shape()));
  }
  std::size_t k = w.dim(0);
  std::size_t m = w.dim(1);
  std::size_t rows = x.size() / k;
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  out_shape.push_back(m);
  Node n;
  n.kind = OpKind::kMatmul;
  n.inputs = {a.id_, b.id_};
  n.value = Tensor(out_shape);
  AsMatrix(n.value, rows, m).noalias() = AsMatrix(x, rows, k) * AsMatrix(w, k, m);
  return Record(std::move(n));
}

Var Graph::Conv1d(Var x, Var kernel, int dilation) {
  const Tensor& in = value(x);
  const Tensor& w = value(kernel);
  ConvDims d = GetConvDims(in.shape(), w.shape(), dilation);
  Shape out_shape = in.shape();
  out_shape.back() = d.out;
  Node n;
  n.kind = OpKind::kConv1d;
  n.inputs = {x.id_, kernel.id_};
  n.dilation = dilation;
  n.value = Tensor(out_shape);
  auto out = AsMatrix(n.value, d.batch * d.length, d.out);
  auto xin = AsMatrix(in, d.batch * d.length, d.in);
  for (std::size_t k = 0; k < d.taps; ++k) {
    TapRange r = RangeForTap(d, k, dilation);
    if (r.hi <= r.lo) continue;
    auto wk = ConstMatrixMap(w.data().data() + k * d.in * d.out,
                             static_cast<Eigen::Index>(d.in),
                             static_cast<Eigen::Index>(d.out));
    Eigen::Index count = r.hi - r.lo;
    for (std::size_t b = 0; b < d.batch; ++b) {
      Eigen::Index base = static_cast<Eigen::Index>(b * d.length);
      out.middleRows(base + r.lo, count).noalias() +=
          xin.middleRows(base + r.lo + r.shift, count) * wk;
    }
  }
  return Record(std::move(n));
}

Var Graph::Embedding(Var table, std::vector<int> indices, Shape prefix) {
  const Tensor& t = value(table);
  if (t.rank() != 2) {
    throw ShapeError("embedding: table must be rank 2, got " +
                     ShapeToString(t.shape()));
  }
  if (NumElements(prefix) != indices.size()) {
    throw ShapeError("embedding: index count does not match prefix " +
                     ShapeToString(prefix));
  }
  std::size_t vocab = t.dim(0);
  std::size_t dim = t.dim(1);
  Shape out_shape = prefix;
  out_shape.push_back(dim);
  Node n;
  n.kind = OpKind::kEmbedding;
  n.inputs = {table.id_};
  n.value = Tensor(out_shape);
  auto out = n.value.mutable_data();
  auto src = t.data();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    int idx = indices[i];
    if (idx < 0 || static_cast<std::size_t>(idx) >= vocab) {
      throw ShapeError("embedding: index " + std::to_string(idx) +
                       " out of range for vocabulary of " +
                       std::to_string(vocab));
    }
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(idx * dim), dim,
                out.begin() + static_cast<std::ptrdiff_t>(i * dim));
  }
  n.indices = std::move(indices);
  return Record(std::move(n));
}

Var Graph::Sum(Var a) {
  Node n;
  n.kind = OpKind::kSum;
  n.inputs = {a.id_};
  double s = 0.0;
  for (double v : value(a).data()) s += v;
  n.value = Tensor::Scalar(s);
  return Record(std::move(n));
}

Var Graph::Mean(Var a) {
  const Tensor& x = value(a);
  if (x.size() == 0) throw ShapeError("mean: empty tensor");
  Node n;
  n.kind = OpKind::kMean;
  n.inputs = {a.id_};
  double s = 0.0;
  for (double v : x.data()) s += v;
  n.value = Tensor::Scalar(s / static_cast<double>(x.size()));
  return Record(std::move(n));
}

Var Graph::Concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = value(parts[0]).shape();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (Var p : parts) {
    const Shape& s = value(p).shape();
    if (s.size() != first.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) {
        throw ShapeError("concat: shape mismatch " + ShapeToString(s) +
                         " vs " + ShapeToString(first));
      }
    }
    out_shape[axis] += s[axis];
  }
  Node n;
  n.kind = OpKind::kConcat;
  n.axis = axis;
  n.value = Tensor(out_shape);
  AxisView ov = ViewAround(out_shape, axis);
  auto out = n.value.mutable_data();
  std::size_t offset = 0;
  for (Var p : parts) {
    n.inputs.push_back(p.id_);
    const Tensor& src = value(p);
    AxisView iv = ViewAround(src.shape(), axis);
    std::size_t block = iv.extent * iv.inner;
    for (std::size_t o = 0; o < ov.outer; ++o) {
      std::copy_n(src.data().begin() + static_cast<std::ptrdiff_t>(o * block),
                  block,
                  out.begin() + static_cast<std::ptrdiff_t>(
                                    o * ov.extent * ov.inner + offset * ov.inner));
    }
    offset += iv.extent;
  }
  return Record(std::move(n));
}

Var Graph::Slice(Var a, std::size_t axis, std::size_t begin, std::size_t end) {
  const Tensor& x = value(a);
  if (axis >= x.rank() || begin > end || end > x.dim(axis)) {
    throw ShapeError("slice: invalid range [" + std::to_string(begin) + "," +
                     std::to_string(end) + ") on axis " + std::to_string(axis) +
                     " of " + ShapeToString(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  AxisView iv = ViewAround(x.shape(), axis);
  Node n;
  n.kind = OpKind::kSlice;
  n.inputs = {a.id_};
  n.axis = axis;
  n.begin = begin;
  n.value = Tensor(out_shape);
  std::size_t block = (end - begin) * iv.inner;
  auto out = n.value.mutable_data();
  for (std::size_t o = 0; o < iv.outer; ++o) {
    std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(
                                       o * iv.extent * iv.inner + begin * iv.inner),
                block, out.begin() + static_cast<std::ptrdiff_t>(o * block));
  }
  return Record(std::move(n));
}

Var Graph::MaskedFill(Var a, const Tensor& mask, double value_to_fill) {
  const Tensor& x = value(a);
  RequireSameShape("masked_fill", x, mask);
  Node n;
  n.kind = OpKind::kMaskedFill;
  n.inputs = {a.id_};
  n.value = x;
  n.mask.resize(x.size());
  auto out = n.value.mutable_data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    n.mask[i] = mask[i] != 0.0;
    if (n.mask[i]) out[i] = value_to_fill;
  }
  return Record(std::move(n));
}

Var Graph::Reshape(Var a, Shape shape) {
  const Tensor& x = value(a);
  if (NumElements(shape) != x.size()) {
    throw ShapeError("reshape: cannot view " + ShapeToString(x.shape()) +
                     " as " + ShapeToString(shape));
  }
  Node n;
  n.kind = OpKind::kReshape;
  n.inputs = {a.id_};
  n.value = x.Reshaped(std::move(shape));
  return Record(std::move(n));
}

Tensor& Graph::GradBuffer(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape());
    n.has_grad = true;
  }
  return n.grad;
}

void Graph::Backward(Var loss) {
  const Node& l = node(loss);
  if (l.value.size() != 1) {
    throw ShapeError("backward: loss must be a single element, got " +
                     ShapeToString(l.value.shape()));
  }
  for (const Node& n : nodes_) {
    if (n.kind == OpKind::kParam && n.requires_grad &&
        n.parameter->version != n.parameter_version) {
      throw Error("backward: parameter " + n.parameter->name +
                  " was modified after the forward pass was recorded");
    }
  }
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor(Shape{0});
  }
  if (!l.requires_grad) return;
  GradBuffer(loss.id_)[0] = 1.0;
  for (int id = loss.id_; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || !n.has_grad) continue;
    if (!n.grad.AllFinite()) {
      throw NumericError(std::string("backward through op ") + OpName(n.kind) +
                         " produced a non-finite gradient");
    }
    if (n.kind == OpKind::kParam) {
      auto dst = n.parameter->grad.mutable_data();
      auto src = n.grad.data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    } else {
      BackwardNode(id);
    }
  }
}

void Graph::BackwardNode(int id) {
  // Copy out what we need: GradBuffer() may not reallocate nodes_, but keep
  // references short-lived anyway.
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  const Tensor& g = n.grad;
  auto needs = [this](int in) {
    return nodes_[static_cast<std::size_t>(in)].requires_grad;
  };
  auto input_value = [this](int in) -> const Tensor& {
    return nodes_[static_cast<std::size_t>(in)].value;
  };
  auto gd = g.data();

  switch (n.kind) {
    case OpKind::kInput:
    case OpKind::kParam:
      return;
    case OpKind::kAdd:
    case OpKind::kSub: {
      double sign = n.kind == OpKind::kSub ? -1.0 : 1.0;
      if (needs(n.inputs[0])) {
        auto ga = GradBuffer(n.inputs[0]).mutable_data();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gd[i];
      }
      if (needs(n.inputs[1])) {
        auto gb = GradBuffer(n.inputs[1]).mutable_data();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += sign * gd[i];
      }
      return;
    }
    case OpKind::kMul: {
      const Tensor& a = input_value(n.inputs[0]);
      const Tensor& b = input_value(n.inputs[1]);
      if (needs(n.inputs[0])) {
        auto ga = GradBuffer(n.inputs[0]).mutable_data();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gd[i] * b[i];
      }
      if (needs(n.inputs[1])) {
        auto gb = GradBuffer(n.inputs[1]).mutable_data();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gd[i] * a[i];
      }
      return;
    }
    case OpKind::kScale: {
      auto ga = GradBuffer(n.inputs[0]).mutable_data();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += n.scalar * gd[i];
      return;
    }
    case OpKind::kAddScalar:
    case OpKind::kReshape: {
      auto ga = GradBuffer(n.inputs[0]).mutable_data();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gd[i];
      return;
    }
    case OpKind::kBroadcast: {
      double s = 0.0;
      for (double v : gd) s += v;
      GradBuffer(n.inputs[0])[0] += s;
      return;
    }
    case OpKind::kExp: {
      auto ga = GradBuffer(n.inputs[0]).mutable_data();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gd[i] * n.value[i];
      return;
    }
    case OpKind::kLog: {
      const Tensor& a = input_value(n.inputs[0]);
      auto ga = GradBuffer(n.inputs[0]).mutable_data();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gd[i] / a[i];
      return;
    }
    case OpKind::kTanh: {
      auto ga = GradBuffer(n.inputs[0]).mutable_data();
      for (std::size_t i = 0; i < ga.size(); ++i) {
        double y = n.value[i];
        ga[i] += gd[i] * (1.0 - y * y);
      }
      return;
    }
    case OpKind::kSigmoid: {
      auto ga = GradBuffer(n.inputs[0]).mutable_data();
      for (std::size_t i = 0; i < ga.size(); ++i) {
        double y = n.value[i];
        ga[i] += gd[i] * y * (1.0 - y);
      }
      return;
    }
    case OpKind::kSoftplus: {
      const Tensor& a = input_value(n.inputs[0]);
      auto ga = GradBuffer(n.inputs[0]).mutable_data();
      for (std::size_t i = 0; i < ga.size(); ++i) {
        ga[i] += gd[i] * StableSigmoid(a[i]);
      }
      return;
    }
    case OpKind::kMatmul: {
      const Tensor& a = input_value(n.inputs[0]);
      const Tensor& b = input_value(n.inputs[1]);
      std::size_t k = b.dim(0);
      std::size_t m = b.dim(1);
      std::size_t rows = a.size() / k;
      auto gm = AsMatrix(g, rows, m);
      if (needs(n.inputs[0])) {
        AsMatrix(GradBuffer(n.inputs[0]), rows, k).noalias() +=
            gm * AsMatrix(b, k, m).transpose();
      }
      if (needs(n.inputs[1])) {
        AsMatrix(GradBuffer(n.inputs[1]), k, m).noalias() +=
            AsMatrix(a, rows, k).transpose() * gm;
      }
      return;
    }
    case OpKind::kConv1d: {
      const Tensor& x = input_value(n.inputs[0]);
      const Tensor& w = input_value(n.inputs[1]);
      ConvDims d = GetConvDims(x.shape(), w.shape(), n.dilation);
      auto gm = AsMatrix(g, d.batch * d.length, d.out);
      bool need_x = needs(n.inputs[0]);
      bool need_w = needs(n.inputs[1]);
      for (std::size_t k = 0; k < d.taps; ++k) {
        TapRange r = RangeForTap(d, k, n.dilation);
        if (r.hi <= r.lo) continue;
        Eigen::Index count = r.hi - r.lo;
        auto wk = ConstMatrixMap(w.data().data() + k * d.in * d.out,
                                 static_cast<Eigen::Index>(d.in),
                                 static_cast<Eigen::Index>(d.out));
        for (std::size_t b = 0; b < d.batch; ++b) {
          Eigen::Index base = static_cast<Eigen::Index>(b * d.length);
          if (need_x) {
            auto gx = AsMatrix(GradBuffer(n.inputs[0]), d.batch * d.length, d.in);
            gx.middleRows(base + r.lo + r.shift, count).noalias() +=
                gm.middleRows(base + r.lo, count) * wk.transpose();
          }
          if (need_w) {
            auto gw = MatrixMap(
                GradBuffer(n.inputs[1]).mutable_data().data() + k * d.in * d.out,
                static_cast<Eigen::Index>(d.in), static_cast<Eigen::Index>(d.out));
            auto xm = AsMatrix(x, d.batch * d.length, d.in);
            gw.noalias() += xm.middleRows(base + r.lo + r.shift, count).transpose() *
                            gm.middleRows(base + r.lo, count);
          }
        }
      }
      return;
    }
    case OpKind::kEmbedding: {
      auto gt = GradBuffer(n.inputs[0]).mutable_data();
      std::size_t dim = n.value.shape().back();
      for (std::size_t i = 0; i < n.indices.size(); ++i) {
        std::size_t row = static_cast<std::size_t>(n.indices[i]);
        for (std::size_t j = 0; j < dim; ++j) {
          gt[row * dim + j] += gd[i * dim + j];
        }
      }
      return;
    }
    case OpKind::kSum:
    case OpKind::kMean: {
      auto ga = GradBuffer(n.inputs[0]).mutable_data();
      double s = gd[0];
      if (n.kind == OpKind::kMean) s /= static_cast<double>(ga.size());
      for (double& v : ga) v += s;
      return;
    }
    case OpKind::kConcat: {
      AxisView ov = ViewAround(n.value.shape(), n.axis);
      std::size_t offset = 0;
      for (int in : n.inputs) {
        const Shape& s = input_value(in).shape();
        AxisView iv = ViewAround(s, n.axis);
        if (needs(in)) {
          auto ga = GradBuffer(in).mutable_data();
          std::size_t block = iv.extent * iv.inner;
          for (std::size_t o = 0; o < ov.outer; ++o) {
            std::size_t src = o * ov.extent * ov.inner + offset * ov.inner;
            for (std::size_t j = 0; j < block; ++j) {
              ga[o * block + j] += gd[src + j];
            }
          }
        }
        offset += iv.extent;
      }
      return;
    }
    case OpKind::kSlice: {
      const Shape& s = input_value(n.inputs[0]).shape();
      AxisView iv = ViewAround(s, n.axis);
      std::size_t width = n.value.shape()[n.axis];
      std::size_t block = width * iv.inner;
      auto ga = GradBuffer(n.inputs[0]).mutable_data();
      for (std::size_t o = 0; o < iv.outer; ++o) {
        std::size_t dst = o * iv.extent * iv.inner + n.begin * iv.inner;
        for (std::size_t j = 0; j < block; ++j) ga[dst + j] += gd[o * block + j];
      }
      return;
    }
    case OpKind::kMaskedFill: {
      auto ga = GradBuffer(n.inputs[0]).mutable_data();
      for (std::size_t i = 0; i < ga.size(); ++i) {
        if (!n.mask[i]) ga[i] += gd[i];
      }
      return;
    }
  }
}

}  // namespace cauliflow::ad
