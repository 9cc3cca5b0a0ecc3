// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "unitlens/errors.hpp"
#include "unitlens/tensorgrad/tensor.hpp"

namespace unitlens::tensorgrad {

using NodeId = std::size_t;

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  NodeId id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Gradient accumulators handed to each node's vector-Jacobian product.
class GradSink {
 public:
  /// True when `id` needs a gradient; ops skip work for operands that do not.
  bool wants(NodeId id) const;
  /// Zero-initialized on first use; vjps accumulate (+=) into it.
  Tensor& slot(NodeId id);

 private:
  friend class Tape;
  GradSink(Tape& tape, std::vector<std::optional<Tensor>>& grads) : tape_(tape), grads_(grads) {}
  Tape& tape_;
  std::vector<std::optional<Tensor>>& grads_;
};

using VectorJacobian = std::function<void(const Tensor& grad_out, GradSink& sink)>;

/// Gradients produced by Tape::backward, indexed by node.
class Gradients {
 public:
  bool has(Var v) const { return v.id < grads_.size() && grads_[v.id].has_value(); }

  const Tensor& at(Var v) const {
    if (!has(v)) {
      throw ContractError("no gradient recorded for node " + std::to_string(v.id) +
                          " (not a leaf reachable from the loss)");
    }
    return *grads_[v.id];
  }

  Tensor take(Var v) {
    const Tensor& g = at(v);
    Tensor out = std::move(const_cast<Tensor&>(g));
    grads_[v.id].reset();
    return out;
  }

 private:
  friend class Tape;
  std::vector<std::optional<Tensor>> grads_;
};

/// Append-only record of one computation.
///
/// Nodes are appended in evaluation order, so every operand precedes its
/// consumer and a reverse sweep over node ids is a valid topological order.
/// A tape belongs to one thread for its whole life. With recording off the
/// tape only evaluates values; backward() is then unavailable.
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return record_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  Var leaf(Tensor value, bool requires_grad = true) {
    Node n;
    n.owned = std::move(value);
    n.requires_grad = requires_grad && record_;
    n.is_leaf = true;
    return push(std::move(n));
  }

  /// Leaf viewing a tensor owned elsewhere; it must outlive the tape.
  Var borrow(const Tensor& value, bool requires_grad = false) {
    Node n;
    n.borrowed = &value;
    n.requires_grad = requires_grad && record_;
    n.is_leaf = true;
    return push(std::move(n));
  }

  const Tensor& value(NodeId id) const {
    const Node& n = nodes_.at(id);
    return n.borrowed ? *n.borrowed : n.owned;
  }

  bool requires_grad(NodeId id) const { return nodes_.at(id).requires_grad; }

  /// Records an op result. `vjp` is kept only when some input needs a gradient.
  Var record(Tensor value, std::initializer_list<Var> inputs, VectorJacobian vjp) {
    Node n;
    n.owned = std::move(value);
    for (const Var& in : inputs) {
      if (in.tape != this) throw ContractError("operands belong to different tapes");
      n.requires_grad = n.requires_grad || nodes_[in.id].requires_grad;
    }
    if (n.requires_grad) n.vjp = std::move(vjp);
    return push(std::move(n));
  }

  /// Reverse sweep from a scalar loss. Each node is visited once; gradients
  /// reaching a node along several paths are summed.
  Gradients backward(Var loss) {
    if (!record_) throw ContractError("backward on a tape that is not recording");
    if (loss.tape != this) throw ContractError("loss belongs to a different tape");
    const Tensor& lv = value(loss.id);
    if (lv.rank() != 0) {
      throw ContractError("backward needs a scalar loss, got shape " + shape_str(lv.shape()));
    }
    Gradients out;
    out.grads_.resize(nodes_.size());
    out.grads_[loss.id] = Tensor::scalar(1.0);
    GradSink sink(*this, out.grads_);
    for (NodeId id = loss.id + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (!out.grads_[id] || !n.vjp) continue;
      n.vjp(*out.grads_[id], sink);
      if (!n.is_leaf && id != loss.id) out.grads_[id].reset();
    }
    return out;
  }

 private:
  struct Node {
    Tensor owned;
    const Tensor* borrowed = nullptr;
    bool requires_grad = false;
    bool is_leaf = false;
    VectorJacobian vjp;
  };

  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
  }

  bool record_;
  std::deque<Node> nodes_;
};

inline const Tensor& Var::value() const {
  if (!tape) throw ContractError("unbound Var");
  return tape->value(id);
}

inline bool GradSink::wants(NodeId id) const { return tape_.requires_grad(id); }

inline Tensor& GradSink::slot(NodeId id) {
  auto& g = grads_[id];
  if (!g) g.emplace(tape_.value(id).shape(), 0.0);
  return *g;
}

}  // namespace unitlens::tensorgrad
