#pragma once

#include "stackrnn/common.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace stackrnn {

// Named parameter tensors. Owned by a model object and shared across the
// tapes of successive training steps; a tape never mutates the store.
class ParamStore {
 public:
  Array& create(const std::string& name, Index rows, Index cols) {
    auto [it, fresh] = params_.try_emplace(name, Array::Zero(rows, cols));
    if (!fresh) throw UsageError("parameter already registered: " + name);
    order_.push_back(name);
    return it->second;
  }

  Array& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw UsageError("unknown parameter: " + name);
    return it->second;
  }
  const Array& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw UsageError("unknown parameter: " + name);
    return it->second;
  }
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  const std::vector<std::string>& names() const { return order_; }
  std::size_t size() const { return params_.size(); }

  void init_uniform(Rng& rng, Scalar lo, Scalar hi) {
    std::uniform_real_distribution<Scalar> dist(lo, hi);
    for (const auto& name : order_) {
      Array& a = params_.at(name);
      for (Index c = 0; c < a.cols(); ++c)
        for (Index r = 0; r < a.rows(); ++r) a(r, c) = dist(rng);
    }
  }

 private:
  std::map<std::string, Array> params_;
  std::vector<std::string> order_;
};

using GradientMap = std::map<std::string, Array>;

// Handle into a tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Append-only reverse-mode tape. One tape per forward pass; parameters are
// leafed in from a ParamStore and their gradients collected by backward().
class Tape {
 public:
  struct Node {
    Array val;
    Array grad;  // allocated lazily, same shape as val
    bool requires_grad = false;
    bool grad_ready = false;
    const char* op = "leaf";
    std::string param_name;  // nonempty for parameter leaves
    std::function<void(Tape&)> backward;
  };

  Var constant(Array v) {
    return emplace(std::move(v), false, "const", nullptr);
  }

  Var param(const ParamStore& store, const std::string& name) {
    Var v = emplace(store.at(name), true, "param", nullptr);
    nodes_[v.id].param_name = name;
    return v;
  }

  Var emplace(Array v, bool requires_grad, const char* op, std::function<void(Tape&)> bw) {
    Node n;
    n.val = std::move(v);
    n.requires_grad = requires_grad;
    n.op = op;
    n.backward = std::move(bw);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  const Array& val(Var v) const { return nodes_.at(v.id).val; }
  Node& nodes_ref(Var v) { return nodes_.at(v.id); }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  // Gradient accumulator of a node; zero-initialized on first touch.
  Array& grad(Var v) {
    Node& n = nodes_.at(v.id);
    if (!n.grad_ready) {
      n.grad = Array::Zero(n.val.rows(), n.val.cols());
      n.grad_ready = true;
    }
    return n.grad;
  }
  bool grad_touched(Var v) const { return nodes_.at(v.id).grad_ready; }

  std::size_t size() const { return nodes_.size(); }

  // Reverse sweep from a finite scalar loss. Returns one gradient per
  // parameter registered in `store`; parameters the loss never reached map
  // to zero tensors.
  GradientMap backward(Var loss, const ParamStore& store) {
    const Array& lv = val(loss);
    if (lv.size() != 1) throw UsageError("backward: loss must be a scalar node");
    if (!std::isfinite(lv(0, 0))) {
      throw NumericalError("backward: non-finite loss (first bad op: " + first_non_finite() + ")");
    }
    grad(loss).setConstant(Scalar(1));
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.requires_grad && n.grad_ready && n.backward) n.backward(*this);
    }
    GradientMap out;
    for (const auto& name : store.names()) {
      const Array& p = store.at(name);
      out.emplace(name, Array::Zero(p.rows(), p.cols()));
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      Node& n = nodes_[i];
      if (!n.param_name.empty() && n.grad_ready) out.at(n.param_name) += n.grad;
    }
    return out;
  }

 private:
  // -inf is a legal log-domain value; NaN or +inf marks the real culprit.
  std::string first_non_finite() const {
    for (const auto& n : nodes_) {
      if (n.val.isNaN().any()) return n.op;
    }
    for (const auto& n : nodes_) {
      if ((n.val == std::numeric_limits<Scalar>::infinity()).any()) return n.op;
    }
    return "unknown";
  }

  std::vector<Node> nodes_;
};

}  // namespace stackrnn
