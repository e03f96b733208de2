// Copyright 2026 The latent-refine Authors.
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

#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lfr/error.hpp"
#include "lfr/numerics/tensor.hpp"

namespace lfr {

/// A named trainable tensor with its accumulated gradient.
template <std::floating_point T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  void zero_grad() { grad = Tensor<T>(value.shape()); }
};

/// Ordered, name-addressable set of parameters owned by a model.
///
/// Models refer to entries by index, so copying a model copies its store and
/// every index stays valid.
template <std::floating_point T>
class ParamStore {
 public:
  std::size_t add(std::string name, Tensor<T> init) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    index_.emplace(name, items_.size());
    Tensor<T> grad(init.shape());
    items_.push_back(Parameter<T>{std::move(name), std::move(init), std::move(grad)});
    return items_.size() - 1;
  }

  Parameter<T>& operator[](std::size_t i) { return items_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return items_[i]; }
  std::size_t size() const { return items_.size(); }
  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  const Parameter<T>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &items_[it->second];
  }
  Parameter<T>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &items_[it->second];
  }

  void zero_grad() {
    for (auto& p : items_) p.zero_grad();
  }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& p : items_) n += p.value.size();
    return n;
  }

  // Copy values by name from a store of any precision; shapes must agree and
  // every parameter must be present.
  template <std::floating_point U>
  void assign_from(const ParamStore<U>& other) {
    for (auto& p : items_) {
      const auto* src = other.find(p.name);
      if (!src) throw FormatError("missing parameter: " + p.name);
      if (src->value.shape() != p.value.shape()) {
        throw ShapeError("parameter " + p.name + ": shape " +
                         shape_str(src->value.shape()) + " vs expected " +
                         shape_str(p.value.shape()));
      }
      p.value = src->value.template cast<T>();
    }
  }

 private:
  std::vector<Parameter<T>> items_;
  std::map<std::string, std::size_t> index_;
};

template <std::floating_point T>
class Tape;

/// Handle to a value recorded on a Tape.
template <std::floating_point T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const { return tape->value(*this); }
  const Shape& shape() const { return value().shape(); }
};

/// Records operations for one forward pass and runs reverse-mode backward.
///
/// A tape belongs to one thread. Nodes are appended in evaluation order, so
/// the node vector is already a topological order for the backward sweep.
/// With recording disabled no closures are kept and nothing requires grad.
template <std::floating_point T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t)>;

  struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // empty until something flows into it
    bool requires_grad = false;
    const char* op = "leaf";
    Backward backward;
    const Parameter<T>* param = nullptr;
  };

  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }

  Var<T> constant(Tensor<T> value) { return push("constant", std::move(value), false, {}); }

  Var<T> variable(Tensor<T> value) {
    return push("variable", std::move(value), recording_, {});
  }

  Var<T> param(const Parameter<T>& p) {
    auto v = push("param", p.value, recording_, {});
    nodes_[v.id].param = &p;
    return v;
  }

  const Tensor<T>& value(Var<T> v) const { return node(v).value; }

  // Gradient of the last backward() target with respect to v (zeros when
  // nothing flowed into v).
  Tensor<T> grad(Var<T> v) const {
    const auto& n = node(v);
    return n.grad.empty() ? Tensor<T>(n.value.shape()) : n.grad;
  }

  bool requires_grad(Var<T> v) const { return node(v).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  void backward(Var<T> loss) {
    const auto& ln = node(loss);
    if (ln.value.size() != 1) {
      throw ShapeError("backward: loss must be scalar, got shape " +
                       shape_str(ln.value.shape()));
    }
    if (!ln.requires_grad) {
      throw std::logic_error("backward: loss is detached from every differentiable leaf");
    }
    for (auto& n : nodes_) n.grad = Tensor<T>();
    nodes_[loss.id].grad = Tensor<T>(ln.value.shape(), T(1));
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (n.grad.empty() || !n.backward) continue;
      n.backward(*this, i);
    }
  }

  // Add parameter-leaf gradients into the matching entries of `store`. Kept
  // separate from backward() so per-utterance tapes can be reduced in a
  // fixed order.
  void accumulate_param_grads(ParamStore<T>& store) const {
    for (const auto& n : nodes_) {
      if (!n.param || n.grad.empty()) continue;
      auto* p = store.find(n.param->name);
      if (!p) throw std::logic_error("tape: parameter " + n.param->name + " not in store");
      p->grad += n.grad;
    }
  }

  // --- op implementation interface ---

  Var<T> push(const char* op, Tensor<T> value, bool requires_grad, Backward bw) {
    if (!value.all_finite()) {
      throw NonFiniteError(std::string("non-finite value produced by op '") + op + "'");
    }
    Node n;
    n.value = std::move(value);
    n.requires_grad = recording_ && requires_grad;
    n.op = op;
    if (n.requires_grad) n.backward = std::move(bw);
    nodes_.push_back(std::move(n));
    return Var<T>{this, nodes_.size() - 1};
  }

  // Gradient buffer of node `id`, allocated on first use.
  Tensor<T>& grad_ref(std::size_t id) {
    auto& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor<T>(n.value.shape());
    return n.grad;
  }
  const Tensor<T>& grad_of(std::size_t id) const { return nodes_[id].grad; }
  const Tensor<T>& value_of(std::size_t id) const { return nodes_[id].value; }
  bool needs(std::size_t id) const { return nodes_[id].requires_grad; }

 private:
  const Node& node(Var<T> v) const {
    if (v.tape != this || v.id >= nodes_.size()) {
      throw std::logic_error("tape: variable does not belong to this tape");
    }
    return nodes_[v.id];
  }

  bool recording_;
  std::vector<Node> nodes_;
};

}  // namespace lfr
