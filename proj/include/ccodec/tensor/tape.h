// Copyright 2026 The ccodec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CCODEC_TENSOR_TAPE_H_
#define CCODEC_TENSOR_TAPE_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ccodec/tensor/grid.h"

namespace ccodec {

class TapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

template <typename T>
class Tape;

template <typename T>
struct VarNode {
  Grid<T> value;
  Grid<T> grad;  // allocated lazily during backward
  bool requires_grad = false;
  const void* owner = nullptr;

  Grid<T>& Grad() {
    if (grad.empty() && !value.empty()) grad = Grid<T>(value.channels(), value.height(), value.width());
    return grad;
  }
};

// Handle to a value produced under a Tape. Copies share the same node.
template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<VarNode<T>> node) : node_(std::move(node)) {}

  const Grid<T>& value() const { return node_->value; }
  // Gradient of the last backward pass; empty when nothing flowed here.
  const Grid<T>& grad() const { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  size_t channels() const { return node_->value.channels(); }
  size_t height() const { return node_->value.height(); }
  size_t width() const { return node_->value.width(); }
  bool valid() const { return node_ != nullptr; }

  const std::shared_ptr<VarNode<T>>& node() const { return node_; }

 private:
  std::shared_ptr<VarNode<T>> node_;
};

// Ordered record of differentiable operations. In recording mode every op
// that involves a parameter or a gradient-carrying input appends a closure
// that propagates output gradients to its inputs; Backward() runs the
// closures in exact reverse order, once.
template <typename T>
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }
  size_t size() const { return backward_.size(); }

  Var<T> Constant(Grid<T> g) const {
    auto n = std::make_shared<VarNode<T>>();
    n->value = std::move(g);
    return Var<T>(std::move(n));
  }

  // A leaf that collects a gradient (used to differentiate w.r.t. inputs).
  Var<T> Leaf(Grid<T> g) {
    auto n = std::make_shared<VarNode<T>>();
    n->value = std::move(g);
    n->requires_grad = record_;
    n->owner = this;
    return Var<T>(std::move(n));
  }

  Var<T> Result(Grid<T> g, bool requires_grad) {
    auto n = std::make_shared<VarNode<T>>();
    n->value = std::move(g);
    n->requires_grad = record_ && requires_grad;
    n->owner = this;
    return Var<T>(std::move(n));
  }

  void Record(std::function<void()> fn) {
    if (consumed_) throw TapeError("tape already consumed by a backward pass");
    backward_.push_back(std::move(fn));
  }

  // Seeds d(loss)/d(loss) = 1 and propagates to every parameter and leaf.
  void Backward(const Var<T>& loss) {
    if (consumed_) throw TapeError("double backward is not supported");
    if (!loss.valid() || loss.node()->owner != this || !loss.requires_grad()) {
      throw TapeError("loss was not produced under this tape");
    }
    if (loss.value().size() != 1) throw TapeError("loss must be a scalar");
    loss.node()->Grad()[0] = T(1);
    for (auto it = backward_.rbegin(); it != backward_.rend(); ++it) (*it)();
    consumed_ = true;
    backward_.clear();
  }

  void AddMacs(uint64_t n) { macs_ += n; }
  uint64_t macs() const { return macs_; }

 private:
  bool record_;
  bool consumed_ = false;
  uint64_t macs_ = 0;
  std::vector<std::function<void()>> backward_;
};

}  // namespace ccodec

#endif  // CCODEC_TENSOR_TAPE_H_
