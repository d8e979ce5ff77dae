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

#ifndef CCODEC_TENSOR_PARAM_H_
#define CCODEC_TENSOR_PARAM_H_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "ccodec/tensor/rng.h"

namespace ccodec {

// A learnable tensor. `grad` is empty until the first backward pass that
// touches the parameter; once allocated it has the same length as `value`.
template <typename T>
struct Param {
  std::string name;
  std::vector<size_t> shape;
  std::vector<T> value;
  std::vector<T> grad;

  size_t size() const { return value.size(); }
  size_t dim(size_t i) const { return shape.at(i); }

  T* GradData() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    return grad.data();
  }
  void ZeroGrad() { grad.assign(value.size(), T(0)); }
  void ClearGrad() { grad.clear(); }
};

inline size_t ShapeElements(const std::vector<size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), size_t{1}, std::multiplies<>());
}

inline std::string ShapeToString(const std::vector<size_t>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// Owns every parameter of a model. Addresses are stable for the store's
// lifetime, so layers keep raw pointers into it.
template <typename T>
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;

  Param<T>& Add(const std::string& name, std::vector<size_t> shape) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter " + name);
    Param<T>& p = params_.emplace_back();
    p.name = name;
    p.shape = std::move(shape);
    p.value.assign(ShapeElements(p.shape), T(0));
    index_[name] = params_.size() - 1;
    return p;
  }

  // U(-bound, bound) with bound = scale / sqrt(fan_in).
  Param<T>& AddUniform(const std::string& name, std::vector<size_t> shape, size_t fan_in,
                       Rng& rng, double scale = 1.0) {
    Param<T>& p = Add(name, std::move(shape));
    const double bound = scale / std::sqrt(static_cast<double>(fan_in));
    for (T& v : p.value) v = static_cast<T>(rng.Uniform(-bound, bound));
    return p;
  }

  Param<T>& AddConstant(const std::string& name, std::vector<size_t> shape, T v) {
    Param<T>& p = Add(name, std::move(shape));
    std::fill(p.value.begin(), p.value.end(), v);
    return p;
  }

  Param<T>* Find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
  }
  const Param<T>* Find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
  }

  size_t TotalElements() const {
    size_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
  }

  void ZeroGrad() {
    for (auto& p : params_) p.ZeroGrad();
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  size_t size() const { return params_.size(); }

 private:
  std::deque<Param<T>> params_;
  std::unordered_map<std::string, size_t> index_;
};

}  // namespace ccodec

#endif  // CCODEC_TENSOR_PARAM_H_
