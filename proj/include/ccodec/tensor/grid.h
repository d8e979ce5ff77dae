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

#ifndef CCODEC_TENSOR_GRID_H_
#define CCODEC_TENSOR_GRID_H_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ccodec {

// Thrown when operand shapes are incompatible. The message names both shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Dense C x H x W array stored channel-major, then row, then column. Every
// image, latent and intermediate feature map in the codec is a Grid.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(size_t channels, size_t height, size_t width, T fill = T(0))
      : c_(channels), h_(height), w_(width), data_(channels * height * width, fill) {}
  Grid(size_t channels, size_t height, size_t width, std::vector<T> data)
      : c_(channels), h_(height), w_(width), data_(std::move(data)) {
    if (data_.size() != c_ * h_ * w_) {
      throw ShapeError("grid data length " + std::to_string(data_.size()) +
                       " does not match " + ShapeString());
    }
  }

  size_t channels() const { return c_; }
  size_t height() const { return h_; }
  size_t width() const { return w_; }
  size_t plane() const { return h_ * w_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T* channel(size_t c) { return data_.data() + c * plane(); }
  const T* channel(size_t c) const { return data_.data() + c * plane(); }

  T& operator()(size_t c, size_t y, size_t x) { return data_[(c * h_ + y) * w_ + x]; }
  const T& operator()(size_t c, size_t y, size_t x) const {
    return data_[(c * h_ + y) * w_ + x];
  }
  T& operator[](size_t i) { return data_[i]; }
  const T& operator[](size_t i) const { return data_[i]; }

  template <typename U>
  bool SameShape(const Grid<U>& o) const {
    return c_ == o.channels() && h_ == o.height() && w_ == o.width();
  }

  std::string ShapeString() const {
    return std::to_string(c_) + "x" + std::to_string(h_) + "x" + std::to_string(w_);
  }

  void Fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  template <typename U>
  Grid<U> Cast() const {
    Grid<U> out(c_, h_, w_);
    for (size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  bool operator==(const Grid& o) const = default;

 private:
  size_t c_ = 0;
  size_t h_ = 0;
  size_t w_ = 0;
  std::vector<T> data_;
};

template <typename T, typename U>
void CheckSameShape(const Grid<T>& a, const Grid<U>& b, const char* what) {
  if (!a.SameShape(b)) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.ShapeString() + " vs " +
                     b.ShapeString());
  }
}

template <typename T>
bool AllFinite(const Grid<T>& g) {
  for (const T v : g.span()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

// Positions with (row + col) of the given parity set to 1, others 0.
template <typename T>
Grid<T> ParityMask(size_t height, size_t width, int parity) {
  Grid<T> m(1, height, width);
  for (size_t y = 0; y < height; ++y) {
    for (size_t x = 0; x < width; ++x) {
      m(0, y, x) = static_cast<int>((y + x) & 1) == parity ? T(1) : T(0);
    }
  }
  return m;
}

}  // namespace ccodec

#endif  // CCODEC_TENSOR_GRID_H_
