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

// Differentiable operations on Grids. Each op computes its forward result
// eagerly and, when the tape is recording, registers a closure that
// accumulates input and parameter gradients from the output gradient.
//
// All reductions accumulate in a fixed order (ascending index of the reduced
// dimension), so results are reproducible run to run.

#ifndef CCODEC_TENSOR_OPS_H_
#define CCODEC_TENSOR_OPS_H_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <type_traits>
#include <vector>

#include "ccodec/tensor/grid.h"
#include "ccodec/tensor/param.h"
#include "ccodec/tensor/tape.h"

namespace ccodec {

namespace internal {

template <typename T>
bool AnyGrad(const Var<T>& a) {
  return a.requires_grad();
}
template <typename T, typename... Rest>
bool AnyGrad(const Var<T>& a, const Rest&... rest) {
  return a.requires_grad() || AnyGrad(rest...);
}

// Output gradient of a node, or nullptr when nothing flowed into it.
template <typename T>
const Grid<T>* OutGrad(const Var<T>& v) {
  const Grid<T>& g = v.node()->grad;
  return g.empty() ? nullptr : &g;
}

template <typename T>
Grid<T>* InGrad(const Var<T>& v) {
  return v.requires_grad() ? &v.node()->Grad() : nullptr;
}

inline std::string Shape(const std::vector<size_t>& s) { return ShapeToString(s); }

}  // namespace internal

// ---------------------------------------------------------------------------
// Parameters as values.

// Exposes a parameter as a grid of the given shape.
template <typename T>
Var<T> FromParam(Tape<T>& t, Param<T>& p, size_t c, size_t h, size_t w) {
  if (c * h * w != p.size()) {
    throw ShapeError("parameter " + p.name + " " + internal::Shape(p.shape) +
                     " cannot be viewed as " + std::to_string(c) + "x" + std::to_string(h) +
                     "x" + std::to_string(w));
  }
  Var<T> out = t.Result(Grid<T>(c, h, w, p.value), true);
  if (out.requires_grad()) {
    t.Record([out, &p] {
      const Grid<T>* gy = internal::OutGrad(out);
      if (!gy) return;
      T* g = p.GradData();
      for (size_t i = 0; i < gy->size(); ++i) g[i] += (*gy)[i];
    });
  }
  return out;
}

// Same value, no gradient flow.
template <typename T>
Var<T> Detach(Tape<T>& t, const Var<T>& x) {
  return t.Constant(x.value());
}

// ---------------------------------------------------------------------------
// Elementwise.

template <typename T, typename F, typename DF>
Var<T> MapUnary(Tape<T>& t, const Var<T>& x, F f, DF df) {
  const Grid<T>& xv = x.value();
  Grid<T> y(xv.channels(), xv.height(), xv.width());
  for (size_t i = 0; i < xv.size(); ++i) y[i] = f(xv[i]);
  Var<T> out = t.Result(std::move(y), x.requires_grad());
  if (out.requires_grad()) {
    t.Record([x, out, df] {
      const Grid<T>* gy = internal::OutGrad(out);
      if (!gy) return;
      Grid<T>& gx = x.node()->Grad();
      const Grid<T>& xv = x.value();
      const Grid<T>& yv = out.value();
      for (size_t i = 0; i < gx.size(); ++i) gx[i] += (*gy)[i] * df(xv[i], yv[i]);
    });
  }
  return out;
}

template <typename T>
T GeluScalar(T x) {
  constexpr T kC = T(0.7978845608028654);  // sqrt(2 / pi)
  constexpr T kA = T(0.044715);
  return T(0.5) * x * (T(1) + std::tanh(kC * (x + kA * x * x * x)));
}

template <typename T>
T GeluDerivative(T x) {
  constexpr T kC = T(0.7978845608028654);
  constexpr T kA = T(0.044715);
  const T u = kC * (x + kA * x * x * x);
  const T th = std::tanh(u);
  const T du = kC * (T(1) + T(3) * kA * x * x);
  return T(0.5) * (T(1) + th) + T(0.5) * x * (T(1) - th * th) * du;
}

template <typename T>
T SigmoidScalar(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
T SoftplusScalar(T x) {
  return x > T(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// tanh-approximated GELU.
template <typename T>
Var<T> Gelu(Tape<T>& t, const Var<T>& x) {
  return MapUnary(t, x, [](T v) { return GeluScalar(v); },
                  [](T v, T) { return GeluDerivative(v); });
}

template <typename T>
Var<T> Sigmoid(Tape<T>& t, const Var<T>& x) {
  return MapUnary(t, x, [](T v) { return SigmoidScalar(v); },
                  [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> Softplus(Tape<T>& t, const Var<T>& x) {
  return MapUnary(t, x, [](T v) { return SoftplusScalar(v); },
                  [](T v, T) { return SigmoidScalar(v); });
}

template <typename T>
Var<T> Scale(Tape<T>& t, const Var<T>& x, T s) {
  return MapUnary(t, x, [s](T v) { return v * s; }, [s](T, T) { return s; });
}

template <typename T>
Var<T> AddScalar(Tape<T>& t, const Var<T>& x, T s) {
  return MapUnary(t, x, [s](T v) { return v + s; }, [](T, T) { return T(1); });
}

template <typename T>
Var<T> Add(Tape<T>& t, const Var<T>& a, const Var<T>& b) {
  CheckSameShape(a.value(), b.value(), "add");
  Grid<T> y = a.value();
  for (size_t i = 0; i < y.size(); ++i) y[i] += b.value()[i];
  Var<T> out = t.Result(std::move(y), internal::AnyGrad(a, b));
  if (out.requires_grad()) {
    t.Record([a, b, out] {
      const Grid<T>* gy = internal::OutGrad(out);
      if (!gy) return;
      for (const Var<T>* v : {&a, &b}) {
        if (Grid<T>* g = internal::InGrad(*v)) {
          for (size_t i = 0; i < g->size(); ++i) (*g)[i] += (*gy)[i];
        }
      }
    });
  }
  return out;
}

template <typename T>
Var<T> Sub(Tape<T>& t, const Var<T>& a, const Var<T>& b) {
  CheckSameShape(a.value(), b.value(), "sub");
  Grid<T> y = a.value();
  for (size_t i = 0; i < y.size(); ++i) y[i] -= b.value()[i];
  Var<T> out = t.Result(std::move(y), internal::AnyGrad(a, b));
  if (out.requires_grad()) {
    t.Record([a, b, out] {
      const Grid<T>* gy = internal::OutGrad(out);
      if (!gy) return;
      if (Grid<T>* g = internal::InGrad(a)) {
        for (size_t i = 0; i < g->size(); ++i) (*g)[i] += (*gy)[i];
      }
      if (Grid<T>* g = internal::InGrad(b)) {
        for (size_t i = 0; i < g->size(); ++i) (*g)[i] -= (*gy)[i];
      }
    });
  }
  return out;
}

template <typename T>
Var<T> Mul(Tape<T>& t, const Var<T>& a, const Var<T>& b) {
  CheckSameShape(a.value(), b.value(), "mul");
  Grid<T> y = a.value();
  for (size_t i = 0; i < y.size(); ++i) y[i] *= b.value()[i];
  Var<T> out = t.Result(std::move(y), internal::AnyGrad(a, b));
  if (out.requires_grad()) {
    t.Record([a, b, out] {
      const Grid<T>* gy = internal::OutGrad(out);
      if (!gy) return;
      if (Grid<T>* g = internal::InGrad(a)) {
        for (size_t i = 0; i < g->size(); ++i) (*g)[i] += (*gy)[i] * b.value()[i];
      }
      if (Grid<T>* g = internal::InGrad(b)) {
        for (size_t i = 0; i < g->size(); ++i) (*g)[i] += (*gy)[i] * a.value()[i];
      }
    });
  }
  return out;
}

// x * g where g is 1xHxW (broadcast over channels), Cx1x1 (broadcast over
// positions) or 1x1x1.
template <typename T>
Var<T> MulBroadcast(Tape<T>& t, const Var<T>& x, const Var<T>& g) {
  const Grid<T>& xv = x.value();
  const Grid<T>& gv = g.value();
  const bool spatial = gv.channels() == 1 && gv.height() == xv.height() && gv.width() == xv.width();
  const bool per_channel = gv.channels() == xv.channels() && gv.plane() == 1;
  const bool scalar = gv.size() == 1;
  if (!spatial && !per_channel && !scalar) {
    throw ShapeError("broadcast multiply: cannot broadcast " + gv.ShapeString() + " onto " +
                     xv.ShapeString());
  }
  const size_t P = xv.plane();
  auto gate_index = [&](size_t c, size_t p) -> size_t {
    if (scalar) return 0;
    return spatial ? p : c;
  };
  Grid<T> y(xv.channels(), xv.height(), xv.width());
  for (size_t c = 0; c < xv.channels(); ++c) {
    for (size_t p = 0; p < P; ++p) y[c * P + p] = xv[c * P + p] * gv[gate_index(c, p)];
  }
  Var<T> out = t.Result(std::move(y), internal::AnyGrad(x, g));
  if (out.requires_grad()) {
    t.Record([x, g, out, spatial, scalar, P] {
      const Grid<T>* gy = internal::OutGrad(out);
      if (!gy) return;
      const Grid<T>& xv = x.value();
      const Grid<T>& gv = g.value();
      auto gi = [&](size_t c, size_t p) -> size_t {
        if (scalar) return 0;
        return spatial ? p : c;
      };
      Grid<T>* gx = internal::InGrad(x);
      Grid<T>* gg = internal::InGrad(g);
      for (size_t c = 0; c < xv.channels(); ++c) {
        for (size_t p = 0; p < P; ++p) {
          const size_t i = c * P + p;
          if (gx) (*gx)[i] += (*gy)[i] * gv[gi(c, p)];
          if (gg) (*gg)[gi(c, p)] += (*gy)[i] * xv[i];
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions.

template <typename T>
Var<T> Sum(Tape<T>& t, const Var<T>& x) {
  T s = T(0);
  for (const T v : x.value().span()) s += v;
  Var<T> out = t.Result(Grid<T>(1, 1, 1, s), x.requires_grad());
  if (out.requires_grad()) {
    t.Record([x, out] {
      const Grid<T>* gy = internal::OutGrad(out);
      if (!gy) return;
      Grid<T>& gx = x.node()->Grad();
      for (size_t i = 0; i < gx.size(); ++i) gx[i] += (*gy)[0];
    });
  }
  return out;
}

template <typename T>
Var<T> Mean(Tape<T>& t, const Var<T>& x) {
  return Scale(t, Sum(t, x), T(1) / static_cast<T>(x.value().size()));
}

template <typename T>
Var<T> MeanSquaredError(Tape<T>& t, const Var<T>& a, const Var<T>& b) {
  Var<T> d = Sub(t, a, b);
  return Mean(t, Mul(t, d, d));
}

// Cx1x1 mean over positions.
template <typename T>
Var<T> GlobalAvgPool(Tape<T>& t, const Var<T>& x) {
  const Grid<T>& xv = x.value();
  const size_t P = xv.plane();
  Grid<T> y(xv.channels(), 1, 1);
  for (size_t c = 0; c < xv.channels(); ++c) {
    const T* row = xv.channel(c);
    T s = T(0);
    for (size_t p = 0; p < P; ++p) s += row[p];
    y[c] = s / static_cast<T>(P);
  }
  Var<T> out = t.Result(std::move(y), x.requires_grad());
  if (out.requires_grad()) {
    t.Record([x, out, P] {
      const Grid<T>* gy = internal::OutGrad(out);
      if (!gy) return;
      Grid<T>& gx = x.node()->Grad();
      for (size_t c = 0; c < gx.channels(); ++c) {
        const T g = (*gy)[c] / static_cast<T>(P);
        T* row = gx.channel(c);
        for (size_t p = 0; p < P; ++p) row[p] += g;
      }
    });
  }
  return out;
}

// 2xHxW: channel mean in plane 0, channel max in plane 1. The max gradient
// goes to the lowest channel index attaining it.
template <typename T>
Var<T> ChannelMeanMax(Tape<T>& t, const Var<T>& x) {
  const Grid<T>& xv = x.value();
  const size_t C = xv.channels();
  const size_t P = xv.plane();
  Grid<T> y(2, xv.height(), xv.width());
  std::vector<size_t> arg(P, 0);
  T* mean = y.channel(0);
  T* mx = y.channel(1);
  for (size_t p = 0; p < P; ++p) mx[p] = xv[p];
  for (size_t c = 0; c < C; ++c) {
    const T* row = xv.channel(c);
    for (size_t p = 0; p < P; ++p) {
      mean[p] += row[p];
      if (row[p] > mx[p]) {
        mx[p] = row[p];
        arg[p] = c;
      }
    }
  }
  for (size_t p = 0; p < P; ++p) mean[p] /= static_cast<T>(C);
  Var<T> out = t.Result(std::move(y), x.requires_grad());
  if (out.requires_grad()) {
    t.Record([x, out, arg = std::move(arg), C, P] {
      const Grid<T>* gy = internal::OutGrad(out);
      if (!gy) return;
      Grid<T>& gx = x.node()->Grad();
      const T* gm = gy->channel(0);
      const T* gmax = gy->channel(1);
      for (size_t c = 0; c < C; ++c) {
        T* row = gx.channel(c);
        for (size_t p = 0; p < P; ++p) row[p] += gm[p] / static_cast<T>(C);
      }
      for (size_t p = 0; p < P; ++p) gx[arg[p] * P + p] += gmax[p];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Channel layout.

template <typename T>
Var<T> Concat(Tape<T>& t, const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat of nothing");
  const size_t h = parts[0].height(), w = parts[0].width();
  size_t c = 0;
  bool rg = false;
  for (const auto& p : parts) {
    if (p.height() != h || p.width() != w) {
      throw ShapeError("concat: spatial mismatch " + parts[0].value().ShapeString() + " vs " +
                       p.value().ShapeString());
    }
    c += p.channels();
    rg = rg || p.requires_grad();
  }
  Grid<T> y(c, h, w);
  size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.value().span().begin(), p.value().span().end(), y.data() + off);
    off += p.value().size();
  }
  Var<T> out = t.Result(std::move(y), rg);
  if (out.requires_grad()) {
    t.Record([parts, out] {
      const Grid<T>* gy = internal::OutGrad(out);
      if (!gy) return;
      size_t off = 0;
      for (const auto& p : parts) {
        if (Grid<T>* g = internal::InGrad(p)) {
          for (size_t i = 0; i < g->size(); ++i) (*g)[i] += (*gy)[off + i];
        }
        off += p.value().size();
      }
    });
  }
  return out;
}

template <typename T>
Var<T> SliceChannels(Tape<T>& t, const Var<T>& x, size_t begin, size_t count) {
  const Grid<T>& xv = x.value();
  if (begin + count > xv.channels()) {
    throw ShapeError("slice [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") out of " + xv.ShapeString());
  }
  const size_t P = xv.plane();
  Grid<T> y(count, xv.height(), xv.width(),
            std::vector<T>(xv.data() + begin * P, xv.data() + (begin + count) * P));
  Var<T> out = t.Result(std::move(y), x.requires_grad());
  if (out.requires_grad()) {
    t.Record([x, out, begin, P] {
      const Grid<T>* gy = internal::OutGrad(out);
      if (!gy) return;
      Grid<T>& gx = x.node()->Grad();
      for (size_t i = 0; i < gy->size(); ++i) gx[begin * P + i] += (*gy)[i];
    });
  }
  return out;
}

// Top-left crop.
template <typename T>
Var<T> Crop(Tape<T>& t, const Var<T>& x, size_t height, size_t width) {
  const Grid<T>& xv = x.value();
  if (height > xv.height() || width > xv.width()) {
    throw ShapeError("crop to " + std::to_string(height) + "x" + std::to_string(width) +
                     " exceeds " + xv.ShapeString());
  }
  if (height == xv.height() && width == xv.width()) return x;
  Grid<T> y(xv.channels(), height, width);
  for (size_t c = 0; c < xv.channels(); ++c)
    for (size_t r = 0; r < height; ++r)
      for (size_t q = 0; q < width; ++q) y(c, r, q) = xv(c, r, q);
  Var<T> out = t.Result(std::move(y), x.requires_grad());
  if (out.requires_grad()) {
    t.Record([x, out] {
      const Grid<T>* gy = internal::OutGrad(out);
      if (!gy) return;
      Grid<T>& gx = x.node()->Grad();
      for (size_t c = 0; c < gy->channels(); ++c)
        for (size_t r = 0; r < gy->height(); ++r)
          for (size_t q = 0; q < gy->width(); ++q) gx(c, r, q) += (*gy)(c, r, q);
    });
  }
  return out;
}

// (C, H, W) -> (C*r*r, H/r, W/r); output channel c*r*r + dy*r + dx holds
// input (c, y*r + dy, x*r + dx).
template <typename T>
Grid<T> PixelUnshuffleGrid(const Grid<T>& x, size_t r) {
  if (r == 0 || x.height() % r || x.width() % r) {
    throw ShapeError("pixel_unshuffle: " + x.ShapeString() + " not divisible by " +
                     std::to_string(r));
  }
  const size_t oh = x.height() / r, ow = x.width() / r;
  Grid<T> y(x.channels() * r * r, oh, ow);
  for (size_t c = 0; c < x.channels(); ++c)
    for (size_t dy = 0; dy < r; ++dy)
      for (size_t dx = 0; dx < r; ++dx) {
        const size_t oc = (c * r + dy) * r + dx;
        for (size_t yy = 0; yy < oh; ++yy)
          for (size_t xx = 0; xx < ow; ++xx) y(oc, yy, xx) = x(c, yy * r + dy, xx * r + dx);
      }
  return y;
}

template <typename T>
Grid<T> PixelShuffleGrid(const Grid<T>& x, size_t r) {
  if (r == 0 || x.channels() % (r * r)) {
    throw ShapeError("pixel_shuffle: channels of " + x.ShapeString() + " not divisible by " +
                     std::to_string(r * r));
  }
  const size_t oc = x.channels() / (r * r);
  Grid<T> y(oc, x.height() * r, x.width() * r);
  for (size_t c = 0; c < oc; ++c)
    for (size_t dy = 0; dy < r; ++dy)
      for (size_t dx = 0; dx < r; ++dx) {
        const size_t ic = (c * r + dy) * r + dx;
        for (size_t yy = 0; yy < x.height(); ++yy)
          for (size_t xx = 0; xx < x.width(); ++xx) y(c, yy * r + dy, xx * r + dx) = x(ic, yy, xx);
      }
  return y;
}

template <typename T>
Var<T> PixelUnshuffle(Tape<T>& t, const Var<T>& x, size_t r) {
  Var<T> out = t.Result(PixelUnshuffleGrid(x.value(), r), x.requires_grad());
  if (out.requires_grad()) {
    t.Record([x, out, r] {
      const Grid<T>* gy = internal::OutGrad(out);
      if (!gy) return;
      Grid<T> back = PixelShuffleGrid(*gy, r);
      Grid<T>& gx = x.node()->Grad();
      for (size_t i = 0; i < gx.size(); ++i) gx[i] += back[i];
    });
  }
  return out;
}

template <typename T>
Var<T> PixelShuffle(Tape<T>& t, const Var<T>& x, size_t r) {
  Var<T> out = t.Result(PixelShuffleGrid(x.value(), r), x.requires_grad());
  if (out.requires_grad()) {
    t.Record([x, out, r] {
      const Grid<T>* gy = internal::OutGrad(out);
      if (!gy) return;
      Grid<T> back = PixelUnshuffleGrid(*gy, r);
      Grid<T>& gx = x.node()->Grad();
      for (size_t i = 0; i < gx.size(); ++i) gx[i] += back[i];
    });
  }
  return out;
}

// Adaptive average pooling onto an out_h x out_w grid. Cell i covers input
// rows [floor(i*H/out_h), floor((i+1)*H/out_h)), a partition of the rows;
// columns likewise.
inline std::vector<size_t> PoolBounds(size_t in, size_t out) {
  std::vector<size_t> b(out + 1);
  for (size_t i = 0; i <= out; ++i) b[i] = i * in / out;
  return b;
}

template <typename T>
Var<T> AvgPoolTo(Tape<T>& t, const Var<T>& x, size_t out_h, size_t out_w) {
  const Grid<T>& xv = x.value();
  if (out_h == 0 || out_w == 0) throw ShapeError("avg_pool_to: zero output size");
  if (out_h > xv.height() || out_w > xv.width()) {
    throw ShapeError("avg_pool_to: " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                     " larger than input " + xv.ShapeString());
  }
  const auto rb = PoolBounds(xv.height(), out_h);
  const auto cb = PoolBounds(xv.width(), out_w);
  Grid<T> y(xv.channels(), out_h, out_w);
  for (size_t c = 0; c < xv.channels(); ++c)
    for (size_t i = 0; i < out_h; ++i)
      for (size_t j = 0; j < out_w; ++j) {
        T s = T(0);
        for (size_t r = rb[i]; r < rb[i + 1]; ++r)
          for (size_t q = cb[j]; q < cb[j + 1]; ++q) s += xv(c, r, q);
        y(c, i, j) = s / static_cast<T>((rb[i + 1] - rb[i]) * (cb[j + 1] - cb[j]));
      }
  Var<T> out = t.Result(std::move(y), x.requires_grad());
  if (out.requires_grad()) {
    t.Record([x, out, rb, cb] {
      const Grid<T>* gy = internal::OutGrad(out);
      if (!gy) return;
      Grid<T>& gx = x.node()->Grad();
      for (size_t c = 0; c < gy->channels(); ++c)
        for (size_t i = 0; i + 1 < rb.size(); ++i)
          for (size_t j = 0; j + 1 < cb.size(); ++j) {
            const T g = (*gy)(c, i, j) / static_cast<T>((rb[i + 1] - rb[i]) * (cb[j + 1] - cb[j]));
            for (size_t r = rb[i]; r < rb[i + 1]; ++r)
              for (size_t q = cb[j]; q < cb[j + 1]; ++q) gx(c, r, q) += g;
          }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Layers.

// Per-position affine map over channels. w is [out, in], b is [out].
template <typename T>
Var<T> Linear(Tape<T>& t, const Var<T>& x, Param<T>& w,
              std::type_identity_t<Param<T>>* b = nullptr) {
  const Grid<T>& xv = x.value();
  if (w.shape.size() != 2 || w.dim(1) != xv.channels()) {
    throw ShapeError("linear: weight " + w.name + " " + internal::Shape(w.shape) +
                     " incompatible with input " + xv.ShapeString());
  }
  const size_t out_c = w.dim(0), in_c = w.dim(1), P = xv.plane();
  Grid<T> y(out_c, xv.height(), xv.width());
  for (size_t o = 0; o < out_c; ++o) {
    T* yr = y.channel(o);
    const T bias = b ? b->value[o] : T(0);
    for (size_t p = 0; p < P; ++p) yr[p] = bias;
    const T* wr = w.value.data() + o * in_c;
    for (size_t i = 0; i < in_c; ++i) {
      const T wv = wr[i];
      const T* xr = xv.channel(i);
      for (size_t p = 0; p < P; ++p) yr[p] += wv * xr[p];
    }
  }
  t.AddMacs(static_cast<uint64_t>(out_c) * in_c * P);
  Var<T> out = t.Result(std::move(y), true);
  if (out.requires_grad()) {
    t.Record([x, out, &w, b, out_c, in_c, P] {
      const Grid<T>* gy = internal::OutGrad(out);
      if (!gy) return;
      const Grid<T>& xv = x.value();
      T* gw = w.GradData();
      for (size_t o = 0; o < out_c; ++o) {
        const T* gr = gy->channel(o);
        for (size_t i = 0; i < in_c; ++i) {
          const T* xr = xv.channel(i);
          T s = T(0);
          for (size_t p = 0; p < P; ++p) s += gr[p] * xr[p];
          gw[o * in_c + i] += s;
        }
      }
      if (b) {
        T* gb = b->GradData();
        for (size_t o = 0; o < out_c; ++o) {
          const T* gr = gy->channel(o);
          T s = T(0);
          for (size_t p = 0; p < P; ++p) s += gr[p];
          gb[o] += s;
        }
      }
      if (Grid<T>* gx = internal::InGrad(x)) {
        for (size_t o = 0; o < out_c; ++o) {
          const T* gr = gy->channel(o);
          for (size_t i = 0; i < in_c; ++i) {
            const T wv = w.value[o * in_c + i];
            T* xr = gx->channel(i);
            for (size_t p = 0; p < P; ++p) xr[p] += wv * gr[p];
          }
        }
      }
    });
  }
  return out;
}

// Normalizes each position's channel vector to zero mean and unit variance,
// then applies per-channel gain and bias.
template <typename T>
Var<T> LayerNorm(Tape<T>& t, const Var<T>& x, Param<T>& gain, Param<T>& bias, T eps) {
  const Grid<T>& xv = x.value();
  const size_t C = xv.channels(), P = xv.plane();
  if (gain.size() != C || bias.size() != C) {
    throw ShapeError("layer_norm: gain " + internal::Shape(gain.shape) + " / bias " +
                     internal::Shape(bias.shape) + " incompatible with input " +
                     xv.ShapeString());
  }
  std::vector<T> mean(P, T(0)), inv_std(P, T(0));
  for (size_t c = 0; c < C; ++c) {
    const T* row = xv.channel(c);
    for (size_t p = 0; p < P; ++p) mean[p] += row[p];
  }
  for (size_t p = 0; p < P; ++p) mean[p] /= static_cast<T>(C);
  for (size_t c = 0; c < C; ++c) {
    const T* row = xv.channel(c);
    for (size_t p = 0; p < P; ++p) {
      const T d = row[p] - mean[p];
      inv_std[p] += d * d;
    }
  }
  for (size_t p = 0; p < P; ++p) inv_std[p] = T(1) / std::sqrt(inv_std[p] / static_cast<T>(C) + eps);
  Grid<T> xhat(C, xv.height(), xv.width());
  Grid<T> y(C, xv.height(), xv.width());
  for (size_t c = 0; c < C; ++c) {
    const T* row = xv.channel(c);
    T* hr = xhat.channel(c);
    T* yr = y.channel(c);
    const T g = gain.value[c], b = bias.value[c];
    for (size_t p = 0; p < P; ++p) {
      hr[p] = (row[p] - mean[p]) * inv_std[p];
      yr[p] = g * hr[p] + b;
    }
  }
  Var<T> out = t.Result(std::move(y), true);
  if (out.requires_grad()) {
    t.Record([x, out, &gain, &bias, xhat = std::move(xhat), inv_std = std::move(inv_std), C, P] {
      const Grid<T>* gy = internal::OutGrad(out);
      if (!gy) return;
      T* gg = gain.GradData();
      T* gb = bias.GradData();
      for (size_t c = 0; c < C; ++c) {
        const T* gr = gy->channel(c);
        const T* hr = xhat.channel(c);
        T sg = T(0), sb = T(0);
        for (size_t p = 0; p < P; ++p) {
          sg += gr[p] * hr[p];
          sb += gr[p];
        }
        gg[c] += sg;
        gb[c] += sb;
      }
      Grid<T>* gx = internal::InGrad(x);
      if (!gx) return;
      std::vector<T> m1(P, T(0)), m2(P, T(0));
      for (size_t c = 0; c < C; ++c) {
        const T* gr = gy->channel(c);
        const T* hr = xhat.channel(c);
        const T g = gain.value[c];
        for (size_t p = 0; p < P; ++p) {
          const T gh = gr[p] * g;
          m1[p] += gh;
          m2[p] += gh * hr[p];
        }
      }
      for (size_t c = 0; c < C; ++c) {
        const T* gr = gy->channel(c);
        const T* hr = xhat.channel(c);
        T* xr = gx->channel(c);
        const T g = gain.value[c];
        for (size_t p = 0; p < P; ++p) {
          const T gh = gr[p] * g;
          xr[p] += inv_std[p] * (gh - m1[p] / static_cast<T>(C) - hr[p] * m2[p] / static_cast<T>(C));
        }
      }
    });
  }
  return out;
}

inline size_t ConvOutputSize(size_t in, size_t k, size_t stride, size_t pad) {
  if (stride == 0 || in + 2 * pad < k) return 0;
  return (in + 2 * pad - k) / stride + 1;
}

namespace internal {

// Range of output indices o with 0 <= o*stride + k - pad < in.
inline std::pair<size_t, size_t> ValidRange(size_t out, size_t in, size_t k, size_t stride,
                                             size_t pad) {
  // lo = ceil((pad - k) / stride) clipped at 0
  size_t lo = 0;
  if (pad > k) lo = (pad - k + stride - 1) / stride;
  // hi = floor((in - 1 + pad - k) / stride) + 1, clipped to out
  if (in + pad < k + 1) return {0, 0};
  size_t hi = (in - 1 + pad - k) / stride + 1;
  hi = std::min(hi, out);
  if (lo > hi) lo = hi;
  return {lo, hi};
}

// Cross-correlation y[o] += K[o,i] * x[i] (no bias); kernel layout
// [out, in, k, k].
template <typename T>
void ConvAccumulate(const Grid<T>& x, const T* kernel, size_t out_c, size_t k, size_t stride,
                    size_t pad, Grid<T>& y) {
  const size_t in_c = x.channels(), H = x.height(), W = x.width();
  const size_t oh = y.height(), ow = y.width();
  for (size_t o = 0; o < out_c; ++o) {
    for (size_t i = 0; i < in_c; ++i) {
      const T* kr = kernel + (o * in_c + i) * k * k;
      for (size_t ky = 0; ky < k; ++ky) {
        const auto [ylo, yhi] = ValidRange(oh, H, ky, stride, pad);
        for (size_t kx = 0; kx < k; ++kx) {
          const T wv = kr[ky * k + kx];
          const auto [xlo, xhi] = ValidRange(ow, W, kx, stride, pad);
          for (size_t oy = ylo; oy < yhi; ++oy) {
            const T* xr = &x(i, oy * stride + ky - pad, 0);
            T* yr = &y(o, oy, 0);
            if (stride == 1) {
              const ptrdiff_t off = static_cast<ptrdiff_t>(kx) - static_cast<ptrdiff_t>(pad);
              for (size_t ox = xlo; ox < xhi; ++ox) yr[ox] += wv * xr[static_cast<ptrdiff_t>(ox) + off];
            } else {
              for (size_t ox = xlo; ox < xhi; ++ox) yr[ox] += wv * xr[ox * stride + kx - pad];
            }
          }
        }
      }
    }
  }
}

// Adjoint of ConvAccumulate w.r.t. x: x[i] += K[o,i]^T * y[o].
template <typename T>
void ConvAdjointAccumulate(const Grid<T>& y, const T* kernel, size_t in_c, size_t k,
                           size_t stride, size_t pad, Grid<T>& x) {
  const size_t out_c = y.channels(), H = x.height(), W = x.width();
  const size_t oh = y.height(), ow = y.width();
  for (size_t i = 0; i < in_c; ++i) {
    for (size_t o = 0; o < out_c; ++o) {
      const T* kr = kernel + (o * in_c + i) * k * k;
      for (size_t ky = 0; ky < k; ++ky) {
        const auto [ylo, yhi] = ValidRange(oh, H, ky, stride, pad);
        for (size_t kx = 0; kx < k; ++kx) {
          const T wv = kr[ky * k + kx];
          const auto [xlo, xhi] = ValidRange(ow, W, kx, stride, pad);
          for (size_t oy = ylo; oy < yhi; ++oy) {
            T* xr = &x(i, oy * stride + ky - pad, 0);
            const T* yr = &y(o, oy, 0);
            if (stride == 1) {
              const ptrdiff_t off = static_cast<ptrdiff_t>(kx) - static_cast<ptrdiff_t>(pad);
              for (size_t ox = xlo; ox < xhi; ++ox) xr[static_cast<ptrdiff_t>(ox) + off] += wv * yr[ox];
            } else {
              for (size_t ox = xlo; ox < xhi; ++ox) xr[ox * stride + kx - pad] += wv * yr[ox];
            }
          }
        }
      }
    }
  }
}

// dK[o,i] += sum over positions of y_grad[o] * x[i].
template <typename T>
void ConvKernelGrad(const Grid<T>& x, const Grid<T>& gy, size_t k, size_t stride, size_t pad,
                    T* gk) {
  const size_t in_c = x.channels(), out_c = gy.channels(), H = x.height(), W = x.width();
  const size_t oh = gy.height(), ow = gy.width();
  for (size_t o = 0; o < out_c; ++o) {
    for (size_t i = 0; i < in_c; ++i) {
      T* kr = gk + (o * in_c + i) * k * k;
      for (size_t ky = 0; ky < k; ++ky) {
        const auto [ylo, yhi] = ValidRange(oh, H, ky, stride, pad);
        for (size_t kx = 0; kx < k; ++kx) {
          const auto [xlo, xhi] = ValidRange(ow, W, kx, stride, pad);
          T s = T(0);
          for (size_t oy = ylo; oy < yhi; ++oy) {
            const T* xr = &x(i, oy * stride + ky - pad, 0);
            const T* gr = &gy(o, oy, 0);
            for (size_t ox = xlo; ox < xhi; ++ox) s += gr[ox] * xr[ox * stride + kx - pad];
          }
          kr[ky * k + kx] += s;
        }
      }
    }
  }
}

template <typename T>
void CheckKernel(const Param<T>& kernel, size_t in_c, bool transposed) {
  const auto& s = kernel.shape;
  const size_t expect_in = transposed ? 0 : 1;
  if (s.size() != 4 || s[2] != s[3] || s[expect_in] != in_c) {
    throw ShapeError(std::string(transposed ? "conv_transpose2d" : "conv2d") + ": kernel " +
                     kernel.name + " " + Shape(s) + " incompatible with " +
                     std::to_string(in_c) + " input channels");
  }
}

}  // namespace internal

// Cross-correlation with zero padding. kernel is [out, in, k, k], bias [out].
template <typename T>
Var<T> Conv2d(Tape<T>& t, const Var<T>& x, Param<T>& kernel,
              std::type_identity_t<Param<T>>* bias, size_t stride,
              size_t pad) {
  const Grid<T>& xv = x.value();
  internal::CheckKernel(kernel, xv.channels(), false);
  const size_t out_c = kernel.dim(0), k = kernel.dim(2);
  const size_t oh = ConvOutputSize(xv.height(), k, stride, pad);
  const size_t ow = ConvOutputSize(xv.width(), k, stride, pad);
  if (oh < 1 || ow < 1) {
    throw ShapeError("conv2d: output size < 1 for input " + xv.ShapeString() + ", kernel " +
                     std::to_string(k) + ", stride " + std::to_string(stride) + ", padding " +
                     std::to_string(pad));
  }
  Grid<T> y(out_c, oh, ow);
  if (bias) {
    for (size_t o = 0; o < out_c; ++o) std::fill(y.channel(o), y.channel(o) + oh * ow, bias->value[o]);
  }
  internal::ConvAccumulate(xv, kernel.value.data(), out_c, k, stride, pad, y);
  t.AddMacs(static_cast<uint64_t>(out_c) * xv.channels() * k * k * oh * ow);
  Var<T> out = t.Result(std::move(y), true);
  if (out.requires_grad()) {
    t.Record([x, out, &kernel, bias, k, stride, pad] {
      const Grid<T>* gy = internal::OutGrad(out);
      if (!gy) return;
      internal::ConvKernelGrad(x.value(), *gy, k, stride, pad, kernel.GradData());
      if (bias) {
        T* gb = bias->GradData();
        for (size_t o = 0; o < gy->channels(); ++o) {
          T s = T(0);
          for (size_t p = 0; p < gy->plane(); ++p) s += gy->channel(o)[p];
          gb[o] += s;
        }
      }
      if (Grid<T>* gx = internal::InGrad(x)) {
        internal::ConvAdjointAccumulate(*gy, kernel.value.data(), x.channels(), k, stride, pad,
                                        *gx);
      }
    });
  }
  return out;
}

// Transposed convolution: the adjoint of Conv2d with the same kernel array,
// read as [in, out, k, k]. Output size is (in - 1)*stride - 2*pad + k +
// output_pad.
template <typename T>
Var<T> ConvTranspose2d(Tape<T>& t, const Var<T>& x, Param<T>& kernel,
                       std::type_identity_t<Param<T>>* bias,
                       size_t stride, size_t pad, size_t output_pad) {
  const Grid<T>& xv = x.value();
  internal::CheckKernel(kernel, xv.channels(), true);
  const size_t out_c = kernel.dim(1), k = kernel.dim(2);
  const long long ohl = static_cast<long long>((xv.height() - 1) * stride + k + output_pad) -
                        2 * static_cast<long long>(pad);
  const long long owl = static_cast<long long>((xv.width() - 1) * stride + k + output_pad) -
                        2 * static_cast<long long>(pad);
  if (ohl < 1 || owl < 1 || output_pad >= std::max<size_t>(stride, 1)) {
    throw ShapeError("conv_transpose2d: invalid output size for input " + xv.ShapeString());
  }
  Grid<T> y(out_c, static_cast<size_t>(ohl), static_cast<size_t>(owl));
  if (bias) {
    for (size_t o = 0; o < out_c; ++o) std::fill(y.channel(o), y.channel(o) + y.plane(), bias->value[o]);
  }
  // y is the "input" of the forward conv whose output has x's shape.
  internal::ConvAdjointAccumulate(xv, kernel.value.data(), out_c, k, stride, pad, y);
  t.AddMacs(static_cast<uint64_t>(out_c) * xv.channels() * k * k * xv.plane());
  Var<T> out = t.Result(std::move(y), true);
  if (out.requires_grad()) {
    t.Record([x, out, &kernel, bias, k, stride, pad] {
      const Grid<T>* gy = internal::OutGrad(out);
      if (!gy) return;
      // Kernel gradient: the forward conv maps y-shape -> x-shape with
      // kernel [x_channels, y_channels]; here "input" is gy and "output" x.
      internal::ConvKernelGrad(*gy, x.value(), k, stride, pad, kernel.GradData());
      if (bias) {
        T* gb = bias->GradData();
        for (size_t o = 0; o < gy->channels(); ++o) {
          T s = T(0);
          for (size_t p = 0; p < gy->plane(); ++p) s += gy->channel(o)[p];
          gb[o] += s;
        }
      }
      if (Grid<T>* gx = internal::InGrad(x)) {
        internal::ConvAccumulate(*gy, kernel.value.data(), x.channels(), k, stride, pad, *gx);
      }
    });
  }
  return out;
}

}  // namespace ccodec

#endif  // CCODEC_TENSOR_OPS_H_
