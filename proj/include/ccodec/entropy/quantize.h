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

// Quantizers and the Gaussian rate term.

#ifndef CCODEC_ENTROPY_QUANTIZE_H_
#define CCODEC_ENTROPY_QUANTIZE_H_

#include <cmath>

#include "ccodec/tensor/grid.h"
#include "ccodec/tensor/ops.h"
#include "ccodec/tensor/rng.h"
#include "ccodec/tensor/tape.h"

namespace ccodec {

// round(y - mu) + mu, halves rounded away from zero.
template <typename T>
Grid<T> QuantizeOffset(const Grid<T>& y, const Grid<T>& mu) {
  CheckSameShape(y, mu, "quantize_offset");
  Grid<T> out(y.channels(), y.height(), y.width());
  for (size_t i = 0; i < y.size(); ++i) out[i] = std::round(y[i] - mu[i]) + mu[i];
  return out;
}

// Uniform noise in (-0.5, 0.5), one draw per element in storage order.
template <typename T>
Grid<T> UniformNoise(size_t c, size_t h, size_t w, Rng& rng) {
  Grid<T> u(c, h, w);
  for (T& v : u.span()) v = static_cast<T>(rng.Open01() - 0.5);
  return u;
}

template <typename T>
Grid<T> UniversalQuantizeGrid(const Grid<T>& y, Rng& rng) {
  Grid<T> u = UniformNoise<T>(y.channels(), y.height(), y.width(), rng);
  for (size_t i = 0; i < y.size(); ++i) u[i] += y[i];
  return u;
}

// y + u with the noise treated as a constant.
template <typename T>
Var<T> UniversalQuantize(Tape<T>& t, const Var<T>& y, Rng& rng) {
  const Grid<T>& yv = y.value();
  return Add(t, y, t.Constant(UniformNoise<T>(yv.channels(), yv.height(), yv.width(), rng)));
}

template <typename T>
T DsqScalar(T y, T k) {
  const T f = std::floor(y);
  const T r = y - f - T(0.5);
  return f + T(0.5) + std::tanh(k * r) / (T(2) * std::tanh(k / T(2)));
}

template <typename T>
T DsqDerivative(T y, T k) {
  const T r = y - std::floor(y) - T(0.5);
  const T th = std::tanh(k * r);
  return k * (T(1) - th * th) / (T(2) * std::tanh(k / T(2)));
}

// Soft rounding that approaches round() as k grows.
template <typename T>
Var<T> Dsq(Tape<T>& t, const Var<T>& x, T k) {
  if (!(k > T(0))) throw std::invalid_argument("dsq: k must be positive");
  return MapUnary(
      t, x, [k](T v) { return DsqScalar(v, k); },
      [k](T v, T) { return DsqDerivative(v, k); });
}

inline double StdNormalCdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

inline constexpr double kLikelihoodFloor = 1e-9;

// Total information content, in bits, of y under independent Gaussians
// N(mu, sigma^2) discretized to unit bins centered on y:
//   -sum log2(Phi((y - mu + 0.5)/sigma) - Phi((y - mu - 0.5)/sigma)).
// Probabilities are floored at kLikelihoodFloor; the floor has no gradient.
template <typename T>
Var<T> GaussianBits(Tape<T>& t, const Var<T>& y, const Var<T>& mu, const Var<T>& sigma) {
  const Grid<T>& yv = y.value();
  CheckSameShape(yv, mu.value(), "gaussian_bits");
  CheckSameShape(yv, sigma.value(), "gaussian_bits");
  const size_t n = yv.size();
  double bits = 0;
  // d(-log2 p)/d(y - mu) and d(-log2 p)/d(sigma) per element.
  std::vector<double> dd(n, 0.0), ds(n, 0.0);
  const double kInvLn2 = 1.0 / std::log(2.0);
  for (size_t i = 0; i < n; ++i) {
    const double s = static_cast<double>(sigma.value()[i]);
    const double d = static_cast<double>(yv[i]) - static_cast<double>(mu.value()[i]);
    // Evaluate on the side where the tails are accurate.
    const double a = std::abs(d);
    const double hi = (0.5 - a) / s, lo = (-0.5 - a) / s;
    const double p = StdNormalCdf(hi) - StdNormalCdf(lo);
    if (!(p > kLikelihoodFloor)) {
      bits -= std::log2(kLikelihoodFloor);
      continue;
    }
    bits -= std::log2(p);
    const double phi_hi = std::exp(-0.5 * hi * hi) / std::sqrt(2 * M_PI);
    const double phi_lo = std::exp(-0.5 * lo * lo) / std::sqrt(2 * M_PI);
    // p(d) = Phi((0.5 - |d|)/s) - Phi((-0.5 - |d|)/s), symmetric in d.
    const double dp_da = (-phi_hi + phi_lo) / s;
    const double dp_ds = (-phi_hi * hi + phi_lo * lo) / s;
    const double sign = d < 0 ? -1.0 : 1.0;
    dd[i] = -kInvLn2 * dp_da * sign / p;
    ds[i] = -kInvLn2 * dp_ds / p;
  }
  Var<T> out = t.Result(Grid<T>(1, 1, 1, static_cast<T>(bits)), internal::AnyGrad(y, mu, sigma));
  if (out.requires_grad()) {
    t.Record([y, mu, sigma, out, dd = std::move(dd), ds = std::move(ds), n] {
      const Grid<T>* gy = internal::OutGrad(out);
      if (!gy) return;
      const double g = static_cast<double>((*gy)[0]);
      Grid<T>* gyv = internal::InGrad(y);
      Grid<T>* gmu = internal::InGrad(mu);
      Grid<T>* gs = internal::InGrad(sigma);
      for (size_t i = 0; i < n; ++i) {
        if (gyv) (*gyv)[i] += static_cast<T>(g * dd[i]);
        if (gmu) (*gmu)[i] -= static_cast<T>(g * dd[i]);
        if (gs) (*gs)[i] += static_cast<T>(g * ds[i]);
      }
    });
  }
  return out;
}

}  // namespace ccodec

#endif  // CCODEC_ENTROPY_QUANTIZE_H_
