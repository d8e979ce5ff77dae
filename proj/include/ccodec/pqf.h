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

// Guided post-quantization filter.
//
// A small network maps the dequantized latent y_hat to N candidate maps per
// channel. The encoder fits, per channel i, the combination of candidates
// that best explains the quantization error eps_i = y_i - y_hat_i,
//   a_i = (C_i^T C_i + ridge I)^-1 C_i^T eps_i,
// and sends a_i with 4 bits per coefficient; the decoder adds
// sum_j a_ij C_ij back onto y_hat_i.
//
// Candidate j of channel i lives in channel i*N + j of the candidate grid.

#ifndef CCODEC_PQF_H_
#define CCODEC_PQF_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ccodec/clustering.h"
#include "ccodec/tensor/grid.h"
#include "ccodec/tensor/ops.h"
#include "ccodec/tensor/param.h"
#include "ccodec/tensor/tape.h"

namespace ccodec {

inline constexpr double kDefaultRidgeScale = 1e-6;

inline constexpr double kCoeffMin = -2.0;
inline constexpr double kCoeffMax = 2.0;
inline constexpr int kCoeffLevels = 16;
inline constexpr double kCoeffStep = (kCoeffMax - kCoeffMin) / kCoeffLevels;
inline constexpr int kCoeffBits = 4;

// Nearest level; exact midpoints go to the lower level. Out-of-range values
// clamp to the end levels.
inline uint8_t QuantizeCoefficient(double a) {
  if (std::isnan(a)) return kCoeffLevels / 2 - 1;
  const double t = (a - kCoeffMin) / kCoeffStep - 0.5;
  const double c = std::ceil(t - 0.5);
  return static_cast<uint8_t>(std::clamp(c, 0.0, double(kCoeffLevels - 1)));
}

inline double DequantizeCoefficient(uint8_t code) {
  return kCoeffMin + (std::min<int>(code, kCoeffLevels - 1) + 0.5) * kCoeffStep;
}

// True when quantizing `a` needed clamping to the end levels.
inline bool CoefficientClamped(double a) {
  return !(a >= kCoeffMin && a <= kCoeffMax);
}

// Two codes per byte, low nibble first.
std::vector<uint8_t> PackNibbles(const std::vector<uint8_t>& codes);
std::vector<uint8_t> UnpackNibbles(const std::vector<uint8_t>& bytes, size_t count);

struct LeastSquaresSolution {
  std::vector<double> a;
  double ridge = 0;
  // The system was singular at the requested ridge and was re-solved with
  // the default relative ridge.
  bool fallback = false;
  // Not solvable even with the ridge (all-zero candidates); `a` is zero.
  bool degenerate = false;
};

// In-place Cholesky solve of the symmetric n x n system A x = b (A row-major).
// Returns false when A is not numerically positive definite.
bool CholeskySolve(std::vector<double>& a, std::vector<double>& b, size_t n);

// Normal equations for one channel: `c` holds N columns of length P, column
// j starting at c + j*P.
template <typename T>
void NormalEquations(const T* c, const T* eps, size_t P, size_t N, std::vector<double>& gram,
                     std::vector<double>& rhs) {
  gram.assign(N * N, 0.0);
  rhs.assign(N, 0.0);
  for (size_t j = 0; j < N; ++j) {
    const T* cj = c + j * P;
    for (size_t k = j; k < N; ++k) {
      const T* ck = c + k * P;
      double s = 0;
      for (size_t p = 0; p < P; ++p) s += double(cj[p]) * double(ck[p]);
      gram[j * N + k] = gram[k * N + j] = s;
    }
    double s = 0;
    for (size_t p = 0; p < P; ++p) s += double(cj[p]) * double(eps[p]);
    rhs[j] = s;
  }
}

inline double GramTrace(const std::vector<double>& gram, size_t N) {
  double t = 0;
  for (size_t j = 0; j < N; ++j) t += gram[j * N + j];
  return t;
}

// a = (C^T C + ridge I)^-1 C^T eps with an absolute ridge.
template <typename T>
LeastSquaresSolution SolveCoefficients(const T* c, const T* eps, size_t P, size_t N, double ridge) {
  std::vector<double> gram, rhs;
  NormalEquations(c, eps, P, N, gram, rhs);
  LeastSquaresSolution sol;
  sol.ridge = ridge;
  const double trace = GramTrace(gram, N);
  auto attempt = [&](double r) {
    std::vector<double> a = gram, b = rhs;
    for (size_t j = 0; j < N; ++j) a[j * N + j] += r;
    if (!CholeskySolve(a, b, N)) return false;
    sol.a = std::move(b);
    return true;
  };
  if (attempt(ridge)) return sol;
  sol.fallback = true;
  sol.ridge = kDefaultRidgeScale * trace / double(N);
  if (sol.ridge > 0 && attempt(sol.ridge)) return sol;
  sol.degenerate = true;
  sol.a.assign(N, 0.0);
  return sol;
}

// Ridge proportional to the mean candidate energy: scale * trace / N.
template <typename T>
LeastSquaresSolution SolveCoefficientsRelative(const T* c, const T* eps, size_t P, size_t N,
                                               double scale) {
  double trace = 0;
  for (size_t i = 0; i < N * P; ++i) trace += double(c[i]) * double(c[i]);
  return SolveCoefficients(c, eps, P, N, scale * trace / double(N));
}

namespace internal {

inline void CheckPqfShapes(size_t cand_c, size_t eps_c, size_t N, const std::string& what) {
  if (N == 0 || cand_c != eps_c * N) {
    throw ShapeError(what + ": " + std::to_string(cand_c) + " candidate channels for " +
                     std::to_string(eps_c) + " latent channels and N=" + std::to_string(N));
  }
}

// Per-channel system with relative ridge, kept for the backward pass.
struct PqfChannel {
  std::vector<double> chol;  // factorized A, or empty when degenerate
  std::vector<double> a;
  double ridge = 0;
};

inline bool CholeskyFactor(std::vector<double>& a, size_t n) {
  for (size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    if (!(d > 0) || !std::isfinite(d)) return false;
    d = std::sqrt(d);
    a[j * n + j] = d;
    for (size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / d;
    }
  }
  return true;
}

inline void CholeskyBackSolve(const std::vector<double>& l, std::vector<double>& b, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (size_t k = 0; k < i; ++k) s -= l[i * n + k] * b[k];
    b[i] = s / l[i * n + i];
  }
  for (size_t i = n; i-- > 0;) {
    double s = b[i];
    for (size_t k = i + 1; k < n; ++k) s -= l[k * n + i] * b[k];
    b[i] = s / l[i * n + i];
  }
}

template <typename T>
std::vector<PqfChannel> SolveAllRelative(const Grid<T>& cand, const Grid<T>& eps, size_t N,
                                         double scale) {
  const size_t M = eps.channels(), P = eps.plane();
  std::vector<PqfChannel> out(M);
  std::vector<double> gram, rhs;
  for (size_t i = 0; i < M; ++i) {
    NormalEquations(cand.channel(i * N), eps.channel(i), P, N, gram, rhs);
    PqfChannel& ch = out[i];
    ch.ridge = scale * GramTrace(gram, N) / double(N);
    for (size_t j = 0; j < N; ++j) gram[j * N + j] += ch.ridge;
    if (!CholeskyFactor(gram, N)) {
      ch.a.assign(N, 0.0);
      continue;
    }
    ch.chol = std::move(gram);
    ch.a = rhs;
    CholeskyBackSolve(ch.chol, ch.a, N);
  }
  return out;
}

}  // namespace internal

// Differentiable least-squares coefficients, ridge = scale * trace / N.
// Returns an M x N x 1 grid.
template <typename T>
Var<T> LsCoefficients(Tape<T>& t, const Var<T>& cand, const Var<T>& eps, size_t N,
                      double scale = kDefaultRidgeScale) {
  const Grid<T>& cv = cand.value();
  const Grid<T>& ev = eps.value();
  internal::CheckPqfShapes(cv.channels(), ev.channels(), N, "ls_coefficients");
  if (cv.height() != ev.height() || cv.width() != ev.width()) {
    throw ShapeError("ls_coefficients: " + cv.ShapeString() + " vs " + ev.ShapeString());
  }
  const size_t M = ev.channels(), P = ev.plane();
  auto sys = internal::SolveAllRelative(cv, ev, N, scale);
  Grid<T> a(M, N, 1);
  for (size_t i = 0; i < M; ++i)
    for (size_t j = 0; j < N; ++j) a[i * N + j] = static_cast<T>(sys[i].a[j]);
  Var<T> out = t.Result(std::move(a), internal::AnyGrad(cand, eps));
  if (out.requires_grad()) {
    t.Record([cand, eps, out, sys = std::move(sys), M, N, P, scale] {
      const Grid<T>* ga = internal::OutGrad(out);
      if (!ga) return;
      Grid<T>* gc = internal::InGrad(cand);
      Grid<T>* ge = internal::InGrad(eps);
      const Grid<T>& cv = cand.value();
      const Grid<T>& ev = eps.value();
      std::vector<double> w(N), ca(P), cw(P);
      for (size_t i = 0; i < M; ++i) {
        const internal::PqfChannel& ch = sys[i];
        if (ch.chol.empty()) continue;
        for (size_t j = 0; j < N; ++j) w[j] = double((*ga)[i * N + j]);
        internal::CholeskyBackSolve(ch.chol, w, N);
        const T* c = cv.channel(i * N);
        const T* e = ev.channel(i);
        std::fill(ca.begin(), ca.end(), 0.0);
        std::fill(cw.begin(), cw.end(), 0.0);
        double wa = 0;
        for (size_t j = 0; j < N; ++j) {
          wa += w[j] * ch.a[j];
          for (size_t p = 0; p < P; ++p) {
            ca[p] += double(c[j * P + p]) * ch.a[j];
            cw[p] += double(c[j * P + p]) * w[j];
          }
        }
        if (ge) {
          T* g = ge->channel(i);
          for (size_t p = 0; p < P; ++p) g[p] += static_cast<T>(cw[p]);
        }
        if (gc) {
          T* g = gc->channel(i * N);
          const double ridge_term = 2.0 * scale / double(N) * wa;
          for (size_t j = 0; j < N; ++j) {
            for (size_t p = 0; p < P; ++p) {
              g[j * P + p] += static_cast<T>((double(e[p]) - ca[p]) * w[j] - cw[p] * ch.a[j] -
                                             ridge_term * double(c[j * P + p]));
            }
          }
        }
      }
    });
  }
  return out;
}

// sum_i -eps_i^T C_i (C_i^T C_i + ridge I)^-1 C_i^T eps_i, i.e. minus the
// squared error removed by the optimal filter. ridge = scale * trace / N.
template <typename T>
Var<T> PqfLoss(Tape<T>& t, const Var<T>& cand, const Var<T>& eps, size_t N,
               double scale = kDefaultRidgeScale) {
  const Grid<T>& cv = cand.value();
  const Grid<T>& ev = eps.value();
  internal::CheckPqfShapes(cv.channels(), ev.channels(), N, "pqf_loss");
  if (cv.height() != ev.height() || cv.width() != ev.width()) {
    throw ShapeError("pqf_loss: " + cv.ShapeString() + " vs " + ev.ShapeString());
  }
  const size_t M = ev.channels(), P = ev.plane();
  auto sys = internal::SolveAllRelative(cv, ev, N, scale);
  double loss = 0;
  std::vector<double> gram, rhs;
  for (size_t i = 0; i < M; ++i) {
    NormalEquations(cv.channel(i * N), ev.channel(i), P, N, gram, rhs);
    for (size_t j = 0; j < N; ++j) loss -= rhs[j] * sys[i].a[j];
  }
  Var<T> out = t.Result(Grid<T>(1, 1, 1, static_cast<T>(loss)), internal::AnyGrad(cand, eps));
  if (out.requires_grad()) {
    t.Record([cand, eps, out, sys = std::move(sys), M, N, P, scale] {
      const Grid<T>* gy = internal::OutGrad(out);
      if (!gy) return;
      const double g = double((*gy)[0]);
      Grid<T>* gc = internal::InGrad(cand);
      Grid<T>* ge = internal::InGrad(eps);
      const Grid<T>& cv = cand.value();
      const Grid<T>& ev = eps.value();
      std::vector<double> ca(P);
      for (size_t i = 0; i < M; ++i) {
        const internal::PqfChannel& ch = sys[i];
        if (ch.chol.empty()) continue;
        const T* c = cv.channel(i * N);
        const T* e = ev.channel(i);
        std::fill(ca.begin(), ca.end(), 0.0);
        double a2 = 0;
        for (size_t j = 0; j < N; ++j) {
          a2 += ch.a[j] * ch.a[j];
          for (size_t p = 0; p < P; ++p) ca[p] += double(c[j * P + p]) * ch.a[j];
        }
        if (ge) {
          T* ge_i = ge->channel(i);
          for (size_t p = 0; p < P; ++p) ge_i[p] += static_cast<T>(-2.0 * g * ca[p]);
        }
        if (gc) {
          T* gc_i = gc->channel(i * N);
          const double ridge_term = 2.0 * scale * a2 / double(N);
          for (size_t j = 0; j < N; ++j) {
            for (size_t p = 0; p < P; ++p) {
              gc_i[j * P + p] += static_cast<T>(
                  g * (2.0 * (ca[p] - double(e[p])) * ch.a[j] + ridge_term * double(c[j * P + p])));
            }
          }
        }
      }
    });
  }
  return out;
}

// y_tilde_i = y_hat_i + sum_j a_ij C_ij. coeffs is M x N x 1.
template <typename T>
Grid<T> ApplyPqfGrid(const Grid<T>& y_hat, const Grid<T>& cand, const Grid<T>& coeffs, size_t N) {
  internal::CheckPqfShapes(cand.channels(), y_hat.channels(), N, "pqf_apply");
  if (coeffs.size() != y_hat.channels() * N || cand.plane() != y_hat.plane()) {
    throw ShapeError("pqf_apply: coefficients " + coeffs.ShapeString() + " / candidates " +
                     cand.ShapeString() + " vs latent " + y_hat.ShapeString());
  }
  Grid<T> out = y_hat;
  const size_t P = y_hat.plane();
  for (size_t i = 0; i < y_hat.channels(); ++i) {
    T* o = out.channel(i);
    for (size_t j = 0; j < N; ++j) {
      const T a = coeffs[i * N + j];
      const T* c = cand.channel(i * N + j);
      for (size_t p = 0; p < P; ++p) o[p] += a * c[p];
    }
  }
  return out;
}

template <typename T>
Var<T> ApplyPqf(Tape<T>& t, const Var<T>& y_hat, const Var<T>& cand, const Var<T>& coeffs,
                size_t N) {
  Grid<T> y = ApplyPqfGrid(y_hat.value(), cand.value(), coeffs.value(), N);
  Var<T> out = t.Result(std::move(y), internal::AnyGrad(y_hat, cand, coeffs));
  if (out.requires_grad()) {
    t.Record([y_hat, cand, coeffs, out, N] {
      const Grid<T>* gy = internal::OutGrad(out);
      if (!gy) return;
      const size_t M = gy->channels(), P = gy->plane();
      if (Grid<T>* g = internal::InGrad(y_hat)) {
        for (size_t i = 0; i < gy->size(); ++i) (*g)[i] += (*gy)[i];
      }
      Grid<T>* gc = internal::InGrad(cand);
      Grid<T>* ga = internal::InGrad(coeffs);
      for (size_t i = 0; i < M; ++i) {
        const T* go = gy->channel(i);
        for (size_t j = 0; j < N; ++j) {
          const T a = coeffs.value()[i * N + j];
          const T* c = cand.value().channel(i * N + j);
          T s = T(0);
          for (size_t p = 0; p < P; ++p) s += go[p] * c[p];
          if (ga) (*ga)[i * N + j] += s;
          if (gc) {
            T* g = gc->channel(i * N + j);
            for (size_t p = 0; p < P; ++p) g[p] += go[p] * a;
          }
        }
      }
    });
  }
  return out;
}

// conv3x3 (M -> hidden) -> GELU -> conv3x3 (hidden -> N*M).
template <typename T>
class CandidateNet {
 public:
  CandidateNet() = default;
  CandidateNet(ParamStore<T>& store, const std::string& name, size_t latent, size_t hidden,
               size_t candidates, Rng& rng)
      : n_(candidates) {
    k1_ = &store.AddUniform(name + ".conv0.w", {hidden, latent, 3, 3}, latent * 9, rng);
    b1_ = &store.AddConstant(name + ".conv0.b", {hidden}, T(0));
    k2_ = &store.AddUniform(name + ".conv1.w", {candidates * latent, hidden, 3, 3}, hidden * 9, rng);
    b2_ = &store.AddConstant(name + ".conv1.b", {candidates * latent}, T(0));
  }

  size_t candidates() const { return n_; }

  Var<T> operator()(Tape<T>& t, const Var<T>& y_hat) const {
    return Conv2d(t, Gelu(t, Conv2d(t, y_hat, *k1_, b1_, 1, 1)), *k2_, b2_, 1, 1);
  }

 private:
  size_t n_ = 0;
  Param<T>* k1_ = nullptr;
  Param<T>* b1_ = nullptr;
  Param<T>* k2_ = nullptr;
  Param<T>* b2_ = nullptr;
};

}  // namespace ccodec

#endif  // CCODEC_PQF_H_
