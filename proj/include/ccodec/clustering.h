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

// Contextual-clustering token mixer.
//
// Every spatial position is a point (its channel vector). One mixing pass:
//   1. P_i <- P_i + gamma * mean(P); points and values are linear maps of P.
//   2. Centers: average-pool the points onto a rows x cols grid, then add an
//      offset predicted by a 2-layer MLP. Value centers likewise from the
//      values, with their own MLP.
//   3. Each point joins the center with the highest cosine similarity s_i.
//   4. Per cluster: F = (c_v + sum_i sigmoid(alpha*s_i + beta) * v_i) / (1+m).
//   5. P_i <- P_i + Linear(s_i * F_label(i)).
// In checkerboard mode the pass runs twice, once per (row+col) parity, with
// the other parity zeroed, and the two results are merged by position.
//
// Labels are discrete: gradients reach the similarities and through them the
// points and centers, but not the argmax itself.

#ifndef CCODEC_CLUSTERING_H_
#define CCODEC_CLUSTERING_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ccodec/tensor/grid.h"
#include "ccodec/tensor/ops.h"
#include "ccodec/tensor/param.h"
#include "ccodec/tensor/rng.h"
#include "ccodec/tensor/tape.h"

namespace ccodec {

inline constexpr double kZeroNorm = 1e-12;
inline constexpr int32_t kUnassigned = -1;

struct ClusterAssignment {
  size_t height = 0;
  size_t width = 0;
  size_t clusters = 0;
  std::vector<int32_t> label;     // per position; kUnassigned when masked out
  std::vector<double> similarity;  // cosine similarity to own center
  std::vector<size_t> member_count;

  size_t ActivePositions() const {
    size_t n = 0;
    for (int32_t l : label) n += l != kUnassigned;
    return n;
  }
};

template <typename T>
struct AssignResult {
  ClusterAssignment assignment;
  Var<T> similarity;  // 1 x H x W, zero at masked positions
};

// Step 1 context injection. gamma holds one value per channel, or a single
// shared value.
template <typename T>
Var<T> AddGlobalContext(Tape<T>& t, const Var<T>& x, Param<T>& gamma) {
  const Grid<T>& xv = x.value();
  const size_t C = xv.channels(), P = xv.plane();
  const bool shared = gamma.size() == 1;
  if (!shared && gamma.size() != C) {
    throw ShapeError("add_global_context: gamma " + ShapeToString(gamma.shape) +
                     " incompatible with " + xv.ShapeString());
  }
  std::vector<T> mean(C, T(0));
  Grid<T> y = xv;
  for (size_t c = 0; c < C; ++c) {
    const T* row = xv.channel(c);
    T s = T(0);
    for (size_t p = 0; p < P; ++p) s += row[p];
    mean[c] = s / static_cast<T>(P);
    const T add = gamma.value[shared ? 0 : c] * mean[c];
    T* yr = y.channel(c);
    for (size_t p = 0; p < P; ++p) yr[p] += add;
  }
  Var<T> out = t.Result(std::move(y), true);
  if (out.requires_grad()) {
    t.Record([x, out, &gamma, mean = std::move(mean), shared, C, P] {
      const Grid<T>* gy = internal::OutGrad(out);
      if (!gy) return;
      T* gg = gamma.GradData();
      Grid<T>* gx = internal::InGrad(x);
      for (size_t c = 0; c < C; ++c) {
        const T* gr = gy->channel(c);
        T s = T(0);
        for (size_t p = 0; p < P; ++p) s += gr[p];
        gg[shared ? 0 : c] += s * mean[c];
        if (gx) {
          const T spread = gamma.value[shared ? 0 : c] * s / static_cast<T>(P);
          T* xr = gx->channel(c);
          for (size_t p = 0; p < P; ++p) xr[p] += gr[p] + spread;
        }
      }
    });
  }
  return out;
}

// Step 3. centers is C x rows x cols (cluster k at flat index k). mask, when
// given, is 1 x H x W with nonzero entries marking active positions.
// Ties in similarity resolve to the lowest center index; a zero-norm point
// or center has similarity 0.
template <typename T>
AssignResult<T> Assign(Tape<T>& t, const Var<T>& points, const Var<T>& centers,
                       const Grid<T>* mask = nullptr) {
  const Grid<T>& pv = points.value();
  const Grid<T>& cv = centers.value();
  if (cv.channels() != pv.channels()) {
    throw ShapeError("assign: centers " + cv.ShapeString() + " vs points " + pv.ShapeString());
  }
  if (mask && (mask->height() != pv.height() || mask->width() != pv.width())) {
    throw ShapeError("assign: mask " + mask->ShapeString() + " vs points " + pv.ShapeString());
  }
  const size_t C = pv.channels(), P = pv.plane(), K = cv.plane();
  std::vector<T> pnorm(P, T(0));
  for (size_t c = 0; c < C; ++c) {
    const T* row = pv.channel(c);
    for (size_t p = 0; p < P; ++p) pnorm[p] += row[p] * row[p];
  }
  for (T& n : pnorm) n = std::sqrt(n);
  std::vector<T> cnorm(K, T(0));
  for (size_t k = 0; k < K; ++k) {
    T s = T(0);
    for (size_t c = 0; c < C; ++c) s += cv[c * K + k] * cv[c * K + k];
    cnorm[k] = std::sqrt(s);
  }
  // dots[k][p], accumulated over channels in order.
  std::vector<T> dots(K * P, T(0));
  for (size_t c = 0; c < C; ++c) {
    const T* row = pv.channel(c);
    for (size_t k = 0; k < K; ++k) {
      const T ck = cv[c * K + k];
      T* d = dots.data() + k * P;
      for (size_t p = 0; p < P; ++p) d[p] += row[p] * ck;
    }
  }
  AssignResult<T> res;
  ClusterAssignment& a = res.assignment;
  a.height = pv.height();
  a.width = pv.width();
  a.clusters = K;
  a.label.assign(P, kUnassigned);
  a.similarity.assign(P, 0.0);
  a.member_count.assign(K, 0);
  Grid<T> sim(1, pv.height(), pv.width());
  for (size_t p = 0; p < P; ++p) {
    if (mask && (*mask)[p] == T(0)) continue;
    int32_t best = 0;
    T best_s = -std::numeric_limits<T>::infinity();
    for (size_t k = 0; k < K; ++k) {
      T s = T(0);
      if (pnorm[p] >= T(kZeroNorm) && cnorm[k] >= T(kZeroNorm)) {
        s = dots[k * P + p] / (pnorm[p] * cnorm[k]);
        s = std::clamp(s, T(-1), T(1));
      }
      if (s > best_s) {
        best_s = s;
        best = static_cast<int32_t>(k);
      }
    }
    a.label[p] = best;
    a.similarity[p] = static_cast<double>(best_s);
    a.member_count[best]++;
    sim[p] = best_s;
  }
  res.similarity = t.Result(std::move(sim), internal::AnyGrad(points, centers));
  if (res.similarity.requires_grad()) {
    Var<T> out = res.similarity;
    t.Record([points, centers, out, label = a.label, pnorm = std::move(pnorm),
              cnorm = std::move(cnorm), C, P, K] {
      const Grid<T>* gy = internal::OutGrad(out);
      if (!gy) return;
      const Grid<T>& pv = points.value();
      const Grid<T>& cv = centers.value();
      Grid<T>* gp = internal::InGrad(points);
      Grid<T>* gc = internal::InGrad(centers);
      for (size_t p = 0; p < P; ++p) {
        const int32_t k = label[p];
        if (k == kUnassigned) continue;
        if (pnorm[p] < T(kZeroNorm) || cnorm[k] < T(kZeroNorm)) continue;
        const T g = (*gy)[p];
        if (g == T(0)) continue;
        const T s = out.value()[p];
        const T inv = T(1) / (pnorm[p] * cnorm[k]);
        const T pn2 = pnorm[p] * pnorm[p];
        const T cn2 = cnorm[k] * cnorm[k];
        for (size_t c = 0; c < C; ++c) {
          const T xc = pv[c * P + p];
          const T cc = cv[c * K + k];
          if (gp) (*gp)[c * P + p] += g * (cc * inv - s * xc / pn2);
          if (gc) (*gc)[c * K + k] += g * (xc * inv - s * cc / cn2);
        }
      }
    });
  }
  return res;
}

// Step 4, returning F as C x rows x cols matching the center layout.
// An empty cluster yields its value center unchanged.
template <typename T>
Var<T> Aggregate(Tape<T>& t, const Var<T>& values, const Var<T>& value_centers,
                 const ClusterAssignment& a, const Var<T>& similarity, Param<T>& alpha,
                 Param<T>& beta) {
  const Grid<T>& vv = values.value();
  const Grid<T>& cv = value_centers.value();
  const size_t C = vv.channels(), P = vv.plane(), K = cv.plane();
  if (cv.channels() != C || K != a.clusters || a.label.size() != P ||
      similarity.value().size() != P) {
    throw ShapeError("aggregate: values " + vv.ShapeString() + ", centers " + cv.ShapeString() +
                     " and assignment disagree");
  }
  const T al = alpha.value[0], be = beta.value[0];
  std::vector<T> weight(P, T(0));
  Grid<T> f = cv;  // starts at c_v
  for (size_t p = 0; p < P; ++p) {
    const int32_t k = a.label[p];
    if (k == kUnassigned) continue;
    weight[p] = SigmoidScalar(al * similarity.value()[p] + be);
    for (size_t c = 0; c < C; ++c) f[c * K + k] += weight[p] * vv[c * P + p];
  }
  for (size_t k = 0; k < K; ++k) {
    const T norm = T(1) / static_cast<T>(1 + a.member_count[k]);
    for (size_t c = 0; c < C; ++c) f[c * K + k] *= norm;
  }
  Var<T> out = t.Result(std::move(f), true);
  if (out.requires_grad()) {
    t.Record([values, value_centers, similarity, out, &alpha, &beta, label = a.label,
              counts = a.member_count, weight = std::move(weight), C, P, K] {
      const Grid<T>* gy = internal::OutGrad(out);
      if (!gy) return;
      const Grid<T>& vv = values.value();
      Grid<T>* gv = internal::InGrad(values);
      Grid<T>* gcv = internal::InGrad(value_centers);
      Grid<T>* gs = internal::InGrad(similarity);
      const T al = alpha.value[0];
      T ga = T(0), gb = T(0);
      if (gcv) {
        for (size_t c = 0; c < C; ++c)
          for (size_t k = 0; k < K; ++k)
            (*gcv)[c * K + k] += (*gy)[c * K + k] / static_cast<T>(1 + counts[k]);
      }
      for (size_t p = 0; p < P; ++p) {
        const int32_t k = label[p];
        if (k == kUnassigned) continue;
        const T norm = T(1) / static_cast<T>(1 + counts[k]);
        T dw = T(0);
        for (size_t c = 0; c < C; ++c) {
          const T g = (*gy)[c * K + k] * norm;
          dw += g * vv[c * P + p];
          if (gv) (*gv)[c * P + p] += g * weight[p];
        }
        const T dz = dw * weight[p] * (T(1) - weight[p]);
        if (gs) (*gs)[p] += dz * al;
        ga += dz * similarity.value()[p];
        gb += dz;
      }
      alpha.GradData()[0] += ga;
      beta.GradData()[0] += gb;
    });
  }
  return out;
}

// Step 5 gather: s_i * F_label(i) at assigned positions, 0 elsewhere.
template <typename T>
Var<T> GatherClusterFeatures(Tape<T>& t, const Var<T>& f, const Var<T>& similarity,
                             const ClusterAssignment& a) {
  const Grid<T>& fv = f.value();
  const size_t C = fv.channels(), K = fv.plane(), P = a.label.size();
  if (K != a.clusters || similarity.value().size() != P) {
    throw ShapeError("dispatch: cluster features " + fv.ShapeString() +
                     " disagree with assignment");
  }
  Grid<T> y(C, a.height, a.width);
  for (size_t p = 0; p < P; ++p) {
    const int32_t k = a.label[p];
    if (k == kUnassigned) continue;
    const T s = similarity.value()[p];
    for (size_t c = 0; c < C; ++c) y[c * P + p] = s * fv[c * K + k];
  }
  Var<T> out = t.Result(std::move(y), internal::AnyGrad(f, similarity));
  if (out.requires_grad()) {
    t.Record([f, similarity, out, label = a.label, C, P, K] {
      const Grid<T>* gy = internal::OutGrad(out);
      if (!gy) return;
      Grid<T>* gf = internal::InGrad(f);
      Grid<T>* gs = internal::InGrad(similarity);
      const Grid<T>& fv = f.value();
      for (size_t p = 0; p < P; ++p) {
        const int32_t k = label[p];
        if (k == kUnassigned) continue;
        const T s = similarity.value()[p];
        T ds = T(0);
        for (size_t c = 0; c < C; ++c) {
          const T g = (*gy)[c * P + p];
          if (gf) (*gf)[c * K + k] += g * s;
          ds += g * fv[c * K + k];
        }
        if (gs) (*gs)[p] += ds;
      }
    });
  }
  return out;
}

template <typename T>
Grid<T> AssignmentMask(const ClusterAssignment& a) {
  Grid<T> m(1, a.height, a.width);
  for (size_t p = 0; p < a.label.size(); ++p) m[p] = a.label[p] == kUnassigned ? T(0) : T(1);
  return m;
}

// Linear layer with bias. weight [out, in].
template <typename T>
struct LinearLayer {
  Param<T>* weight = nullptr;
  Param<T>* bias = nullptr;

  LinearLayer() = default;
  LinearLayer(ParamStore<T>& store, const std::string& name, size_t in, size_t out, Rng& rng,
              double scale = 1.0) {
    weight = &store.AddUniform(name + ".w", {out, in}, in, rng, scale);
    bias = &store.AddConstant(name + ".b", {out}, T(0));
  }
  Var<T> operator()(Tape<T>& t, const Var<T>& x) const { return Linear(t, x, *weight, bias); }
  size_t in() const { return weight->dim(1); }
  size_t out() const { return weight->dim(0); }
};

// Two linear layers with a GELU in between.
template <typename T>
struct MlpLayer {
  LinearLayer<T> fc1;
  LinearLayer<T> fc2;

  MlpLayer() = default;
  MlpLayer(ParamStore<T>& store, const std::string& name, size_t in, size_t hidden, size_t out,
           Rng& rng)
      : fc1(store, name + ".fc1", in, hidden, rng), fc2(store, name + ".fc2", hidden, out, rng) {}
  Var<T> operator()(Tape<T>& t, const Var<T>& x) const { return fc2(t, Gelu(t, fc1(t, x))); }
};

// Step 5 in full: points + mask * Linear(s_i * F_label(i)).
template <typename T>
Var<T> Dispatch(Tape<T>& t, const Var<T>& points, const Var<T>& f, const Var<T>& similarity,
                const ClusterAssignment& a, const LinearLayer<T>& dispatch_linear) {
  Var<T> update = dispatch_linear(t, GatherClusterFeatures(t, f, similarity, a));
  if (a.ActivePositions() != a.label.size()) {
    update = MulBroadcast(t, update, t.Constant(AssignmentMask<T>(a)));
  }
  return Add(t, points, update);
}

struct ClusterConfig {
  size_t rows = 2;
  size_t cols = 2;
  bool scalar_gamma = false;

  size_t clusters() const { return rows * cols; }
};

template <typename T>
class ClusterMixer {
 public:
  ClusterMixer() = default;
  ClusterMixer(ParamStore<T>& store, const std::string& name, size_t channels,
               const ClusterConfig& cfg, Rng& rng)
      : cfg_(cfg), channels_(channels) {
    if (cfg.rows == 0 || cfg.cols == 0) throw std::invalid_argument("cluster grid must be >= 1x1");
    gamma_ = &store.AddConstant(name + ".gamma", {cfg.scalar_gamma ? size_t{1} : channels}, T(0));
    alpha_ = &store.AddConstant(name + ".alpha", {1}, T(1));
    beta_ = &store.AddConstant(name + ".beta", {1}, T(0));
    point_ = LinearLayer<T>(store, name + ".point", channels, channels, rng);
    value_ = LinearLayer<T>(store, name + ".value", channels, channels, rng);
    center_offset_ = MlpLayer<T>(store, name + ".center_mlp", channels, channels, channels, rng);
    value_offset_ = MlpLayer<T>(store, name + ".value_mlp", channels, channels, channels, rng);
    dispatch_ = LinearLayer<T>(store, name + ".dispatch", channels, channels, rng);
  }

  // Pooled means plus MLP offsets, C x rows x cols. Feature maps smaller
  // than the grid pool to one center per row / column instead.
  Var<T> Centers(Tape<T>& t, const Var<T>& x, const MlpLayer<T>& offset) const {
    Var<T> pooled = AvgPoolTo(t, x, std::min(cfg_.rows, x.height()), std::min(cfg_.cols, x.width()));
    return Add(t, pooled, offset(t, pooled));
  }

  struct PassResult {
    Var<T> output;
    ClusterAssignment assignment;
  };

  // One pass of steps 1-5. Positions where mask is zero do not join any
  // cluster and are passed through from step 1 unchanged.
  PassResult Pass(Tape<T>& t, const Var<T>& x, const Grid<T>* mask) const {
    Var<T> ctx = AddGlobalContext(t, x, *gamma_);
    Var<T> points = point_(t, ctx);
    Var<T> values = value_(t, ctx);
    Var<T> centers = Centers(t, points, center_offset_);
    Var<T> value_centers = Centers(t, values, value_offset_);
    AssignResult<T> ar = Assign(t, points, centers, mask);
    Var<T> f = Aggregate(t, values, value_centers, ar.assignment, ar.similarity, *alpha_, *beta_);
    Var<T> out = Dispatch(t, ctx, f, ar.similarity, ar.assignment, dispatch_);
    // Similarity needs C*K MACs per position.
    t.AddMacs(static_cast<uint64_t>(channels_) * cfg_.clusters() * x.value().plane());
    return {out, std::move(ar.assignment)};
  }

  Var<T> Forward(Tape<T>& t, const Var<T>& x, bool checkerboard) const {
    if (!checkerboard) return Pass(t, x, nullptr).output;
    Var<T> merged;
    for (int parity = 0; parity < 2; ++parity) {
      Var<T> mask = t.Constant(ParityMask<T>(x.height(), x.width(), parity));
      Var<T> half = Pass(t, MulBroadcast(t, x, mask), &mask.value()).output;
      half = MulBroadcast(t, half, mask);
      merged = parity == 0 ? half : Add(t, merged, half);
    }
    return merged;
  }

  Param<T>& gamma() const { return *gamma_; }
  Param<T>& alpha() const { return *alpha_; }
  Param<T>& beta() const { return *beta_; }
  const LinearLayer<T>& point_transform() const { return point_; }
  const LinearLayer<T>& value_transform() const { return value_; }
  const MlpLayer<T>& center_offset() const { return center_offset_; }
  const MlpLayer<T>& value_offset() const { return value_offset_; }
  const LinearLayer<T>& dispatch_linear() const { return dispatch_; }
  const ClusterConfig& config() const { return cfg_; }

 private:
  ClusterConfig cfg_;
  size_t channels_ = 0;
  Param<T>* gamma_ = nullptr;
  Param<T>* alpha_ = nullptr;
  Param<T>* beta_ = nullptr;
  LinearLayer<T> point_;
  LinearLayer<T> value_;
  MlpLayer<T> center_offset_;
  MlpLayer<T> value_offset_;
  LinearLayer<T> dispatch_;
};

}  // namespace ccodec

#endif  // CCODEC_CLUSTERING_H_
