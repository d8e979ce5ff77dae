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

// Scalar reference for the clustering mixer, written position by position
// without any of the library's layer code.

#ifndef CCODEC_TESTS_CLUSTER_ORACLE_H_
#define CCODEC_TESTS_CLUSTER_ORACLE_H_

#include <cmath>
#include <functional>
#include <vector>

#include "ccodec/clustering.h"
#include "ccodec/tensor/grid.h"

namespace ccodec {
namespace testing {

struct OracleAssignment {
  std::vector<int32_t> label;
  std::vector<double> similarity;
};

inline std::vector<double> Column(const Grid<double>& g, size_t p) {
  std::vector<double> v(g.channels());
  for (size_t c = 0; c < g.channels(); ++c) v[c] = g[c * g.plane() + p];
  return v;
}

inline double Cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  const double na = std::sqrt(aa), nb = std::sqrt(bb);
  if (na < 1e-12 || nb < 1e-12) return 0;
  return std::max(-1.0, std::min(1.0, ab / (na * nb)));
}

inline OracleAssignment OracleAssign(const Grid<double>& points, const Grid<double>& centers,
                                     const Grid<double>* mask) {
  OracleAssignment o;
  for (size_t p = 0; p < points.plane(); ++p) {
    if (mask && (*mask)[p] == 0) {
      o.label.push_back(-1);
      o.similarity.push_back(0);
      continue;
    }
    const std::vector<double> x = Column(points, p);
    int32_t best = -1;
    double best_s = 0;
    for (size_t k = 0; k < centers.plane(); ++k) {
      const double s = Cosine(x, Column(centers, k));
      if (best < 0 || s > best_s) {
        best = int32_t(k);
        best_s = s;
      }
    }
    o.label.push_back(best);
    o.similarity.push_back(best_s);
  }
  return o;
}

inline Grid<double> OracleAggregate(const Grid<double>& values, const Grid<double>& vcenters,
                                    const OracleAssignment& a, double alpha, double beta) {
  const size_t C = values.channels(), K = vcenters.plane();
  Grid<double> f(C, vcenters.height(), vcenters.width());
  for (size_t k = 0; k < K; ++k) {
    for (size_t c = 0; c < C; ++c) {
      double num = vcenters[c * K + k];
      size_t m = 0;
      for (size_t p = 0; p < values.plane(); ++p) {
        if (a.label[p] != int32_t(k)) continue;
        ++m;
        num += values[c * values.plane() + p] / (1 + std::exp(-(alpha * a.similarity[p] + beta)));
      }
      f[c * K + k] = num / double(1 + m);
    }
  }
  return f;
}

inline std::vector<double> Affine(const LinearLayer<double>& l, const std::vector<double>& x) {
  std::vector<double> y(l.out());
  for (size_t o = 0; o < y.size(); ++o) {
    y[o] = l.bias->value[o];
    for (size_t i = 0; i < x.size(); ++i) y[o] += l.weight->value[o * x.size() + i] * x[i];
  }
  return y;
}

inline double OracleGelu(double x) {
  return 0.5 * x * (1 + std::tanh(std::sqrt(2 / M_PI) * (x + 0.044715 * x * x * x)));
}

inline Grid<double> MapPositions(const Grid<double>& x, size_t out_c,
                                 const std::function<std::vector<double>(std::vector<double>)>& f) {
  Grid<double> y(out_c, x.height(), x.width());
  for (size_t p = 0; p < x.plane(); ++p) {
    std::vector<double> v = f(Column(x, p));
    for (size_t c = 0; c < out_c; ++c) y[c * x.plane() + p] = v[c];
  }
  return y;
}

inline Grid<double> OracleCenters(const Grid<double>& x, size_t rows, size_t cols,
                                  const MlpLayer<double>& mlp) {
  const size_t C = x.channels(), H = x.height(), W = x.width();
  Grid<double> pooled(C, rows, cols);
  for (size_t c = 0; c < C; ++c)
    for (size_t i = 0; i < rows; ++i)
      for (size_t j = 0; j < cols; ++j) {
        double s = 0;
        size_t n = 0;
        for (size_t y = i * H / rows; y < (i + 1) * H / rows; ++y)
          for (size_t xx = j * W / cols; xx < (j + 1) * W / cols; ++xx, ++n) s += x(c, y, xx);
        pooled(c, i, j) = s / double(n);
      }
  return MapPositions(pooled, C, [&](std::vector<double> v) {
    std::vector<double> h = Affine(mlp.fc1, v);
    for (double& e : h) e = OracleGelu(e);
    std::vector<double> off = Affine(mlp.fc2, h);
    for (size_t c = 0; c < C; ++c) v[c] += off[c];
    return v;
  });
}

// One full mixing pass.
inline Grid<double> OraclePass(const ClusterMixer<double>& mix, const Grid<double>& x,
                               const Grid<double>* mask) {
  const size_t C = x.channels(), P = x.plane();
  const auto& gamma = mix.gamma().value;
  Grid<double> ctx = x;
  for (size_t c = 0; c < C; ++c) {
    double mean = 0;
    for (size_t p = 0; p < P; ++p) mean += x.channel(c)[p];
    mean /= double(P);
    for (size_t p = 0; p < P; ++p) ctx.channel(c)[p] += gamma[gamma.size() == 1 ? 0 : c] * mean;
  }
  Grid<double> pts = MapPositions(ctx, C, [&](auto v) { return Affine(mix.point_transform(), v); });
  Grid<double> vals = MapPositions(ctx, C, [&](auto v) { return Affine(mix.value_transform(), v); });
  const auto& cfg = mix.config();
  Grid<double> ctr = OracleCenters(pts, cfg.rows, cfg.cols, mix.center_offset());
  Grid<double> vctr = OracleCenters(vals, cfg.rows, cfg.cols, mix.value_offset());
  OracleAssignment a = OracleAssign(pts, ctr, mask);
  Grid<double> f = OracleAggregate(vals, vctr, a, mix.alpha().value[0], mix.beta().value[0]);
  Grid<double> out = ctx;
  for (size_t p = 0; p < P; ++p) {
    if (a.label[p] < 0) continue;
    std::vector<double> g(C);
    for (size_t c = 0; c < C; ++c) g[c] = a.similarity[p] * f[c * f.plane() + a.label[p]];
    std::vector<double> d = Affine(mix.dispatch_linear(), g);
    for (size_t c = 0; c < C; ++c) out[c * P + p] += d[c];
  }
  return out;
}

}  // namespace testing
}  // namespace ccodec

#endif  // CCODEC_TESTS_CLUSTER_ORACLE_H_
