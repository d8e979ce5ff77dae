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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. Arguments select criteria by number.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "ccodec/attention.h"
#include "ccodec/clustering.h"
#include "ccodec/codec/bytes.h"
#include "ccodec/codec/codec.h"
#include "ccodec/codec/container.h"
#include "ccodec/codec/image_io.h"
#include "ccodec/codec/trainer.h"
#include "ccodec/codec/weights_io.h"
#include "ccodec/entropy/quantize.h"
#include "ccodec/entropy/range_coder.h"
#include "ccodec/model.h"
#include "ccodec/pqf.h"
#include "cluster_oracle.h"
#include "grad_check.h"

namespace ccodec {
namespace {

using Clock = std::chrono::steady_clock;

double Since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string Fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string Fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

Grid<double> RandomGrid(size_t c, size_t h, size_t w, Rng& rng, double lo = -1, double hi = 1) {
  Grid<double> g(c, h, w);
  for (double& v : g.span()) v = rng.Uniform(lo, hi);
  return g;
}

Image RandomImage(uint64_t seed, size_t w, size_t h) {
  return (seed & 1) ? NoiseImage(seed, w, h) : SyntheticImage(seed, w, h);
}

// ---------------------------------------------------------------------------
// 1. Least-squares optimality.

Outcome LeastSquares() {
  constexpr size_t P = 64, N = 2, kSystems = 1000;
  Rng rng(101);
  const auto start = Clock::now();
  size_t failures = 0;
  double worst_gap = -1e300, worst_orth = 0;
  for (size_t trial = 0; trial < kSystems; ++trial) {
    std::vector<double> c(N * P), eps(P);
    const double scale = std::exp(rng.Uniform(-4, 4));
    for (double& v : c) v = scale * rng.Uniform(-1, 1);
    // Some systems have nearly collinear columns.
    if (trial % 10 == 0) {
      for (size_t p = 0; p < P; ++p) c[P + p] = 0.9 * c[p] + 0.1 * c[P + p];
    }
    for (double& v : eps) v = rng.Uniform(-0.5, 0.5);
    LeastSquaresSolution sol = SolveCoefficients(c.data(), eps.data(), P, N, 0.0);

    // Oracle: normal equations with the explicit 2x2 inverse.
    double g00 = 0, g01 = 0, g11 = 0, b0 = 0, b1 = 0;
    for (size_t p = 0; p < P; ++p) {
      g00 += c[p] * c[p];
      g01 += c[p] * c[P + p];
      g11 += c[P + p] * c[P + p];
      b0 += c[p] * eps[p];
      b1 += c[P + p] * eps[p];
    }
    const double det = g00 * g11 - g01 * g01;
    const double o0 = (g11 * b0 - g01 * b1) / det, o1 = (g00 * b1 - g01 * b0) / det;

    double res_solver = 0, res_oracle = 0, ct0 = 0, ct1 = 0;
    for (size_t p = 0; p < P; ++p) {
      const double r = eps[p] - sol.a[0] * c[p] - sol.a[1] * c[P + p];
      const double ro = eps[p] - o0 * c[p] - o1 * c[P + p];
      res_solver += r * r;
      res_oracle += ro * ro;
      ct0 += c[p] * r;
      ct1 += c[P + p] * r;
    }
    res_solver = std::sqrt(res_solver);
    res_oracle = std::sqrt(res_oracle);
    const double orth = std::max(std::abs(ct0), std::abs(ct1));
    worst_gap = std::max(worst_gap, res_solver - res_oracle);
    worst_orth = std::max(worst_orth, orth);
    if (!(res_solver <= res_oracle + 1e-9) || !(orth < 1e-6) || sol.fallback) ++failures;
  }
  const double seconds = Since(start);
  return {failures == 0 && seconds < 10,
          Fmt("%zu systems, %zu failures, max residual gap %.3g, max |C^T r| %.3g, %.3f s",
              kSystems, failures, worst_gap, worst_orth, seconds)};
}

// ---------------------------------------------------------------------------
// 2. Filtering never hurts.

Outcome FilteringNeverHurts() {
  constexpr size_t kImages = 50;
  size_t channels = 0, channel_failures = 0, quantized_ok = 0, clamped = 0, coefficients = 0;
  double gain_sum = 0;
  for (size_t i = 0; i < kImages; ++i) {
    CompressionModel<float> model(ArchConfig::Default(), DeriveSeed(2000, i));
    Codec codec(model, 1);
    const Image img = RandomImage(3000 + i, 64, 64);
    const size_t N = model.config().pqf_candidates;

    EncodeOptions raw_opts;
    raw_opts.raw_coefficients = true;
    raw_opts.reconstruct = false;
    EncodeResult raw = codec.Encode(img, raw_opts);
    const size_t M = raw.y.channels(), P = raw.y.plane();
    for (size_t c = 0; c < M; ++c) {
      double before = 0, after = 0;
      for (size_t p = 0; p < P; ++p) {
        const double y = raw.y.channel(c)[p], yh = raw.y_hat.channel(c)[p];
        double yt = yh;
        for (size_t j = 0; j < N; ++j) {
          yt += raw.raw_coefficients[c * N + j] * double(raw.candidates.channel(c * N + j)[p]);
        }
        before += (y - yh) * (y - yh);
        after += (y - yt) * (y - yt);
      }
      ++channels;
      if (!(after <= before)) ++channel_failures;
    }

    EncodeOptions q_opts;
    q_opts.reconstruct = false;
    EncodeResult q = codec.Encode(img, q_opts);
    double before = 0, after = 0;
    for (size_t k = 0; k < q.y.size(); ++k) {
      const double y = q.y[k];
      before += (y - q.y_hat[k]) * (y - q.y_hat[k]);
      after += (y - q.y_tilde[k]) * (y - q.y_tilde[k]);
    }
    if (after <= before) ++quantized_ok;
    gain_sum += 1 - after / before;
    clamped += q.report.clamped_coefficients;
    coefficients += q.coefficients.size();
  }
  const double fraction = double(quantized_ok) / kImages;
  return {channel_failures == 0 && fraction >= 0.9,
          Fmt("raw: %zu/%zu channels not worse; 4-bit: %zu/%zu images not worse (%.0f%%), mean "
              "MSE reduction %.1f%%, clamp rate %.2f%%",
              channels - channel_failures, channels, quantized_ok, kImages, 100 * fraction,
              100 * gain_sum / kImages, 100.0 * double(clamped) / double(coefficients))};
}

// ---------------------------------------------------------------------------
// 3. Codec bit-exactness.

Outcome BitExactness() {
  constexpr size_t kImages = 100;
  const std::vector<int> presets{1, 2, 3};
  WeightsFile weights = SeededWeights(ArchConfig::Default(), presets, 77);
  Rng rng(303);
  size_t runs = 0, failures = 0;
  std::string first_failure;
  for (size_t i = 0; i < kImages; ++i) {
    const size_t w = 16 + rng.Below(81), h = 16 + rng.Below(81);
    const Image img = RandomImage(4000 + i, w, h);
    for (int preset : presets) {
      Codec codec(*weights.Select(preset).model, preset);
      EncodeOptions opts;
      opts.reconstruct = false;
      ++runs;
      try {
        EncodeResult e = codec.Encode(img, opts);
        DecodeResult d = codec.Decode(e.bytes);
        const bool ok = d.y_hat == e.y_hat && d.z_hat == e.z_hat && d.y_tilde == e.y_tilde &&
                        d.image.width == w && d.image.height == h &&
                        codec.Reencode(d) == e.bytes;
        if (!ok) {
          ++failures;
          if (first_failure.empty()) first_failure = Fmt("image %zu preset %d", i, preset);
        }
      } catch (const std::exception& ex) {
        ++failures;
        if (first_failure.empty()) first_failure = ex.what();
      }
    }
  }
  std::string detail = Fmt("%zu encode/decode/re-encode runs, %zu failures", runs, failures);
  if (!first_failure.empty()) detail += " (first: " + first_failure + ")";
  return {failures == 0, detail};
}

// ---------------------------------------------------------------------------
// 4. Rate bookkeeping.

struct RateCheck {
  size_t streams = 0;
  size_t failures = 0;
  double worst_excess = 0;  // bytes beyond info/8, relative to the allowed slack
};

void CheckStream(size_t bytes, double info_bits, RateCheck& rc) {
  const double info_bytes = info_bits / 8;
  if (info_bytes <= 10000) return;
  ++rc.streams;
  const double allowed = 0.005 * info_bytes + 16;
  const double diff = std::abs(double(bytes) - info_bytes);
  rc.worst_excess = std::max(rc.worst_excess, diff / allowed);
  if (diff > allowed) ++rc.failures;
}

Outcome RateBookkeeping() {
  RateCheck rc;
  // Synthetic Gaussian sources through the shared tables.
  const ScaleTables& tables = ScaleTables::Get();
  Rng rng(404);
  for (size_t s = 0; s < 20; ++s) {
    const size_t count = 20000 + rng.Below(80000);
    const double sigma_lo = std::exp(rng.Uniform(std::log(0.2), std::log(40.0)));
    RangeEncoder enc;
    double bits = 0;
    for (size_t i = 0; i < count; ++i) {
      const double sigma = sigma_lo * rng.Uniform(0.5, 2.0);
      const FreqTable& table = tables.ForSigma(sigma);
      // Box-Muller sample, rounded and clamped to the table.
      const double g = std::sqrt(-2 * std::log(rng.Open01())) * std::cos(2 * M_PI * rng.Open01());
      const int32_t sym = std::clamp(static_cast<int32_t>(std::lround(g * sigma)),
                                     table.min_symbol, table.max_symbol());
      enc.Encode(table, sym);
      bits += table.Bits(sym);
    }
    CheckStream(enc.Finish().size(), bits, rc);
  }
  const size_t synthetic = rc.streams;
  // Real substreams of a large default-architecture encode.
  CompressionModel<float> model(ArchConfig::Default(), 4040);
  Codec codec(model, 1);
  EncodeOptions opts;
  opts.reconstruct = false;
  EncodeResult e = codec.Encode(NoiseImage(4041, 512, 512), opts);
  // Coding the decoded latents again reproduces the stream and reports the
  // information content of every substream.
  LatentCoding lc = codec.CodeLatents(e.y_hat, e.z_hat);
  if (lc.z_stream != e.stream.z_stream || lc.group_streams != e.stream.group_streams) {
    return {false, "re-coded substreams differ from the encoded ones"};
  }
  CheckStream(lc.z_stream.size(), lc.z_bits, rc);
  for (size_t g = 0; g < lc.group_streams.size(); ++g) {
    CheckStream(lc.group_streams[g].size(), lc.group_bits[g], rc);
  }
  return {rc.failures == 0 && rc.streams > synthetic,
          Fmt("%zu streams over 10 kB (%zu synthetic), %zu failures, worst deviation %.2f of "
              "the allowed slack",
              rc.streams, synthetic, rc.failures, rc.worst_excess)};
}

// ---------------------------------------------------------------------------
// 5. Gradient suite.

using testing::CheckGradients;
using testing::WeightedSum;

Param<double>& AddGrid(ParamStore<double>& s, const std::string& name, const Grid<double>& g) {
  Param<double>& p = s.Add(name, {g.channels(), g.height(), g.width()});
  p.value = g.vec();
  return p;
}

Var<double> Leaf(Tape<double>& t, Param<double>& p) {
  return FromParam(t, p, p.shape[0], p.shape[1], p.shape[2]);
}

Outcome GradientSuite() {
  const auto start = Clock::now();
  struct Case {
    std::string name;
    std::function<testing::GradCheckResult()> run;
  };
  std::vector<Case> cases;
  cases.push_back({"linear", [] {
    ParamStore<double> s;
    Rng rng(1);
    auto& x = AddGrid(s, "x", RandomGrid(4, 3, 3, rng));
    auto& w = s.AddUniform("w", {5, 4}, 4, rng);
    auto& b = s.AddUniform("b", {5}, 1, rng);
    return CheckGradients(s, [&](Tape<double>& t) { return WeightedSum(t, Linear(t, Leaf(t, x), w, &b)); });
  }});
  cases.push_back({"layer_norm", [] {
    ParamStore<double> s;
    Rng rng(2);
    auto& x = AddGrid(s, "x", RandomGrid(6, 3, 2, rng, -2, 2));
    auto& g = s.AddUniform("g", {6}, 1, rng);
    auto& b = s.AddUniform("b", {6}, 1, rng);
    return CheckGradients(s, [&](Tape<double>& t) {
      return WeightedSum(t, LayerNorm(t, Leaf(t, x), g, b, 1e-6));
    });
  }});
  cases.push_back({"conv", [] {
    ParamStore<double> s;
    Rng rng(3);
    auto& x = AddGrid(s, "x", RandomGrid(2, 7, 6, rng));
    auto& k = s.AddUniform("k", {3, 2, 3, 3}, 18, rng);
    auto& b = s.AddUniform("b", {3}, 1, rng);
    auto& k5 = s.AddUniform("k5", {2, 3, 5, 5}, 75, rng);
    return CheckGradients(s, [&](Tape<double>& t) {
      Var<double> h = Conv2d(t, Leaf(t, x), k, &b, 2, 1);
      return WeightedSum(t, Conv2d(t, h, k5, nullptr, 1, 2));
    });
  }});
  cases.push_back({"gelu", [] {
    ParamStore<double> s;
    Rng rng(4);
    auto& x = AddGrid(s, "x", RandomGrid(3, 4, 4, rng, -4, 4));
    return CheckGradients(s, [&](Tape<double>& t) { return WeightedSum(t, Gelu(t, Leaf(t, x))); });
  }});
  cases.push_back({"sigmoid", [] {
    ParamStore<double> s;
    Rng rng(5);
    auto& x = AddGrid(s, "x", RandomGrid(3, 4, 4, rng, -6, 6));
    return CheckGradients(s, [&](Tape<double>& t) { return WeightedSum(t, Sigmoid(t, Leaf(t, x))); });
  }});
  cases.push_back({"cluster_aggregate", [] {
    ParamStore<double> s;
    Rng rng(6);
    auto& pts = AddGrid(s, "points", RandomGrid(4, 6, 6, rng));
    auto& ctr = AddGrid(s, "centers", RandomGrid(4, 2, 2, rng));
    auto& vals = AddGrid(s, "values", RandomGrid(4, 6, 6, rng));
    auto& vctr = AddGrid(s, "value_centers", RandomGrid(4, 2, 2, rng));
    auto& alpha = s.AddConstant("alpha", {1}, 1.2);
    auto& beta = s.AddConstant("beta", {1}, -0.3);
    return CheckGradients(s, [&](Tape<double>& t) {
      AssignResult<double> r = Assign(t, Leaf(t, pts), Leaf(t, ctr));
      return WeightedSum(
          t, Aggregate(t, Leaf(t, vals), Leaf(t, vctr), r.assignment, r.similarity, alpha, beta));
    });
  }});
  cases.push_back({"cluster_dispatch", [] {
    ParamStore<double> s;
    Rng rng(7);
    auto& pts = AddGrid(s, "points", RandomGrid(4, 6, 6, rng));
    auto& ctr = AddGrid(s, "centers", RandomGrid(4, 2, 2, rng));
    auto& f = AddGrid(s, "f", RandomGrid(4, 2, 2, rng));
    LinearLayer<double> lin(s, "dispatch", 4, 4, rng);
    const Grid<double> mask = ParityMask<double>(6, 6, 1);
    return CheckGradients(s, [&](Tape<double>& t) {
      AssignResult<double> r = Assign(t, Leaf(t, pts), Leaf(t, ctr), &mask);
      return WeightedSum(t, Dispatch(t, Leaf(t, pts), Leaf(t, f), r.similarity, r.assignment, lin));
    });
  }});
  cases.push_back({"cluster_mixer", [] {
    testing::GradCheckResult worst;
    for (bool checkerboard : {false, true}) {
      ParamStore<double> s;
      Rng rng(8);
      ClusterMixer<double> mix(s, "mix", 3, {2, 2, false}, rng);
      for (double& g : s.Find("mix.gamma")->value) g = 0.4;
      s.Find("mix.alpha")->value[0] = 1.3;
      s.Find("mix.beta")->value[0] = -0.2;
      auto& x = AddGrid(s, "x", RandomGrid(3, 6, 6, rng));
      auto r = CheckGradients(s, [&](Tape<double>& t) {
        return WeightedSum(t, mix.Forward(t, Leaf(t, x), checkerboard));
      });
      if (r.max_rel_error >= worst.max_rel_error) worst = r;
    }
    return worst;
  }});
  cases.push_back({"spatial_attention", [] {
    ParamStore<double> s;
    Rng rng(9);
    SpatialAttention<double> sa(s, "sa", 7, rng);
    auto& x = AddGrid(s, "x", RandomGrid(4, 5, 5, rng));
    return CheckGradients(s, [&](Tape<double>& t) { return WeightedSum(t, sa(t, Leaf(t, x))); });
  }});
  cases.push_back({"channel_attention", [] {
    ParamStore<double> s;
    Rng rng(10);
    ChannelAttention<double> ca(s, "ca", 8, 4, rng);
    auto& x = AddGrid(s, "x", RandomGrid(8, 4, 4, rng));
    return CheckGradients(s, [&](Tape<double>& t) { return WeightedSum(t, ca(t, Leaf(t, x))); });
  }});
  cases.push_back({"dsq", [] {
    ParamStore<double> s;
    Rng rng(11);
    auto& x = AddGrid(s, "x", RandomGrid(2, 4, 4, rng, -3, 3));
    return CheckGradients(s, [&](Tape<double>& t) { return WeightedSum(t, Dsq(t, Leaf(t, x), 10.0)); });
  }});
  cases.push_back({"pqf_loss", [] {
    ParamStore<double> s;
    Rng rng(12);
    auto& cand = AddGrid(s, "cand", RandomGrid(6, 4, 4, rng));
    auto& eps = AddGrid(s, "eps", RandomGrid(3, 4, 4, rng, -0.5, 0.5));
    return CheckGradients(s, [&](Tape<double>& t) { return PqfLoss(t, Leaf(t, cand), Leaf(t, eps), 2); });
  }});
  cases.push_back({"pqf_coefficients_apply", [] {
    ParamStore<double> s;
    Rng rng(13);
    auto& y = AddGrid(s, "y_hat", RandomGrid(3, 4, 4, rng));
    auto& cand = AddGrid(s, "cand", RandomGrid(6, 4, 4, rng));
    auto& eps = AddGrid(s, "eps", RandomGrid(3, 4, 4, rng, -0.5, 0.5));
    return CheckGradients(s, [&](Tape<double>& t) {
      Var<double> c = Leaf(t, cand);
      return WeightedSum(t, ApplyPqf(t, Leaf(t, y), c, LsCoefficients(t, c, Leaf(t, eps), 2), 2));
    });
  }});
  cases.push_back({"gaussian_bits", [] {
    ParamStore<double> s;
    Rng rng(14);
    auto& y = AddGrid(s, "y", RandomGrid(2, 3, 3, rng, -3, 3));
    auto& mu = AddGrid(s, "mu", RandomGrid(2, 3, 3, rng));
    auto& sigma = AddGrid(s, "sigma", RandomGrid(2, 3, 3, rng, 0.2, 2));
    return CheckGradients(
        s, [&](Tape<double>& t) { return GaussianBits(t, Leaf(t, y), Leaf(t, mu), Leaf(t, sigma)); });
  }});

  bool ok = true;
  std::ostringstream detail;
  double worst = 0;
  for (const Case& c : cases) {
    const testing::GradCheckResult r = c.run();
    const bool pass = r.max_rel_error < 1e-4 && r.checked > 0;
    ok = ok && pass;
    worst = std::max(worst, r.max_rel_error);
    if (!pass) detail << c.name << " failed (" << r.worst << "); ";
    std::printf("    gradient %-24s max rel err %.2e over %zu entries\n", c.name.c_str(),
                r.max_rel_error, r.checked);
  }
  const double seconds = Since(start);
  detail << cases.size() << " ops, worst rel err " << Fmt("%.2e", worst) << ", "
         << Fmt("%.1f s", seconds);
  return {ok && seconds < 60, detail.str()};
}

// ---------------------------------------------------------------------------
// 6. Clustering oracle.

Outcome ClusteringOracle() {
  constexpr size_t kGrids = 200;
  Rng rng(606);
  size_t label_failures = 0;
  double worst = 0;
  for (size_t trial = 0; trial < kGrids; ++trial) {
    const size_t C = 1 + rng.Below(16);
    const Grid<double> pts = RandomGrid(C, 8, 8, rng);
    const Grid<double> ctr = RandomGrid(C, 2, 2, rng);
    const Grid<double> vals = RandomGrid(C, 8, 8, rng);
    const Grid<double> vctr = RandomGrid(C, 2, 2, rng);
    // Half the grids use the checkerboard half mask.
    const Grid<double> mask = ParityMask<double>(8, 8, int(trial & 1));
    const Grid<double>* m = (trial & 2) ? &mask : nullptr;
    ParamStore<double> s;
    auto& alpha = s.AddConstant("alpha", {1}, rng.Uniform(0.1, 3));
    auto& beta = s.AddConstant("beta", {1}, rng.Uniform(-1, 1));
    Tape<double> t(false);
    AssignResult<double> r = Assign(t, t.Constant(pts), t.Constant(ctr), m);
    Var<double> f =
        Aggregate(t, t.Constant(vals), t.Constant(vctr), r.assignment, r.similarity, alpha, beta);
    testing::OracleAssignment o = testing::OracleAssign(pts, ctr, m);
    if (r.assignment.label != o.label) ++label_failures;
    const Grid<double> of = testing::OracleAggregate(vals, vctr, o, alpha.value[0], beta.value[0]);
    for (size_t i = 0; i < of.size(); ++i) worst = std::max(worst, std::abs(f.value()[i] - of[i]));
    for (size_t p = 0; p < 64; ++p) {
      worst = std::max(worst, std::abs(r.assignment.similarity[p] - o.similarity[p]));
    }
    // Full mixing pass including dispatch.
    Rng mr(trial);
    ParamStore<double> ms;
    ClusterMixer<double> mix(ms, "mix", C, {2, 2, false}, mr);
    for (double& g : ms.Find("mix.gamma")->value) g = rng.Uniform(-1, 1);
    Tape<double> t2(false);
    Grid<double> x = pts;
    if (m) {
      for (size_t c = 0; c < C; ++c)
        for (size_t p = 0; p < 64; ++p) x.channel(c)[p] *= mask[p];
    }
    const Grid<double> got = mix.Pass(t2, t2.Constant(x), m).output.value();
    const Grid<double> want = testing::OraclePass(mix, x, m);
    for (size_t i = 0; i < want.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
  }
  return {label_failures == 0 && worst <= 1e-10,
          Fmt("%zu grids, %zu label mismatches, max value error %.3g", kGrids, label_failures,
              worst)};
}

// ---------------------------------------------------------------------------
// 7. Toy training.

std::vector<Image> TrainingImages() {
  // Written to disk and read back so the directory loader is exercised.
  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() / ("ccodec_acceptance_" + std::to_string(getpid()));
  std::filesystem::create_directories(dir);
  for (size_t i = 0; i < 16; ++i) {
    WriteImage((dir / Fmt("img%02zu.png", i)).string(), SyntheticImage(7000 + i, 96, 96));
  }
  std::vector<Image> images = LoadImageDir(dir.string());
  std::filesystem::remove_all(dir);
  return images;
}

Outcome ToyTraining() {
  const std::vector<Image> images = TrainingImages();
  TrainConfig cfg;
  cfg.loss.lambda = 0.0018;
  cfg.loss.lambda_pqf = 1.0;
  cfg.steps = 200;
  cfg.seed = 7;
  const auto start = Clock::now();
  Trainer trainer(cfg, images);
  TrainResult res = trainer.Run([](const StepRecord& r) {
    if (r.step % 25 == 0) {
      std::printf("    step %3zu loss %.4f smoothed %.4f (rate %.3f bpp, mse %.5f)\n", r.step,
                  r.loss, r.smoothed, r.rate_bpp, r.distortion);
      std::fflush(stdout);
    }
  });
  const double seconds = Since(start);
  const double reduction = 1 - res.final_smoothed() / res.initial_loss();

  // Two short runs with the same seed agree with each other and with the
  // start of the long run.
  TrainConfig short_cfg = cfg;
  short_cfg.steps = 3;
  TrainResult a = Trainer(short_cfg, images).Run();
  Trainer tb(short_cfg, images);
  TrainResult b = tb.Run();
  bool deterministic = a.curve.size() == 3 && b.curve.size() == 3;
  for (size_t i = 0; deterministic && i < 3; ++i) {
    deterministic = a.curve[i].loss == b.curve[i].loss && a.curve[i].loss == res.curve[i].loss;
  }
  {
    Trainer ta(short_cfg, images);
    ta.Run();
    const auto& pa = ta.model().params();
    const auto& pb = tb.model().params();
    auto ia = pa.begin();
    for (auto ib = pb.begin(); deterministic && ib != pb.end(); ++ia, ++ib) {
      deterministic = ia->value == ib->value;
    }
  }
  return {!res.diverged && res.curve.size() == 200 && reduction >= 0.2 && deterministic &&
              seconds < 15 * 60,
          Fmt("initial loss %.4f, final smoothed %.4f, reduction %.1f%%, deterministic %s, "
              "%.0f s",
              res.initial_loss(), res.final_smoothed(), 100 * reduction,
              deterministic ? "yes" : "no", seconds)};
}

// ---------------------------------------------------------------------------
// 8. Structural anchors.

Outcome Structure() {
  const ArchConfig cfg = ArchConfig::Default();
  CompressionModel<float> model(cfg, 808);
  Codec codec(model, 1);
  EncodeOptions opts;
  opts.reconstruct = false;
  std::vector<std::string> problems;
  if (cfg.hyper_channels != 192) problems.push_back("hyper channels in config");
  if (cfg.clusters() != 4 || cfg.cluster_rows != 2 || cfg.cluster_cols != 2) {
    problems.push_back("cluster count");
  }
  if (cfg.pqf_candidates != 2) problems.push_back("candidate count");
  const size_t M = cfg.latent_channels, N = cfg.pqf_candidates;
  size_t bits = 0;
  for (auto [w, h] : {std::pair<size_t, size_t>{64, 64}, {48, 80}}) {
    EncodeResult e = codec.Encode(SyntheticImage(w + h, w, h), opts);
    if (e.z_hat.channels() != 192) problems.push_back("z channels");
    if (e.candidates.channels() != M * N) problems.push_back("candidate maps");
    bits = e.stream.coefficients.size() * 8;
    if (bits != M * N * 4 || e.report.coefficient_bits != M * N * 4) {
      problems.push_back("coefficient bits");
    }
    if (e.stream.candidates != N || e.stream.latent_channels != M) problems.push_back("header");
  }
  std::string detail = Fmt("z channels 192, clusters %zu = %zux%zu, N = %zu, coefficient bits %zu "
                           "= %zu*%zu*4",
                           cfg.clusters(), cfg.cluster_rows, cfg.cluster_cols, N, bits, M, N);
  for (const auto& p : problems) detail += "; mismatch: " + p;
  return {problems.empty(), detail};
}

// ---------------------------------------------------------------------------
// 9. Robustness.

enum class Verdict { kTypedError, kAccepted, kOtherException, kSlow };

Verdict TryDecode(const Codec& codec, const std::vector<uint8_t>& bytes, std::string* what) {
  const auto start = Clock::now();
  Verdict v = Verdict::kAccepted;
  try {
    codec.Decode(bytes);
  } catch (const DecodeError&) {
    v = Verdict::kTypedError;
  } catch (const std::exception& e) {
    *what = e.what();
    return Verdict::kOtherException;
  }
  return Since(start) > 10 ? Verdict::kSlow : v;
}

Outcome Robustness() {
  const WeightsFile weights = SeededWeights(ArchConfig::Toy(), {1}, 909);
  Codec codec(*weights.models[0].model, 1);
  std::vector<std::vector<uint8_t>> seeds;
  for (size_t i = 0; i < 4; ++i) {
    EncodeOptions opts;
    opts.reconstruct = false;
    opts.pqf = i != 3;
    opts.raw_coefficients = i == 2;
    seeds.push_back(codec.Encode(RandomImage(9000 + i, 24 + 8 * i, 40 - 4 * i), opts).bytes);
  }
  Rng rng(919);
  constexpr size_t kCases = 1000;
  size_t typed = 0, accepted = 0, other = 0, slow = 0;
  std::string first_other;
  const auto start = Clock::now();
  for (size_t i = 0; i < kCases; ++i) {
    std::vector<uint8_t> v = seeds[rng.Below(seeds.size())];
    const size_t n = v.size();
    switch (i % 7) {
      case 0:  // truncation
        v.resize(rng.Below(n));
        break;
      case 1:  // bit flips
        for (size_t k = 0, flips = 1 + rng.Below(4); k < flips; ++k) {
          v[rng.Below(n)] ^= static_cast<uint8_t>(1u << rng.Below(8));
        }
        break;
      case 2: {  // random overwrite
        const size_t at = rng.Below(n), len = 1 + rng.Below(std::min<size_t>(32, n - at));
        for (size_t k = 0; k < len; ++k) v[at + k] ^= static_cast<uint8_t>(1 + rng.Below(255));
        break;
      }
      case 3: {  // insertion
        const size_t at = rng.Below(n + 1);
        std::vector<uint8_t> extra(1 + rng.Below(16));
        for (uint8_t& b : extra) b = static_cast<uint8_t>(rng.Below(256));
        v.insert(v.begin() + at, extra.begin(), extra.end());
        break;
      }
      case 4: {  // deletion
        const size_t at = rng.Below(n), len = 1 + rng.Below(std::min<size_t>(16, n - at));
        v.erase(v.begin() + at, v.begin() + at + len);
        break;
      }
      case 5:  // trailing garbage
        for (size_t k = 0, extra = 1 + rng.Below(8); k < extra; ++k) {
          v.push_back(static_cast<uint8_t>(rng.Below(256)));
        }
        break;
      case 6:  // header field
        v[rng.Below(std::min<size_t>(n, 40))] ^= static_cast<uint8_t>(1 + rng.Below(255));
        break;
    }
    std::string what;
    switch (TryDecode(codec, v, &what)) {
      case Verdict::kTypedError:
        ++typed;
        break;
      case Verdict::kAccepted:
        ++accepted;
        break;
      case Verdict::kOtherException:
        ++other;
        if (first_other.empty()) first_other = what;
        break;
      case Verdict::kSlow:
        ++slow;
        break;
    }
  }
  // Payload corruption behind a valid checksum reaches the entropy decoder;
  // such streams may decode to some image but must never crash or throw an
  // untyped error.
  size_t deep = 0, deep_bad = 0;
  for (size_t i = 0; i < 300; ++i) {
    std::vector<uint8_t> v = seeds[rng.Below(seeds.size())];
    const size_t body = v.size() - 4;
    const size_t at = body / 3 + rng.Below(body - body / 3);
    if (i % 3 == 0) {
      v[at] ^= static_cast<uint8_t>(1 + rng.Below(255));
    } else {
      for (size_t k = at; k < body; ++k) v[k] = static_cast<uint8_t>(rng.Below(256));
    }
    const uint32_t crc = Crc32(std::span<const uint8_t>(v).first(body));
    for (int k = 0; k < 4; ++k) v[body + k] = static_cast<uint8_t>(crc >> (8 * k));
    std::string what;
    const Verdict verdict = TryDecode(codec, v, &what);
    ++deep;
    if (verdict == Verdict::kOtherException || verdict == Verdict::kSlow) {
      ++deep_bad;
      if (first_other.empty()) first_other = what;
    }
  }
  std::string detail =
      Fmt("%zu cases: %zu typed errors, %zu accepted, %zu untyped, %zu slow; %zu checksum-valid "
          "payload corruptions with %zu failures; %.1f s",
          kCases, typed, accepted, other, slow, deep, deep_bad, Since(start));
  if (!first_other.empty()) detail += " (first: " + first_other + ")";
  return {typed == kCases && deep_bad == 0, detail};
}

}  // namespace
}  // namespace ccodec

int main(int argc, char** argv) {
  using namespace ccodec;
  struct Criterion {
    int id;
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {1, "least-squares optimality", LeastSquares},
      {2, "filtering never hurts", FilteringNeverHurts},
      {3, "codec bit-exactness", BitExactness},
      {4, "rate bookkeeping", RateBookkeeping},
      {5, "gradient suite", GradientSuite},
      {6, "clustering oracle", ClusteringOracle},
      {7, "toy training", ToyTraining},
      {8, "structural anchors", Structure},
      {9, "robustness", Robustness},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %d %s: %s [%.1f s]\n", o.passed ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), seconds);
    std::fflush(stdout);
    if (!o.passed) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
