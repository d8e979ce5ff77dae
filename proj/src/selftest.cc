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


#include "ccodec/codec/selftest.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "ccodec/attention.h"
#include "ccodec/clustering.h"
#include "ccodec/codec/codec.h"
#include "ccodec/codec/container.h"
#include "ccodec/codec/weights_io.h"
#include "ccodec/entropy/context_model.h"
#include "ccodec/entropy/freq_table.h"
#include "ccodec/entropy/quantize.h"
#include "ccodec/entropy/range_coder.h"
#include "ccodec/pqf.h"
#include "ccodec/tensor/ops.h"

namespace ccodec {

namespace {

constexpr double kGradTolerance = 1e-4;

using Loss = std::function<Var<double>(Tape<double>&)>;

Grid<double> Random(size_t c, size_t h, size_t w, Rng& rng, double lo = -1, double hi = 1) {
  Grid<double> g(c, h, w);
  for (double& v : g.span()) v = rng.Uniform(lo, hi);
  return g;
}

// Weighted sum with fixed pseudo-random weights, so every output matters.
Var<double> Reduce(Tape<double>& t, const Var<double>& y) {
  Rng rng(77);
  Grid<double> w = Random(y.channels(), y.height(), y.width(), rng);
  return Sum(t, Mul(t, y, t.Constant(std::move(w))));
}

// Largest relative error between tape and central-difference gradients
// over every parameter entry.
double MaxGradError(ParamStore<double>& store, const Loss& loss) {
  store.ZeroGrad();
  {
    Tape<double> t;
    t.Backward(loss(t));
  }
  double worst = 0;
  const double h = 1e-6;
  for (Param<double>& p : store) {
    for (size_t i = 0; i < p.size(); ++i) {
      const double keep = p.value[i];
      p.value[i] = keep + h;
      Tape<double> up(false);
      const double fu = loss(up).value()[0];
      p.value[i] = keep - h;
      Tape<double> down(false);
      const double fd = loss(down).value()[0];
      p.value[i] = keep;
      const double numeric = (fu - fd) / (2 * h);
      const double analytic = p.grad.empty() ? 0.0 : p.grad[i];
      const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-5});
      worst = std::max(worst, std::abs(numeric - analytic) / scale);
    }
  }
  return worst;
}

std::vector<std::pair<std::string, double>> GradientChecks() {
  std::vector<std::pair<std::string, double>> out;
  Rng rng(2024);
  auto input = [&](ParamStore<double>& s, size_t c, size_t h, size_t w) -> Param<double>& {
    Param<double>& x = s.Add("x", {c, h, w});
    x.value = Random(c, h, w, rng).vec();
    return x;
  };
  {
    ParamStore<double> s;
    Param<double>& x = input(s, 3, 2, 3);
    LinearLayer<double> l(s, "fc", 3, 4, rng);
    out.emplace_back("linear", MaxGradError(s, [&](Tape<double>& t) {
      return Reduce(t, l(t, FromParam(t, x, 3, 2, 3)));
    }));
  }
  {
    ParamStore<double> s;
    Param<double>& x = input(s, 4, 2, 2);
    Param<double>& g = s.AddConstant("gain", {4}, 1.0);
    Param<double>& b = s.AddConstant("bias", {4}, 0.0);
    for (double& v : g.value) v = rng.Uniform(0.5, 1.5);
    out.emplace_back("layer_norm", MaxGradError(s, [&](Tape<double>& t) {
      return Reduce(t, LayerNorm(t, FromParam(t, x, 4, 2, 2), g, b, 1e-6));
    }));
  }
  {
    ParamStore<double> s;
    Param<double>& x = input(s, 2, 5, 5);
    Param<double>& k = s.AddUniform("k", {3, 2, 3, 3}, 18, rng);
    Param<double>& kt = s.AddUniform("kt", {3, 2, 3, 3}, 18, rng);
    out.emplace_back("conv", MaxGradError(s, [&](Tape<double>& t) {
      Var<double> y = Conv2d(t, FromParam(t, x, 2, 5, 5), k, nullptr, 2, 1);
      return Reduce(t, ConvTranspose2d(t, y, kt, nullptr, 2, 1, 1));
    }));
  }
  {
    ParamStore<double> s;
    Param<double>& x = input(s, 2, 3, 3);
    out.emplace_back("gelu_sigmoid_softplus", MaxGradError(s, [&](Tape<double>& t) {
      Var<double> v = FromParam(t, x, 2, 3, 3);
      return Reduce(t, Add(t, Gelu(t, v), Mul(t, Sigmoid(t, v), Softplus(t, v))));
    }));
  }
  {
    ParamStore<double> s;
    Param<double>& x = input(s, 3, 6, 6);
    ClusterMixer<double> mix(s, "mix", 3, {2, 2, false}, rng);
    for (double& v : s.Find("mix.gamma")->value) v = 0.4;
    out.emplace_back("cluster_mixer", MaxGradError(s, [&](Tape<double>& t) {
      return Reduce(t, mix.Forward(t, FromParam(t, x, 3, 6, 6), true));
    }));
  }
  {
    ParamStore<double> s;
    Param<double>& x = input(s, 4, 5, 5);
    SpatialAttention<double> sa(s, "sa", 3, rng);
    ChannelAttention<double> ca(s, "ca", 4, 2, rng);
    out.emplace_back("attention", MaxGradError(s, [&](Tape<double>& t) {
      return Reduce(t, ca(t, sa(t, FromParam(t, x, 4, 5, 5))));
    }));
  }
  {
    ParamStore<double> s;
    Param<double>& x = input(s, 2, 3, 3);
    out.emplace_back("dsq", MaxGradError(s, [&](Tape<double>& t) {
      return Reduce(t, Dsq(t, Scale(t, FromParam(t, x, 2, 3, 3), 2.0), 10.0));
    }));
  }
  {
    ParamStore<double> s;
    Param<double>& c = s.Add("cand", {4, 3, 3});
    Param<double>& e = s.Add("eps", {2, 3, 3});
    c.value = Random(4, 3, 3, rng).vec();
    e.value = Random(2, 3, 3, rng).vec();
    out.emplace_back("pqf_loss", MaxGradError(s, [&](Tape<double>& t) {
      return PqfLoss(t, FromParam(t, c, 4, 3, 3), FromParam(t, e, 2, 3, 3), 2);
    }));
  }
  return out;
}

// Gaussian-table round trip; `fault` breaks one table first.
std::string CoderCheck(bool fault) {
  Rng rng(5);
  std::vector<FreqTable> tables;
  for (double sigma : {0.11, 0.5, 1.0, 3.7, 20.0, 150.0}) tables.push_back(GaussianFreq(0.0, sigma));
  if (fault) {
    FreqTable& t = tables[2];
    t.freq[t.freq.size() / 2] += 4000;  // cum left as is: intervals overlap
  }
  for (const FreqTable& t : tables) {
    const std::string why = t.Check();
    if (!why.empty()) return "invalid frequency table: " + why;
  }
  std::vector<std::pair<size_t, int32_t>> syms(20000);
  RangeEncoder enc;
  for (auto& [k, s] : syms) {
    k = rng.Below(tables.size());
    s = tables[k].Clamp(static_cast<int32_t>(std::lround(rng.Uniform(-6, 6))));
    enc.Encode(tables[k], s);
  }
  std::vector<uint8_t> bytes = enc.Finish();
  RangeDecoder dec(bytes);
  for (size_t i = 0; i < syms.size(); ++i) {
    if (dec.Decode(tables[syms[i].first]) != syms[i].second) {
      return "symbol " + std::to_string(i) + " decoded wrongly";
    }
  }
  return "";
}

std::string LeastSquaresCheck() {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> c(24), e(12);
    for (double& v : c) v = rng.Uniform(-1, 1);
    for (double& v : e) v = rng.Uniform(-1, 1);
    double g00 = 0, g01 = 0, g11 = 0, r0 = 0, r1 = 0;
    for (size_t p = 0; p < 12; ++p) {
      g00 += c[p] * c[p];
      g01 += c[p] * c[12 + p];
      g11 += c[12 + p] * c[12 + p];
      r0 += c[p] * e[p];
      r1 += c[12 + p] * e[p];
    }
    const double det = g00 * g11 - g01 * g01;
    const double a0 = (g11 * r0 - g01 * r1) / det, a1 = (g00 * r1 - g01 * r0) / det;
    LeastSquaresSolution s = SolveCoefficients(c.data(), e.data(), 12, 2, 0.0);
    if (std::abs(s.a[0] - a0) > 1e-9 * (1 + std::abs(a0)) ||
        std::abs(s.a[1] - a1) > 1e-9 * (1 + std::abs(a1))) {
      return "trial " + std::to_string(trial) + " differs from the closed form";
    }
  }
  return "";
}

std::string ShuffleCheck() {
  Rng rng(10);
  Grid<double> x = Random(8, 6, 4, rng);
  if (PixelShuffleGrid(PixelUnshuffleGrid(x, 2), 2) != x) return "shuffle(unshuffle(x)) != x";
  if (PixelUnshuffleGrid(PixelShuffleGrid(x, 2), 2) != x) return "unshuffle(shuffle(x)) != x";
  return "";
}

std::string ContainerCheck() {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    Bitstream b;
    b.preset = static_cast<uint8_t>(rng.Below(7));
    static constexpr uint8_t kFlagChoices[] = {0, kFlagPqf, kFlagPqf | kFlagRawCoefficients};
    b.flags = kFlagChoices[rng.Below(3)];
    b.height = static_cast<uint32_t>(1 + rng.Below(3000));
    b.width = static_cast<uint32_t>(1 + rng.Below(3000));
    b.padded_height = static_cast<uint32_t>(RoundUp(b.height, kPadMultiple));
    b.padded_width = static_cast<uint32_t>(RoundUp(b.width, kPadMultiple));
    b.model_hash = (uint64_t{static_cast<uint32_t>(rng.Below(1u << 31))} << 32) | rng.Below(1u << 31);
    b.latent_channels = static_cast<uint16_t>(1 + rng.Below(400));
    if (b.pqf()) {
      b.candidates = static_cast<uint8_t>(1 + rng.Below(kMaxCandidates));
      b.coefficients.resize(b.CoefficientBytes());
      for (uint8_t& v : b.coefficients) v = static_cast<uint8_t>(rng.Below(256));
    }
    b.z_stream.resize(rng.Below(100));
    b.group_streams.resize(1 + rng.Below(std::min<size_t>(8, b.latent_channels)));
    for (auto& g : b.group_streams) g.resize(rng.Below(50), static_cast<uint8_t>(trial));
    if (ParseBitstream(SerializeBitstream(b)) != b) return "trial " + std::to_string(trial);
  }
  return "";
}

std::string CodecCheck() {
  WeightsFile w = SeededWeights(ArchConfig::Toy(), {1}, 12);
  Codec codec(*w.models[0].model, 1);
  Image img = SyntheticImage(13, 48, 32);
  EncodeResult e = codec.Encode(img);
  DecodeResult d = codec.Decode(e.bytes);
  if (d.y_hat != e.y_hat || d.z_hat != e.z_hat) return "decoded latents differ";
  if (d.image != e.reconstruction) return "decoded image differs from encoder reconstruction";
  if (codec.Reencode(d) != e.bytes) return "re-encoding changed the bytes";
  for (size_t cut = 0; cut < e.bytes.size(); cut += 13) {
    try {
      codec.Decode(std::span<const uint8_t>(e.bytes).first(cut));
      return "truncation at " + std::to_string(cut) + " was accepted";
    } catch (const DecodeError&) {
    }
  }
  return "";
}

}  // namespace

const std::vector<std::string>& SelfTestFaults() {
  static const std::vector<std::string> kFaults{"freq-table"};
  return kFaults;
}

std::vector<SelfTestCheck> RunSelfTest(const SelfTestOptions& opts,
                                       const std::function<void(const SelfTestCheck&)>& progress) {
  const auto& faults = SelfTestFaults();
  if (!opts.fault.empty() && std::find(faults.begin(), faults.end(), opts.fault) == faults.end()) {
    throw std::invalid_argument("unknown fault '" + opts.fault + "'");
  }
  std::vector<SelfTestCheck> out;
  auto run = [&](const std::string& name, const std::function<std::string()>& fn) {
    const auto start = std::chrono::steady_clock::now();
    SelfTestCheck c;
    c.name = name;
    try {
      c.detail = fn();
      c.passed = c.detail.empty();
    } catch (const std::exception& e) {
      c.detail = std::string("exception: ") + e.what();
    }
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.push_back(c);
    if (progress) progress(c);
  };
  for (const auto& [op, err] : GradientChecks()) {
    run("gradient:" + op, [err = err] {
      std::ostringstream s;
      if (!(err < kGradTolerance)) s << "relative error " << err;
      return s.str();
    });
  }
  run("range-coder", [&] { return CoderCheck(opts.fault == "freq-table"); });
  run("least-squares", LeastSquaresCheck);
  run("shuffle-inverse", ShuffleCheck);
  run("container", ContainerCheck);
  run("codec-roundtrip", CodecCheck);
  return out;
}

}  // namespace ccodec
