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


#include "ccodec/codec/codec.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>

#include "ccodec/codec/bytes.h"
#include "ccodec/codec/weights_io.h"
#include "ccodec/entropy/freq_table.h"
#include "ccodec/entropy/range_coder.h"
#include "json.hpp"

namespace ccodec {

namespace {

double Seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

// round(v), limited to what the table can code.
int32_t Symbol(float v, const FreqTable& t, size_t& clamped) {
  const float r = std::isnan(v) ? 0.0f : std::round(std::clamp(v, -1e6f, 1e6f));
  const int32_t s = static_cast<int32_t>(r);
  const int32_t c = t.Clamp(s);
  if (c != s) ++clamped;
  return c;
}

Grid<float> CoefficientGrid(const std::vector<float>& a, size_t M, size_t N) {
  return Grid<float>(M, N, 1, std::vector<float>(a));
}

}  // namespace

std::string EncodeReport::ToJson() const {
  nlohmann::json j;
  j["width"] = width;
  j["height"] = height;
  j["bytes"] = bytes;
  j["bpp"] = bpp;
  j["estimated_bpp"] = estimated_bpp;
  j["z_bits"] = z_bits;
  j["y_bits"] = y_bits;
  j["coefficient_bits"] = coefficient_bits;
  j["coefficient_bpp"] = coefficient_bpp;
  j["clamped_coefficients"] = clamped_coefficients;
  j["fallback_channels"] = fallback_channels;
  j["clamped_symbols"] = clamped_symbols;
  if (std::isfinite(psnr)) {
    j["psnr"] = psnr;
  } else {
    j["psnr"] = "inf";
  }
  j["seconds"] = seconds;
  return j.dump(2);
}

struct Codec::Priors {
  Var<float> mean_base;
  Var<float> raw_base;
};

Codec::Codec(const CompressionModel<float>& model, int preset)
    : model_(model), preset_(preset), hash_(ModelHash(model)) {}

Codec::Priors Codec::HyperPriors(const Grid<float>& z_hat, size_t h, size_t w) const {
  Tape<float> t(false);
  Var<float> z = t.Constant(z_hat);
  return {model_.hyper_mean()(t, z, h, w), model_.hyper_scale()(t, z, h, w)};
}

LatentCoding Codec::CodeLatents(const Grid<float>& y, const Grid<float>& z) const {
  const ArchConfig& cfg = model_.config();
  const ScaleTables& tables = ScaleTables::Get();
  LatentCoding out;
  out.z_hat = Grid<float>(z.channels(), z.height(), z.width());
  {
    RangeEncoder enc;
    for (size_t c = 0; c < z.channels(); ++c) {
      const float mu = model_.ZMean(c);
      const FreqTable& table = tables.ForSigma(model_.ZScale(c));
      for (size_t p = 0; p < z.plane(); ++p) {
        const int32_t s = Symbol(z.channel(c)[p] - mu, table, out.clamped_symbols);
        enc.Encode(table, s);
        out.z_bits += table.Bits(s);
        out.z_hat.channel(c)[p] = static_cast<float>(s) + mu;
      }
    }
    out.z_stream = enc.Finish();
  }
  const size_t h = y.height(), w = y.width(), P = y.plane();
  Priors pr = HyperPriors(out.z_hat, h, w);
  const ContextModel<float>& ctx = model_.context();
  // Only positions already coded are filled in; the rest stay zero, exactly
  // as on the decoder side.
  out.y_hat = Grid<float>(cfg.latent_channels, h, w);
  for (size_t g = 0; g < ctx.groups(); ++g) {
    RangeEncoder enc;
    double bits = 0;
    const size_t off = ctx.group_offset(g), size = ctx.group_size(g);
    for (size_t ph = 0; ph < ctx.phases(); ++ph) {
      const Phase phase = static_cast<Phase>(ph);
      Tape<float> t(false);
      GaussianParams<float> gp =
          ctx.Step(t, g, phase, pr.mean_base, pr.raw_base, t.Constant(out.y_hat));
      const Grid<float> mask = ctx.PhaseMask(h, w, phase);
      for (size_t c = 0; c < size; ++c) {
        const float* mu = gp.mu.value().channel(c);
        const float* sigma = gp.sigma.value().channel(c);
        const float* yc = y.channel(off + c);
        float* yh = out.y_hat.channel(off + c);
        for (size_t p = 0; p < P; ++p) {
          if (mask[p] == 0) continue;
          const FreqTable& table = tables.ForSigma(sigma[p]);
          const int32_t s = Symbol(yc[p] - mu[p], table, out.clamped_symbols);
          enc.Encode(table, s);
          bits += table.Bits(s);
          yh[p] = static_cast<float>(s) + mu[p];
        }
      }
    }
    out.y_bits += bits;
    out.group_bits.push_back(bits);
    out.group_streams.push_back(enc.Finish());
  }
  return out;
}

void Codec::DecodeLatents(const Bitstream& b, const BitstreamLayout& lay, DecodeResult& out) const {
  using Kind = DecodeError::Kind;
  const ArchConfig& cfg = model_.config();
  const ScaleTables& tables = ScaleTables::Get();
  const size_t h = LatentSide(b.padded_height), w = LatentSide(b.padded_width);
  const size_t zh = HyperSide(h), zw = HyperSide(w);
  out.z_hat = Grid<float>(cfg.hyper_channels, zh, zw);
  {
    RangeDecoder dec(b.z_stream, lay.z_offset);
    for (size_t c = 0; c < cfg.hyper_channels; ++c) {
      const float mu = model_.ZMean(c);
      const FreqTable& table = tables.ForSigma(model_.ZScale(c));
      for (size_t p = 0; p < zh * zw; ++p) {
        out.z_hat.channel(c)[p] = static_cast<float>(dec.Decode(table)) + mu;
      }
    }
    if (dec.position() != b.z_stream.size()) {
      throw DecodeError(Kind::kCorrupt, lay.z_offset + dec.position(), "unused bytes in z stream");
    }
  }
  Priors pr = HyperPriors(out.z_hat, h, w);
  const ContextModel<float>& ctx = model_.context();
  out.y_hat = Grid<float>(cfg.latent_channels, h, w);
  for (size_t g = 0; g < ctx.groups(); ++g) {
    RangeDecoder dec(b.group_streams[g], lay.group_offsets[g]);
    const size_t off = ctx.group_offset(g), size = ctx.group_size(g);
    for (size_t ph = 0; ph < ctx.phases(); ++ph) {
      const Phase phase = static_cast<Phase>(ph);
      Tape<float> t(false);
      GaussianParams<float> gp =
          ctx.Step(t, g, phase, pr.mean_base, pr.raw_base, t.Constant(out.y_hat));
      const Grid<float> mask = ctx.PhaseMask(h, w, phase);
      for (size_t c = 0; c < size; ++c) {
        const float* mu = gp.mu.value().channel(c);
        const float* sigma = gp.sigma.value().channel(c);
        float* yh = out.y_hat.channel(off + c);
        for (size_t p = 0; p < h * w; ++p) {
          if (mask[p] == 0) continue;
          yh[p] = static_cast<float>(dec.Decode(tables.ForSigma(sigma[p]))) + mu[p];
        }
      }
    }
    if (dec.position() != b.group_streams[g].size()) {
      throw DecodeError(Kind::kCorrupt, lay.group_offsets[g] + dec.position(),
                        "unused bytes in group " + std::to_string(g) + " stream");
    }
  }
}

Image Codec::Synthesize(const Grid<float>& y_tilde, const Grid<float>& z_hat, size_t width,
                        size_t height) const {
  Tape<float> t(false);
  Var<float> feature =
      model_.hyper_latent()(t, t.Constant(z_hat), y_tilde.height(), y_tilde.width());
  Var<float> x = model_.synthesis()(t, model_.Fuse(t, t.Constant(y_tilde), feature));
  return GridToImage(x.value(), width, height);
}

EncodeResult Codec::Encode(const Image& img, const EncodeOptions& opts) const {
  const auto start = std::chrono::steady_clock::now();
  if (img.width == 0 || img.height == 0 || img.width > kMaxImageSide || img.height > kMaxImageSide) {
    throw std::invalid_argument("encode: unsupported image size");
  }
  const ArchConfig& cfg = model_.config();
  const size_t M = cfg.latent_channels, N = cfg.pqf_candidates;
  EncodeResult res;
  const Grid<float> x = PadToMultiple(ImageToGrid(img), kPadMultiple);
  Grid<float> z;
  {
    Tape<float> t(false);
    Var<float> y = model_.analysis()(t, x);
    z = model_.hyper_encoder()(t, y).value();
    res.y = y.value();
  }
  LatentCoding lc = CodeLatents(res.y, z);
  res.y_hat = std::move(lc.y_hat);
  res.z_hat = std::move(lc.z_hat);

  Bitstream& b = res.stream;
  b.preset = static_cast<uint8_t>(preset_);
  b.height = static_cast<uint32_t>(img.height);
  b.width = static_cast<uint32_t>(img.width);
  b.padded_height = static_cast<uint32_t>(x.height());
  b.padded_width = static_cast<uint32_t>(x.width());
  b.model_hash = hash_;
  b.latent_channels = static_cast<uint16_t>(M);
  b.z_stream = std::move(lc.z_stream);
  b.group_streams = std::move(lc.group_streams);

  EncodeReport& rep = res.report;
  res.y_tilde = res.y_hat;
  if (opts.pqf) {
    b.flags = kFlagPqf | (opts.raw_coefficients ? kFlagRawCoefficients : 0);
    b.candidates = static_cast<uint8_t>(N);
    {
      Tape<float> t(false);
      res.candidates = model_.candidates()(t, t.Constant(res.y_hat)).value();
    }
    const size_t P = res.y.plane();
    std::vector<float> eps(P);
    std::vector<uint8_t> codes;
    ByteWriter raw;
    for (size_t i = 0; i < M; ++i) {
      for (size_t p = 0; p < P; ++p) eps[p] = res.y.channel(i)[p] - res.y_hat.channel(i)[p];
      LeastSquaresSolution sol = SolveCoefficientsRelative(res.candidates.channel(i * N), eps.data(),
                                                           P, N, kDefaultRidgeScale);
      if (sol.fallback) ++rep.fallback_channels;
      for (size_t j = 0; j < N; ++j) {
        const double a = sol.a[j];
        res.raw_coefficients.push_back(a);
        if (opts.raw_coefficients) {
          raw.F32(static_cast<float>(a));
          res.coefficients.push_back(static_cast<float>(a));
        } else {
          if (CoefficientClamped(a)) ++rep.clamped_coefficients;
          const uint8_t code = QuantizeCoefficient(a);
          codes.push_back(code);
          res.coefficients.push_back(static_cast<float>(DequantizeCoefficient(code)));
        }
      }
    }
    b.coefficients = opts.raw_coefficients ? raw.Take() : PackNibbles(codes);
    res.y_tilde = ApplyPqfGrid(res.y_hat, res.candidates, CoefficientGrid(res.coefficients, M, N), N);
    rep.coefficient_bits = opts.raw_coefficients ? M * N * 32 : M * N * kCoeffBits;
  }
  res.bytes = SerializeBitstream(b);

  const double pixels = double(img.width) * double(img.height);
  rep.width = img.width;
  rep.height = img.height;
  rep.bytes = res.bytes.size();
  rep.bpp = double(res.bytes.size()) * 8.0 / pixels;
  rep.z_bits = lc.z_bits;
  rep.y_bits = lc.y_bits;
  rep.coefficient_bpp = double(rep.coefficient_bits) / pixels;
  rep.estimated_bpp = (lc.z_bits + lc.y_bits + double(rep.coefficient_bits)) / pixels;
  rep.clamped_symbols = lc.clamped_symbols;
  if (opts.reconstruct) {
    res.reconstruction = Synthesize(res.y_tilde, res.z_hat, img.width, img.height);
    rep.psnr = Psnr(img, res.reconstruction);
  }
  rep.seconds = Seconds(start);
  return res;
}

DecodeResult Codec::Decode(std::span<const uint8_t> bytes) const {
  using Kind = DecodeError::Kind;
  const auto start = std::chrono::steady_clock::now();
  const ArchConfig& cfg = model_.config();
  BitstreamLayout lay;
  DecodeResult out;
  out.stream = ParseBitstream(bytes, &lay);
  const Bitstream& b = out.stream;
  if (b.model_hash != hash_) {
    throw DecodeError(Kind::kModelMismatch, 20, "stream was encoded with different weights");
  }
  if (b.latent_channels != cfg.latent_channels ||
      b.group_streams.size() != model_.context().groups() ||
      (b.pqf() && b.candidates != cfg.pqf_candidates)) {
    throw DecodeError(Kind::kModelMismatch, 28, "stream layout does not match the model");
  }
  DecodeLatents(b, lay, out);
  out.y_tilde = out.y_hat;
  if (b.pqf()) {
    const size_t M = cfg.latent_channels, N = cfg.pqf_candidates;
    if (b.raw_coefficients()) {
      ByteReader r(b.coefficients);
      for (size_t i = 0; i < M * N; ++i) {
        const float a = r.F32();
        if (!std::isfinite(a)) throw DecodeError(Kind::kCorrupt, 31, "non-finite coefficient");
        out.coefficients.push_back(a);
      }
    } else {
      for (uint8_t code : UnpackNibbles(b.coefficients, M * N)) {
        out.coefficients.push_back(static_cast<float>(DequantizeCoefficient(code)));
      }
    }
    Tape<float> t(false);
    Grid<float> cand = model_.candidates()(t, t.Constant(out.y_hat)).value();
    out.y_tilde = ApplyPqfGrid(out.y_hat, cand, CoefficientGrid(out.coefficients, M, N), N);
  }
  out.image = Synthesize(out.y_tilde, out.z_hat, b.width, b.height);
  out.seconds = Seconds(start);
  return out;
}

std::vector<uint8_t> Codec::Reencode(const DecodeResult& decoded) const {
  LatentCoding lc = CodeLatents(decoded.y_hat, decoded.z_hat);
  Bitstream b = decoded.stream;
  b.z_stream = std::move(lc.z_stream);
  b.group_streams = std::move(lc.group_streams);
  return SerializeBitstream(b);
}

}  // namespace ccodec
