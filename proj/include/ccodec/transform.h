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

// Analysis / synthesis transforms built from clustering blocks, and the
// convolutional hyper encoder and decoders.

#ifndef CCODEC_TRANSFORM_H_
#define CCODEC_TRANSFORM_H_

#include <string>
#include <vector>

#include "ccodec/arch_config.h"
#include "ccodec/attention.h"
#include "ccodec/clustering.h"
#include "ccodec/tensor/ops.h"
#include "ccodec/tensor/param.h"
#include "ccodec/tensor/tape.h"

namespace ccodec {

// 3 x H x W image in [0, 1] -> 5 x H x W points (r, g, b, x, y) with the
// coordinates normalized to [-1, 1].
template <typename T>
Grid<T> PositionalEncodeGrid(const Grid<T>& image) {
  if (image.channels() != 3) {
    throw ShapeError("positional_encode: expected 3 channels, got " + image.ShapeString());
  }
  const size_t H = image.height(), W = image.width();
  if (H < 2 || W < 2) {
    throw ShapeError("positional_encode: image " + image.ShapeString() + " smaller than 2x2");
  }
  Grid<T> out(5, H, W);
  std::copy(image.span().begin(), image.span().end(), out.data());
  for (size_t y = 0; y < H; ++y) {
    for (size_t x = 0; x < W; ++x) {
      out(3, y, x) = static_cast<T>((2.0 * x - (W - 1.0)) / (W - 1.0));
      out(4, y, x) = static_cast<T>((2.0 * y - (H - 1.0)) / (H - 1.0));
    }
  }
  return out;
}

template <typename T>
struct NormLayer {
  Param<T>* gain = nullptr;
  Param<T>* bias = nullptr;
  T eps = T(1e-6);

  NormLayer() = default;
  NormLayer(ParamStore<T>& store, const std::string& name, size_t channels, double epsilon)
      : eps(static_cast<T>(epsilon)) {
    gain = &store.AddConstant(name + ".gain", {channels}, T(1));
    bias = &store.AddConstant(name + ".bias", {channels}, T(0));
  }
  Var<T> operator()(Tape<T>& t, const Var<T>& x) const {
    return LayerNorm(t, x, *gain, *bias, eps);
  }
};

// Metaformer-style block:
//   y   = x + SA(ClusterMix(LN(x)))
//   out = y + CA(MLP(LN(y)))
template <typename T>
class ClusterBlock {
 public:
  ClusterBlock() = default;
  ClusterBlock(ParamStore<T>& store, const std::string& name, size_t channels,
               const ArchConfig& cfg, bool checkerboard, Rng& rng)
      : checkerboard_(checkerboard) {
    norm1_ = NormLayer<T>(store, name + ".norm1", channels, cfg.layer_norm_eps);
    mixer_ = ClusterMixer<T>(store, name + ".mix", channels,
                             {cfg.cluster_rows, cfg.cluster_cols, cfg.scalar_gamma}, rng);
    spatial_ = SpatialAttention<T>(store, name + ".sa", cfg.spatial_attention_kernel, rng);
    norm2_ = NormLayer<T>(store, name + ".norm2", channels, cfg.layer_norm_eps);
    mlp_ = MlpLayer<T>(store, name + ".mlp", channels, channels * cfg.block_mlp_ratio, channels,
                       rng);
    channel_ = ChannelAttention<T>(store, name + ".ca", channels, cfg.channel_attention_reduction,
                                   rng);
  }

  Var<T> operator()(Tape<T>& t, const Var<T>& x) const { return Forward(t, x, checkerboard_); }

  Var<T> Forward(Tape<T>& t, const Var<T>& x, bool checkerboard) const {
    Var<T> y = Add(t, x, spatial_(t, mixer_.Forward(t, norm1_(t, x), checkerboard)));
    return Add(t, y, channel_(t, mlp_(t, norm2_(t, y))));
  }

  bool checkerboard() const { return checkerboard_; }
  const NormLayer<T>& norm1() const { return norm1_; }
  const ClusterMixer<T>& mixer() const { return mixer_; }
  const SpatialAttention<T>& spatial() const { return spatial_; }
  const NormLayer<T>& norm2() const { return norm2_; }
  const MlpLayer<T>& mlp() const { return mlp_; }
  const ChannelAttention<T>& channel() const { return channel_; }

 private:
  bool checkerboard_ = false;
  NormLayer<T> norm1_;
  ClusterMixer<T> mixer_;
  SpatialAttention<T> spatial_;
  NormLayer<T> norm2_;
  MlpLayer<T> mlp_;
  ChannelAttention<T> channel_;
};

// MLP -> unshuffle(2) -> layer norm -> linear.
template <typename T>
class Downsample {
 public:
  Downsample() = default;
  Downsample(ParamStore<T>& store, const std::string& name, size_t in, size_t out,
             const ArchConfig& cfg, Rng& rng) {
    mlp_ = MlpLayer<T>(store, name + ".mlp", in, in * cfg.down_mlp_ratio, in, rng);
    norm_ = NormLayer<T>(store, name + ".norm", 4 * in, cfg.layer_norm_eps);
    proj_ = LinearLayer<T>(store, name + ".proj", 4 * in, out, rng);
  }

  Var<T> operator()(Tape<T>& t, const Var<T>& x) const {
    if (x.height() % 2 || x.width() % 2) {
      throw ShapeError("downsample: odd spatial size " + x.value().ShapeString());
    }
    return proj_(t, norm_(t, PixelUnshuffle(t, mlp_(t, x), 2)));
  }

 private:
  MlpLayer<T> mlp_;
  NormLayer<T> norm_;
  LinearLayer<T> proj_;
};

// linear -> shuffle(2).
template <typename T>
class Upsample {
 public:
  Upsample() = default;
  Upsample(ParamStore<T>& store, const std::string& name, size_t in, size_t out, Rng& rng) {
    proj_ = LinearLayer<T>(store, name + ".proj", in, 4 * out, rng);
  }
  Var<T> operator()(Tape<T>& t, const Var<T>& x) const {
    return PixelShuffle(t, proj_(t, x), 2);
  }
  const LinearLayer<T>& proj() const { return proj_; }

 private:
  LinearLayer<T> proj_;
};

namespace internal {

template <typename T>
std::vector<ClusterBlock<T>> MakeBlocks(ParamStore<T>& store, const std::string& name,
                                        size_t channels, size_t depth, const ArchConfig& cfg,
                                        Rng& rng) {
  std::vector<ClusterBlock<T>> blocks;
  for (size_t b = 0; b < depth; ++b) {
    // The 2nd, 4th, ... block of a stage uses the checkerboard split.
    blocks.emplace_back(store, name + ".block" + std::to_string(b), channels, cfg, b % 2 == 1,
                        rng);
  }
  return blocks;
}

}  // namespace internal

// Image (3 x H x W, H and W multiples of 16) -> latent y (M x H/16 x W/16).
template <typename T>
class AnalysisTransform {
 public:
  AnalysisTransform() = default;
  AnalysisTransform(ParamStore<T>& store, const std::string& name, const ArchConfig& cfg,
                    Rng& rng) {
    size_t in = 5;
    for (size_t s = 0; s < kStages; ++s) {
      const std::string sn = name + ".stage" + std::to_string(s);
      down_.emplace_back(store, sn + ".down", in, cfg.stage_channels[s], cfg, rng);
      blocks_.push_back(
          internal::MakeBlocks(store, sn, cfg.stage_channels[s], cfg.stage_depths[s], cfg, rng));
      in = cfg.stage_channels[s];
    }
  }

  Var<T> operator()(Tape<T>& t, const Grid<T>& image) const {
    if (image.height() % kPadMultiple || image.width() % kPadMultiple) {
      throw ShapeError("analysis: image " + image.ShapeString() + " is not padded to a multiple of " +
                       std::to_string(kPadMultiple));
    }
    return Forward(t, t.Constant(PositionalEncodeGrid(image)));
  }

  Var<T> Forward(Tape<T>& t, const Var<T>& points) const {
    Var<T> x = points;
    for (size_t s = 0; s < kStages; ++s) {
      x = down_[s](t, x);
      for (const auto& b : blocks_[s]) x = b(t, x);
    }
    return x;
  }

  const std::vector<std::vector<ClusterBlock<T>>>& blocks() const { return blocks_; }

 private:
  std::vector<Downsample<T>> down_;
  std::vector<std::vector<ClusterBlock<T>>> blocks_;
};

// Latent (M x h x w) -> image (3 x 16h x 16w): clustering blocks then x2
// upsampling per stage, then a 5x5 convolution to RGB.
template <typename T>
class SynthesisTransform {
 public:
  SynthesisTransform() = default;
  SynthesisTransform(ParamStore<T>& store, const std::string& name, const ArchConfig& cfg,
                     Rng& rng) {
    for (size_t i = 0; i < kStages; ++i) {
      const size_t s = kStages - 1 - i;
      const std::string sn = name + ".stage" + std::to_string(i);
      const size_t width = cfg.stage_channels[s];
      const size_t next = s > 0 ? cfg.stage_channels[s - 1] : cfg.stage_channels[0];
      blocks_.push_back(internal::MakeBlocks(store, sn, width, cfg.stage_depths[s], cfg, rng));
      up_.emplace_back(store, sn + ".up", width, next, rng);
    }
    const size_t c0 = cfg.stage_channels[0];
    out_kernel_ = &store.AddUniform(name + ".out.w", {3, c0, 5, 5}, c0 * 25, rng);
    out_bias_ = &store.AddConstant(name + ".out.b", {3}, T(0.5));
  }

  Var<T> operator()(Tape<T>& t, const Var<T>& latent) const {
    Var<T> x = latent;
    for (size_t i = 0; i < kStages; ++i) {
      for (const auto& b : blocks_[i]) x = b(t, x);
      x = up_[i](t, x);
    }
    return Conv2d(t, x, *out_kernel_, out_bias_, 1, 2);
  }

 private:
  std::vector<std::vector<ClusterBlock<T>>> blocks_;
  std::vector<Upsample<T>> up_;
  Param<T>* out_kernel_ = nullptr;
  Param<T>* out_bias_ = nullptr;
};

template <typename T>
struct ConvLayer {
  Param<T>* kernel = nullptr;
  Param<T>* bias = nullptr;
  size_t stride = 1;
  bool transposed = false;

  ConvLayer() = default;
  ConvLayer(ParamStore<T>& store, const std::string& name, size_t in, size_t out, size_t k,
            size_t s, bool transpose, Rng& rng)
      : stride(s), transposed(transpose) {
    if (transpose) {
      kernel = &store.AddUniform(name + ".w", {in, out, k, k}, in * k * k / (s * s), rng);
    } else {
      kernel = &store.AddUniform(name + ".w", {out, in, k, k}, in * k * k, rng);
    }
    bias = &store.AddConstant(name + ".b", {out}, T(0));
  }

  Var<T> operator()(Tape<T>& t, const Var<T>& x) const {
    const size_t pad = kernel->dim(2) / 2;
    if (transposed) return ConvTranspose2d(t, x, *kernel, bias, stride, pad, stride - 1);
    return Conv2d(t, x, *kernel, bias, stride, pad);
  }
};

// y (M x h x w) -> z (192 x ceil(h/4) x ceil(w/4)).
template <typename T>
class HyperEncoder {
 public:
  HyperEncoder() = default;
  HyperEncoder(ParamStore<T>& store, const std::string& name, const ArchConfig& cfg, Rng& rng) {
    const size_t H = cfg.hyper_channels;
    static constexpr size_t kStrides[] = {1, 2, 1, 2, 1};
    for (size_t l = 0; l < 5; ++l) {
      layers_.emplace_back(store, name + ".conv" + std::to_string(l),
                           l == 0 ? cfg.latent_channels : H, H, 3, kStrides[l], false, rng);
    }
  }

  Var<T> operator()(Tape<T>& t, const Var<T>& y) const {
    Var<T> x = y;
    for (size_t l = 0; l < layers_.size(); ++l) {
      x = layers_[l](t, x);
      if (l + 1 < layers_.size()) x = Gelu(t, x);
    }
    return x;
  }

 private:
  std::vector<ConvLayer<T>> layers_;
};

// z -> M-channel map at the latent resolution, cropped to (h, w).
template <typename T>
class HyperDecoder {
 public:
  HyperDecoder() = default;
  HyperDecoder(ParamStore<T>& store, const std::string& name, const ArchConfig& cfg, Rng& rng) {
    const size_t H = cfg.hyper_channels;
    static constexpr size_t kStrides[] = {1, 2, 1, 2, 1};
    for (size_t l = 0; l < 5; ++l) {
      layers_.emplace_back(store, name + ".conv" + std::to_string(l), H,
                           l == 4 ? cfg.latent_channels : H, 3, kStrides[l], kStrides[l] == 2,
                           rng);
    }
  }

  Var<T> operator()(Tape<T>& t, const Var<T>& z, size_t height, size_t width) const {
    Var<T> x = z;
    for (size_t l = 0; l < layers_.size(); ++l) {
      x = layers_[l](t, x);
      if (l + 1 < layers_.size()) x = Gelu(t, x);
    }
    return Crop(t, x, height, width);
  }

  const ConvLayer<T>& last() const { return layers_.back(); }

 private:
  std::vector<ConvLayer<T>> layers_;
};

}  // namespace ccodec

#endif  // CCODEC_TRANSFORM_H_
