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


// Image encoder and decoder for one trained model.
//
// Encoder: pad -> analysis -> hyper encoder -> z quantized around its prior
// mean and coded -> hyper decoders -> channel groups coded anchor phase
// first, each symbol round(y - mu) under a Gaussian table picked by sigma ->
// GuidedPQF coefficients solved against the true error y - y_hat.
// Decoder mirrors the coding steps with the same float computations, so the
// decoded latents equal the encoder's bit for bit.

#ifndef CCODEC_CODEC_CODEC_H_
#define CCODEC_CODEC_CODEC_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ccodec/codec/container.h"
#include "ccodec/codec/image_io.h"
#include "ccodec/model.h"

namespace ccodec {

struct EncodeOptions {
  bool pqf = true;
  // Store the unquantized LS coefficients as f32 instead of 4-bit codes.
  bool raw_coefficients = false;
  // Also run synthesis to report the reconstruction quality.
  bool reconstruct = true;
};

struct EncodeReport {
  size_t width = 0;
  size_t height = 0;
  size_t bytes = 0;
  double bpp = 0;            // bytes * 8 / (H W)
  double estimated_bpp = 0;  // sum of -log2 p over coded symbols plus coefficient bits
  double z_bits = 0;
  double y_bits = 0;
  size_t coefficient_bits = 0;
  double coefficient_bpp = 0;
  size_t clamped_coefficients = 0;
  size_t fallback_channels = 0;  // LS systems that needed the ridge fallback
  size_t clamped_symbols = 0;    // latents outside the table range
  double psnr = 0;               // only with EncodeOptions::reconstruct
  double seconds = 0;

  std::string ToJson() const;
};

// Entropy-coded latents and what the decoder will see.
struct LatentCoding {
  Grid<float> y_hat;
  Grid<float> z_hat;
  std::vector<uint8_t> z_stream;
  std::vector<std::vector<uint8_t>> group_streams;
  double z_bits = 0;
  double y_bits = 0;
  std::vector<double> group_bits;  // y_bits split by substream
  size_t clamped_symbols = 0;
};

struct EncodeResult {
  std::vector<uint8_t> bytes;
  Bitstream stream;
  Grid<float> y;  // unquantized latent
  Grid<float> y_hat;
  Grid<float> z_hat;
  Grid<float> candidates;
  std::vector<double> raw_coefficients;  // LS solution per channel, M x N
  std::vector<float> coefficients;       // values the decoder applies
  Grid<float> y_tilde;
  Image reconstruction;  // only with EncodeOptions::reconstruct
  EncodeReport report;
};

struct DecodeResult {
  Image image;
  Bitstream stream;
  Grid<float> y_hat;
  Grid<float> z_hat;
  Grid<float> y_tilde;
  std::vector<float> coefficients;
  double seconds = 0;
};

class Codec {
 public:
  // `model` must outlive the codec.
  Codec(const CompressionModel<float>& model, int preset);

  EncodeResult Encode(const Image& img, const EncodeOptions& opts = {}) const;
  DecodeResult Decode(std::span<const uint8_t> bytes) const;
  // Entropy codes the decoded latents again with the signaled coefficients.
  std::vector<uint8_t> Reencode(const DecodeResult& decoded) const;

  LatentCoding CodeLatents(const Grid<float>& y, const Grid<float>& z) const;

  const CompressionModel<float>& model() const { return model_; }
  uint64_t model_hash() const { return hash_; }

  // Latent and hyper-latent sizes for a padded image side.
  static size_t LatentSide(size_t padded) { return padded / kPadMultiple; }
  static size_t HyperSide(size_t latent) { return (latent + 3) / 4; }

 private:
  struct Priors;
  Priors HyperPriors(const Grid<float>& z_hat, size_t h, size_t w) const;
  void DecodeLatents(const Bitstream& b, const BitstreamLayout& lay, DecodeResult& out) const;
  Image Synthesize(const Grid<float>& y_tilde, const Grid<float>& z_hat, size_t width,
                   size_t height) const;

  const CompressionModel<float>& model_;
  int preset_;
  uint64_t hash_;
};

}  // namespace ccodec

#endif  // CCODEC_CODEC_CODEC_H_
