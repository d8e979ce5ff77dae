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

// All learnable parts of one rate point, and the training-time forward pass.

#ifndef CCODEC_MODEL_H_
#define CCODEC_MODEL_H_

#include <cstdint>
#include <memory>
#include <string>

#include "ccodec/arch_config.h"
#include "ccodec/entropy/context_model.h"
#include "ccodec/entropy/quantize.h"
#include "ccodec/pqf.h"
#include "ccodec/tensor/param.h"
#include "ccodec/tensor/rng.h"
#include "ccodec/transform.h"

namespace ccodec {

template <typename T>
class CompressionModel {
 public:
  CompressionModel(const ArchConfig& cfg, uint64_t seed) : cfg_(cfg) {
    cfg_.Validate();
    Rng rng(seed);
    analysis_ = AnalysisTransform<T>(store_, "analysis", cfg_, rng);
    hyper_encoder_ = HyperEncoder<T>(store_, "hyper_enc", cfg_, rng);
    hyper_mean_ = HyperDecoder<T>(store_, "hyper_mean", cfg_, rng);
    hyper_scale_ = HyperDecoder<T>(store_, "hyper_scale", cfg_, rng);
    hyper_latent_ = HyperDecoder<T>(store_, "hyper_latent", cfg_, rng);
    context_ = ContextModel<T>(store_, "context", cfg_, rng);
    candidates_ = CandidateNet<T>(store_, "pqf", cfg_.latent_channels, cfg_.candidate_hidden(),
                                  cfg_.pqf_candidates, rng);
    fuse_ = LinearLayer<T>(store_, "fuse", 2 * cfg_.latent_channels, cfg_.latent_channels, rng);
    synthesis_ = SynthesisTransform<T>(store_, "synthesis", cfg_, rng);
    z_mean_ = &store_.AddConstant("z_prior.mean", {cfg_.hyper_channels}, T(0));
    z_raw_scale_ = &store_.AddConstant("z_prior.raw_scale", {cfg_.hyper_channels}, T(1));
  }

  CompressionModel(const CompressionModel&) = delete;
  CompressionModel& operator=(const CompressionModel&) = delete;

  const ArchConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return store_; }
  const ParamStore<T>& params() const { return store_; }

  const AnalysisTransform<T>& analysis() const { return analysis_; }
  const SynthesisTransform<T>& synthesis() const { return synthesis_; }
  const HyperEncoder<T>& hyper_encoder() const { return hyper_encoder_; }
  const HyperDecoder<T>& hyper_mean() const { return hyper_mean_; }
  const HyperDecoder<T>& hyper_scale() const { return hyper_scale_; }
  const HyperDecoder<T>& hyper_latent() const { return hyper_latent_; }
  const ContextModel<T>& context() const { return context_; }
  const CandidateNet<T>& candidates() const { return candidates_; }

  // Per-channel factorized prior of z, broadcast to c x h x w.
  GaussianParams<T> ZPrior(Tape<T>& t, size_t h, size_t w) const {
    const size_t C = cfg_.hyper_channels;
    Var<T> mu = FromParam(t, *z_mean_, C, 1, 1);
    Var<T> raw = FromParam(t, *z_raw_scale_, C, 1, 1);
    Var<T> ones = t.Constant(Grid<T>(C, h, w, T(1)));
    return {MulBroadcast(t, ones, mu), ScaleFromRaw(t, MulBroadcast(t, ones, raw))};
  }

  // Value of the z prior without a tape (codec use).
  T ZMean(size_t c) const { return z_mean_->value[c]; }
  T ZScale(size_t c) const {
    return static_cast<T>(kSigmaMin) + SoftplusScalar(z_raw_scale_->value[c]);
  }

  // concat(y_tilde, latent_feature) -> 1x1 conv back to M channels.
  Var<T> Fuse(Tape<T>& t, const Var<T>& y_tilde, const Var<T>& latent_feature) const {
    return fuse_(t, Concat(t, {y_tilde, latent_feature}));
  }

 private:
  ArchConfig cfg_;
  ParamStore<T> store_;
  AnalysisTransform<T> analysis_;
  HyperEncoder<T> hyper_encoder_;
  HyperDecoder<T> hyper_mean_;
  HyperDecoder<T> hyper_scale_;
  HyperDecoder<T> hyper_latent_;
  ContextModel<T> context_;
  CandidateNet<T> candidates_;
  LinearLayer<T> fuse_;
  SynthesisTransform<T> synthesis_;
  Param<T>* z_mean_ = nullptr;
  Param<T>* z_raw_scale_ = nullptr;
};

struct LossWeights {
  double lambda = 0.0018;
  double lambda_pqf = 1.0;
  double dsq_k = 10.0;
};

template <typename T>
struct LossTerms {
  Var<T> total;
  double rate_bpp = 0;   // R
  double distortion = 0;  // D, MSE on the [0, 1] scale
  double pqf = 0;         // L_PQF per pixel
};

// Training objective on one padded image (3 x H x W in [0, 1]):
//   L = R + lambda * 255^2 * D + lambda_pqf * L_PQF / (H W)
// R in bits per pixel from U-Q noisy latents, decoder path fed with the DS-Q
// latent, and the PQF term on the detached quantization error.
template <typename T>
LossTerms<T> TrainingLoss(Tape<T>& t, const CompressionModel<T>& m, const Grid<T>& image,
                          const LossWeights& lw, Rng& rng) {
  const double pixels = double(image.plane());
  Var<T> x = t.Constant(image);
  Var<T> y = m.analysis()(t, image);
  Var<T> z = m.hyper_encoder()(t, y);
  Var<T> z_noisy = UniversalQuantize(t, z, rng);
  GaussianParams<T> zp = m.ZPrior(t, z.height(), z.width());
  Var<T> z_bits = GaussianBits(t, z_noisy, zp.mu, zp.sigma);
  const size_t h = y.height(), w = y.width();
  Var<T> mean_base = m.hyper_mean()(t, z_noisy, h, w);
  Var<T> raw_base = m.hyper_scale()(t, z_noisy, h, w);
  Var<T> latent_feature = m.hyper_latent()(t, z_noisy, h, w);
  Var<T> y_noisy = UniversalQuantize(t, y, rng);
  GaussianParams<T> yp = m.context().Forward(t, mean_base, raw_base, y_noisy);
  Var<T> y_bits = GaussianBits(t, y_noisy, yp.mu, yp.sigma);
  // mu + dsq(y - mu)
  Var<T> y_soft = Add(t, yp.mu, Dsq(t, Sub(t, y, yp.mu), static_cast<T>(lw.dsq_k)));
  const size_t N = m.config().pqf_candidates;
  Var<T> cand = m.candidates()(t, y_soft);
  Var<T> eps = Sub(t, y, y_soft);
  Var<T> coeffs = LsCoefficients(t, cand, eps, N);
  Var<T> y_tilde = ApplyPqf(t, y_soft, cand, coeffs, N);
  Var<T> pqf = PqfLoss(t, cand, Detach(t, eps), N);
  Var<T> x_hat = m.synthesis()(t, m.Fuse(t, y_tilde, latent_feature));
  Var<T> dist = MeanSquaredError(t, x_hat, x);
  Var<T> rate = Scale(t, Add(t, y_bits, z_bits), static_cast<T>(1.0 / pixels));
  LossTerms<T> out;
  out.total = Add(t, Add(t, rate, Scale(t, dist, static_cast<T>(lw.lambda * 255.0 * 255.0))),
                  Scale(t, pqf, static_cast<T>(lw.lambda_pqf / pixels)));
  out.rate_bpp = double(rate.value()[0]);
  out.distortion = double(dist.value()[0]);
  out.pqf = double(pqf.value()[0]) / pixels;
  return out;
}

}  // namespace ccodec

#endif  // CCODEC_MODEL_H_
