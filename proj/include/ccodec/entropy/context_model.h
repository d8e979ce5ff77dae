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

// Space-channel context model. The latent is split into uneven channel
// groups coded in order; inside a group, anchor positions ((row+col) even)
// come first and are predicted from the hyper outputs and all earlier
// groups, then the non-anchors, which additionally see the group's decoded
// anchors through a 5x5 convolution. Each step's parameter network is
// 1x1 conv -> GELU -> 1x1 conv and predicts residuals on top of the hyper
// decoder outputs:
//   mu    = mean_base + d_mu
//   sigma = sigma_min + softplus(raw_scale_base + d_s)

#ifndef CCODEC_ENTROPY_CONTEXT_MODEL_H_
#define CCODEC_ENTROPY_CONTEXT_MODEL_H_

#include <numeric>
#include <string>
#include <vector>

#include "ccodec/arch_config.h"
#include "ccodec/clustering.h"
#include "ccodec/tensor/ops.h"
#include "ccodec/tensor/param.h"
#include "ccodec/tensor/tape.h"

namespace ccodec {

inline constexpr size_t kContextKernel = 5;
// Output layers of the parameter networks start small so that a fresh model
// stays close to plain hyperprior coding.
inline constexpr double kContextOutputScale = 0.1;

enum class Phase { kAnchor = 0, kNonAnchor = 1 };

template <typename T>
struct GaussianParams {
  Var<T> mu;
  Var<T> sigma;
};

template <typename T>
Var<T> ScaleFromRaw(Tape<T>& t, const Var<T>& raw) {
  return AddScalar(t, Softplus(t, raw), static_cast<T>(kSigmaMin));
}

template <typename T>
class ContextModel {
 public:
  ContextModel() = default;
  ContextModel(ParamStore<T>& store, const std::string& name, const ArchConfig& cfg, Rng& rng)
      : groups_(cfg.group_sizes), spatial_(cfg.spatial_context), latent_(cfg.latent_channels) {
    offsets_.assign(groups_.size() + 1, 0);
    std::partial_sum(groups_.begin(), groups_.end(), offsets_.begin() + 1);
    for (size_t g = 0; g < groups_.size(); ++g) {
      const size_t size = groups_[g], hidden = 2 * size;
      const size_t base_in = 2 * latent_ + offsets_[g];
      const std::string gn = name + ".group" + std::to_string(g);
      Net anchor;
      anchor.fc1 = LinearLayer<T>(store, gn + ".anchor.fc1", base_in, hidden, rng);
      anchor.fc2 = LinearLayer<T>(store, gn + ".anchor.fc2", hidden, 2 * size, rng,
                                  kContextOutputScale);
      anchor_.push_back(anchor);
      if (spatial_) {
        Net na;
        na.ctx_kernel = &store.AddUniform(gn + ".ctx.w", {hidden, size, kContextKernel, kContextKernel},
                                          size * kContextKernel * kContextKernel, rng);
        na.ctx_bias = &store.AddConstant(gn + ".ctx.b", {hidden}, T(0));
        na.fc1 = LinearLayer<T>(store, gn + ".nonanchor.fc1", base_in + hidden, hidden, rng);
        na.fc2 = LinearLayer<T>(store, gn + ".nonanchor.fc2", hidden, 2 * size, rng,
                                kContextOutputScale);
        nonanchor_.push_back(na);
      }
    }
  }

  size_t groups() const { return groups_.size(); }
  size_t group_size(size_t g) const { return groups_[g]; }
  size_t group_offset(size_t g) const { return offsets_[g]; }
  bool spatial() const { return spatial_; }
  size_t phases() const { return spatial_ ? 2 : 1; }

  // Positions coded in a phase, as a 1 x h x w 0/1 grid.
  Grid<T> PhaseMask(size_t h, size_t w, Phase phase) const {
    if (!spatial_) return Grid<T>(1, h, w, T(1));
    return ParityMask<T>(h, w, phase == Phase::kAnchor ? 0 : 1);
  }

  // Gaussian parameters for group g in the given phase, over all positions
  // of the group (only the phase's positions are meaningful). `latent` is
  // M x h x w; only channels of earlier groups and, for non-anchors, the
  // anchor positions of group g are read.
  GaussianParams<T> Step(Tape<T>& t, size_t g, Phase phase, const Var<T>& mean_base,
                         const Var<T>& raw_base, const Var<T>& latent) const {
    const size_t h = latent.height(), w = latent.width();
    std::vector<Var<T>> inputs{mean_base, raw_base};
    if (offsets_[g] > 0) inputs.push_back(SliceChannels(t, latent, 0, offsets_[g]));
    const Net* net = &anchor_[g];
    if (phase == Phase::kNonAnchor) {
      if (!spatial_) throw std::logic_error("context model has no non-anchor phase");
      net = &nonanchor_[g];
      Var<T> anchors = MulBroadcast(t, SliceChannels(t, latent, offsets_[g], groups_[g]),
                                    t.Constant(ParityMask<T>(h, w, 0)));
      inputs.push_back(Conv2d(t, anchors, *net->ctx_kernel, net->ctx_bias, 1, kContextKernel / 2));
    }
    Var<T> delta = net->fc2(t, Gelu(t, net->fc1(t, Concat(t, inputs))));
    const size_t size = groups_[g];
    GaussianParams<T> out;
    out.mu = Add(t, SliceChannels(t, mean_base, offsets_[g], size), SliceChannels(t, delta, 0, size));
    out.sigma = ScaleFromRaw(
        t, Add(t, SliceChannels(t, raw_base, offsets_[g], size), SliceChannels(t, delta, size, size)));
    return out;
  }

  // All steps on a fully known latent (training and rate estimation):
  // parameters of each position come from the step that codes it.
  GaussianParams<T> Forward(Tape<T>& t, const Var<T>& mean_base, const Var<T>& raw_base,
                            const Var<T>& latent) const {
    const size_t h = latent.height(), w = latent.width();
    std::vector<Var<T>> mus, sigmas;
    for (size_t g = 0; g < groups_.size(); ++g) {
      GaussianParams<T> a = Step(t, g, Phase::kAnchor, mean_base, raw_base, latent);
      if (!spatial_) {
        mus.push_back(a.mu);
        sigmas.push_back(a.sigma);
        continue;
      }
      GaussianParams<T> n = Step(t, g, Phase::kNonAnchor, mean_base, raw_base, latent);
      Var<T> am = t.Constant(ParityMask<T>(h, w, 0));
      Var<T> nm = t.Constant(ParityMask<T>(h, w, 1));
      mus.push_back(Add(t, MulBroadcast(t, a.mu, am), MulBroadcast(t, n.mu, nm)));
      sigmas.push_back(Add(t, MulBroadcast(t, a.sigma, am), MulBroadcast(t, n.sigma, nm)));
    }
    return {Concat(t, mus), Concat(t, sigmas)};
  }

  // Last layers of every parameter network, for tests that need the
  // degenerate (plain hyperprior) behaviour.
  std::vector<const LinearLayer<T>*> OutputLayers() const {
    std::vector<const LinearLayer<T>*> out;
    for (const auto& n : anchor_) out.push_back(&n.fc2);
    for (const auto& n : nonanchor_) out.push_back(&n.fc2);
    return out;
  }

 private:
  struct Net {
    Param<T>* ctx_kernel = nullptr;
    Param<T>* ctx_bias = nullptr;
    LinearLayer<T> fc1;
    LinearLayer<T> fc2;
  };

  std::vector<size_t> groups_;
  std::vector<size_t> offsets_;
  bool spatial_ = true;
  size_t latent_ = 0;
  std::vector<Net> anchor_;
  std::vector<Net> nonanchor_;
};

}  // namespace ccodec

#endif  // CCODEC_ENTROPY_CONTEXT_MODEL_H_
