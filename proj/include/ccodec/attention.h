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

// Local gating units applied after the token mixer (spatial) and the channel
// mixer (channel) of each clustering block.

#ifndef CCODEC_ATTENTION_H_
#define CCODEC_ATTENTION_H_

#include <stdexcept>
#include <string>

#include "ccodec/clustering.h"
#include "ccodec/tensor/ops.h"
#include "ccodec/tensor/param.h"
#include "ccodec/tensor/tape.h"

namespace ccodec {

// gate = sigmoid(conv_k([mean_c(x); max_c(x)])), broadcast over channels.
template <typename T>
class SpatialAttention {
 public:
  SpatialAttention() = default;
  SpatialAttention(ParamStore<T>& store, const std::string& name, size_t kernel, Rng& rng) {
    if (kernel % 2 == 0) throw std::invalid_argument("spatial attention kernel must be odd");
    kernel_ = &store.AddUniform(name + ".conv.w", {1, 2, kernel, kernel}, 2 * kernel * kernel, rng);
    bias_ = &store.AddConstant(name + ".conv.b", {1}, T(0));
  }

  Var<T> Gate(Tape<T>& t, const Var<T>& x) const {
    const size_t k = kernel_->dim(2);
    return Sigmoid(t, Conv2d(t, ChannelMeanMax(t, x), *kernel_, bias_, 1, k / 2));
  }

  Var<T> operator()(Tape<T>& t, const Var<T>& x) const { return MulBroadcast(t, x, Gate(t, x)); }

  Param<T>& kernel() const { return *kernel_; }
  Param<T>& bias() const { return *bias_; }

 private:
  Param<T>* kernel_ = nullptr;
  Param<T>* bias_ = nullptr;
};

// gate = sigmoid(expand(gelu(reduce(global_avg_pool(x))))), broadcast over
// positions.
template <typename T>
class ChannelAttention {
 public:
  ChannelAttention() = default;
  ChannelAttention(ParamStore<T>& store, const std::string& name, size_t channels,
                   size_t reduction, Rng& rng) {
    if (reduction == 0 || channels % reduction != 0) {
      throw std::invalid_argument("channel attention reduction " + std::to_string(reduction) +
                                  " must divide " + std::to_string(channels));
    }
    reduce_ = LinearLayer<T>(store, name + ".reduce", channels, channels / reduction, rng);
    expand_ = LinearLayer<T>(store, name + ".expand", channels / reduction, channels, rng);
  }

  Var<T> Gate(Tape<T>& t, const Var<T>& x) const {
    return Sigmoid(t, expand_(t, Gelu(t, reduce_(t, GlobalAvgPool(t, x)))));
  }

  Var<T> operator()(Tape<T>& t, const Var<T>& x) const { return MulBroadcast(t, x, Gate(t, x)); }

  const LinearLayer<T>& reduce() const { return reduce_; }
  const LinearLayer<T>& expand() const { return expand_; }

 private:
  LinearLayer<T> reduce_;
  LinearLayer<T> expand_;
};

}  // namespace ccodec

#endif  // CCODEC_ATTENTION_H_
