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


// Parameter and multiply-accumulate counts. MACs come from the counters of
// the linear and convolution layers during one full encode plus decode
// pass (analysis, hyper networks, context steps, filter, synthesis) at a
// reference size.

#ifndef CCODEC_CODEC_STATS_H_
#define CCODEC_CODEC_STATS_H_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ccodec/model.h"

namespace ccodec {

struct ModelStats {
  size_t parameters = 0;
  size_t height = 0;
  size_t width = 0;
  uint64_t macs = 0;
  double macs_per_pixel = 0;
  // Top-level parameter prefix -> count, in model order.
  std::vector<std::pair<std::string, size_t>> parameters_by_part;
  std::vector<std::pair<std::string, uint64_t>> macs_by_part;

  std::string ToJson() const;
};

template <typename T>
size_t CountParameters(const ParamStore<T>& store) {
  return store.TotalElements();
}

// `height` and `width` must be multiples of 16.
ModelStats ComputeStats(const CompressionModel<float>& m, size_t height = 256, size_t width = 256);

}  // namespace ccodec

#endif  // CCODEC_CODEC_STATS_H_
