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


// Weights files: one or more trained (or seeded) models, each bound to a
// quality preset. Layout, little-endian:
//   "CCWT" | u32 version | u32 json size | json metadata | f32 tensor data |
//   u32 crc32 of everything before
// The metadata lists every model's preset, lambda, architecture and tensor
// table ("q<k>/<param name>", shape) in the order the data follows.

#ifndef CCODEC_CODEC_WEIGHTS_IO_H_
#define CCODEC_CODEC_WEIGHTS_IO_H_

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ccodec/arch_config.h"
#include "ccodec/model.h"

namespace ccodec {

inline constexpr uint32_t kWeightsVersion = 1;
inline constexpr int kNumPresets = 6;
// Rate-distortion weights of presets q1..q6 (MSE training).
inline constexpr std::array<double, kNumPresets> kPresetLambdas{0.0018, 0.0035, 0.0067,
                                                                0.0130, 0.0250, 0.0483};

// 1..6 for a preset lambda, 0 otherwise.
int PresetForLambda(double lambda);

struct ModelEntry {
  int preset = 0;  // 0: custom lambda
  double lambda = 0;
  std::unique_ptr<CompressionModel<float>> model;
};

struct WeightsFile {
  std::vector<ModelEntry> models;

  // preset 0 picks the first model. Throws std::out_of_range when absent.
  const ModelEntry& Select(int preset) const;
};

std::vector<uint8_t> SerializeWeights(const WeightsFile& w);
// Throws IoError on any malformed input.
WeightsFile ParseWeights(const std::vector<uint8_t>& bytes);

void SaveWeights(const std::string& path, const WeightsFile& w);
WeightsFile LoadWeights(const std::string& path);

// Freshly initialized models for the given presets; preset k uses a seed
// derived from (seed, k).
WeightsFile SeededWeights(const ArchConfig& arch, const std::vector<int>& presets, uint64_t seed);

// Low 32 bits: architecture hash. High 32 bits: CRC-32 of all parameter
// values in store order.
uint64_t ModelHash(const CompressionModel<float>& m);

}  // namespace ccodec

#endif  // CCODEC_CODEC_WEIGHTS_IO_H_
