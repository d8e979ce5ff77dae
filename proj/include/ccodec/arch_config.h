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

#ifndef CCODEC_ARCH_CONFIG_H_
#define CCODEC_ARCH_CONFIG_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ccodec {

inline constexpr size_t kStages = 4;
inline constexpr size_t kHyperChannels = 192;
inline constexpr double kSigmaMin = 0.11;
// Images are padded to a multiple of this before analysis.
inline constexpr size_t kPadMultiple = 16;

struct ArchConfig {
  std::array<size_t, kStages> stage_channels{96, 144, 192, 192};
  std::array<size_t, kStages> stage_depths{1, 2, 4, 2};
  size_t latent_channels = 192;  // M; equals stage_channels[3]
  size_t hyper_channels = kHyperChannels;
  size_t cluster_rows = 2;
  size_t cluster_cols = 2;
  bool scalar_gamma = false;
  size_t block_mlp_ratio = 4;
  size_t down_mlp_ratio = 2;
  size_t spatial_attention_kernel = 7;
  size_t channel_attention_reduction = 4;
  size_t pqf_candidates = 2;  // N
  size_t pqf_hidden = 0;      // 0 means latent_channels
  std::vector<size_t> group_sizes{16, 16, 32, 64, 64};
  bool spatial_context = true;  // checkerboard anchors inside each group
  double layer_norm_eps = 1e-6;

  static ArchConfig Default() { return ArchConfig(); }
  // Narrow configuration used for toy training and fast tests.
  static ArchConfig Toy();

  size_t clusters() const { return cluster_rows * cluster_cols; }
  size_t candidate_hidden() const { return pqf_hidden ? pqf_hidden : latent_channels; }

  // Throws std::invalid_argument describing the first violated constraint.
  void Validate() const;

  // Canonical JSON text (sorted keys, no whitespace).
  std::string ToJson() const;
  static ArchConfig FromJson(const std::string& text);

  // CRC-32 of the canonical JSON.
  uint32_t Hash() const;

  bool operator==(const ArchConfig&) const = default;
};

// Default channel-group split for a latent width: the 16/16/32/64/64 split
// when M == 192, otherwise M scaled proportionally with the remainder in the
// last group.
std::vector<size_t> DefaultGroupSizes(size_t latent_channels);

}  // namespace ccodec

#endif  // CCODEC_ARCH_CONFIG_H_
