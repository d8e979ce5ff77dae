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

#include "ccodec/arch_config.h"

#include <zlib.h>

#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace ccodec {

namespace {

void Require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("invalid architecture: " + what);
}

}  // namespace

ArchConfig ArchConfig::Toy() {
  ArchConfig c;
  c.stage_channels = {16, 24, 32, 32};
  c.stage_depths = {1, 2, 2, 1};
  c.latent_channels = 32;
  c.block_mlp_ratio = 2;
  c.group_sizes = {4, 4, 8, 8, 8};
  return c;
}

std::vector<size_t> DefaultGroupSizes(size_t latent_channels) {
  static constexpr size_t kBase[] = {16, 16, 32, 64, 64};
  std::vector<size_t> g;
  size_t used = 0;
  for (size_t i = 0; i < 5; ++i) {
    size_t s = i + 1 == 5 ? latent_channels - used : kBase[i] * latent_channels / 192;
    if (s == 0) continue;
    g.push_back(s);
    used += s;
  }
  return g;
}

void ArchConfig::Validate() const {
  for (size_t s = 0; s < kStages; ++s) {
    Require(stage_channels[s] > 0, "stage width must be positive");
    Require(stage_channels[s] % channel_attention_reduction == 0,
            "channel attention reduction must divide every stage width");
  }
  Require(stage_channels[kStages - 1] == latent_channels,
          "last stage width must equal the latent width");
  Require(hyper_channels == kHyperChannels, "hyper-latent width must be 192");
  Require(cluster_rows >= 1 && cluster_cols >= 1, "cluster grid must be at least 1x1");
  Require(block_mlp_ratio >= 1 && down_mlp_ratio >= 1, "MLP ratios must be >= 1");
  Require(spatial_attention_kernel % 2 == 1, "spatial attention kernel must be odd");
  Require(pqf_candidates >= 1 && pqf_candidates <= 255, "candidate count must be in [1, 255]");
  Require(!group_sizes.empty(), "at least one channel group");
  Require(std::accumulate(group_sizes.begin(), group_sizes.end(), size_t{0}) == latent_channels,
          "group sizes must sum to the latent width");
  for (size_t g : group_sizes) Require(g > 0, "empty channel group");
  Require(layer_norm_eps > 0, "layer norm epsilon must be positive");
}

std::string ArchConfig::ToJson() const {
  nlohmann::json j;
  j["stage_channels"] = stage_channels;
  j["stage_depths"] = stage_depths;
  j["latent_channels"] = latent_channels;
  j["hyper_channels"] = hyper_channels;
  j["cluster_rows"] = cluster_rows;
  j["cluster_cols"] = cluster_cols;
  j["scalar_gamma"] = scalar_gamma;
  j["block_mlp_ratio"] = block_mlp_ratio;
  j["down_mlp_ratio"] = down_mlp_ratio;
  j["spatial_attention_kernel"] = spatial_attention_kernel;
  j["channel_attention_reduction"] = channel_attention_reduction;
  j["pqf_candidates"] = pqf_candidates;
  j["pqf_hidden"] = pqf_hidden;
  j["group_sizes"] = group_sizes;
  j["spatial_context"] = spatial_context;
  j["layer_norm_eps"] = layer_norm_eps;
  return j.dump();
}

ArchConfig ArchConfig::FromJson(const std::string& text) {
  ArchConfig c;
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    c.stage_channels = j.at("stage_channels").get<std::array<size_t, kStages>>();
    c.stage_depths = j.at("stage_depths").get<std::array<size_t, kStages>>();
    c.latent_channels = j.at("latent_channels").get<size_t>();
    c.hyper_channels = j.at("hyper_channels").get<size_t>();
    c.cluster_rows = j.at("cluster_rows").get<size_t>();
    c.cluster_cols = j.at("cluster_cols").get<size_t>();
    c.scalar_gamma = j.at("scalar_gamma").get<bool>();
    c.block_mlp_ratio = j.at("block_mlp_ratio").get<size_t>();
    c.down_mlp_ratio = j.at("down_mlp_ratio").get<size_t>();
    c.spatial_attention_kernel = j.at("spatial_attention_kernel").get<size_t>();
    c.channel_attention_reduction = j.at("channel_attention_reduction").get<size_t>();
    c.pqf_candidates = j.at("pqf_candidates").get<size_t>();
    c.pqf_hidden = j.at("pqf_hidden").get<size_t>();
    c.group_sizes = j.at("group_sizes").get<std::vector<size_t>>();
    c.spatial_context = j.at("spatial_context").get<bool>();
    c.layer_norm_eps = j.at("layer_norm_eps").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed architecture description: ") + e.what());
  }
  c.Validate();
  return c;
}

uint32_t ArchConfig::Hash() const {
  const std::string s = ToJson();
  return static_cast<uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(s.data()), static_cast<uInt>(s.size())));
}

}  // namespace ccodec
