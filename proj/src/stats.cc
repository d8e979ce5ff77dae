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


#include "ccodec/codec/stats.h"

#include <stdexcept>

#include "json.hpp"

namespace ccodec {

std::string ModelStats::ToJson() const {
  nlohmann::ordered_json j;
  j["parameters"] = parameters;
  j["reference_height"] = height;
  j["reference_width"] = width;
  j["macs"] = macs;
  j["macs_per_pixel"] = macs_per_pixel;
  nlohmann::ordered_json p, m;
  for (const auto& [k, v] : parameters_by_part) p[k] = v;
  for (const auto& [k, v] : macs_by_part) m[k] = v;
  j["parameters_by_part"] = p;
  j["macs_by_part"] = m;
  return j.dump(2);
}

ModelStats ComputeStats(const CompressionModel<float>& m, size_t height, size_t width) {
  if (height == 0 || width == 0 || height % kPadMultiple || width % kPadMultiple) {
    throw std::invalid_argument("stats: reference size must be a positive multiple of 16");
  }
  ModelStats s;
  s.height = height;
  s.width = width;
  s.parameters = CountParameters(m.params());
  for (const Param<float>& p : m.params()) {
    const std::string part = p.name.substr(0, p.name.find('.'));
    if (s.parameters_by_part.empty() || s.parameters_by_part.back().first != part) {
      s.parameters_by_part.emplace_back(part, 0);
    }
    s.parameters_by_part.back().second += p.size();
  }

  Tape<float> t(false);
  uint64_t last = 0;
  auto mark = [&](const std::string& part) {
    s.macs_by_part.emplace_back(part, t.macs() - last);
    last = t.macs();
  };
  Var<float> y = m.analysis()(t, Grid<float>(3, height, width, 0.5f));
  mark("analysis");
  Var<float> z = m.hyper_encoder()(t, y);
  mark("hyper_encoder");
  const size_t h = y.height(), w = y.width();
  Var<float> mean = m.hyper_mean()(t, z, h, w);
  Var<float> raw = m.hyper_scale()(t, z, h, w);
  Var<float> feature = m.hyper_latent()(t, z, h, w);
  mark("hyper_decoders");
  GaussianParams<float> gp = m.context().Forward(t, mean, raw, y);
  mark("context");
  const size_t N = m.config().pqf_candidates;
  Var<float> cand = m.candidates()(t, y);
  mark("pqf");
  Var<float> filtered = ApplyPqf(t, y, cand, t.Constant(Grid<float>(y.channels(), N, 1)), N);
  Var<float> fused = m.Fuse(t, filtered, feature);
  mark("fuse");
  m.synthesis()(t, fused);
  mark("synthesis");
  s.macs = t.macs();
  s.macs_per_pixel = double(s.macs) / double(height * width);
  return s;
}

}  // namespace ccodec
