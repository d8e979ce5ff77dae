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


#include "ccodec/codec/weights_io.h"

#include <zlib.h>

#include <cmath>
#include <stdexcept>

#include "ccodec/codec/bytes.h"
#include "ccodec/codec/image_io.h"
#include "json.hpp"

namespace ccodec {

namespace {

constexpr char kMagic[4] = {'C', 'C', 'W', 'T'};

std::string TensorName(int preset, const std::string& name) {
  return "q" + std::to_string(preset) + "/" + name;
}

}  // namespace

int PresetForLambda(double lambda) {
  for (int k = 0; k < kNumPresets; ++k) {
    if (std::abs(kPresetLambdas[k] - lambda) < 1e-12) return k + 1;
  }
  return 0;
}

const ModelEntry& WeightsFile::Select(int preset) const {
  if (models.empty()) throw std::out_of_range("weights file holds no models");
  if (preset == 0) return models.front();
  for (const ModelEntry& e : models) {
    if (e.preset == preset) return e;
  }
  throw std::out_of_range("weights file has no model for preset q" + std::to_string(preset));
}

std::vector<uint8_t> SerializeWeights(const WeightsFile& w) {
  nlohmann::json meta;
  meta["format"] = "ccodec-weights";
  meta["models"] = nlohmann::json::array();
  for (const ModelEntry& e : w.models) {
    nlohmann::json m;
    m["preset"] = e.preset;
    m["lambda"] = e.lambda;
    m["arch"] = nlohmann::json::parse(e.model->config().ToJson());
    m["tensors"] = nlohmann::json::array();
    for (const Param<float>& p : e.model->params()) {
      m["tensors"].push_back({{"name", TensorName(e.preset, p.name)}, {"shape", p.shape}});
    }
    meta["models"].push_back(std::move(m));
  }
  const std::string text = meta.dump();
  ByteWriter out;
  out.Bytes(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(kMagic), 4));
  out.U32(kWeightsVersion);
  out.U32(static_cast<uint32_t>(text.size()));
  out.Bytes(text);
  for (const ModelEntry& e : w.models) {
    for (const Param<float>& p : e.model->params()) {
      for (float v : p.value) out.F32(v);
    }
  }
  out.U32(Crc32(out.bytes()));
  return out.Take();
}

WeightsFile ParseWeights(const std::vector<uint8_t>& bytes) {
  try {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
      throw IoError("weights: bad magic");
    }
    const std::span<const uint8_t> body(bytes.data(), bytes.size() - 4);
    ByteReader tail(std::span<const uint8_t>(bytes).subspan(bytes.size() - 4));
    if (Crc32(body) != tail.U32()) throw IoError("weights: checksum mismatch");
    ByteReader r(body);
    r.Bytes(4);
    if (r.U32() != kWeightsVersion) throw IoError("weights: unsupported version");
    const uint32_t json_size = r.U32();
    auto text = r.Bytes(json_size);
    const nlohmann::json meta = nlohmann::json::parse(text.begin(), text.end());
    if (meta.value("format", "") != "ccodec-weights") throw IoError("weights: unknown format");
    WeightsFile w;
    for (const auto& m : meta.at("models")) {
      ModelEntry e;
      e.preset = m.at("preset").get<int>();
      e.lambda = m.at("lambda").get<double>();
      const ArchConfig arch = ArchConfig::FromJson(m.at("arch").dump());
      e.model = std::make_unique<CompressionModel<float>>(arch, 0);
      ParamStore<float>& store = e.model->params();
      const auto& tensors = m.at("tensors");
      if (tensors.size() != store.size()) throw IoError("weights: tensor count does not match architecture");
      size_t i = 0;
      for (Param<float>& p : store) {
        const auto& t = tensors[i++];
        if (t.at("name").get<std::string>() != TensorName(e.preset, p.name) ||
            t.at("shape").get<std::vector<size_t>>() != p.shape) {
          throw IoError("weights: tensor " + t.at("name").get<std::string>() +
                        " does not match parameter " + p.name);
        }
      }
      w.models.push_back(std::move(e));
    }
    for (ModelEntry& e : w.models) {
      for (Param<float>& p : e.model->params()) {
        for (float& v : p.value) v = r.F32();
      }
    }
    if (r.remaining() != 0) throw IoError("weights: trailing data");
    return w;
  } catch (const IoError&) {
    throw;
  } catch (const std::exception& e) {
    throw IoError(std::string("weights: malformed file (") + e.what() + ")");
  }
}

void SaveWeights(const std::string& path, const WeightsFile& w) { WriteFileBytes(path, SerializeWeights(w)); }

WeightsFile LoadWeights(const std::string& path) { return ParseWeights(ReadFileBytes(path)); }

WeightsFile SeededWeights(const ArchConfig& arch, const std::vector<int>& presets, uint64_t seed) {
  WeightsFile w;
  for (int k : presets) {
    if (k < 1 || k > kNumPresets) throw std::invalid_argument("preset must be in 1..6");
    ModelEntry e;
    e.preset = k;
    e.lambda = kPresetLambdas[k - 1];
    e.model = std::make_unique<CompressionModel<float>>(arch, DeriveSeed(seed, uint64_t(k)));
    w.models.push_back(std::move(e));
  }
  return w;
}

uint64_t ModelHash(const CompressionModel<float>& m) {
  uLong crc = crc32(0L, Z_NULL, 0);
  for (const Param<float>& p : m.params()) {
    crc = crc32(crc, reinterpret_cast<const Bytef*>(p.name.data()), static_cast<uInt>(p.name.size()));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(p.value.data()),
                static_cast<uInt>(p.value.size() * sizeof(float)));
  }
  return uint64_t{m.config().Hash()} | (uint64_t{static_cast<uint32_t>(crc)} << 32);
}

}  // namespace ccodec
