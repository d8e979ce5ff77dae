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


#include "ccodec/codec/container.h"

#include <cstring>
#include <stdexcept>
#include <string>

#include "ccodec/codec/bytes.h"
#include "ccodec/codec/image_io.h"
#include "ccodec/arch_config.h"

namespace ccodec {

namespace {

constexpr uint8_t kMagic[4] = {'C', 'C', 'I', 'C'};
constexpr uint8_t kKnownFlags = kFlagPqf | kFlagRawCoefficients;

// Empty when valid.
std::string HeaderProblem(const Bitstream& b) {
  if (b.flags & ~kKnownFlags) return "unknown flags";
  if (b.raw_coefficients() && !b.pqf()) return "raw coefficient flag without filtering";
  if (b.height == 0 || b.width == 0 || b.height > kMaxImageSide || b.width > kMaxImageSide) {
    return "image size out of range";
  }
  if (b.padded_height != RoundUp(b.height, kPadMultiple) ||
      b.padded_width != RoundUp(b.width, kPadMultiple)) {
    return "padded size inconsistent with image size";
  }
  if (b.latent_channels == 0) return "zero latent channels";
  if (b.pqf() && (b.candidates == 0 || b.candidates > kMaxCandidates)) return "bad candidate count";
  if (!b.pqf() && b.candidates != 0) return "candidate count without filtering";
  if (b.group_streams.empty() || b.group_streams.size() > b.latent_channels) {
    return "bad channel group count";
  }
  return "";
}

}  // namespace

size_t Bitstream::CoefficientBytes() const {
  if (!pqf()) return 0;
  const size_t count = size_t{latent_channels} * candidates;
  return raw_coefficients() ? count * 4 : (count + 1) / 2;
}

std::vector<uint8_t> SerializeBitstream(const Bitstream& b) {
  if (b.version != kBitstreamVersion) throw std::invalid_argument("bitstream: unsupported version");
  const std::string problem = HeaderProblem(b);
  if (!problem.empty()) throw std::invalid_argument("bitstream: " + problem);
  if (b.coefficients.size() != b.CoefficientBytes()) {
    throw std::invalid_argument("bitstream: coefficient block has the wrong size");
  }
  ByteWriter w;
  w.Bytes(kMagic);
  w.U8(b.version);
  w.U8(b.preset);
  w.U8(b.flags);
  w.U8(0);
  w.U32(b.height);
  w.U32(b.width);
  w.U32(b.padded_height);
  w.U32(b.padded_width);
  w.U64(b.model_hash);
  w.U16(b.latent_channels);
  if (b.pqf()) {
    w.U8(b.candidates);
    w.Bytes(b.coefficients);
  }
  w.U32(static_cast<uint32_t>(b.z_stream.size()));
  w.Bytes(b.z_stream);
  w.U8(static_cast<uint8_t>(b.group_streams.size()));
  for (const auto& g : b.group_streams) {
    w.U32(static_cast<uint32_t>(g.size()));
    w.Bytes(g);
  }
  w.U32(Crc32(w.bytes()));
  return w.Take();
}

Bitstream ParseBitstream(std::span<const uint8_t> data, BitstreamLayout* layout) {
  using Kind = DecodeError::Kind;
  ByteReader r(data);
  if (data.size() < 4 || std::memcmp(data.data(), kMagic, 4) != 0) {
    throw DecodeError(Kind::kBadMagic, 0, "not a ccodec bitstream");
  }
  r.Bytes(4);
  Bitstream b;
  b.version = r.U8();
  if (b.version != kBitstreamVersion) {
    throw DecodeError(Kind::kBadVersion, 4, "version " + std::to_string(b.version));
  }
  b.preset = r.U8();
  b.flags = r.U8();
  if ((b.flags & ~kKnownFlags) || (b.raw_coefficients() && !b.pqf())) {
    throw DecodeError(Kind::kCorrupt, 6, "invalid flags");
  }
  if (r.U8() != 0) throw DecodeError(Kind::kCorrupt, 7, "reserved byte is not zero");
  b.height = r.U32();
  b.width = r.U32();
  b.padded_height = r.U32();
  b.padded_width = r.U32();
  b.model_hash = r.U64();
  b.latent_channels = r.U16();
  if (b.pqf()) {
    const size_t at = r.position();
    b.candidates = r.U8();
    if (b.candidates == 0 || b.candidates > kMaxCandidates) {
      throw DecodeError(Kind::kCorrupt, at, "bad candidate count");
    }
    auto c = r.Bytes(b.CoefficientBytes());
    b.coefficients.assign(c.begin(), c.end());
  }
  BitstreamLayout lay;
  const uint32_t z_size = r.U32();
  lay.z_offset = r.position();
  auto z = r.Bytes(z_size);
  b.z_stream.assign(z.begin(), z.end());
  const size_t groups_at = r.position();
  const uint8_t groups = r.U8();
  if (groups == 0) throw DecodeError(Kind::kCorrupt, groups_at, "no channel groups");
  for (uint8_t g = 0; g < groups; ++g) {
    const uint32_t size = r.U32();
    lay.group_offsets.push_back(r.position());
    auto s = r.Bytes(size);
    b.group_streams.emplace_back(s.begin(), s.end());
  }
  const size_t body = r.position();
  const uint32_t crc = r.U32();
  if (r.remaining() != 0) throw DecodeError(Kind::kCorrupt, body + 4, "trailing bytes after checksum");
  if (Crc32(data.first(body)) != crc) throw DecodeError(Kind::kCorrupt, body, "checksum mismatch");
  const std::string problem = HeaderProblem(b);
  if (!problem.empty()) throw DecodeError(Kind::kCorrupt, 8, problem);
  if (layout) *layout = std::move(lay);
  return b;
}

}  // namespace ccodec
