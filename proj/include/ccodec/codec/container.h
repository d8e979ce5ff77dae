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


// Compressed-image container. Little-endian layout:
//   "CCIC" | u8 version | u8 preset | u8 flags | u8 reserved (0)
//   u32 height | u32 width | u32 padded height | u32 padded width
//   u64 model hash | u16 latent channels M
//   [u8 N | coefficient block]            only with kFlagPqf
//   u32 z size | z stream
//   u8 group count | per group: u32 size | group stream
//   u32 crc32 of everything before
// The coefficient block holds M*N 4-bit codes, two per byte, low nibble
// first, channel-major; with kFlagRawCoefficients it holds M*N f32 values.

#ifndef CCODEC_CODEC_CONTAINER_H_
#define CCODEC_CODEC_CONTAINER_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ccodec {

inline constexpr uint8_t kBitstreamVersion = 1;
inline constexpr uint8_t kFlagPqf = 1;
inline constexpr uint8_t kFlagRawCoefficients = 2;
inline constexpr size_t kMaxCandidates = 16;

struct Bitstream {
  uint8_t version = kBitstreamVersion;
  uint8_t preset = 0;
  uint8_t flags = 0;
  uint32_t height = 0;
  uint32_t width = 0;
  uint32_t padded_height = 0;
  uint32_t padded_width = 0;
  uint64_t model_hash = 0;
  uint16_t latent_channels = 0;
  uint8_t candidates = 0;
  std::vector<uint8_t> coefficients;
  std::vector<uint8_t> z_stream;
  std::vector<std::vector<uint8_t>> group_streams;

  bool pqf() const { return flags & kFlagPqf; }
  bool raw_coefficients() const { return flags & kFlagRawCoefficients; }
  // Size the coefficient block must have for the header fields.
  size_t CoefficientBytes() const;

  bool operator==(const Bitstream&) const = default;
};

// Byte offsets of the entropy-coded substreams inside the file.
struct BitstreamLayout {
  size_t z_offset = 0;
  std::vector<size_t> group_offsets;
};

// Throws std::invalid_argument for headers the parser would reject.
std::vector<uint8_t> SerializeBitstream(const Bitstream& b);

// Structural validation only (no model needed). Throws DecodeError:
// kBadMagic, kBadVersion, kTruncated when a declared field or length runs
// past the end, kCorrupt for invalid header values, trailing bytes or a
// checksum mismatch.
Bitstream ParseBitstream(std::span<const uint8_t> data, BitstreamLayout* layout = nullptr);

}  // namespace ccodec

#endif  // CCODEC_CODEC_CONTAINER_H_
