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

// Integer-only range coder. 64-bit low/range, 32-bit renormalization with
// words written most significant byte first, carries propagated into the
// already written bytes. A finished stream is 8 + 4*k bytes.

#ifndef CCODEC_ENTROPY_RANGE_CODER_H_
#define CCODEC_ENTROPY_RANGE_CODER_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ccodec/entropy/freq_table.h"

namespace ccodec {

// Any failure to parse a stream. `offset` is the byte position at which the
// problem was detected, relative to the start of the enclosing buffer.
class DecodeError : public std::runtime_error {
 public:
  enum class Kind { kTruncated, kCorrupt, kBadMagic, kBadVersion, kModelMismatch };

  DecodeError(Kind kind, size_t offset, const std::string& what);

  Kind kind() const { return kind_; }
  size_t offset() const { return offset_; }

 private:
  Kind kind_;
  size_t offset_;
};

const char* DecodeErrorKindName(DecodeError::Kind kind);

class RangeEncoder {
 public:
  RangeEncoder() = default;

  // Codes `symbol`, which must lie in the table.
  void Encode(const FreqTable& table, int32_t symbol);
  // Codes the interval [cum, cum + freq) of a 2^16 total.
  void EncodeInterval(uint32_t cum, uint32_t freq);

  // Writes the final 8 bytes and returns the stream. The encoder is left
  // empty.
  std::vector<uint8_t> Finish();

 private:
  void PropagateCarry();

  uint64_t low_ = 0;
  uint64_t range_ = ~uint64_t{0};
  std::vector<uint8_t> out_;
};

class RangeDecoder {
 public:
  // `base_offset` is added to the offsets of reported errors.
  explicit RangeDecoder(std::span<const uint8_t> data, size_t base_offset = 0);

  int32_t Decode(const FreqTable& table);

  // Bytes consumed so far.
  size_t position() const { return pos_; }

 private:
  uint32_t ReadWord();

  std::span<const uint8_t> data_;
  size_t base_;
  size_t pos_ = 0;
  uint64_t code_ = 0;
  uint64_t range_ = ~uint64_t{0};
};

}  // namespace ccodec

#endif  // CCODEC_ENTROPY_RANGE_CODER_H_
