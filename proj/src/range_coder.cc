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

#include "ccodec/entropy/range_coder.h"

#include <algorithm>

namespace ccodec {

namespace {

constexpr uint64_t kRenormBound = uint64_t{1} << 32;

}  // namespace

DecodeError::DecodeError(Kind kind, size_t offset, const std::string& what)
    : std::runtime_error(std::string(DecodeErrorKindName(kind)) + " at byte " +
                         std::to_string(offset) + ": " + what),
      kind_(kind),
      offset_(offset) {}

const char* DecodeErrorKindName(DecodeError::Kind kind) {
  switch (kind) {
    case DecodeError::Kind::kTruncated:
      return "truncated stream";
    case DecodeError::Kind::kCorrupt:
      return "corrupt stream";
    case DecodeError::Kind::kBadMagic:
      return "bad magic";
    case DecodeError::Kind::kBadVersion:
      return "unsupported version";
    case DecodeError::Kind::kModelMismatch:
      return "model mismatch";
  }
  return "decode error";
}

void RangeEncoder::Encode(const FreqTable& table, int32_t symbol) {
  if (!table.Contains(symbol)) {
    throw std::out_of_range("range coder: symbol " + std::to_string(symbol) +
                            " outside table range");
  }
  EncodeInterval(table.Cum(symbol), table.Freq(symbol));
}

void RangeEncoder::EncodeInterval(uint32_t cum, uint32_t freq) {
  const uint64_t r = range_ >> kFreqBits;
  const uint64_t old = low_;
  low_ += r * cum;
  if (low_ < old) PropagateCarry();
  range_ = r * freq;
  while (range_ < kRenormBound) {
    const uint32_t word = static_cast<uint32_t>(low_ >> 32);
    out_.push_back(static_cast<uint8_t>(word >> 24));
    out_.push_back(static_cast<uint8_t>(word >> 16));
    out_.push_back(static_cast<uint8_t>(word >> 8));
    out_.push_back(static_cast<uint8_t>(word));
    low_ <<= 32;
    range_ <<= 32;
  }
}

void RangeEncoder::PropagateCarry() {
  for (auto it = out_.rbegin(); it != out_.rend(); ++it) {
    if (++*it != 0) return;
  }
  // The coded interval never leaves [0, 1), so a carry cannot run off the
  // front of the stream.
  throw std::logic_error("range coder: carry past start of stream");
}

std::vector<uint8_t> RangeEncoder::Finish() {
  for (int shift = 56; shift >= 0; shift -= 8) out_.push_back(static_cast<uint8_t>(low_ >> shift));
  std::vector<uint8_t> out = std::move(out_);
  out_.clear();
  low_ = 0;
  range_ = ~uint64_t{0};
  return out;
}

RangeDecoder::RangeDecoder(std::span<const uint8_t> data, size_t base_offset)
    : data_(data), base_(base_offset) {
  code_ = uint64_t{ReadWord()} << 32;
  code_ |= ReadWord();
}

uint32_t RangeDecoder::ReadWord() {
  if (pos_ > data_.size() || data_.size() - pos_ < 4) {
    throw DecodeError(DecodeError::Kind::kTruncated, base_ + pos_,
                      "range decoder read past end of substream");
  }
  uint32_t w = 0;
  for (int i = 0; i < 4; ++i) w = (w << 8) | data_[pos_ + i];
  pos_ += 4;
  return w;
}

int32_t RangeDecoder::Decode(const FreqTable& table) {
  const uint64_t r = range_ >> kFreqBits;
  const uint64_t v = code_ / r;
  if (v >= kFreqTotal) {
    throw DecodeError(DecodeError::Kind::kCorrupt, base_ + pos_,
                      "range decoder value outside the coded interval");
  }
  // Last cum entry <= v.
  auto it = std::upper_bound(table.cum.begin(), table.cum.end(), static_cast<uint32_t>(v));
  const size_t idx = static_cast<size_t>(it - table.cum.begin()) - 1;
  code_ -= r * table.cum[idx];
  range_ = r * table.freq[idx];
  while (range_ < kRenormBound) {
    code_ = (code_ << 32) | ReadWord();
    range_ <<= 32;
  }
  return table.min_symbol + static_cast<int32_t>(idx);
}

}  // namespace ccodec
