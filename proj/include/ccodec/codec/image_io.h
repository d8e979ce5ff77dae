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


// 8-bit RGB images: PPM (P6) and PNG files, conversion to and from the
// [0, 1] planar grids the transforms work on.

#ifndef CCODEC_CODEC_IMAGE_IO_H_
#define CCODEC_CODEC_IMAGE_IO_H_

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ccodec/tensor/grid.h"

namespace ccodec {

// File missing, unreadable or in an unsupported format.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Image {
  size_t width = 0;
  size_t height = 0;
  std::vector<uint8_t> rgb;  // interleaved, row-major

  Image() = default;
  Image(size_t w, size_t h) : width(w), height(h), rgb(w * h * 3, 0) {}
  uint8_t& at(size_t x, size_t y, size_t c) { return rgb[(y * width + x) * 3 + c]; }
  uint8_t at(size_t x, size_t y, size_t c) const { return rgb[(y * width + x) * 3 + c]; }
  bool operator==(const Image&) const = default;
};

// Largest side accepted by the readers and the decoder.
inline constexpr size_t kMaxImageSide = 1 << 14;

std::vector<uint8_t> EncodePpm(const Image& img);
Image DecodePpm(const std::vector<uint8_t>& bytes);

std::vector<uint8_t> EncodePng(const Image& img);
Image DecodePng(const std::vector<uint8_t>& bytes);

std::vector<uint8_t> ReadFileBytes(const std::string& path);
void WriteFileBytes(const std::string& path, const std::vector<uint8_t>& bytes);

// Format picked from the content (magic bytes) when reading and from the
// extension (.png, anything else PPM) when writing.
Image ReadImage(const std::string& path);
void WriteImage(const std::string& path, const Image& img);

// 3 x H x W, values / 255.
Grid<float> ImageToGrid(const Image& img);
// Clamps to [0, 1], rounds to 8 bits and keeps the top-left width x height.
Image GridToImage(const Grid<float>& g, size_t width, size_t height);

// Edge-replicates to the next multiple of `multiple` in both directions.
Grid<float> PadToMultiple(const Grid<float>& g, size_t multiple);

inline size_t RoundUp(size_t v, size_t multiple) { return (v + multiple - 1) / multiple * multiple; }

double Mse(const Image& a, const Image& b);
// 8-bit PSNR; infinity for identical images.
double Psnr(const Image& a, const Image& b);

// Deterministic test picture: smooth color gradients, a few flat shapes and
// mild noise, so that both smooth and edge content are present.
Image SyntheticImage(uint64_t seed, size_t width, size_t height);
// Independent uniform pixels.
Image NoiseImage(uint64_t seed, size_t width, size_t height);

}  // namespace ccodec

#endif  // CCODEC_CODEC_IMAGE_IO_H_
