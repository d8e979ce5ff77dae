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


#include "ccodec/codec/image_io.h"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "ccodec/tensor/rng.h"

namespace ccodec {

namespace {

// PPM header token reader; skips whitespace and # comments.
class PpmHeader {
 public:
  explicit PpmHeader(const std::vector<uint8_t>& b) : b_(b) {}

  size_t Number() {
    SkipSpace();
    size_t v = 0;
    size_t digits = 0;
    while (pos_ < b_.size() && b_[pos_] >= '0' && b_[pos_] <= '9') {
      v = v * 10 + (b_[pos_++] - '0');
      if (++digits > 9) throw IoError("ppm: header number too long");
    }
    if (digits == 0) throw IoError("ppm: malformed header");
    return v;
  }

  size_t pos() const { return pos_; }
  void Skip(size_t n) { pos_ += n; }

 private:
  void SkipSpace() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(b_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<uint8_t>& b_;
  size_t pos_ = 0;
};

void CheckDims(size_t w, size_t h, const char* what) {
  if (w == 0 || h == 0 || w > kMaxImageSide || h > kMaxImageSide) {
    throw IoError(std::string(what) + ": unsupported image size " + std::to_string(w) + "x" +
                  std::to_string(h));
  }
}

struct PngReadState {
  const std::vector<uint8_t>* bytes;
  size_t pos;
};

void PngRead(png_structp png, png_bytep out, png_size_t n) {
  auto* s = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (s->bytes->size() - s->pos < n) png_error(png, "truncated png");
  std::memcpy(out, s->bytes->data() + s->pos, n);
  s->pos += n;
}

void PngWrite(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::vector<uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + n);
}

void PngFlush(png_structp) {}

[[noreturn]] void PngError(png_structp, png_const_charp msg) { throw IoError(std::string("png: ") + msg); }

void PngWarning(png_structp, png_const_charp) {}

}  // namespace

std::vector<uint8_t> EncodePpm(const Image& img) {
  const std::string head =
      "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<uint8_t> out(head.begin(), head.end());
  out.insert(out.end(), img.rgb.begin(), img.rgb.end());
  return out;
}

Image DecodePpm(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw IoError("ppm: not a P6 file");
  PpmHeader h(bytes);
  h.Skip(2);
  const size_t w = h.Number(), ht = h.Number(), maxval = h.Number();
  if (maxval != 255) throw IoError("ppm: only 8-bit (maxval 255) images are supported");
  CheckDims(w, ht, "ppm");
  const size_t start = h.pos() + 1;  // single whitespace byte after maxval
  if (start > bytes.size() || bytes.size() - start < w * ht * 3) throw IoError("ppm: truncated pixel data");
  Image img(w, ht);
  std::copy_n(bytes.begin() + start, img.rgb.size(), img.rgb.begin());
  return img;
}

std::vector<uint8_t> EncodePng(const Image& img) {
  std::vector<uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, PngError, PngWarning);
  if (!png) throw IoError("png: cannot create writer");
  png_infop info = png_create_info_struct(png);
  try {
    png_set_write_fn(png, &out, PngWrite, PngFlush);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height),
                 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (size_t y = 0; y < img.height; ++y) {
      png_write_row(png, const_cast<png_bytep>(img.rgb.data() + y * img.width * 3));
    }
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

Image DecodePng(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw IoError("png: bad signature");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, PngError, PngWarning);
  if (!png) throw IoError("png: cannot create reader");
  png_infop info = png_create_info_struct(png);
  PngReadState state{&bytes, 0};
  Image img;
  try {
    png_set_read_fn(png, &state, PngRead);
    png_read_info(png, info);
    const png_uint_32 w = png_get_image_width(png, info), h = png_get_image_height(png, info);
    CheckDims(w, h, "png");
    const int depth = png_get_bit_depth(png, info), type = png_get_color_type(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (type == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (type == PNG_COLOR_TYPE_GRAY || type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
    png_set_interlace_handling(png);
    png_read_update_info(png, info);
    if (png_get_rowbytes(png, info) != w * 3) throw IoError("png: unexpected row layout");
    img = Image(w, h);
    std::vector<png_bytep> rows(h);
    for (size_t y = 0; y < h; ++y) rows[y] = img.rgb.data() + y * w * 3;
    png_read_image(png, rows.data());
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

std::vector<uint8_t> ReadFileBytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::vector<uint8_t> out((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (f.bad()) throw IoError("read failed: " + path);
  return out;
}

void WriteFileBytes(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot create " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path);
}

Image ReadImage(const std::string& path) {
  std::vector<uint8_t> bytes = ReadFileBytes(path);
  if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return DecodePng(bytes);
  return DecodePpm(bytes);
}

void WriteImage(const std::string& path, const Image& img) {
  const bool png = path.size() >= 4 && (path.compare(path.size() - 4, 4, ".png") == 0 ||
                                        path.compare(path.size() - 4, 4, ".PNG") == 0);
  WriteFileBytes(path, png ? EncodePng(img) : EncodePpm(img));
}

Grid<float> ImageToGrid(const Image& img) {
  Grid<float> g(3, img.height, img.width);
  for (size_t y = 0; y < img.height; ++y)
    for (size_t x = 0; x < img.width; ++x)
      for (size_t c = 0; c < 3; ++c) g(c, y, x) = img.at(x, y, c) / 255.0f;
  return g;
}

Image GridToImage(const Grid<float>& g, size_t width, size_t height) {
  if (g.channels() != 3 || g.width() < width || g.height() < height) {
    throw ShapeError("grid " + g.ShapeString() + " cannot hold a " + std::to_string(width) + "x" +
                     std::to_string(height) + " RGB image");
  }
  Image img(width, height);
  for (size_t y = 0; y < height; ++y)
    for (size_t x = 0; x < width; ++x)
      for (size_t c = 0; c < 3; ++c) {
        const float v = std::isnan(g(c, y, x)) ? 0.0f : std::clamp(g(c, y, x), 0.0f, 1.0f);
        img.at(x, y, c) = static_cast<uint8_t>(std::lround(v * 255.0f));
      }
  return img;
}

Grid<float> PadToMultiple(const Grid<float>& g, size_t multiple) {
  const size_t h = RoundUp(g.height(), multiple), w = RoundUp(g.width(), multiple);
  Grid<float> out(g.channels(), h, w);
  for (size_t c = 0; c < g.channels(); ++c)
    for (size_t y = 0; y < h; ++y)
      for (size_t x = 0; x < w; ++x)
        out(c, y, x) = g(c, std::min(y, g.height() - 1), std::min(x, g.width() - 1));
  return out;
}

double Mse(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) throw ShapeError("mse: image sizes differ");
  double s = 0;
  for (size_t i = 0; i < a.rgb.size(); ++i) {
    const double d = double(a.rgb[i]) - double(b.rgb[i]);
    s += d * d;
  }
  return s / double(a.rgb.size());
}

double Psnr(const Image& a, const Image& b) {
  const double mse = Mse(a, b);
  if (mse == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

Image SyntheticImage(uint64_t seed, size_t width, size_t height) {
  Rng rng(seed);
  struct Wave {
    double fx, fy, phase, amp[3];
  };
  std::vector<Wave> waves(4);
  for (Wave& w : waves) {
    w.fx = rng.Uniform(-3, 3);
    w.fy = rng.Uniform(-3, 3);
    w.phase = rng.Uniform(0, 6.283185307179586);
    for (double& a : w.amp) a = rng.Uniform(-0.15, 0.15);
  }
  double base[3];
  for (double& b : base) b = rng.Uniform(0.25, 0.75);
  struct Shape {
    bool disc;
    double cx, cy, rx, ry, color[3];
  };
  std::vector<Shape> shapes(2 + rng.Below(3));
  for (Shape& s : shapes) {
    s.disc = rng.Below(2) == 0;
    s.cx = rng.Uniform(0, 1);
    s.cy = rng.Uniform(0, 1);
    s.rx = rng.Uniform(0.08, 0.3);
    s.ry = rng.Uniform(0.08, 0.3);
    for (double& c : s.color) c = rng.Uniform(0, 1);
  }
  Image img(width, height);
  for (size_t y = 0; y < height; ++y) {
    for (size_t x = 0; x < width; ++x) {
      const double u = (x + 0.5) / double(width), v = (y + 0.5) / double(height);
      double px[3] = {base[0], base[1], base[2]};
      for (const Wave& w : waves) {
        const double s = std::sin(6.283185307179586 * (w.fx * u + w.fy * v) + w.phase);
        for (int c = 0; c < 3; ++c) px[c] += w.amp[c] * s;
      }
      for (const Shape& s : shapes) {
        const double dx = (u - s.cx) / s.rx, dy = (v - s.cy) / s.ry;
        const bool inside = s.disc ? dx * dx + dy * dy <= 1 : std::abs(dx) <= 1 && std::abs(dy) <= 1;
        if (inside) std::copy(s.color, s.color + 3, px);
      }
      for (int c = 0; c < 3; ++c) {
        const double n = rng.Uniform(-0.02, 0.02);
        img.at(x, y, c) = static_cast<uint8_t>(std::lround(std::clamp(px[c] + n, 0.0, 1.0) * 255));
      }
    }
  }
  return img;
}

Image NoiseImage(uint64_t seed, size_t width, size_t height) {
  Rng rng(seed);
  Image img(width, height);
  for (uint8_t& v : img.rgb) v = static_cast<uint8_t>(rng.Below(256));
  return img;
}

}  // namespace ccodec
