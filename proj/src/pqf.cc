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

#include "ccodec/pqf.h"

namespace ccodec {

std::vector<uint8_t> PackNibbles(const std::vector<uint8_t>& codes) {
  std::vector<uint8_t> out((codes.size() + 1) / 2, 0);
  for (size_t i = 0; i < codes.size(); ++i) {
    out[i / 2] |= static_cast<uint8_t>((codes[i] & 0xF) << (i % 2 ? 4 : 0));
  }
  return out;
}

std::vector<uint8_t> UnpackNibbles(const std::vector<uint8_t>& bytes, size_t count) {
  std::vector<uint8_t> out(count);
  for (size_t i = 0; i < count; ++i) out[i] = (bytes.at(i / 2) >> (i % 2 ? 4 : 0)) & 0xF;
  return out;
}

bool CholeskySolve(std::vector<double>& a, std::vector<double>& b, size_t n) {
  // Relative pivot threshold: a pivot this small against the diagonal scale
  // means the system is singular to working precision.
  double scale = 0;
  for (size_t j = 0; j < n; ++j) scale = std::max(scale, std::abs(a[j * n + j]));
  if (!internal::CholeskyFactor(a, n)) return false;
  for (size_t j = 0; j < n; ++j) {
    if (a[j * n + j] * a[j * n + j] <= 1e-13 * scale) return false;
  }
  internal::CholeskyBackSolve(a, b, n);
  return true;
}

}  // namespace ccodec
