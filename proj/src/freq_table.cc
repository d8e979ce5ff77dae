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

#include "ccodec/entropy/freq_table.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ccodec/entropy/quantize.h"

namespace ccodec {

int32_t FreqTable::Clamp(int32_t s) const { return std::clamp(s, min_symbol, max_symbol()); }

double FreqTable::Bits(int32_t s) const {
  return kFreqBits - std::log2(static_cast<double>(Freq(s)));
}

void FreqTable::Finalize() {
  cum.assign(freq.size() + 1, 0);
  for (size_t i = 0; i < freq.size(); ++i) cum[i + 1] = cum[i] + freq[i];
}

std::string FreqTable::Check() const {
  if (freq.empty()) return "empty table";
  if (cum.size() != freq.size() + 1) return "cumulative table not built";
  uint64_t total = 0;
  for (size_t i = 0; i < freq.size(); ++i) {
    if (freq[i] == 0) return "zero frequency for symbol " + std::to_string(min_symbol + int(i));
    if (cum[i] != total) return "cumulative table inconsistent at " + std::to_string(i);
    total += freq[i];
  }
  if (total != kFreqTotal || cum.back() != kFreqTotal) {
    return "frequencies sum to " + std::to_string(total);
  }
  return {};
}

FreqTable IntegerizeProbabilities(int32_t min_symbol, const std::vector<double>& p) {
  const size_t n = p.size();
  if (n == 0 || n > kFreqTotal) throw std::invalid_argument("table size out of range");
  double mass = 0;
  for (double v : p) {
    if (!(v >= 0) || !std::isfinite(v)) throw std::invalid_argument("invalid probability");
    mass += v;
  }
  FreqTable t;
  t.min_symbol = min_symbol;
  t.freq.assign(n, 1);
  const uint32_t spare = kFreqTotal - static_cast<uint32_t>(n);
  std::vector<double> frac(n, 0.0);
  uint32_t used = 0;
  for (size_t i = 0; i < n; ++i) {
    const double share = mass > 0 ? p[i] / mass * spare : double(spare) / n;
    const double whole = std::floor(share);
    t.freq[i] += static_cast<uint32_t>(whole);
    used += static_cast<uint32_t>(whole);
    frac[i] = share - whole;
  }
  // Floating-point slop can leave `used` a hair above `spare`.
  while (used > spare) {
    size_t big = std::max_element(t.freq.begin(), t.freq.end()) - t.freq.begin();
    t.freq[big]--;
    used--;
  }
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return frac[a] > frac[b]; });
  for (size_t i = 0; used < spare; i = (i + 1) % n, ++used) t.freq[order[i]]++;
  t.Finalize();
  return t;
}

int32_t GaussianRadius(double sigma) {
  const double r = std::ceil(32.0 * sigma);
  return r >= kMaxSymbolMagnitude ? kMaxSymbolMagnitude : std::max<int32_t>(1, int32_t(r));
}

std::vector<double> GaussianProbabilities(double mu_frac, double sigma, int32_t radius) {
  if (!(sigma > 0)) throw std::invalid_argument("gaussian_freq: sigma must be positive");
  std::vector<double> p(2 * radius + 1);
  for (int32_t k = -radius; k <= radius; ++k) {
    // Upper-tail form keeps precision far from the mean.
    const double c = k - mu_frac;
    const double hi = (c + 0.5) / sigma, lo = (c - 0.5) / sigma;
    double v;
    if (c > 0) {
      v = StdNormalCdf(-lo) - StdNormalCdf(-hi);
    } else {
      v = StdNormalCdf(hi) - StdNormalCdf(lo);
    }
    p[k + radius] = std::max(v, 0.0);
  }
  return p;
}

FreqTable GaussianFreq(double mu_frac, double sigma) {
  const int32_t radius = GaussianRadius(sigma);
  return IntegerizeProbabilities(-radius, GaussianProbabilities(mu_frac, sigma, radius));
}

const ScaleTables& ScaleTables::Get() {
  static const ScaleTables* tables = new ScaleTables();
  return *tables;
}

ScaleTables::ScaleTables() {
  const double step = std::log(kMaxScale / kMinScale) / (kLevels - 1);
  for (size_t i = 0; i < kLevels; ++i) {
    levels_.push_back(i + 1 == kLevels ? kMaxScale : kMinScale * std::exp(step * i));
    tables_.push_back(GaussianFreq(0.0, levels_.back()));
  }
}

size_t ScaleTables::Index(double sigma) const {
  if (!(sigma > levels_.front())) return 0;  // also maps NaN to the finest level
  auto it = std::lower_bound(levels_.begin(), levels_.end(), sigma);
  return it == levels_.end() ? kLevels - 1 : size_t(it - levels_.begin());
}

}  // namespace ccodec
