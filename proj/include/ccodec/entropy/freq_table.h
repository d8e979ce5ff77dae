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

// Integer frequency tables for the range coder, and the discretized
// Gaussian tables used for latent symbols.

#ifndef CCODEC_ENTROPY_FREQ_TABLE_H_
#define CCODEC_ENTROPY_FREQ_TABLE_H_

#include <cstdint>
#include <string>
#include <vector>

namespace ccodec {

inline constexpr int kFreqBits = 16;
inline constexpr uint32_t kFreqTotal = 1u << kFreqBits;
inline constexpr int32_t kMaxSymbolMagnitude = 255;

// Frequencies for the consecutive symbols min_symbol .. max_symbol().
struct FreqTable {
  int32_t min_symbol = 0;
  std::vector<uint32_t> freq;
  std::vector<uint32_t> cum;  // size() + 1 entries, cum[0] = 0

  size_t size() const { return freq.size(); }
  int32_t max_symbol() const { return min_symbol + static_cast<int32_t>(freq.size()) - 1; }
  bool Contains(int32_t s) const { return s >= min_symbol && s <= max_symbol(); }
  int32_t Clamp(int32_t s) const;

  uint32_t Freq(int32_t s) const { return freq[s - min_symbol]; }
  uint32_t Cum(int32_t s) const { return cum[s - min_symbol]; }
  // -log2(freq / 2^16).
  double Bits(int32_t s) const;

  // Rebuilds `cum` from `freq`.
  void Finalize();
  // Empty string when every frequency is >= 1 and they sum to 2^16.
  std::string Check() const;
};

// Builds a table from real-valued probabilities (any positive scale): each
// symbol gets 1 plus its share of the remaining mass, leftovers go to the
// largest fractional parts (lowest index first on ties).
FreqTable IntegerizeProbabilities(int32_t min_symbol, const std::vector<double>& p);

// Symbols k with |k| <= min(255, ceil(32 sigma)).
int32_t GaussianRadius(double sigma);

// p(k) = Phi((k - mu_frac + 0.5)/sigma) - Phi((k - mu_frac - 0.5)/sigma)
// for k in [-radius, radius].
std::vector<double> GaussianProbabilities(double mu_frac, double sigma, int32_t radius);

FreqTable GaussianFreq(double mu_frac, double sigma);

// Tables for a fixed ladder of log-spaced scales; a requested sigma is coded
// with the first level >= sigma.
class ScaleTables {
 public:
  static constexpr size_t kLevels = 64;
  static constexpr double kMinScale = 0.11;
  static constexpr double kMaxScale = 256.0;

  static const ScaleTables& Get();

  size_t Index(double sigma) const;
  const FreqTable& Table(size_t index) const { return tables_[index]; }
  const FreqTable& ForSigma(double sigma) const { return tables_[Index(sigma)]; }
  double Level(size_t index) const { return levels_[index]; }

 private:
  ScaleTables();
  std::vector<double> levels_;
  std::vector<FreqTable> tables_;
};

}  // namespace ccodec

#endif  // CCODEC_ENTROPY_FREQ_TABLE_H_
