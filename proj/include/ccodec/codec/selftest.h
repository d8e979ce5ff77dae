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


// Built-in invariant checks: gradients against finite differences, range
// coder and container round trips, the least-squares solver against a
// closed form, shuffle inverses and a small codec round trip.

#ifndef CCODEC_CODEC_SELFTEST_H_
#define CCODEC_CODEC_SELFTEST_H_

#include <functional>
#include <string>
#include <vector>

namespace ccodec {

struct SelfTestCheck {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0;
};

// Names accepted by SelfTestOptions::fault.
const std::vector<std::string>& SelfTestFaults();

struct SelfTestOptions {
  // Deliberately broken component, for checking that the suite notices.
  // "freq-table" corrupts the frequency table used by the coder check.
  std::string fault;
};

// Throws std::invalid_argument for an unknown fault name.
std::vector<SelfTestCheck> RunSelfTest(const SelfTestOptions& opts = {},
                                       const std::function<void(const SelfTestCheck&)>& progress = {});

}  // namespace ccodec

#endif  // CCODEC_CODEC_SELFTEST_H_
