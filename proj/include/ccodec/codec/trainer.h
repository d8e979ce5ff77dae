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


// Toy trainer: Adam on random square crops, a batch formed by summing the
// gradients of `batch` single-image passes.

#ifndef CCODEC_CODEC_TRAINER_H_
#define CCODEC_CODEC_TRAINER_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ccodec/arch_config.h"
#include "ccodec/codec/image_io.h"
#include "ccodec/model.h"

namespace ccodec {

struct TrainConfig {
  ArchConfig arch = ArchConfig::Toy();
  LossWeights loss;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  size_t steps = 200;
  size_t batch = 8;
  size_t crop = 64;
  uint64_t seed = 1;
  // Exponential moving average factor of the reported loss curve.
  double smoothing = 0.9;
  size_t min_images = 8;

  // Throws std::invalid_argument.
  void Validate() const;
};

struct StepRecord {
  size_t step = 0;
  double loss = 0;      // batch mean of the total loss
  double smoothed = 0;  // bias-corrected moving average of `loss`
  double rate_bpp = 0;
  double distortion = 0;
  double pqf = 0;
};

struct TrainResult {
  std::vector<StepRecord> curve;
  // A non-finite loss or gradient stopped training; the model holds the
  // parameters from before the failing step.
  bool diverged = false;
  std::string message;

  double initial_loss() const { return curve.empty() ? 0 : curve.front().loss; }
  double final_smoothed() const { return curve.empty() ? 0 : curve.back().smoothed; }
  std::string Csv() const;
};

class Trainer {
 public:
  Trainer(const TrainConfig& cfg, std::vector<Image> images);

  TrainResult Run(const std::function<void(const StepRecord&)>& progress = {});

  const CompressionModel<float>& model() const { return *model_; }
  std::unique_ptr<CompressionModel<float>> TakeModel() { return std::move(model_); }

 private:
  Grid<float> RandomCrop(Rng& rng) const;

  TrainConfig cfg_;
  std::vector<Grid<float>> images_;
  std::unique_ptr<CompressionModel<float>> model_;
};

// All .ppm/.pnm/.png files of a directory, in name order.
std::vector<Image> LoadImageDir(const std::string& dir);

}  // namespace ccodec

#endif  // CCODEC_CODEC_TRAINER_H_
