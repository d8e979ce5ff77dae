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


#include "ccodec/codec/trainer.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <stdexcept>

namespace ccodec {

namespace {

bool AllFiniteParams(const ParamStore<float>& store, bool grads) {
  for (const Param<float>& p : store) {
    for (float v : grads ? p.grad : p.value) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

}  // namespace

void TrainConfig::Validate() const {
  arch.Validate();
  if (!(loss.lambda > 0) || !std::isfinite(loss.lambda)) throw std::invalid_argument("lambda must be positive");
  if (!(loss.lambda_pqf >= 0) || !std::isfinite(loss.lambda_pqf)) {
    throw std::invalid_argument("lambda1 must be non-negative");
  }
  if (!(loss.dsq_k > 0)) throw std::invalid_argument("soft quantizer sharpness must be positive");
  if (!(learning_rate > 0)) throw std::invalid_argument("learning rate must be positive");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) {
    throw std::invalid_argument("adam betas must be in [0, 1)");
  }
  if (batch == 0) throw std::invalid_argument("batch must be positive");
  if (crop == 0 || crop % kPadMultiple != 0) {
    throw std::invalid_argument("crop must be a positive multiple of " + std::to_string(kPadMultiple));
  }
  if (!(smoothing >= 0 && smoothing < 1)) throw std::invalid_argument("smoothing must be in [0, 1)");
}

std::string TrainResult::Csv() const {
  std::ostringstream s;
  s.precision(9);
  s << "step,loss,smoothed,rate_bpp,distortion,pqf\n";
  for (const StepRecord& r : curve) {
    s << r.step << ',' << r.loss << ',' << r.smoothed << ',' << r.rate_bpp << ',' << r.distortion
      << ',' << r.pqf << '\n';
  }
  return s.str();
}

Trainer::Trainer(const TrainConfig& cfg, std::vector<Image> images) : cfg_(cfg) {
  cfg_.Validate();
  if (images.size() < cfg_.min_images) {
    throw std::invalid_argument("training needs at least " + std::to_string(cfg_.min_images) +
                                " images, got " + std::to_string(images.size()));
  }
  for (const Image& img : images) {
    Grid<float> g = ImageToGrid(img);
    if (g.height() < cfg_.crop || g.width() < cfg_.crop) {
      // Edge-replicate small images up to the crop size.
      Grid<float> big(3, std::max(g.height(), cfg_.crop), std::max(g.width(), cfg_.crop));
      for (size_t c = 0; c < 3; ++c)
        for (size_t y = 0; y < big.height(); ++y)
          for (size_t x = 0; x < big.width(); ++x)
            big(c, y, x) = g(c, std::min(y, g.height() - 1), std::min(x, g.width() - 1));
      g = std::move(big);
    }
    images_.push_back(std::move(g));
  }
  model_ = std::make_unique<CompressionModel<float>>(cfg_.arch, DeriveSeed(cfg_.seed, 0));
}

Grid<float> Trainer::RandomCrop(Rng& rng) const {
  const Grid<float>& src = images_[rng.Below(images_.size())];
  const size_t oy = rng.Below(src.height() - cfg_.crop + 1);
  const size_t ox = rng.Below(src.width() - cfg_.crop + 1);
  Grid<float> out(3, cfg_.crop, cfg_.crop);
  for (size_t c = 0; c < 3; ++c)
    for (size_t y = 0; y < cfg_.crop; ++y)
      std::copy_n(&src(c, oy + y, ox), cfg_.crop, &out(c, y, 0));
  return out;
}

TrainResult Trainer::Run(const std::function<void(const StepRecord&)>& progress) {
  TrainResult res;
  ParamStore<float>& store = model_->params();
  std::vector<std::vector<double>> m1, m2;
  for (const Param<float>& p : store) {
    m1.emplace_back(p.size(), 0.0);
    m2.emplace_back(p.size(), 0.0);
  }
  Rng rng(DeriveSeed(cfg_.seed, 1));
  double ema = 0;
  for (size_t step = 0; step < cfg_.steps; ++step) {
    store.ZeroGrad();
    StepRecord rec;
    rec.step = step;
    bool finite = true;
    for (size_t b = 0; b < cfg_.batch && finite; ++b) {
      Grid<float> crop = RandomCrop(rng);
      Tape<float> t;
      LossTerms<float> terms = TrainingLoss(t, *model_, crop, cfg_.loss, rng);
      const double loss = terms.total.value()[0];
      if (!std::isfinite(loss)) {
        finite = false;
        break;
      }
      t.Backward(terms.total);
      rec.loss += loss;
      rec.rate_bpp += terms.rate_bpp;
      rec.distortion += terms.distortion;
      rec.pqf += terms.pqf;
    }
    if (!finite || !AllFiniteParams(store, true)) {
      res.diverged = true;
      res.message = "non-finite loss or gradient at step " + std::to_string(step);
      break;
    }
    const double inv = 1.0 / double(cfg_.batch);
    rec.loss *= inv;
    rec.rate_bpp *= inv;
    rec.distortion *= inv;
    rec.pqf *= inv;

    // Adam on the batch-mean gradient.
    const double t1 = double(step + 1);
    const double c1 = 1 - std::pow(cfg_.beta1, t1), c2 = 1 - std::pow(cfg_.beta2, t1);
    size_t k = 0;
    for (Param<float>& p : store) {
      std::vector<double>& a = m1[k];
      std::vector<double>& v = m2[k];
      ++k;
      for (size_t i = 0; i < p.size(); ++i) {
        const double g = double(p.grad[i]) * inv;
        a[i] = cfg_.beta1 * a[i] + (1 - cfg_.beta1) * g;
        v[i] = cfg_.beta2 * v[i] + (1 - cfg_.beta2) * g * g;
        const double upd =
            cfg_.learning_rate * (a[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.adam_epsilon);
        p.value[i] = static_cast<float>(double(p.value[i]) - upd);
      }
    }
    ema = cfg_.smoothing * ema + (1 - cfg_.smoothing) * rec.loss;
    rec.smoothed = ema / (1 - std::pow(cfg_.smoothing, t1));
    res.curve.push_back(rec);
    if (progress) progress(rec);
  }
  for (Param<float>& p : store) p.ClearGrad();
  return res;
}

std::vector<Image> LoadImageDir(const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("not a directory: " + dir);
  std::vector<std::string> paths;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".ppm" || ext == ".pnm" || ext == ".png") paths.push_back(e.path().string());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<Image> out;
  for (const std::string& p : paths) out.push_back(ReadImage(p));
  return out;
}

}  // namespace ccodec
