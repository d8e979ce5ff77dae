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


// ccodec command line: encode, decode, train-toy, stats, selftest,
// init-weights.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ccodec/codec/codec.h"
#include "ccodec/codec/image_io.h"
#include "ccodec/codec/selftest.h"
#include "ccodec/codec/stats.h"
#include "ccodec/codec/trainer.h"
#include "ccodec/codec/weights_io.h"
#include "ccodec/entropy/range_coder.h"

namespace ccodec {
namespace {

enum ExitCode { kOk = 0, kUsage = 1, kIo = 2, kCorrupt = 3, kSelfTestFailed = 4 };

ArchConfig ArchByName(const std::string& name) {
  if (name == "toy") return ArchConfig::Toy();
  if (name == "default") return ArchConfig::Default();
  throw CLI::ValidationError("--arch", "must be toy or default");
}

int Encode(const std::string& in, const std::string& out, const std::string& weights, int preset,
           bool no_pqf, bool raw, const std::string& report_path) {
  WeightsFile w = LoadWeights(weights);
  const ModelEntry& entry = w.Select(preset);
  Codec codec(*entry.model, entry.preset);
  EncodeOptions opts;
  opts.pqf = !no_pqf;
  opts.raw_coefficients = raw;
  EncodeResult res = codec.Encode(ReadImage(in), opts);
  WriteFileBytes(out, res.bytes);
  const std::string report = res.report.ToJson();
  if (!report_path.empty()) WriteFileBytes(report_path, std::vector<uint8_t>(report.begin(), report.end()));
  std::cout << report << "\n";
  return kOk;
}

int Decode(const std::string& in, const std::string& out, const std::string& weights) {
  WeightsFile w = LoadWeights(weights);
  const std::vector<uint8_t> bytes = ReadFileBytes(in);
  // The stream names its preset; fall back to the first model otherwise.
  int preset = bytes.size() > 5 ? bytes[5] : 0;
  const ModelEntry* entry = nullptr;
  try {
    entry = &w.Select(preset);
  } catch (const std::out_of_range&) {
    entry = &w.Select(0);
  }
  Codec codec(*entry->model, entry->preset);
  DecodeResult res = codec.Decode(bytes);
  WriteImage(out, res.image);
  std::cout << "decoded " << res.image.width << "x" << res.image.height << " in " << res.seconds
            << " s\n";
  return kOk;
}

int TrainToy(const std::string& dir, const std::string& out, TrainConfig cfg, const std::string& arch,
             const std::string& curve_path) {
  cfg.arch = ArchByName(arch);
  Trainer trainer(cfg, LoadImageDir(dir));
  TrainResult res = trainer.Run([](const StepRecord& r) {
    std::printf("step %zu loss %.6f smoothed %.6f bpp %.4f mse %.6f pqf %.6f\n", r.step, r.loss,
                r.smoothed, r.rate_bpp, r.distortion, r.pqf);
    std::fflush(stdout);
  });
  WeightsFile w;
  ModelEntry e;
  e.preset = PresetForLambda(cfg.loss.lambda);
  e.lambda = cfg.loss.lambda;
  e.model = trainer.TakeModel();
  w.models.push_back(std::move(e));
  SaveWeights(out, w);
  if (!curve_path.empty()) {
    const std::string csv = res.Csv();
    WriteFileBytes(curve_path, std::vector<uint8_t>(csv.begin(), csv.end()));
  }
  if (res.diverged) {
    std::fprintf(stderr, "training aborted: %s; saved last good weights\n", res.message.c_str());
    return kUsage;
  }
  std::printf("initial loss %.6f final smoothed %.6f\n", res.initial_loss(), res.final_smoothed());
  return kOk;
}

int Stats(const std::string& weights, size_t height, size_t width) {
  WeightsFile w = LoadWeights(weights);
  for (const ModelEntry& e : w.models) {
    std::cout << "model q" << e.preset << " (lambda " << e.lambda << ")\n"
              << ComputeStats(*e.model, height, width).ToJson() << "\n";
  }
  return kOk;
}

int SelfTest(const std::string& fault) {
  SelfTestOptions opts;
  opts.fault = fault;
  bool ok = true;
  RunSelfTest(opts, [&](const SelfTestCheck& c) {
    std::printf("[%s] %s (%.2f s)%s%s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.seconds,
                c.detail.empty() ? "" : ": ", c.detail.c_str());
    std::fflush(stdout);
    ok = ok && c.passed;
  });
  std::printf("%s\n", ok ? "all checks passed" : "self-test FAILED");
  return ok ? kOk : kSelfTestFailed;
}

int InitWeights(const std::string& out, const std::string& arch, uint64_t seed,
                const std::vector<int>& presets) {
  SaveWeights(out, SeededWeights(ArchByName(arch), presets, seed));
  return kOk;
}

int Main(int argc, char** argv) {
  CLI::App app{"ccodec: learned image codec with contextual clustering and guided filtering"};
  app.require_subcommand(1);

  std::string in, out, weights, report, fault, dir, arch = "toy", curve;
  int preset = 0;
  bool no_pqf = false, raw = false;
  auto* enc = app.add_subcommand("encode", "Compress an 8-bit RGB image (PPM or PNG)");
  enc->add_option("input", in, "Input image")->required();
  enc->add_option("-o,--output", out, "Output bitstream")->required();
  enc->add_option("-w,--weights", weights, "Weights file")->required();
  enc->add_option("-q,--quality", preset, "Quality preset 1..6 (default: first model)")
      ->check(CLI::Range(1, kNumPresets));
  enc->add_flag("--no-pqf", no_pqf, "Disable guided post-quantization filtering");
  enc->add_flag("--raw-coeffs", raw, "Store unquantized f32 filter coefficients");
  enc->add_option("--report", report, "Also write the JSON report here");

  auto* dec = app.add_subcommand("decode", "Decompress a bitstream");
  dec->add_option("input", in, "Input bitstream")->required();
  dec->add_option("-o,--output", out, "Output image (.png or PPM)")->required();
  dec->add_option("-w,--weights", weights, "Weights file")->required();

  TrainConfig tc;
  auto* train = app.add_subcommand("train-toy", "Train a small model on a directory of images");
  train->add_option("dir", dir, "Directory with at least 8 PPM/PNG images")->required();
  train->add_option("-o,--output", out, "Output weights file")->required();
  train->add_option("--lambda", tc.loss.lambda, "Rate-distortion weight")->capture_default_str();
  train->add_option("--lambda1", tc.loss.lambda_pqf, "Filter loss weight")->capture_default_str();
  train->add_option("--steps", tc.steps, "Optimizer steps")->capture_default_str();
  train->add_option("--seed", tc.seed, "Random seed")->capture_default_str();
  train->add_option("--batch", tc.batch, "Crops per step")->capture_default_str();
  train->add_option("--crop", tc.crop, "Crop side, multiple of 16")->capture_default_str();
  train->add_option("--lr", tc.learning_rate, "Adam learning rate")->capture_default_str();
  train->add_option("--arch", arch, "toy or default")->capture_default_str();
  train->add_option("--curve", curve, "Write the loss curve as CSV");

  size_t height = 256, width = 256;
  auto* stats = app.add_subcommand("stats", "Parameter count and MACs per pixel");
  stats->add_option("-w,--weights", weights, "Weights file")->required();
  stats->add_option("--height", height, "Reference height")->capture_default_str();
  stats->add_option("--width", width, "Reference width")->capture_default_str();

  auto* self = app.add_subcommand("selftest", "Run the built-in invariant checks");
  self->add_option("--fault", fault, "Inject a fault (freq-table)");

  uint64_t seed = 1;
  std::vector<int> presets{1, 2, 3, 4, 5, 6};
  auto* init = app.add_subcommand("init-weights", "Write freshly initialized weights");
  init->add_option("-o,--output", out, "Output weights file")->required();
  init->add_option("--arch", arch, "toy or default")->capture_default_str();
  init->add_option("--seed", seed, "Random seed")->capture_default_str();
  init->add_option("--presets", presets, "Presets to include")->delimiter(',')->check(CLI::Range(1, kNumPresets));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*enc) return Encode(in, out, weights, preset, no_pqf, raw, report);
    if (*dec) return Decode(in, out, weights);
    if (*train) return TrainToy(dir, out, tc, arch, curve);
    if (*stats) return Stats(weights, height, width);
    if (*self) return SelfTest(fault);
    if (*init) return InitWeights(out, arch, seed, presets);
  } catch (const IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kIo;
  } catch (const DecodeError& e) {
    std::fprintf(stderr, "decode error (%s, byte %zu): %s\n", DecodeErrorKindName(e.kind()), e.offset(),
                 e.what());
    return kCorrupt;
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  }
  return kUsage;
}

}  // namespace
}  // namespace ccodec

int main(int argc, char** argv) { return ccodec::Main(argc, argv); }
