#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace motiondiff::cli {

struct SynthOptions {
  std::filesystem::path out;
  int sequences = 16;
  int frames = 200;
  int joints = 5;
  std::uint64_t seed = 0;
  double fps = 50.0;
};

struct TrainOptions {
  std::filesystem::path config;
  std::string stage = "diffusion";
  std::filesystem::path out;
  // Refine stage only; defaults to <out>/diffusion_last.ckpt.
  std::filesystem::path diffusion;
};

struct SampleOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path data;
  int n = 50;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

struct EvaluateOptions {
  std::filesystem::path pred;
  std::filesystem::path data;
  double delta = 0.5;
  std::filesystem::path out;
  bool refined = false;
};

struct DiagnoseOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path data;
  std::vector<int> k_grid;
  int n = 10;
  std::uint64_t seed = 0;
  double delta = 0.5;
  std::filesystem::path out;
};

// Each command writes only under its output path; progress goes to `log`.
void synth_data(const SynthOptions& opt);
void train(const TrainOptions& opt, std::ostream& log);
void sample(const SampleOptions& opt);
void evaluate(const EvaluateOptions& opt);
void diagnose(const DiagnoseOptions& opt);

// "100,80,60" or "0:100:20" (start:stop:step, inclusive) -> list of steps.
std::vector<int> parse_k_grid(const std::string& text);

}  // namespace motiondiff::cli
