#pragma once

#include <filesystem>
#include <string>

#include "motiondiff/config.hpp"
#include "motiondiff/params.hpp"

namespace motiondiff {

// kind is "diffusion" (enc./dec. tensors) or "refiner" (the frozen
// diffusion tensors plus ref. tensors), so either file is enough to sample.
struct Checkpoint {
  std::string kind;
  ExperimentConfig config;
  ModelParams params;
  int epoch = 0;
  double loss = 0.0;

  bool has_refiner() const { return kind == "refiner"; }
  ModelParams diffusion_params() const;
  ModelParams refiner_params() const;
};

// Layout: "MDIFF1", u64 metadata length, metadata JSON, u64 tensor count,
// then per tensor u64 name length, name, u64 rows, u64 cols and rows*cols
// little-endian doubles. Written to a temporary file and renamed.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies the tensors whose name starts (or does not start) with prefix.
ModelParams select_params(const ModelParams& params, const std::string& prefix, bool keep_matching);
ModelParams merge_params(const ModelParams& a, const ModelParams& b);

}  // namespace motiondiff
