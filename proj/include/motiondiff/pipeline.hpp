#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "motiondiff/config.hpp"
#include "motiondiff/diffusion.hpp"
#include "motiondiff/motion.hpp"

namespace motiondiff {

// Files listed in manifest.csv (in manifest order) when present, otherwise
// every *.txt in the directory sorted by name.
std::vector<std::filesystem::path> list_motion_files(const std::filesystem::path& dir);

// Root-centred windows over every file of a data directory, in file order.
// Throws DataError on an empty result or a joint count other than `joints`.
std::vector<WindowPair> load_windows(const std::filesystem::path& dir, const DataConfig& data, int joints,
                                     int stride);

// C for every window, computed in batches.
std::vector<Tensor> encode_conditions(const NetworkConfig& cfg, const ModelParams& diffusion,
                                      const std::vector<WindowPair>& windows);

// N futures per window; observation ids are window indices.
std::vector<PredictionSet> sample_futures(const ExperimentConfig& cfg, const ModelParams& diffusion,
                                          const std::vector<Tensor>& conditions, int n, std::uint64_t seed,
                                          const ReverseObserver& observer = nullptr);

// Z_i = Y_i + eps_phi(Y_i, C) for every sample of every set.
std::vector<PredictionSet> refine_futures(const ExperimentConfig& cfg, const ModelParams& refiner,
                                          const std::vector<Tensor>& conditions,
                                          const std::vector<PredictionSet>& sets);

// Repeats the last observed frame f times.
Tensor zero_velocity(const WindowPair& window);

}  // namespace motiondiff
