#pragma once

#include <functional>
#include <iosfwd>
#include <random>
#include <vector>

#include "motiondiff/config.hpp"
#include "motiondiff/motion.hpp"
#include "motiondiff/params.hpp"
#include "motiondiff/schedule.hpp"

namespace motiondiff {

// Constant until decay_start, then linear down to final_fraction * base at
// the last epoch. Epochs are 1-based.
double learning_rate(double base, int epochs, int decay_start, double final_fraction, int epoch);

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double lr = 0.0;
  double wallclock_s = 0.0;
};

struct TrainResult {
  ModelParams last;
  ModelParams best;
  int best_epoch = 0;
  double best_loss = 0.0;
  std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Simplified diffusion loss of a batch: window w[i] is noised to step
// k[i] with noise eps[i] ([f x 3J]); reduction follows cfg.train.loss_reduction.
Var diffusion_batch_loss(Tape& t, const ExperimentConfig& cfg, const NoiseSchedule& schedule,
                         const ModelParams& params, const std::vector<const WindowPair*>& windows,
                         const std::vector<int>& k, const std::vector<Tensor>& eps);

// Trains encoder and noise predictor jointly from a fresh initialisation
// seeded by cfg.train.seed.
TrainResult train_diffusion(const ExperimentConfig& cfg, const std::vector<WindowPair>& windows,
                            const EpochCallback& on_epoch = nullptr);

// Trains a fresh refiner against N futures sampled from the frozen
// diffusion parameters every epoch. Returned parameter sets hold only ref.
// tensors.
TrainResult train_refiner(const ExperimentConfig& cfg, const std::vector<WindowPair>& windows,
                          const ModelParams& diffusion, const EpochCallback& on_epoch = nullptr);

// `epoch,loss,lr,wallclock_s`
void write_train_log(std::ostream& out, const std::vector<EpochLog>& log);

}  // namespace motiondiff
