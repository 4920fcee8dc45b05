#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "motiondiff/schedule.hpp"
#include "motiondiff/tensor.hpp"

namespace motiondiff {

// X^k: the future window at noise level k (k = 0 is clean data).
struct DiffusionState {
  int k = 0;
  Tensor data;
};

// N candidate futures for one observation.
struct PredictionSet {
  std::size_t obs_id = 0;
  std::vector<Tensor> samples;
};

// epsilon-prediction network contract. Implementations must be safe for
// concurrent const calls and deterministic given their inputs.
class NoisePredictor {
 public:
  virtual ~NoisePredictor() = default;

  // Shape of one state, e.g. [f x 3J].
  virtual std::pair<std::size_t, std::size_t> state_shape() const = 0;

  // One prediction per (state, condition) pair, all at diffusion step k.
  virtual std::vector<Tensor> predict_batch(std::span<const Tensor> states, int k,
                                            std::span<const Tensor> conditions) const = 0;

  Tensor predict(const Tensor& state, int k, const Tensor& condition) const;
};

DiffusionState forward_diffuse(const NoiseSchedule& schedule, const Tensor& x0, int k, const Tensor& eps);

// ||eps - predictor(X^k, k, C)||^2 summed over coordinates.
double simplified_loss(const NoiseSchedule& schedule, const NoisePredictor& predictor, const Tensor& x0,
                       const Tensor& condition, int k, const Tensor& eps);

// One ancestral step X^k -> X^{k-1} with Sigma = beta_k I. `z` must be all
// zeros when k == 1.
DiffusionState reverse_step(const NoiseSchedule& schedule, const NoisePredictor& predictor,
                            const DiffusionState& state, const Tensor& condition, const Tensor& z);

// KL(q(X^K | x0) || N(0, I)) summed over coordinates.
double prior_kl(const NoiseSchedule& schedule, const Tensor& x0);

// Independent generator for (seed, observation, chain). The stream does not
// depend on how chains are batched.
std::mt19937_64 chain_stream(std::uint64_t seed, std::uint64_t obs_id, std::uint64_t chain);
Tensor standard_normal(std::size_t rows, std::size_t cols, std::mt19937_64& rng);

// Called with the current step and every chain state (observation-major,
// N per observation). Invoked once for k = K and after every reverse step.
using ReverseObserver = std::function<void(int k, std::span<const Tensor> states)>;

struct SamplerOptions {
  std::size_t samples = 50;
  std::uint64_t seed = 0;
  // Upper bound on states per predictor call.
  std::size_t max_batch = 64;
  ReverseObserver observer;
};

PredictionSet sample(const NoiseSchedule& schedule, const NoisePredictor& predictor, const Tensor& condition,
                     const SamplerOptions& options, std::size_t obs_id = 0);

// Samples every observation in one pass; chains are batched across
// observations but keep their own noise streams.
std::vector<PredictionSet> sample_many(const NoiseSchedule& schedule, const NoisePredictor& predictor,
                                       std::span<const Tensor> conditions, std::span<const std::size_t> obs_ids,
                                       const SamplerOptions& options);

}  // namespace motiondiff
