#include "motiondiff/diffusion.hpp"

#include <cmath>
#include <stdexcept>

namespace motiondiff {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
}

// X^{k-1} from X^k and the predicted noise; z is added as sqrt(beta_k) z.
Tensor posterior_step(const NoiseSchedule& schedule, int k, const Tensor& xk, const Tensor& eps_hat, const Tensor* z) {
  const double inv_sqrt_alpha = 1.0 / std::sqrt(schedule.alpha(k));
  const double eps_coeff = schedule.beta(k) / std::sqrt(1.0 - schedule.alpha_bar(k));
  const double noise_coeff = std::sqrt(schedule.beta(k));
  Tensor out(xk.rows(), xk.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = inv_sqrt_alpha * (xk[i] - eps_coeff * eps_hat[i]);
    if (z != nullptr) out[i] += noise_coeff * (*z)[i];
  }
  return out;
}

}  // namespace

Tensor NoisePredictor::predict(const Tensor& state, int k, const Tensor& condition) const {
  auto out = predict_batch(std::span<const Tensor>(&state, 1), k, std::span<const Tensor>(&condition, 1));
  return std::move(out.front());
}

DiffusionState forward_diffuse(const NoiseSchedule& schedule, const Tensor& x0, int k, const Tensor& eps) {
  require_same_shape("forward_diffuse", x0, eps);
  const auto [signal, noise] = schedule.marginal_coefficients(k);
  DiffusionState s{k, Tensor(x0.rows(), x0.cols())};
  for (std::size_t i = 0; i < x0.size(); ++i) s.data[i] = signal * x0[i] + noise * eps[i];
  return s;
}

double simplified_loss(const NoiseSchedule& schedule, const NoisePredictor& predictor, const Tensor& x0,
                       const Tensor& condition, int k, const Tensor& eps) {
  const DiffusionState xk = forward_diffuse(schedule, x0, k, eps);
  const Tensor eps_hat = predictor.predict(xk.data, k, condition);
  require_same_shape("simplified_loss", eps, eps_hat);
  const double loss = squared_distance(eps, eps_hat);
  if (!std::isfinite(loss)) throw NumericError("non-finite diffusion loss");
  return loss;
}

DiffusionState reverse_step(const NoiseSchedule& schedule, const NoisePredictor& predictor,
                            const DiffusionState& state, const Tensor& condition, const Tensor& z) {
  if (state.k < 1) throw std::invalid_argument("reverse_step: state is already at k = 0");
  require_same_shape("reverse_step", state.data, z);
  if (state.k == 1) {
    for (double v : z.flat())
      if (v != 0.0) throw std::invalid_argument("reverse_step: z must be zero at k = 1");
  }
  const Tensor eps_hat = predictor.predict(state.data, state.k, condition);
  require_same_shape("reverse_step", state.data, eps_hat);
  return {state.k - 1, posterior_step(schedule, state.k, state.data, eps_hat, &z)};
}

double prior_kl(const NoiseSchedule& schedule, const Tensor& x0) {
  const double ab = schedule.alpha_bar(schedule.steps());
  const double var = 1.0 - ab;
  double kl = 0.0;
  for (double v : x0.flat()) {
    const double mean = std::sqrt(ab) * v;
    kl += 0.5 * (var + mean * mean - 1.0 - std::log(var));
  }
  return kl;
}

std::mt19937_64 chain_stream(std::uint64_t seed, std::uint64_t obs_id, std::uint64_t chain) {
  const std::uint64_t key = splitmix64(splitmix64(splitmix64(seed) ^ obs_id) ^ (chain * 0xD1B54A32D192ED03ULL));
  return std::mt19937_64(key);
}

Tensor standard_normal(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor t(rows, cols);
  for (double& v : t.flat()) v = normal(rng);
  return t;
}

PredictionSet sample(const NoiseSchedule& schedule, const NoisePredictor& predictor, const Tensor& condition,
                     const SamplerOptions& options, std::size_t obs_id) {
  auto sets = sample_many(schedule, predictor, std::span<const Tensor>(&condition, 1),
                          std::span<const std::size_t>(&obs_id, 1), options);
  return std::move(sets.front());
}

std::vector<PredictionSet> sample_many(const NoiseSchedule& schedule, const NoisePredictor& predictor,
                                       std::span<const Tensor> conditions, std::span<const std::size_t> obs_ids,
                                       const SamplerOptions& options) {
  if (options.samples < 1) throw std::invalid_argument("sample: N must be >= 1");
  if (conditions.size() != obs_ids.size()) throw std::invalid_argument("sample: one obs id per condition");
  const auto [rows, cols] = predictor.state_shape();
  const std::size_t n = options.samples;
  const std::size_t chains = conditions.size() * n;

  std::vector<std::mt19937_64> streams;
  std::vector<Tensor> states;
  std::vector<Tensor> chain_conditions;
  streams.reserve(chains);
  states.reserve(chains);
  chain_conditions.reserve(chains);
  for (std::size_t o = 0; o < conditions.size(); ++o)
    for (std::size_t c = 0; c < n; ++c) {
      streams.push_back(chain_stream(options.seed, obs_ids[o], c));
      states.push_back(standard_normal(rows, cols, streams.back()));
      chain_conditions.push_back(conditions[o]);
    }

  const int K = schedule.steps();
  if (options.observer) options.observer(K, states);
  const std::size_t batch = std::max<std::size_t>(1, options.max_batch);
  for (int k = K; k >= 1; --k) {
    for (std::size_t b0 = 0; b0 < chains; b0 += batch) {
      const std::size_t len = std::min(batch, chains - b0);
      auto eps_hat = predictor.predict_batch(std::span<const Tensor>(states).subspan(b0, len), k,
                                             std::span<const Tensor>(chain_conditions).subspan(b0, len));
      for (std::size_t i = 0; i < len; ++i) {
        const std::size_t c = b0 + i;
        require_same_shape("sample", states[c], eps_hat[i]);
        if (k > 1) {
          const Tensor z = standard_normal(rows, cols, streams[c]);
          states[c] = posterior_step(schedule, k, states[c], eps_hat[i], &z);
        } else {
          states[c] = posterior_step(schedule, k, states[c], eps_hat[i], nullptr);
        }
        if (!states[c].all_finite()) throw NumericError("non-finite state in reverse diffusion at step " + std::to_string(k));
      }
    }
    if (options.observer) options.observer(k - 1, states);
  }

  std::vector<PredictionSet> out(conditions.size());
  for (std::size_t o = 0; o < conditions.size(); ++o) {
    out[o].obs_id = obs_ids[o];
    for (std::size_t c = 0; c < n; ++c) out[o].samples.push_back(std::move(states[o * n + c]));
  }
  return out;
}

}  // namespace motiondiff
