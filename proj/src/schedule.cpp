#include "motiondiff/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "motiondiff/tensor.hpp"

namespace motiondiff {

NoiseSchedule NoiseSchedule::linear(int steps, double beta_first, double beta_last) {
  if (steps < 2) throw ConfigError("noise schedule needs K >= 2, got " + std::to_string(steps));
  if (!(beta_first > 0.0 && beta_first < 1.0) || !(beta_last > 0.0 && beta_last < 1.0)) {
    throw ConfigError("noise schedule betas must lie in (0, 1)");
  }
  if (beta_first > beta_last) throw ConfigError("noise schedule needs beta_1 <= beta_K");

  NoiseSchedule s;
  s.beta_.resize(static_cast<std::size_t>(steps));
  s.alpha_.resize(s.beta_.size());
  s.alpha_bar_.resize(s.beta_.size());
  double running = 1.0;
  for (int k = 1; k <= steps; ++k) {
    const auto i = static_cast<std::size_t>(k - 1);
    const double frac = static_cast<double>(k - 1) / static_cast<double>(steps - 1);
    s.beta_[i] = k == steps ? beta_last : beta_first + frac * (beta_last - beta_first);
    s.alpha_[i] = 1.0 - s.beta_[i];
    running *= s.alpha_[i];
    s.alpha_bar_[i] = running;
  }
  return s;
}

std::pair<double, double> NoiseSchedule::marginal_coefficients(int k) const {
  if (k == 0) return {1.0, 0.0};
  const double ab = alpha_bar_[index(k)];
  return {std::sqrt(ab), std::sqrt(1.0 - ab)};
}

std::size_t NoiseSchedule::index(int k) const {
  if (k < 1 || k > steps()) {
    throw std::out_of_range("diffusion step " + std::to_string(k) + " outside 1.." + std::to_string(steps()));
  }
  return static_cast<std::size_t>(k - 1);
}

}  // namespace motiondiff
