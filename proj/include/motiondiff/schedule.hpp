#pragma once

#include <utility>
#include <vector>

namespace motiondiff {

// Variance schedule over diffusion steps k = 1..K. Immutable once built.
class NoiseSchedule {
 public:
  // beta_k linearly interpolated between the endpoints, both inclusive.
  static NoiseSchedule linear(int steps, double beta_first, double beta_last);

  int steps() const { return static_cast<int>(beta_.size()); }
  double beta_first() const { return beta_.front(); }
  double beta_last() const { return beta_.back(); }

  double beta(int k) const { return beta_[index(k)]; }
  double alpha(int k) const { return alpha_[index(k)]; }
  // alpha_bar(0) == 1 by convention.
  double alpha_bar(int k) const { return k == 0 ? 1.0 : alpha_bar_[index(k)]; }

  // (sqrt(alpha_bar_k), sqrt(1 - alpha_bar_k)).
  std::pair<double, double> marginal_coefficients(int k) const;

 private:
  std::size_t index(int k) const;

  std::vector<double> beta_;
  std::vector<double> alpha_;
  std::vector<double> alpha_bar_;
};

}  // namespace motiondiff
