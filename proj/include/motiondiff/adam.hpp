#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace motiondiff {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

// One bias-corrected Adam update in place. Throws NumericError on a
// non-finite gradient (parameters and moments are left untouched).
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamHyper& hyper);

}  // namespace motiondiff
