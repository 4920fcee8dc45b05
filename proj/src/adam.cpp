#include "motiondiff/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "motiondiff/tensor.hpp"

namespace motiondiff {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamHyper& hyper) {
  const std::size_t n = params.size();
  if (grads.size() != n || state.m.size() != n || state.v.size() != n) {
    throw std::invalid_argument("adam_step: parameter, gradient and moment sizes differ");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(grads[i])) throw NumericError("adam_step: non-finite gradient at index " + std::to_string(i));
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < n; ++i) {
    state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * grads[i];
    state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= hyper.lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
  }
}

}  // namespace motiondiff
