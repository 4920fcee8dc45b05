#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "motiondiff/params.hpp"
#include "motiondiff/tensor.hpp"

namespace testing_support {

using motiondiff::ModelParams;
using motiondiff::Tensor;

inline Tensor random_tensor(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor t(rows, cols);
  for (double& v : t.flat()) v = n(rng);
  return t;
}

struct GradCheck {
  double max_rel_err = 0.0;
  std::size_t worst = 0;
  std::size_t checked = 0;
};

// Central differences of `loss` over every flat coordinate of `params`,
// compared with `analytic`. rel = |a - n| / max(|a|, |n|, floor).
inline GradCheck finite_difference_check(ModelParams& params, const std::vector<double>& analytic,
                                         const std::function<double()>& loss, double h = 1e-6,
                                         double floor = 1e-6) {
  GradCheck out;
  std::vector<double> flat = params.flatten();
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double keep = flat[i];
    flat[i] = keep + h;
    params.unflatten(flat);
    const double up = loss();
    flat[i] = keep - h;
    params.unflatten(flat);
    const double down = loss();
    flat[i] = keep;
    const double numeric = (up - down) / (2.0 * h);
    const double rel = std::abs(analytic[i] - numeric) / std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    if (rel > out.max_rel_err) {
      out.max_rel_err = rel;
      out.worst = i;
    }
    ++out.checked;
  }
  params.unflatten(flat);
  return out;
}

}  // namespace testing_support
