#include "motiondiff/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace motiondiff {

Tensor::Tensor(std::size_t rows, std::size_t cols, const std::vector<double>& data)
    : rows_(rows), cols_(cols), data_(data.begin(), data.end()) {
  if (data_.size() != rows_ * cols_) {
    throw std::invalid_argument("Tensor: data size " + std::to_string(data_.size()) +
                                " does not match shape " + shape_str());
  }
}

Tensor Tensor::reshaped(std::size_t rows, std::size_t cols) const {
  if (rows * cols != data_.size()) {
    throw std::invalid_argument("Tensor::reshaped: cannot view " + shape_str() + " as " +
                                std::to_string(rows) + "x" + std::to_string(cols));
  }
  Tensor out = *this;
  out.rows_ = rows;
  out.cols_ = cols;
  return out;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  // v - v is NaN exactly when v is NaN or infinite; four lanes keep the loop
  // free of branches and dependency stalls.
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  const std::size_t n = data_.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    for (std::size_t l = 0; l < 4; ++l) acc[l] += data_[i + l] - data_[i + l];
  for (; i < n; ++i) acc[0] += data_[i] - data_[i];
  return acc[0] + acc[1] + acc[2] + acc[3] == 0.0;
}

std::string Tensor::shape_str() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

double squared_distance(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("squared_distance: shape mismatch " + a.shape_str() + " vs " +
                                b.shape_str());
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double squared_norm(const Tensor& a) {
  double s = 0.0;
  for (double v : a.flat()) s += v * v;
  return s;
}

}  // namespace motiondiff
