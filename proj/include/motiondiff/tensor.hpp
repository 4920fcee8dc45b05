#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <memory>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace motiondiff {

// Thrown for malformed inputs and files (CLI exit code 3).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown when a computation produces NaN/Inf (CLI exit code 4).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown for invalid configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

// Value-initialisation becomes default-initialisation, so sized buffers that
// are about to be overwritten skip the zero fill.
template <class T>
struct DefaultInitAllocator : std::allocator<T> {
  template <class U>
  struct rebind {
    using other = DefaultInitAllocator<U>;
  };
  DefaultInitAllocator() = default;
  template <class U>
  DefaultInitAllocator(const DefaultInitAllocator<U>&) noexcept {}
  template <class U>
  void construct(U* p) noexcept(std::is_nothrow_default_constructible_v<U>) {
    ::new (static_cast<void*>(p)) U;
  }
  template <class U, class... Args>
  void construct(U* p, Args&&... args) {
    ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
  }
};

}  // namespace detail

// Dense row-major matrix of doubles. Motion windows use rows = frames and
// cols = 3 * joints (x0 y0 z0 x1 y1 z1 ...), matching the text file layout.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Tensor(std::size_t rows, std::size_t cols, const std::vector<double>& data);
  // Contents are unspecified; for outputs that are written in full.
  static Tensor uninitialized(std::size_t rows, std::size_t cols) { return Tensor(rows, cols, Uninit{}); }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  // Same data, new shape. rows * cols must equal size().
  Tensor reshaped(std::size_t rows, std::size_t cols) const;
  void fill(double v);

  bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  bool all_finite() const;
  std::string shape_str() const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  using Buffer = std::vector<double, detail::DefaultInitAllocator<double>>;
  struct Uninit {};
  Tensor(std::size_t rows, std::size_t cols, Uninit) : rows_(rows), cols_(cols), data_(rows * cols) {}

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Buffer data_;
};

// Sum of squared differences over all entries.
double squared_distance(const Tensor& a, const Tensor& b);
double squared_norm(const Tensor& a);

}  // namespace motiondiff
