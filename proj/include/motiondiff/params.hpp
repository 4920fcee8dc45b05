#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "motiondiff/tensor.hpp"

namespace motiondiff {

// Named parameter tensors with a flat-vector view. The flat order is the
// insertion order, so two instances built by the same code line up.
class ModelParams {
 public:
  void add(const std::string& name, Tensor init);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t index_of(const std::string& name) const;
  const Tensor& at(const std::string& name) const { return tensors_[index_of(name)]; }
  Tensor& at(const std::string& name) { return tensors_[index_of(name)]; }

  std::size_t count() const { return tensors_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  const Tensor& tensor(std::size_t i) const { return tensors_[i]; }
  Tensor& tensor(std::size_t i) { return tensors_[i]; }
  // Offset of tensor i inside the flat view.
  std::size_t offset(std::size_t i) const { return offsets_[i]; }

  std::size_t flat_size() const { return total_; }
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);

  // FNV-1a over names, shapes and raw value bytes.
  std::uint64_t fingerprint() const;

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    return a.names_ == b.names_ && a.tensors_ == b.tensors_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
  std::vector<std::size_t> offsets_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t total_ = 0;
};

}  // namespace motiondiff
