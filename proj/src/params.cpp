#include "motiondiff/params.hpp"

#include <cstring>
#include <stdexcept>

namespace motiondiff {

void ModelParams::add(const std::string& name, Tensor init) {
  if (contains(name)) throw std::invalid_argument("ModelParams: duplicate parameter " + name);
  index_.emplace(name, tensors_.size());
  names_.push_back(name);
  offsets_.push_back(total_);
  total_ += init.size();
  tensors_.push_back(std::move(init));
}

std::size_t ModelParams::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("ModelParams: unknown parameter " + name);
  return it->second;
}

std::vector<double> ModelParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(total_);
  for (const auto& t : tensors_) flat.insert(flat.end(), t.flat().begin(), t.flat().end());
  return flat;
}

void ModelParams::unflatten(std::span<const double> flat) {
  if (flat.size() != total_) {
    throw std::invalid_argument("ModelParams::unflatten: expected " + std::to_string(total_) +
                                " values, got " + std::to_string(flat.size()));
  }
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    auto dst = tensors_[i].flat();
    std::memcpy(dst.data(), flat.data() + offsets_[i], dst.size() * sizeof(double));
  }
}

std::uint64_t ModelParams::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    mix(names_[i].data(), names_[i].size());
    const std::uint64_t shape[2] = {tensors_[i].rows(), tensors_[i].cols()};
    mix(shape, sizeof(shape));
    mix(tensors_[i].data(), tensors_[i].size() * sizeof(double));
  }
  return h;
}

}  // namespace motiondiff
