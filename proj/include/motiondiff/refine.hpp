#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "motiondiff/autograd.hpp"
#include "motiondiff/params.hpp"

namespace motiondiff {

struct RefineConfig {
  int n_gcn_layers = 12;
  int gcn_hidden = 256;
  // Width of the condition projection appended to every joint node.
  int cond_proj = 32;
  double lambda = 0.01;
  double gamma = 0.005;
  double sigma = 100.0;

  void validate() const;
};

// Parameters for a refiner over J joints and f future frames, conditioned on
// a d_c-dimensional embedding. The output layer starts at zero, so a fresh
// refiner is the identity map.
ModelParams init_refiner_params(const RefineConfig& cfg, int joints, int future, int cond_dim, std::uint64_t seed);

// Z = Y + eps_phi(Y, C). y is [B*f x 3J] batch-major, cond is [B x d_c].
// Each joint is a graph node whose feature is its whole 3f trajectory plus
// the projected condition; every layer mixes nodes with a learnable dense
// J x J adjacency.
Var gcn_refine(Tape& t, const RefineConfig& cfg, const ModelParams& p, Var y, Var cond, int joints, int future);
Tensor gcn_refine(const RefineConfig& cfg, const ModelParams& p, const Tensor& y, const Tensor& cond, int joints,
                  int future);

// min_i ||Z_i - X||^2 + lambda sum_i ||Z_i - Y_i||^2
//   + gamma / (N (N-1)) sum_i sum_{j != i} exp(-d^2(Z_i, Z_j) / sigma).
// Requires N >= 2.
double refine_loss(std::span<const Tensor> refined, std::span<const Tensor> raw, const Tensor& truth,
                   const RefineConfig& cfg);
// Graph form; z holds one flattened sample per row [N x F], raw likewise,
// truth is [1 x F].
Var refine_loss(Tape& t, Var z, const Tensor& raw, const Tensor& truth, const RefineConfig& cfg);

}  // namespace motiondiff
