#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "motiondiff/autograd.hpp"
#include "motiondiff/diffusion.hpp"
#include "motiondiff/params.hpp"

namespace motiondiff {

struct NetworkConfig {
  int joints = 5;
  int observed = 8;
  int future = 16;
  int joint_dim = 32;  // c: per-joint embedding width
  int d_model = 64;
  int n_heads = 4;
  int n_spatial_layers = 2;
  int n_temporal_layers = 2;
  int cond_dim = 64;  // d_c, also the GRU width
  int ffn_mult = 2;
  // Hidden widths of the output head before the per-joint projection.
  std::vector<int> head_dims{64, 32};
  // false selects the flat pose embedding (3J -> c) with no spatial transformer.
  bool spatial_transformer = true;

  void validate() const;
  std::size_t state_width() const { return 3 * static_cast<std::size_t>(joints); }
};

// Fixed sinusoidal encoding, rows = positions, cols = dim.
Tensor sinusoidal_encoding(std::size_t positions, std::size_t dim, std::size_t first_position = 0);

// Parameter builders and graph pieces shared by the diffusion network and
// the refiner. Every builder takes the parameter-name prefix.
namespace layers {

void add_linear(ModelParams& p, const std::string& prefix, std::size_t in, std::size_t out, std::mt19937_64& rng,
                bool zero = false);
Var linear(Tape& t, const ModelParams& p, const std::string& prefix, Var x);

void add_transformer(ModelParams& p, const std::string& prefix, std::size_t width, std::size_t layers,
                     std::size_t ffn_mult, std::mt19937_64& rng);
// Pre-norm encoder stack without a closing norm, so the residual stream keeps
// the input scale. Attention is restricted
// to consecutive groups of `group` rows.
Var transformer(Tape& t, const ModelParams& p, const std::string& prefix, Var x, std::size_t layers,
                std::size_t group, std::size_t heads);

void add_gru(ModelParams& p, const std::string& prefix, std::size_t in, std::size_t hidden, std::mt19937_64& rng);
// x is [batch*steps x in] laid out batch-major; returns the final hidden state [batch x hidden].
Var gru(Tape& t, const ModelParams& p, const std::string& prefix, Var x, std::size_t batch, std::size_t hidden);

}  // namespace layers

ModelParams init_diffusion_params(const NetworkConfig& cfg, std::uint64_t seed);

// Graph builders for the past encoder f_psi and the noise predictor
// eps_theta. Inputs are stacked batch-major.
namespace net {

// rows [n x 3] -> [n x c]; weights shared across joints.
Var joint_embed(Tape& t, const ModelParams& p, const std::string& prefix, Var joints_xyz);
// frames [n x 3J] -> per-frame features: [n x J*c] after the spatial
// transformer, or [n x c] with the flat pose embedding.
Var encode_frames(Tape& t, const NetworkConfig& cfg, const ModelParams& p, const std::string& prefix, Var frames);
// past [B*T x 3J] -> C [B x d_c]. T is taken from the input shape.
Var encode_past(Tape& t, const NetworkConfig& cfg, const ModelParams& p, Var past, std::size_t batch);
// xk [B*f x 3J], one step per batch element, cond [B x d_c] -> [B*f x 3J].
Var predict_noise(Tape& t, const NetworkConfig& cfg, const ModelParams& p, Var xk, const std::vector<int>& steps,
                  Var cond);

}  // namespace net

// Value-level conveniences around the graph builders (no gradient).
Tensor encode_past(const NetworkConfig& cfg, const ModelParams& p, const Tensor& past);
Tensor predict_noise(const NetworkConfig& cfg, const ModelParams& p, const Tensor& xk, int k, const Tensor& cond);

// NoisePredictor backed by a parameter set.
class NetworkPredictor : public NoisePredictor {
 public:
  NetworkPredictor(const NetworkConfig& cfg, const ModelParams& params) : cfg_(cfg), params_(params) {}

  std::pair<std::size_t, std::size_t> state_shape() const override {
    return {static_cast<std::size_t>(cfg_.future), cfg_.state_width()};
  }
  std::vector<Tensor> predict_batch(std::span<const Tensor> states, int k,
                                    std::span<const Tensor> conditions) const override;

 private:
  const NetworkConfig& cfg_;
  const ModelParams& params_;
};

// Stacks equally shaped tensors vertically / splits them back.
Tensor stack_rows(std::span<const Tensor> parts);
std::vector<Tensor> split_rows(const Tensor& stacked, std::size_t parts);

}  // namespace motiondiff
