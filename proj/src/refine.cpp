#include "motiondiff/refine.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include "motiondiff/model.hpp"

namespace motiondiff {

namespace {

std::size_t as_size(int v) { return static_cast<std::size_t>(v); }

std::string layer_name(int l, int layers) { return l == layers - 1 ? "ref.gcout" : "ref.gc" + std::to_string(l); }

Tensor near_identity(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.01, 0.01);
  Tensor a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = (i == j ? 1.0 : 0.0) + u(rng);
  return a;
}

// Flat index map from [B*f x 3J] (frame rows) to [B*J x 3f] (joint rows).
std::vector<std::size_t> frames_to_nodes(std::size_t batch, std::size_t joints, std::size_t future) {
  std::vector<std::size_t> idx(batch * joints * 3 * future);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t j = 0; j < joints; ++j)
      for (std::size_t t = 0; t < future; ++t)
        for (std::size_t c = 0; c < 3; ++c)
          idx[(b * joints + j) * 3 * future + t * 3 + c] = (b * future + t) * 3 * joints + 3 * j + c;
  return idx;
}

std::vector<std::size_t> invert(const std::vector<std::size_t>& perm) {
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
  return inv;
}

}  // namespace

void RefineConfig::validate() const {
  if (n_gcn_layers < 2) throw ConfigError("refine.n_gcn_layers must be >= 2");
  if (gcn_hidden <= 0) throw ConfigError("refine.gcn_hidden must be positive");
  if (cond_proj <= 0) throw ConfigError("refine.cond_proj must be positive");
  if (!(lambda >= 0.0)) throw ConfigError("refine.lambda must be >= 0");
  if (!(gamma >= 0.0)) throw ConfigError("refine.gamma must be >= 0");
  if (!(sigma > 0.0)) throw ConfigError("refine.sigma must be positive");
}

ModelParams init_refiner_params(const RefineConfig& cfg, int joints, int future, int cond_dim, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  ModelParams p;
  const std::size_t J = as_size(joints);
  const std::size_t traj = 3 * as_size(future);
  const std::size_t hidden = as_size(cfg.gcn_hidden);
  layers::add_linear(p, "ref.cond", as_size(cond_dim), as_size(cfg.cond_proj), rng);
  for (int l = 0; l < cfg.n_gcn_layers; ++l) {
    const bool last = l == cfg.n_gcn_layers - 1;
    const std::size_t in = l == 0 ? traj + as_size(cfg.cond_proj) : hidden;
    const std::size_t out = last ? traj : hidden;
    const std::string name = layer_name(l, cfg.n_gcn_layers);
    layers::add_linear(p, name, in, out, rng, /*zero=*/last);
    p.add(name + ".adj", near_identity(J, rng));
  }
  return p;
}

Var gcn_refine(Tape& t, const RefineConfig& cfg, const ModelParams& p, Var y, Var cond, int joints, int future) {
  const std::size_t J = as_size(joints);
  const std::size_t f = as_size(future);
  if (y.cols() != 3 * J || y.rows() == 0 || y.rows() % f != 0) {
    throw std::invalid_argument("gcn_refine: expected [B*f x 3J] input, got " + y.value().shape_str());
  }
  const std::size_t batch = y.rows() / f;
  if (cond.rows() != batch) throw std::invalid_argument("gcn_refine: one condition row per sample required");

  const auto to_nodes = frames_to_nodes(batch, J, f);
  Var nodes = ag::gather(y, to_nodes, batch * J, 3 * f);
  std::vector<std::size_t> repeat;
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t j = 0; j < J; ++j) repeat.push_back(b);
  Var cond_nodes = ag::gather_rows(layers::linear(t, p, "ref.cond", cond), repeat);
  Var h = ag::concat_cols({nodes, cond_nodes});

  for (int l = 0; l < cfg.n_gcn_layers; ++l) {
    const std::string name = layer_name(l, cfg.n_gcn_layers);
    Var mixed = ag::group_left_mul(t.param(p, name + ".adj"), ag::matmul(h, t.param(p, name + ".w")), J);
    mixed = ag::add_row(mixed, t.param(p, name + ".b"));
    if (l == cfg.n_gcn_layers - 1) {
      h = mixed;
    } else if (l == 0) {
      h = ag::tanh(mixed);
    } else {
      h = ag::add(h, ag::tanh(mixed));
    }
  }
  Var residual = ag::gather(h, invert(to_nodes), batch * f, 3 * J);
  return ag::add(y, residual);
}

Tensor gcn_refine(const RefineConfig& cfg, const ModelParams& p, const Tensor& y, const Tensor& cond, int joints,
                  int future) {
  Tape t;
  return gcn_refine(t, cfg, p, t.constant(y), t.constant(cond), joints, future).value();
}

double refine_loss(std::span<const Tensor> refined, std::span<const Tensor> raw, const Tensor& truth,
                   const RefineConfig& cfg) {
  const std::size_t n = refined.size();
  if (n < 2) throw std::invalid_argument("refine_loss: diversity term needs N >= 2");
  if (raw.size() != n) throw std::invalid_argument("refine_loss: refined and raw sets differ in size");
  double recon = std::numeric_limits<double>::infinity();
  double prox = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    recon = std::min(recon, squared_distance(refined[i], truth));
    prox += squared_distance(refined[i], raw[i]);
  }
  double div = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) div += std::exp(-squared_distance(refined[i], refined[j]) / cfg.sigma);
  div /= static_cast<double>(n * (n - 1));
  return recon + cfg.lambda * prox + cfg.gamma * div;
}

Var refine_loss(Tape& t, Var z, const Tensor& raw, const Tensor& truth, const RefineConfig& cfg) {
  const std::size_t n = z.rows();
  if (n < 2) throw std::invalid_argument("refine_loss: diversity term needs N >= 2");
  if (!raw.same_shape(z.value())) throw std::invalid_argument("refine_loss: refined and raw sets differ in shape");
  if (truth.rows() != 1 || truth.cols() != z.cols()) throw std::invalid_argument("refine_loss: truth must be [1 x F]");
  Tensor truth_rows(n, truth.cols());
  for (std::size_t i = 0; i < n; ++i) std::copy(truth.flat().begin(), truth.flat().end(), truth_rows.row(i).begin());
  Tensor off_diag(n, n, 1.0);
  for (std::size_t i = 0; i < n; ++i) off_diag(i, i) = 0.0;

  Var recon = ag::min_entry(ag::row_sum_squares(ag::sub(z, t.constant(std::move(truth_rows)))));
  Var prox = ag::sum_squares(ag::sub(z, t.constant(raw)));
  Var kernel = ag::exp(ag::scale(ag::pairwise_sq_dist(z), -1.0 / cfg.sigma));
  Var div = ag::sum(ag::mul(kernel, t.constant(std::move(off_diag))));
  Var loss = ag::add(recon, ag::scale(prox, cfg.lambda));
  return ag::add(loss, ag::scale(div, cfg.gamma / static_cast<double>(n * (n - 1))));
}

}  // namespace motiondiff
