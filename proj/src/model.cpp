#include "motiondiff/model.hpp"

#include <cmath>
#include <stdexcept>

namespace motiondiff {

namespace {

Tensor tile_rows(const Tensor& block, std::size_t times) {
  Tensor out(block.rows() * times, block.cols());
  for (std::size_t r = 0; r < times; ++r)
    std::copy(block.flat().begin(), block.flat().end(), out.data() + r * block.size());
  return out;
}

std::vector<std::size_t> repeat_each(std::size_t n, std::size_t times) {
  std::vector<std::size_t> idx;
  idx.reserve(n * times);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t r = 0; r < times; ++r) idx.push_back(i);
  return idx;
}

std::size_t as_size(int v) { return static_cast<std::size_t>(v); }

}  // namespace

void NetworkConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw ConfigError(std::string("network.") + name + " must be positive");
  };
  positive(joints, "joints");
  positive(observed, "observed");
  positive(future, "future");
  positive(joint_dim, "joint_dim");
  positive(d_model, "d_model");
  positive(n_heads, "n_heads");
  positive(n_spatial_layers, "n_spatial_layers");
  positive(n_temporal_layers, "n_temporal_layers");
  positive(cond_dim, "cond_dim");
  positive(ffn_mult, "ffn_mult");
  if (joints < 2) throw ConfigError("network.joints must be >= 2");
  if (d_model % n_heads != 0) throw ConfigError("network.d_model must be divisible by network.n_heads");
  if (spatial_transformer && joint_dim % n_heads != 0) {
    throw ConfigError("network.joint_dim must be divisible by network.n_heads");
  }
  if (head_dims.empty()) throw ConfigError("network.head_dims must not be empty");
  for (int h : head_dims) positive(h, "head_dims");
}

Tensor sinusoidal_encoding(std::size_t positions, std::size_t dim, std::size_t first_position) {
  Tensor pe(positions, dim);
  for (std::size_t p = 0; p < positions; ++p) {
    const double pos = static_cast<double>(p + first_position);
    for (std::size_t i = 0; i < dim; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(dim));
      pe(p, i) = std::sin(pos * freq);
      if (i + 1 < dim) pe(p, i + 1) = std::cos(pos * freq);
    }
  }
  return pe;
}

namespace layers {

void add_linear(ModelParams& p, const std::string& prefix, std::size_t in, std::size_t out, std::mt19937_64& rng,
                bool zero) {
  Tensor w(in, out);
  if (!zero) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& v : w.flat()) v = u(rng);
  }
  p.add(prefix + ".w", std::move(w));
  p.add(prefix + ".b", Tensor(1, out));
}

Var linear(Tape& t, const ModelParams& p, const std::string& prefix, Var x) {
  return ag::linear(x, t.param(p, prefix + ".w"), t.param(p, prefix + ".b"));
}

namespace {

void add_norm(ModelParams& p, const std::string& prefix, std::size_t width) {
  p.add(prefix + ".g", Tensor(1, width, 1.0));
  p.add(prefix + ".b", Tensor(1, width));
}

Var norm(Tape& t, const ModelParams& p, const std::string& prefix, Var x) {
  return ag::layer_norm(x, t.param(p, prefix + ".g"), t.param(p, prefix + ".b"));
}

}  // namespace

void add_transformer(ModelParams& p, const std::string& prefix, std::size_t width, std::size_t layers,
                     std::size_t ffn_mult, std::mt19937_64& rng) {
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string lp = prefix + ".L" + std::to_string(l);
    add_norm(p, lp + ".ln1", width);
    add_linear(p, lp + ".q", width, width, rng);
    add_linear(p, lp + ".k", width, width, rng);
    add_linear(p, lp + ".v", width, width, rng);
    add_linear(p, lp + ".o", width, width, rng);
    add_norm(p, lp + ".ln2", width);
    add_linear(p, lp + ".ff1", width, ffn_mult * width, rng);
    add_linear(p, lp + ".ff2", ffn_mult * width, width, rng);
  }
}

Var transformer(Tape& t, const ModelParams& p, const std::string& prefix, Var x, std::size_t layers,
                std::size_t group, std::size_t heads) {
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string lp = prefix + ".L" + std::to_string(l);
    Var h = norm(t, p, lp + ".ln1", x);
    Var att = ag::grouped_attention(linear(t, p, lp + ".q", h), linear(t, p, lp + ".k", h),
                                    linear(t, p, lp + ".v", h), group, heads);
    x = ag::add(x, linear(t, p, lp + ".o", att));
    h = norm(t, p, lp + ".ln2", x);
    x = ag::add(x, linear(t, p, lp + ".ff2", ag::gelu(linear(t, p, lp + ".ff1", h))));
  }
  return x;
}

void add_gru(ModelParams& p, const std::string& prefix, std::size_t in, std::size_t hidden, std::mt19937_64& rng) {
  for (const char* gate : {"r", "z", "n"}) {
    add_linear(p, prefix + ".x" + gate, in, hidden, rng);
    add_linear(p, prefix + ".h" + gate, hidden, hidden, rng);
  }
}

Var gru(Tape& t, const ModelParams& p, const std::string& prefix, Var x, std::size_t batch, std::size_t hidden) {
  if (batch == 0 || x.rows() % batch != 0) throw std::invalid_argument("gru: rows not divisible by batch");
  const std::size_t steps = x.rows() / batch;
  if (steps == 0) throw std::invalid_argument("gru: empty sequence");
  Var xr = linear(t, p, prefix + ".xr", x);
  Var xz = linear(t, p, prefix + ".xz", x);
  Var xn = linear(t, p, prefix + ".xn", x);
  Var h = t.constant(Tensor(batch, hidden));
  std::vector<std::size_t> rows(batch);
  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t b = 0; b < batch; ++b) rows[b] = b * steps + s;
    Var r = ag::sigmoid(ag::add(ag::gather_rows(xr, rows), linear(t, p, prefix + ".hr", h)));
    Var z = ag::sigmoid(ag::add(ag::gather_rows(xz, rows), linear(t, p, prefix + ".hz", h)));
    Var n = ag::tanh(ag::add(ag::gather_rows(xn, rows), ag::mul(r, linear(t, p, prefix + ".hn", h))));
    h = ag::add(n, ag::mul(z, ag::sub(h, n)));
  }
  return h;
}

}  // namespace layers

ModelParams init_diffusion_params(const NetworkConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  ModelParams p;
  const std::size_t J = as_size(cfg.joints);
  const std::size_t c = as_size(cfg.joint_dim);
  const std::size_t d = as_size(cfg.d_model);
  const std::size_t frame_width = cfg.spatial_transformer ? J * c : c;

  for (const std::string side : {"enc", "dec"}) {
    if (cfg.spatial_transformer) {
      layers::add_linear(p, side + ".embed", 3, c, rng);
      layers::add_transformer(p, side + ".spatial", c, as_size(cfg.n_spatial_layers), as_size(cfg.ffn_mult), rng);
    } else {
      layers::add_linear(p, side + ".pose", 3 * J, c, rng);
    }
    if (side == "enc") layers::add_gru(p, "enc.gru", frame_width, as_size(cfg.cond_dim), rng);
  }
  layers::add_linear(p, "dec.frame", frame_width, d, rng);
  layers::add_linear(p, "dec.cond", as_size(cfg.cond_dim), d, rng);
  layers::add_linear(p, "dec.fuse", 3 * d, d, rng);
  layers::add_transformer(p, "dec.temporal", d, as_size(cfg.n_temporal_layers), as_size(cfg.ffn_mult), rng);
  std::size_t width = d;
  for (std::size_t i = 0; i < cfg.head_dims.size(); ++i) {
    layers::add_linear(p, "dec.head" + std::to_string(i), width, as_size(cfg.head_dims[i]), rng);
    width = as_size(cfg.head_dims[i]);
  }
  layers::add_linear(p, "dec.expand", width, J * width, rng);
  layers::add_linear(p, "dec.out", width, 3, rng, /*zero=*/true);
  return p;
}

namespace net {

Var joint_embed(Tape& t, const ModelParams& p, const std::string& prefix, Var joints_xyz) {
  if (joints_xyz.cols() != 3) throw std::invalid_argument("joint_embed: expected [n x 3] input");
  return layers::linear(t, p, prefix + ".embed", joints_xyz);
}

Var encode_frames(Tape& t, const NetworkConfig& cfg, const ModelParams& p, const std::string& prefix, Var frames) {
  const std::size_t J = as_size(cfg.joints);
  if (frames.cols() != 3 * J) throw std::invalid_argument("encode_frames: expected 3J columns");
  const std::size_t n = frames.rows();
  if (!cfg.spatial_transformer) return layers::linear(t, p, prefix + ".pose", frames);
  const std::size_t c = as_size(cfg.joint_dim);
  Var tokens = joint_embed(t, p, prefix, ag::reshape(frames, n * J, 3));
  tokens = ag::add(tokens, t.constant(tile_rows(sinusoidal_encoding(J, c), n)));
  tokens = layers::transformer(t, p, prefix + ".spatial", tokens, as_size(cfg.n_spatial_layers), J,
                               as_size(cfg.n_heads));
  return ag::reshape(tokens, n, J * c);
}

Var encode_past(Tape& t, const NetworkConfig& cfg, const ModelParams& p, Var past, std::size_t batch) {
  if (batch == 0 || past.rows() == 0 || past.rows() % batch != 0) {
    throw std::invalid_argument("encode_past: need at least one observed frame per batch element");
  }
  // Joint tokens stay flattened per frame so the recurrent unit sees which
  // joint is where.
  Var feats = encode_frames(t, cfg, p, "enc", past);
  return layers::gru(t, p, "enc.gru", feats, batch, as_size(cfg.cond_dim));
}

Var predict_noise(Tape& t, const NetworkConfig& cfg, const ModelParams& p, Var xk, const std::vector<int>& steps,
                  Var cond) {
  const std::size_t batch = steps.size();
  const std::size_t f = as_size(cfg.future);
  const std::size_t J = as_size(cfg.joints);
  const std::size_t d = as_size(cfg.d_model);
  if (xk.rows() != batch * f || xk.cols() != 3 * J) {
    throw std::invalid_argument("predict_noise: expected state [" + std::to_string(batch * f) + " x " +
                                std::to_string(3 * J) + "], got " + xk.value().shape_str());
  }
  if (cond.rows() != batch || cond.cols() != as_size(cfg.cond_dim)) {
    throw std::invalid_argument("predict_noise: condition shape " + cond.value().shape_str());
  }

  Var frame = layers::linear(t, p, "dec.frame", encode_frames(t, cfg, p, "dec", xk));
  frame = ag::add(frame, t.constant(tile_rows(sinusoidal_encoding(f, d), batch)));
  Var cond_rows = ag::gather_rows(layers::linear(t, p, "dec.cond", cond), repeat_each(batch, f));
  Tensor step_enc(batch * f, d);
  for (std::size_t b = 0; b < batch; ++b) {
    const Tensor e = sinusoidal_encoding(1, d, as_size(steps[b]));
    for (std::size_t r = 0; r < f; ++r) std::copy(e.flat().begin(), e.flat().end(), step_enc.row(b * f + r).begin());
  }
  Var h = layers::linear(t, p, "dec.fuse", ag::concat_cols({frame, cond_rows, t.constant(std::move(step_enc))}));
  h = layers::transformer(t, p, "dec.temporal", h, as_size(cfg.n_temporal_layers), f, as_size(cfg.n_heads));
  for (std::size_t i = 0; i < cfg.head_dims.size(); ++i) {
    h = layers::linear(t, p, "dec.head" + std::to_string(i), h);
  }
  const std::size_t width = as_size(cfg.head_dims.back());
  h = layers::linear(t, p, "dec.expand", h);
  h = layers::linear(t, p, "dec.out", ag::reshape(h, batch * f * J, width));
  return ag::reshape(h, batch * f, 3 * J);
}

}  // namespace net

Tensor encode_past(const NetworkConfig& cfg, const ModelParams& p, const Tensor& past) {
  Tape t;
  return net::encode_past(t, cfg, p, t.constant(past), 1).value();
}

Tensor predict_noise(const NetworkConfig& cfg, const ModelParams& p, const Tensor& xk, int k, const Tensor& cond) {
  Tape t;
  return net::predict_noise(t, cfg, p, t.constant(xk), {k}, t.constant(cond)).value();
}

std::vector<Tensor> NetworkPredictor::predict_batch(std::span<const Tensor> states, int k,
                                                    std::span<const Tensor> conditions) const {
  if (states.size() != conditions.size()) throw std::invalid_argument("predict_batch: one condition per state");
  if (states.empty()) return {};
  Tape t;
  Var out = net::predict_noise(t, cfg_, params_, t.constant(stack_rows(states)),
                               std::vector<int>(states.size(), k), t.constant(stack_rows(conditions)));
  return split_rows(out.value(), states.size());
}

Tensor stack_rows(std::span<const Tensor> parts) {
  if (parts.empty()) return {};
  const std::size_t rows = parts.front().rows();
  const std::size_t cols = parts.front().cols();
  Tensor out(rows * parts.size(), cols);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].rows() != rows || parts[i].cols() != cols) {
      throw std::invalid_argument("stack_rows: shape mismatch " + parts[i].shape_str());
    }
    std::copy(parts[i].flat().begin(), parts[i].flat().end(), out.data() + i * rows * cols);
  }
  return out;
}

std::vector<Tensor> split_rows(const Tensor& stacked, std::size_t parts) {
  if (parts == 0 || stacked.rows() % parts != 0) throw std::invalid_argument("split_rows: uneven split");
  const std::size_t rows = stacked.rows() / parts;
  std::vector<Tensor> out;
  out.reserve(parts);
  for (std::size_t i = 0; i < parts; ++i) {
    std::vector<double> data(stacked.data() + i * rows * stacked.cols(),
                             stacked.data() + (i + 1) * rows * stacked.cols());
    out.emplace_back(rows, stacked.cols(), std::move(data));
  }
  return out;
}

}  // namespace motiondiff
