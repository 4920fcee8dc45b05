#include "motiondiff/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "motiondiff/adam.hpp"
#include "motiondiff/diffusion.hpp"
#include "motiondiff/model.hpp"
#include "motiondiff/pipeline.hpp"
#include "motiondiff/refine.hpp"

namespace motiondiff {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  // Fisher-Yates with explicit draws; std::shuffle's draw pattern is
  // implementation-defined.
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  return order;
}

struct Optimizer {
  ModelParams& params;
  AdamState state;
  AdamHyper hyper;

  Optimizer(ModelParams& p, const TrainConfig& tc) : params(p), state(p.flat_size()) {
    hyper.beta1 = tc.adam_beta1;
    hyper.beta2 = tc.adam_beta2;
    hyper.eps = tc.adam_eps;
  }

  void step(const std::vector<double>& grad, double lr) {
    hyper.lr = lr;
    std::vector<double> flat = params.flatten();
    adam_step(flat, grad, state, hyper);
    params.unflatten(flat);
  }
};

void check_loss(double loss, const char* what, int epoch) {
  if (!std::isfinite(loss)) {
    throw NumericError(std::string("non-finite ") + what + " loss in epoch " + std::to_string(epoch));
  }
}

}  // namespace

double learning_rate(double base, int epochs, int decay_start, double final_fraction, int epoch) {
  if (epoch <= decay_start || epochs <= decay_start) return base;
  const double progress = static_cast<double>(epoch - decay_start) / static_cast<double>(epochs - decay_start);
  return base * (1.0 - (1.0 - final_fraction) * std::min(progress, 1.0));
}

Var diffusion_batch_loss(Tape& t, const ExperimentConfig& cfg, const NoiseSchedule& schedule,
                         const ModelParams& params, const std::vector<const WindowPair*>& windows,
                         const std::vector<int>& k, const std::vector<Tensor>& eps) {
  const std::size_t batch = windows.size();
  if (batch == 0 || k.size() != batch || eps.size() != batch) {
    throw std::invalid_argument("diffusion_batch_loss: batch inputs differ in length");
  }
  std::vector<Tensor> past;
  std::vector<Tensor> noisy;
  for (std::size_t i = 0; i < batch; ++i) {
    past.push_back(windows[i]->observed);
    noisy.push_back(forward_diffuse(schedule, windows[i]->future, k[i], eps[i]).data);
  }
  Var cond = net::encode_past(t, cfg.network, params, t.constant(stack_rows(past)), batch);
  Var eps_hat = net::predict_noise(t, cfg.network, params, t.constant(stack_rows(noisy)), k, cond);
  double norm = 1.0 / static_cast<double>(batch);
  if (cfg.train.loss_reduction == "mean") norm /= static_cast<double>(eps.front().size());
  return ag::scale(ag::sum_squares(ag::sub(eps_hat, t.constant(stack_rows(eps)))), norm);
}

TrainResult train_diffusion(const ExperimentConfig& cfg, const std::vector<WindowPair>& windows,
                            const EpochCallback& on_epoch) {
  cfg.validate();
  if (windows.empty()) throw DataError("train_diffusion: empty window set");
  const NoiseSchedule schedule = NoiseSchedule::linear(cfg.schedule.steps, cfg.schedule.beta_1, cfg.schedule.beta_K);
  const TrainConfig& tc = cfg.train;
  ModelParams params = init_diffusion_params(cfg.network, tc.seed);
  Optimizer opt(params, tc);
  std::mt19937_64 rng(mix_seed(tc.seed, 0x7472));
  std::uniform_int_distribution<int> pick_k(1, cfg.schedule.steps);
  const auto [rows, cols] = std::pair{static_cast<std::size_t>(cfg.network.future), cfg.network.state_width()};

  // One entry per (window, draw).
  std::vector<const WindowPair*> pool;
  for (const auto& w : windows)
    for (int d = 0; d < tc.k_per_example; ++d) pool.push_back(&w);

  TrainResult result;
  const auto start = Clock::now();
  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    const double lr = learning_rate(tc.lr, tc.epochs, tc.decay_start, tc.decay_final_fraction, epoch);
    const auto order = shuffled(pool.size(), rng);
    double total = 0.0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(tc.batch_size)) {
      const std::size_t len = std::min<std::size_t>(tc.batch_size, order.size() - b0);
      std::vector<const WindowPair*> batch;
      std::vector<int> ks;
      std::vector<Tensor> eps;
      for (std::size_t i = 0; i < len; ++i) {
        batch.push_back(pool[order[b0 + i]]);
        ks.push_back(pick_k(rng));
        eps.push_back(standard_normal(rows, cols, rng));
      }
      double loss = 0.0;
      const auto grad = gradient(
          params, [&](Tape& t) { return diffusion_batch_loss(t, cfg, schedule, params, batch, ks, eps); }, &loss);
      check_loss(loss, "diffusion", epoch);
      opt.step(grad, lr);
      total += loss * static_cast<double>(len);
    }
    EpochLog entry{epoch, total / static_cast<double>(pool.size()), lr,
                   tc.record_wallclock ? seconds_since(start) : 0.0};
    result.log.push_back(entry);
    if (epoch == 1 || entry.loss < result.best_loss) {
      result.best_loss = entry.loss;
      result.best_epoch = epoch;
      result.best = params;
    }
    if (on_epoch) on_epoch(entry);
  }
  result.last = std::move(params);
  return result;
}

TrainResult train_refiner(const ExperimentConfig& cfg, const std::vector<WindowPair>& windows,
                          const ModelParams& diffusion, const EpochCallback& on_epoch) {
  cfg.validate();
  if (windows.empty()) throw DataError("train_refiner: empty window set");
  const RefineTrainConfig& rc = cfg.refine;
  const std::uint64_t frozen = diffusion.fingerprint();
  const auto conditions = encode_conditions(cfg.network, diffusion, windows);
  ModelParams params =
      init_refiner_params(rc.net, cfg.network.joints, cfg.network.future, cfg.network.cond_dim, rc.seed);
  Optimizer opt(params, cfg.train);
  std::mt19937_64 rng(mix_seed(rc.seed, 0x726566));
  const std::size_t n = static_cast<std::size_t>(rc.samples);
  const std::size_t f = static_cast<std::size_t>(cfg.network.future);
  const std::size_t width = cfg.network.state_width();

  TrainResult result;
  const auto start = Clock::now();
  for (int epoch = 1; epoch <= rc.epochs; ++epoch) {
    const double lr = learning_rate(rc.lr, rc.epochs, rc.decay_start, cfg.train.decay_final_fraction, epoch);
    const auto sets = sample_futures(cfg, diffusion, conditions, rc.samples,
                                     mix_seed(rc.seed, static_cast<std::uint64_t>(epoch)));
    const auto order = shuffled(windows.size(), rng);
    double total = 0.0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(rc.batch_size)) {
      const std::size_t len = std::min<std::size_t>(rc.batch_size, order.size() - b0);
      std::vector<Tensor> ys;
      std::vector<Tensor> conds;
      for (std::size_t i = 0; i < len; ++i) {
        const std::size_t o = order[b0 + i];
        for (const auto& s : sets[o].samples) {
          ys.push_back(s);
          conds.push_back(conditions[o]);
        }
      }
      const Tensor y = stack_rows(ys);
      auto closure = [&](Tape& t) {
        Var z = gcn_refine(t, rc.net, params, t.constant(y), t.constant(stack_rows(conds)), cfg.network.joints,
                           cfg.network.future);
        Var flat = ag::reshape(z, len * n, f * width);
        Var loss;
        for (std::size_t i = 0; i < len; ++i) {
          const std::size_t o = order[b0 + i];
          std::vector<std::size_t> rows(n);
          std::iota(rows.begin(), rows.end(), i * n);
          const Tensor raw = stack_rows(sets[o].samples).reshaped(n, f * width);
          const Tensor truth = windows[o].future.reshaped(1, f * width);
          Var term = refine_loss(t, ag::gather_rows(flat, rows), raw, truth, rc.net);
          loss = i == 0 ? term : ag::add(loss, term);
        }
        return ag::scale(loss, 1.0 / static_cast<double>(len));
      };
      double loss = 0.0;
      const auto grad = gradient(params, closure, &loss);
      check_loss(loss, "refinement", epoch);
      opt.step(grad, lr);
      total += loss * static_cast<double>(len);
    }
    if (diffusion.fingerprint() != frozen) throw std::logic_error("frozen diffusion parameters changed");
    EpochLog entry{epoch, total / static_cast<double>(windows.size()), lr,
                   cfg.train.record_wallclock ? seconds_since(start) : 0.0};
    result.log.push_back(entry);
    if (epoch == 1 || entry.loss < result.best_loss) {
      result.best_loss = entry.loss;
      result.best_epoch = epoch;
      result.best = params;
    }
    if (on_epoch) on_epoch(entry);
  }
  result.last = std::move(params);
  return result;
}

void write_train_log(std::ostream& out, const std::vector<EpochLog>& log) {
  out << "epoch,loss,lr,wallclock_s\n";
  char buf[160];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.3f\n", e.epoch, e.loss, e.lr, e.wallclock_s);
    out << buf;
  }
}

}  // namespace motiondiff
