#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "motiondiff/refine.hpp"
#include "support.hpp"

using namespace motiondiff;
using testing_support::random_tensor;

namespace {

RefineConfig tiny_refiner() {
  RefineConfig c;
  c.n_gcn_layers = 3;
  c.gcn_hidden = 5;
  c.cond_proj = 3;
  c.lambda = 0.3;
  c.gamma = 0.7;
  c.sigma = 2.0;
  return c;
}

// Direct evaluation of the three sums over flattened samples.
double refine_loss_oracle(const std::vector<std::vector<double>>& z, const std::vector<std::vector<double>>& y,
                          const std::vector<double>& x, double lambda, double gamma, double sigma) {
  auto d2 = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
  };
  const std::size_t n = z.size();
  double best = d2(z[0], x);
  for (std::size_t i = 1; i < n; ++i) best = std::min(best, d2(z[i], x));
  double prox = 0.0;
  for (std::size_t i = 0; i < n; ++i) prox += d2(z[i], y[i]);
  double div = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) div += std::exp(-d2(z[i], z[j]) / sigma);
  return best + lambda * prox + gamma * div / static_cast<double>(n * (n - 1));
}

std::vector<double> flat(const Tensor& t) { return {t.flat().begin(), t.flat().end()}; }

}  // namespace

TEST(Refiner, FreshRefinerIsIdentityAndShapePreserving) {
  const RefineConfig cfg;
  const ModelParams p = init_refiner_params(cfg, 5, 16, 64, 1);
  std::mt19937_64 rng(2);
  const Tensor y = random_tensor(3 * 16, 15, rng);
  const Tensor c = random_tensor(3, 64, rng);
  const Tensor z = gcn_refine(cfg, p, y, c, 5, 16);
  EXPECT_TRUE(z == y);
}

TEST(Refiner, AdjacencyMixesJoints) {
  const RefineConfig cfg = tiny_refiner();
  ModelParams p = init_refiner_params(cfg, 3, 2, 4, 3);
  std::mt19937_64 rng(4);
  p.at("ref.gcout.w") = random_tensor(p.at("ref.gcout.w").rows(), p.at("ref.gcout.w").cols(), rng);
  Tensor y = random_tensor(2, 9, rng);
  const Tensor c = random_tensor(1, 4, rng);
  const Tensor before = gcn_refine(cfg, p, y, c, 3, 2);
  y(0, 0) += 1.0;  // move joint 0 only
  const Tensor after = gcn_refine(cfg, p, y, c, 3, 2);
  EXPECT_NE(before(1, 8), after(1, 8));  // joint 2 reacts
}

TEST(RefineLoss, TrivialValues) {
  RefineConfig cfg;
  std::mt19937_64 rng(5);
  const Tensor x = random_tensor(4, 6, rng);
  cfg.lambda = 0.0;
  cfg.gamma = 0.0;
  const std::vector<Tensor> zx{x, x};
  EXPECT_EQ(refine_loss(zx, zx, x, cfg), 0.0);
  cfg.gamma = 0.005;
  // Identical samples: the kernel is 1 for every pair.
  const Tensor other = random_tensor(4, 6, rng);
  const std::vector<Tensor> same{other, other, other};
  EXPECT_NEAR(refine_loss(same, same, x, cfg) - squared_distance(other, x), 0.005, 1e-15);
  EXPECT_THROW(refine_loss(std::vector<Tensor>{x}, std::vector<Tensor>{x}, x, cfg), std::invalid_argument);
}

TEST(RefineLoss, ValueAndGraphMatchBruteForce) {
  const RefineConfig cfg = tiny_refiner();
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Tensor> z, y;
    std::vector<std::vector<double>> zf, yf;
    for (int i = 0; i < 3; ++i) {
      z.push_back(random_tensor(3, 6, rng));
      y.push_back(random_tensor(3, 6, rng));
      zf.push_back(flat(z.back()));
      yf.push_back(flat(y.back()));
    }
    const Tensor x = random_tensor(3, 6, rng);
    const double oracle = refine_loss_oracle(zf, yf, flat(x), cfg.lambda, cfg.gamma, cfg.sigma);
    EXPECT_NEAR(refine_loss(z, y, x, cfg), oracle, 1e-12);
    Tape t;
    Tensor zs(3, 18), ys(3, 18);
    for (int i = 0; i < 3; ++i) {
      std::copy(zf[i].begin(), zf[i].end(), zs.row(i).begin());
      std::copy(yf[i].begin(), yf[i].end(), ys.row(i).begin());
    }
    EXPECT_NEAR(refine_loss(t, t.constant(zs), ys, x.reshaped(1, 18), cfg).value()(0, 0), oracle, 1e-12);
  }
}

TEST(RefineLoss, InitialLossWithoutRegularisersIsBestRawError) {
  RefineConfig cfg = tiny_refiner();
  cfg.lambda = 0.0;
  cfg.gamma = 0.0;
  const ModelParams p = init_refiner_params(cfg, 2, 3, 4, 7);
  std::mt19937_64 rng(8);
  std::vector<Tensor> ys;
  for (int i = 0; i < 4; ++i) ys.push_back(random_tensor(3, 6, rng));
  const Tensor x = random_tensor(3, 6, rng);
  Tensor stacked(12, 6);
  for (int i = 0; i < 4; ++i) std::copy(ys[i].flat().begin(), ys[i].flat().end(), stacked.row(3 * i).begin());
  const Tensor z = gcn_refine(cfg, p, stacked, Tensor(4, 4, 0.5), 2, 3);
  std::vector<Tensor> zs;
  for (int i = 0; i < 4; ++i) zs.push_back(Tensor(3, 6, std::vector<double>(z.data() + 18 * i, z.data() + 18 * (i + 1))));
  double best = 1e300;
  for (const auto& y : ys) best = std::min(best, squared_distance(y, x));
  EXPECT_EQ(refine_loss(zs, ys, x, cfg), best);
}

TEST(RefineLoss, NonNegativeAndDiversityDecreasesWithDistance) {
  RefineConfig cfg;
  cfg.lambda = 0.0;
  std::mt19937_64 rng(9);
  const Tensor x = random_tensor(2, 6, rng, 5.0);  // far away: recon term fixed by argmin
  std::vector<Tensor> z{random_tensor(2, 6, rng), random_tensor(2, 6, rng), random_tensor(2, 6, rng)};
  double prev = refine_loss(z, z, x, cfg);
  EXPECT_GE(prev, 0.0);
  // Push sample 2 away from sample 1 along their difference; keep sample 0
  // (the closest to x) fixed.
  std::size_t closest = 0;
  for (std::size_t i = 1; i < 3; ++i)
    if (squared_distance(z[i], x) < squared_distance(z[closest], x)) closest = i;
  const std::size_t a = (closest + 1) % 3, b = (closest + 2) % 3;
  for (int step = 0; step < 5; ++step) {
    Tensor moved = z[b];
    for (std::size_t i = 0; i < moved.size(); ++i) moved[i] += 0.5 * (z[b][i] - z[a][i]);
    if (squared_distance(moved, x) < squared_distance(z[closest], x)) break;
    z[b] = moved;
    const double now = refine_loss(z, z, x, cfg);
    EXPECT_LT(now, prev);
    prev = now;
  }
}

TEST(RefineLoss, GradientMatchesCentralDifferences) {
  const RefineConfig cfg = tiny_refiner();
  const int J = 2, f = 3, N = 3;
  ModelParams p = init_refiner_params(cfg, J, f, 4, 10);
  std::mt19937_64 rng(11);
  // The zero output layer would hide every upstream gradient.
  p.at("ref.gcout.w") = random_tensor(p.at("ref.gcout.w").rows(), p.at("ref.gcout.w").cols(), rng, 0.3);
  p.at("ref.gcout.b") = random_tensor(1, p.at("ref.gcout.b").cols(), rng, 0.3);
  const Tensor y = random_tensor(N * f, 3 * J, rng);
  const Tensor cond = random_tensor(N, 4, rng);
  const Tensor raw = y.reshaped(N, f * 3 * J);
  const Tensor truth = random_tensor(1, f * 3 * J, rng);
  auto closure = [&](Tape& t) {
    Var z = gcn_refine(t, cfg, p, t.constant(y), t.constant(cond), J, f);
    return refine_loss(t, ag::reshape(z, N, f * 3 * J), raw, truth, cfg);
  };
  const auto analytic = gradient(p, closure);
  auto value = [&] {
    Tape t;
    return closure(t).value()(0, 0);
  };
  const auto r = testing_support::finite_difference_check(p, analytic, value, 1e-6, 1e-4);
  EXPECT_LT(r.max_rel_err, 1e-4) << "worst coordinate " << r.worst;
}
