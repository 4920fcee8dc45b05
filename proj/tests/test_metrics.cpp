#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "motiondiff/metrics.hpp"
#include "support.hpp"

using namespace motiondiff;
using testing_support::random_tensor;

namespace {

// Brute-force re-implementations over nested loops of (frame, joint, axis).
double oracle_apd(const std::vector<Tensor>& z) {
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i)
    for (std::size_t j = 0; j < z.size(); ++j) {
      if (i == j) continue;
      double d = 0.0;
      for (std::size_t t = 0; t < z[i].rows(); ++t)
        for (std::size_t c = 0; c < z[i].cols(); ++c) d += std::pow(z[i](t, c) - z[j](t, c), 2);
      s += std::sqrt(d);
    }
  return s / static_cast<double>(z.size() * (z.size() - 1));
}

double frame_err(const Tensor& a, const Tensor& b, std::size_t t) {
  double d = 0.0;
  for (std::size_t joint = 0; joint < a.cols() / 3; ++joint)
    for (std::size_t axis = 0; axis < 3; ++axis) d += std::pow(a(t, 3 * joint + axis) - b(t, 3 * joint + axis), 2);
  return std::sqrt(d);
}

double oracle_ade(const std::vector<Tensor>& z, const Tensor& x) {
  double best = INFINITY;
  for (const auto& s : z) {
    double e = 0.0;
    for (std::size_t t = 0; t < x.rows(); ++t) e += frame_err(s, x, t);
    best = std::min(best, e / static_cast<double>(x.rows()));
  }
  return best;
}

double oracle_fde(const std::vector<Tensor>& z, const Tensor& x) {
  double best = INFINITY;
  for (const auto& s : z) best = std::min(best, frame_err(s, x, x.rows() - 1));
  return best;
}

struct Fixture {
  std::vector<std::vector<Tensor>> predictions;
  std::vector<Tensor> observations;
  std::vector<Tensor> futures;
  std::vector<std::string> ids;
};

Fixture random_fixture(std::mt19937_64& rng, std::size_t obs, std::size_t n, std::size_t f, std::size_t joints) {
  Fixture fx;
  for (std::size_t o = 0; o < obs; ++o) {
    std::vector<Tensor> z;
    for (std::size_t i = 0; i < n; ++i) z.push_back(random_tensor(f, 3 * joints, rng));
    fx.predictions.push_back(std::move(z));
    fx.observations.push_back(random_tensor(2, 3 * joints, rng, 0.4));
    fx.futures.push_back(random_tensor(f, 3 * joints, rng));
    fx.ids.push_back(std::to_string(o));
  }
  return fx;
}

}  // namespace

TEST(Apd, TrivialAndDerivedValues) {
  std::mt19937_64 rng(1);
  const Tensor a = random_tensor(3, 6, rng);
  EXPECT_EQ(apd(std::vector<Tensor>{a, a, a}), 0.0);
  Tensor b = a;
  b(1, 4) += 1.0;
  EXPECT_NEAR(apd(std::vector<Tensor>{a, b}), 1.0, 1e-15);
  EXPECT_THROW(apd(std::vector<Tensor>{a}), std::invalid_argument);
}

TEST(Metrics, MatchBruteForceOnRandomFixtures) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + trial % 5, f = 1 + trial % 4, j = 1 + trial % 3;
    const auto fx = random_fixture(rng, 1, n, f, j);
    const auto& z = fx.predictions[0];
    const auto& x = fx.futures[0];
    if (n >= 2) EXPECT_NEAR(apd(z), oracle_apd(z), 1e-12);
    EXPECT_NEAR(ade(z, x), oracle_ade(z, x), 1e-12);
    EXPECT_NEAR(fde(z, x), oracle_fde(z, x), 1e-12);
  }
}

TEST(Ade, DerivedOffsetAndMinimum) {
  std::mt19937_64 rng(3);
  const Tensor x = random_tensor(4, 6, rng);
  EXPECT_EQ(ade(std::vector<Tensor>{random_tensor(4, 6, rng), x}, x), 0.0);
  Tensor shifted = x;
  // displacement (0.3, 0, 0.4) on joint 1 only: per-frame norm 0.5
  for (std::size_t t = 0; t < 4; ++t) {
    shifted(t, 3) += 0.3;
    shifted(t, 5) += 0.4;
  }
  EXPECT_NEAR(ade(std::vector<Tensor>{shifted}, x), 0.5, 1e-15);
  EXPECT_NEAR(fde(std::vector<Tensor>{shifted}, x), 0.5, 1e-15);
  Tensor far = x;
  for (double& v : far.flat()) v += 100.0;
  EXPECT_EQ(ade(std::vector<Tensor>{shifted, far}, x), ade(std::vector<Tensor>{shifted}, x));
}

TEST(Fde, IgnoresNonFinalFrames) {
  std::mt19937_64 rng(4);
  const Tensor x = random_tensor(4, 6, rng);
  Tensor z = random_tensor(4, 6, rng);
  const double before = fde(std::vector<Tensor>{z}, x);
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t c = 0; c < 6; ++c) z(t, c) = 1e3;
  EXPECT_EQ(fde(std::vector<Tensor>{z}, x), before);
  EXPECT_THROW(fde(std::vector<Tensor>{random_tensor(3, 6, rng)}, x), std::invalid_argument);
}

TEST(Metrics, TranslationAndPermutationInvariance) {
  std::mt19937_64 rng(5);
  const auto fx = random_fixture(rng, 1, 4, 3, 2);
  auto z = fx.predictions[0];
  Tensor x = fx.futures[0];
  const double a0 = apd(z), e0 = ade(z, x), f0 = fde(z, x);
  std::swap(z[0], z[3]);
  EXPECT_NEAR(apd(z), a0, 1e-12);
  EXPECT_EQ(ade(z, x), e0);
  EXPECT_EQ(fde(z, x), f0);
  const double shift[3] = {0.7, -1.1, 2.5};
  for (auto* t : {&x, &z[0], &z[1], &z[2], &z[3]})
    for (std::size_t r = 0; r < t->rows(); ++r)
      for (std::size_t c = 0; c < t->cols(); ++c) (*t)(r, c) += shift[c % 3];
  EXPECT_NEAR(ade(z, x), e0, 1e-12);
  EXPECT_NEAR(fde(z, x), f0, 1e-12);
  EXPECT_NEAR(apd(z), a0, 1e-12);
}

TEST(MultimodalGroups, ThresholdExtremes) {
  std::mt19937_64 rng(6);
  const auto fx = random_fixture(rng, 5, 3, 3, 2);
  const auto tiny = build_multimodal_groups(fx.observations, 1e-12);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(tiny.members[i], std::vector<std::size_t>{i});
  const auto huge = build_multimodal_groups(fx.observations, 1e12);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(huge.members[i].size(), 5u);
  EXPECT_THROW(build_multimodal_groups(fx.observations, 0.0), std::invalid_argument);
}

TEST(MultimodalGroups, IdenticalObservationsShareGroups) {
  std::mt19937_64 rng(7);
  auto fx = random_fixture(rng, 4, 2, 3, 2);
  for (auto& o : fx.observations)
    for (double& v : o.flat()) v *= 100.0;  // spread apart
  fx.observations[3] = fx.observations[1];
  const auto g = build_multimodal_groups(fx.observations, 0.5);
  EXPECT_EQ(g.members[1], (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(g.members[3], (std::vector<std::size_t>{1, 3}));
}

TEST(MultimodalMetrics, MatchLoopOracleAndDegenerateCases) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto fx = random_fixture(rng, 5, 1 + trial % 5, 1 + trial % 4, 1 + trial % 3);
    const double delta = 0.3 + 0.2 * (trial % 4);
    const auto records = evaluate_predictions(fx.predictions, fx.observations, fx.futures, fx.ids, delta);
    for (std::size_t o = 0; o < 5; ++o) {
      // Grouping oracle on the last observed frame.
      std::vector<Tensor> group;
      for (std::size_t q = 0; q < 5; ++q) {
        double d = 0.0;
        const std::size_t lo = fx.observations[o].rows() - 1, lq = fx.observations[q].rows() - 1;
        for (std::size_t c = 0; c < fx.observations[o].cols(); ++c)
          d += std::pow(fx.observations[o](lo, c) - fx.observations[q](lq, c), 2);
        if (q == o || std::sqrt(d) < delta) group.push_back(fx.futures[q]);
      }
      double mm_ade = 0.0, mm_fde = 0.0;
      for (const auto& g : group) {
        mm_ade += oracle_ade(fx.predictions[o], g);
        mm_fde += oracle_fde(fx.predictions[o], g);
      }
      EXPECT_NEAR(records[o].mmade, mm_ade / group.size(), 1e-12);
      EXPECT_NEAR(records[o].mmfde, mm_fde / group.size(), 1e-12);
    }
  }
  const auto fx = random_fixture(rng, 3, 3, 2, 2);
  for (const auto& r : evaluate_predictions(fx.predictions, fx.observations, fx.futures, fx.ids, 1e-12)) {
    EXPECT_EQ(r.mmade, r.ade);
    EXPECT_EQ(r.mmfde, r.fde);
  }
  const Tensor x = fx.futures[0];
  EXPECT_EQ(mmade(fx.predictions[0], std::vector<Tensor>{x, x}), ade(fx.predictions[0], x));
  EXPECT_EQ(mmfde(fx.predictions[0], std::vector<Tensor>{x, x}), fde(fx.predictions[0], x));
}

TEST(EvalCsv, LayoutAndMeanRow) {
  std::vector<EvalRecord> recs{{"0", 1.0, 0.5, 0.25, 0.75, 0.125}, {"1", 3.0, 1.5, 0.75, 1.25, 0.375}};
  std::ostringstream out;
  write_eval_csv(out, recs);
  EXPECT_EQ(out.str(),
            "obs_id,APD,ADE,FDE,MMADE,MMFDE\n"
            "0,1.000000,0.500000,0.250000,0.750000,0.125000\n"
            "1,3.000000,1.500000,0.750000,1.250000,0.375000\n"
            "mean,2.000000,1.000000,0.500000,1.000000,0.250000\n");
}
