#include "motiondiff/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace motiondiff {

namespace {

void check_shapes(std::span<const Tensor> samples, const Tensor& truth) {
  if (samples.empty()) throw std::invalid_argument("metrics: empty prediction set");
  for (const auto& s : samples) {
    if (!s.same_shape(truth)) {
      throw std::invalid_argument("metrics: sample shape " + s.shape_str() + " != truth shape " + truth.shape_str());
    }
  }
}

double frame_distance(const Tensor& a, std::size_t ra, const Tensor& b, std::size_t rb) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.cols(); ++c) {
    const double d = a(ra, c) - b(rb, c);
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

double apd(std::span<const Tensor> samples) {
  const std::size_t n = samples.size();
  if (n < 2) throw std::invalid_argument("apd: needs at least 2 samples");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) total += 2.0 * std::sqrt(squared_distance(samples[i], samples[j]));
  return total / static_cast<double>(n * (n - 1));
}

double ade(std::span<const Tensor> samples, const Tensor& truth) {
  check_shapes(samples, truth);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : samples) {
    double err = 0.0;
    for (std::size_t t = 0; t < truth.rows(); ++t) err += frame_distance(s, t, truth, t);
    best = std::min(best, err);
  }
  return best / static_cast<double>(truth.rows());
}

double fde(std::span<const Tensor> samples, const Tensor& truth) {
  check_shapes(samples, truth);
  const std::size_t last = truth.rows() - 1;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : samples) best = std::min(best, frame_distance(s, last, truth, last));
  return best;
}

MultimodalGroups build_multimodal_groups(std::span<const Tensor> observations, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("multimodal grouping threshold must be > 0");
  MultimodalGroups groups;
  groups.members.resize(observations.size());
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const Tensor& oi = observations[i];
    for (std::size_t j = 0; j < observations.size(); ++j) {
      const Tensor& oj = observations[j];
      if (oi.cols() != oj.cols()) throw std::invalid_argument("multimodal grouping: mixed joint counts");
      if (i == j || frame_distance(oi, oi.rows() - 1, oj, oj.rows() - 1) < delta) groups.members[i].push_back(j);
    }
  }
  return groups;
}

double mmade(std::span<const Tensor> samples, std::span<const Tensor> group_futures) {
  if (group_futures.empty()) throw std::invalid_argument("mmade: empty ground-truth group");
  double total = 0.0;
  for (const auto& gt : group_futures) total += ade(samples, gt);
  return total / static_cast<double>(group_futures.size());
}

double mmfde(std::span<const Tensor> samples, std::span<const Tensor> group_futures) {
  if (group_futures.empty()) throw std::invalid_argument("mmfde: empty ground-truth group");
  double total = 0.0;
  for (const auto& gt : group_futures) total += fde(samples, gt);
  return total / static_cast<double>(group_futures.size());
}

std::vector<EvalRecord> evaluate_predictions(const std::vector<std::vector<Tensor>>& predictions,
                                             std::span<const Tensor> observations, std::span<const Tensor> futures,
                                             const std::vector<std::string>& obs_ids, double delta) {
  const std::size_t n = predictions.size();
  if (observations.size() != n || futures.size() != n || obs_ids.size() != n) {
    throw std::invalid_argument("evaluate_predictions: inputs differ in length");
  }
  const MultimodalGroups groups = build_multimodal_groups(observations, delta);
  std::vector<EvalRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& z = predictions[i];
    EvalRecord r;
    r.obs_id = obs_ids[i];
    r.apd = z.size() >= 2 ? apd(z) : 0.0;
    r.ade = ade(z, futures[i]);
    r.fde = fde(z, futures[i]);
    std::vector<Tensor> group;
    for (std::size_t g : groups.members[i]) group.push_back(futures[g]);
    r.mmade = mmade(z, group);
    r.mmfde = mmfde(z, group);
    out.push_back(std::move(r));
  }
  return out;
}

EvalRecord mean_record(std::span<const EvalRecord> records) {
  EvalRecord m;
  m.obs_id = "mean";
  if (records.empty()) return m;
  for (const auto& r : records) {
    m.apd += r.apd;
    m.ade += r.ade;
    m.fde += r.fde;
    m.mmade += r.mmade;
    m.mmfde += r.mmfde;
  }
  const double n = static_cast<double>(records.size());
  m.apd /= n;
  m.ade /= n;
  m.fde /= n;
  m.mmade /= n;
  m.mmfde /= n;
  return m;
}

void write_eval_csv(std::ostream& out, std::span<const EvalRecord> records) {
  out << "obs_id,APD,ADE,FDE,MMADE,MMFDE\n";
  char buf[256];
  auto row = [&](const EvalRecord& r) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.obs_id.c_str(), r.apd, r.ade, r.fde, r.mmade,
                  r.mmfde);
    out << buf;
  };
  for (const auto& r : records) row(r);
  row(mean_record(records));
}

}  // namespace motiondiff
