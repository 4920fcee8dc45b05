#include "motiondiff/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "motiondiff/model.hpp"
#include "motiondiff/refine.hpp"
#include "motiondiff/schedule.hpp"

namespace motiondiff {

namespace {

constexpr std::size_t kInferenceBatch = 128;

}  // namespace

std::vector<std::filesystem::path> list_motion_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("data directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  const auto manifest = dir / "manifest.csv";
  if (std::filesystem::exists(manifest)) {
    std::ifstream in(manifest);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (lineno == 1 || line.empty()) continue;
      const std::string file = line.substr(0, line.find(','));
      if (file.empty()) throw DataError(manifest.string() + ": empty file name at line " + std::to_string(lineno));
      files.push_back(dir / file);
    }
  } else {
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  }
  if (files.empty()) throw DataError("no motion files in " + dir.string());
  return files;
}

std::vector<WindowPair> load_windows(const std::filesystem::path& dir, const DataConfig& data, int joints,
                                     int stride) {
  std::vector<WindowPair> out;
  for (const auto& file : list_motion_files(dir)) {
    const MotionSequence seq = load_motion_file(file);
    if (seq.num_joints() != static_cast<std::size_t>(joints)) {
      throw DataError(file.string() + ": expected " + std::to_string(joints) + " joints, found " +
                      std::to_string(seq.num_joints()));
    }
    if (seq.num_frames() < static_cast<std::size_t>(data.observed + data.future)) continue;
    auto windows = make_windows(remove_global_translation(seq, static_cast<std::size_t>(data.root)),
                                static_cast<std::size_t>(data.observed), static_cast<std::size_t>(data.future),
                                static_cast<std::size_t>(stride));
    for (auto& w : windows) w.source = file.filename().string();
    out.insert(out.end(), std::make_move_iterator(windows.begin()), std::make_move_iterator(windows.end()));
  }
  if (out.empty()) throw DataError("empty input: no file in " + dir.string() + " holds observed + future frames");
  return out;
}

std::vector<Tensor> encode_conditions(const NetworkConfig& cfg, const ModelParams& diffusion,
                                      const std::vector<WindowPair>& windows) {
  std::vector<Tensor> out;
  out.reserve(windows.size());
  for (std::size_t b0 = 0; b0 < windows.size(); b0 += kInferenceBatch) {
    const std::size_t len = std::min(kInferenceBatch, windows.size() - b0);
    std::vector<Tensor> past;
    for (std::size_t i = 0; i < len; ++i) past.push_back(windows[b0 + i].observed);
    Tape t;
    const Tensor c = net::encode_past(t, cfg, diffusion, t.constant(stack_rows(past)), len).value();
    for (auto& row : split_rows(c, len)) out.push_back(std::move(row));
  }
  return out;
}

std::vector<PredictionSet> sample_futures(const ExperimentConfig& cfg, const ModelParams& diffusion,
                                          const std::vector<Tensor>& conditions, int n, std::uint64_t seed,
                                          const ReverseObserver& observer) {
  const NoiseSchedule schedule = NoiseSchedule::linear(cfg.schedule.steps, cfg.schedule.beta_1, cfg.schedule.beta_K);
  const NetworkPredictor predictor(cfg.network, diffusion);
  std::vector<std::size_t> ids(conditions.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  SamplerOptions opts;
  opts.samples = static_cast<std::size_t>(n);
  opts.seed = seed;
  opts.max_batch = kInferenceBatch;
  opts.observer = observer;
  return sample_many(schedule, predictor, conditions, ids, opts);
}

std::vector<PredictionSet> refine_futures(const ExperimentConfig& cfg, const ModelParams& refiner,
                                          const std::vector<Tensor>& conditions,
                                          const std::vector<PredictionSet>& sets) {
  if (conditions.size() != sets.size()) throw std::invalid_argument("refine_futures: one condition per set");
  std::vector<PredictionSet> out;
  out.reserve(sets.size());
  for (std::size_t o = 0; o < sets.size(); ++o) {
    const auto& samples = sets[o].samples;
    std::vector<Tensor> cond(samples.size(), conditions[o]);
    const Tensor z = gcn_refine(cfg.refine.net, refiner, stack_rows(samples), stack_rows(cond), cfg.network.joints,
                                cfg.network.future);
    out.push_back({sets[o].obs_id, split_rows(z, samples.size())});
  }
  return out;
}

Tensor zero_velocity(const WindowPair& window) {
  Tensor out(window.future.rows(), window.future.cols());
  const auto last = window.observed.row(window.observed.rows() - 1);
  for (std::size_t t = 0; t < out.rows(); ++t) std::copy(last.begin(), last.end(), out.row(t).begin());
  return out;
}

}  // namespace motiondiff
