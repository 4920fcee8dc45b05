#include "motiondiff/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "motiondiff/checkpoint.hpp"
#include "motiondiff/metrics.hpp"
#include "motiondiff/model.hpp"
#include "motiondiff/pipeline.hpp"
#include "motiondiff/train.hpp"

namespace motiondiff::cli {

namespace {

std::uint64_t sequence_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t x = seed * 0x9E3779B97F4A7C15ULL + index + 1;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw DataError("cannot create directory " + dir.string());
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

MotionSequence as_sequence(const Tensor& frames, double fps) {
  MotionSequence seq;
  seq.skeleton = Skeleton::generic(frames.cols() / 3);
  seq.frames = frames;
  seq.fps = fps;
  return seq;
}

const char* kIndexHeader = "obs_id,source,start,observed,future,root,files";

void write_prediction_sets(const std::filesystem::path& dir, const std::string& prefix, const std::string& index_name,
                           const std::vector<PredictionSet>& sets, const std::vector<WindowPair>& windows,
                           const DataConfig& data) {
  std::ofstream index = open_out(dir / index_name);
  index << kIndexHeader << "\n";
  for (const auto& set : sets) {
    const WindowPair& w = windows[set.obs_id];
    std::string files;
    for (std::size_t i = 0; i < set.samples.size(); ++i) {
      const std::string name = prefix + std::to_string(set.obs_id) + "_" + std::to_string(i) + ".txt";
      save_motion_file(dir / name, as_sequence(set.samples[i], w.fps));
      files += (i ? ";" : "") + name;
    }
    index << set.obs_id << "," << w.source << "," << w.start << "," << data.observed << "," << data.future << ","
          << data.root << "," << files << "\n";
  }
  if (!index) throw DataError("failed writing " + (dir / index_name).string());
}

struct IndexRow {
  std::string obs_id;
  std::string source;
  std::size_t start = 0;
  std::size_t observed = 0;
  std::size_t future = 0;
  std::size_t root = 0;
  std::vector<std::string> files;
};

std::size_t parse_count(const std::string& text, const std::string& where) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != text.size() || text.empty() || text.front() == '-') throw DataError(where + ": bad integer '" + text + "'");
  return static_cast<std::size_t>(v);
}

std::vector<IndexRow> read_index(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open prediction index " + path.string());
  std::vector<IndexRow> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string where = path.string() + " line " + std::to_string(lineno);
    if (lineno == 1) {
      if (line != kIndexHeader) throw DataError(where + ": unexpected header");
      continue;
    }
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 7) throw DataError(where + ": expected 7 columns");
    IndexRow r;
    r.obs_id = cells[0];
    r.source = cells[1];
    r.start = parse_count(cells[2], where);
    r.observed = parse_count(cells[3], where);
    r.future = parse_count(cells[4], where);
    r.root = parse_count(cells[5], where);
    r.files = split(cells[6], ';');
    if (r.files.empty()) throw DataError(where + ": no sample files");
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw DataError(path.string() + ": no observations");
  return rows;
}

void write_metric_row(std::ostream& out, const std::string& key, const EvalRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f,%.6f\n", key.c_str(), r.apd, r.ade, r.fde, r.mmade, r.mmfde);
  out << buf;
}

}  // namespace

std::vector<int> parse_k_grid(const std::string& text) {
  std::vector<int> ks;
  auto to_int = [&](const std::string& s) {
    std::size_t pos = 0;
    int v = 0;
    try {
      v = std::stoi(s, &pos);
    } catch (const std::exception&) {
      pos = std::string::npos;
    }
    if (pos != s.size() || s.empty()) throw ConfigError("bad --k-grid entry '" + s + "'");
    return v;
  };
  if (text.find(':') != std::string::npos) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) throw ConfigError("--k-grid range must be start:stop:step");
    const int a = to_int(parts[0]);
    const int b = to_int(parts[1]);
    const int step = to_int(parts[2]);
    if (step <= 0) throw ConfigError("--k-grid step must be positive");
    if (a <= b) {
      for (int k = a; k <= b; k += step) ks.push_back(k);
    } else {
      for (int k = a; k >= b; k -= step) ks.push_back(k);
    }
  } else {
    for (const auto& s : split(text, ',')) ks.push_back(to_int(s));
  }
  if (ks.empty()) throw ConfigError("--k-grid is empty");
  return ks;
}

void synth_data(const SynthOptions& opt) {
  if (opt.sequences < 1) throw ConfigError("--sequences must be >= 1");
  if (opt.frames < 1) throw ConfigError("--frames must be >= 1");
  if (opt.joints < 2) throw ConfigError("--joints must be >= 2");
  if (!(opt.fps > 0.0)) throw ConfigError("--fps must be positive");
  ensure_dir(opt.out);
  std::ofstream manifest = open_out(opt.out / "manifest.csv");
  manifest << "file,frames,joints,fps\n";
  for (int i = 0; i < opt.sequences; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "seq_%03d.txt", i);
    const MotionSequence seq =
        synth_kinematic_chain(static_cast<std::size_t>(opt.joints), static_cast<std::size_t>(opt.frames),
                              sequence_seed(opt.seed, static_cast<std::uint64_t>(i)), opt.fps);
    save_motion_file(opt.out / name, seq);
    char row[96];
    std::snprintf(row, sizeof(row), "%s,%zu,%zu,%.9g\n", name, seq.num_frames(), seq.num_joints(), seq.fps);
    manifest << row;
  }
  if (!manifest) throw DataError("failed writing manifest");
}

void train(const TrainOptions& opt, std::ostream& log) {
  const ExperimentConfig cfg = load_config(opt.config);
  if (opt.stage != "diffusion" && opt.stage != "refine") {
    throw ConfigError("--stage must be diffusion or refine, got '" + opt.stage + "'");
  }
  ensure_dir(opt.out);
  auto report = [&](const char* stage) {
    return [&log, stage](const EpochLog& e) {
      char buf[128];
      std::snprintf(buf, sizeof(buf), "[%s] epoch %d loss %.6g lr %.3g\n", stage, e.epoch, e.loss, e.lr);
      log << buf << std::flush;
    };
  };

  if (opt.stage == "diffusion") {
    const auto windows = load_windows(cfg.data.train_dir, cfg.data, cfg.network.joints, cfg.data.train_stride);
    log << "training diffusion model on " << windows.size() << " windows\n";
    const TrainResult r = train_diffusion(cfg, windows, report("diffusion"));
    save_checkpoint(opt.out / "diffusion_last.ckpt", {"diffusion", cfg, r.last, cfg.train.epochs, r.log.back().loss});
    save_checkpoint(opt.out / "diffusion_best.ckpt", {"diffusion", cfg, r.best, r.best_epoch, r.best_loss});
    std::ofstream out = open_out(opt.out / "diffusion_log.csv");
    write_train_log(out, r.log);
    return;
  }

  const auto diffusion_path = opt.diffusion.empty() ? opt.out / "diffusion_last.ckpt" : opt.diffusion;
  if (!std::filesystem::exists(diffusion_path)) {
    throw ConfigError("stage refine needs a diffusion checkpoint; not found: " + diffusion_path.string());
  }
  const Checkpoint base = load_checkpoint(diffusion_path);
  const auto stored = config_to_json(base.config);
  const auto wanted = config_to_json(cfg);
  for (const char* section : {"network", "schedule"}) {
    if (stored.at(section) != wanted.at(section)) {
      throw ConfigError(std::string("[") + section + "] differs from the diffusion checkpoint's configuration");
    }
  }
  if (base.config.data.observed != cfg.data.observed || base.config.data.future != cfg.data.future) {
    throw ConfigError("[data] window sizes differ from the diffusion checkpoint's configuration");
  }
  const ModelParams diffusion = base.diffusion_params();
  const auto windows = load_windows(cfg.data.train_dir, cfg.data, cfg.network.joints, cfg.refine.train_stride);
  log << "training refiner on " << windows.size() << " windows\n";
  const TrainResult r = train_refiner(cfg, windows, diffusion, report("refine"));
  save_checkpoint(opt.out / "refiner_last.ckpt",
                  {"refiner", cfg, merge_params(diffusion, r.last), cfg.refine.epochs, r.log.back().loss});
  save_checkpoint(opt.out / "refiner_best.ckpt",
                  {"refiner", cfg, merge_params(diffusion, r.best), r.best_epoch, r.best_loss});
  std::ofstream out = open_out(opt.out / "refiner_log.csv");
  write_train_log(out, r.log);
}

void sample(const SampleOptions& opt) {
  if (opt.n < 1) throw ConfigError("--n must be >= 1");
  const Checkpoint ckpt = load_checkpoint(opt.checkpoint);
  const ExperimentConfig& cfg = ckpt.config;
  const auto windows = load_windows(opt.data, cfg.data, cfg.network.joints, cfg.data.eval_stride);
  const ModelParams diffusion = ckpt.diffusion_params();
  const auto conditions = encode_conditions(cfg.network, diffusion, windows);
  const auto sets = sample_futures(cfg, diffusion, conditions, opt.n, opt.seed);
  ensure_dir(opt.out);
  write_prediction_sets(opt.out, "sample_", "index.csv", sets, windows, cfg.data);
  if (ckpt.has_refiner()) {
    const auto refined = refine_futures(cfg, ckpt.refiner_params(), conditions, sets);
    write_prediction_sets(opt.out, "refined_sample_", "refined_index.csv", refined, windows, cfg.data);
  }
}

void evaluate(const EvaluateOptions& opt) {
  if (!(opt.delta > 0.0)) throw ConfigError("--delta must be positive");
  const auto rows = read_index(opt.pred / (opt.refined ? "refined_index.csv" : "index.csv"));
  std::map<std::string, MotionSequence> sources;
  std::vector<std::vector<Tensor>> predictions;
  std::vector<Tensor> observations;
  std::vector<Tensor> futures;
  std::vector<std::string> ids;
  for (const auto& r : rows) {
    auto it = sources.find(r.source);
    if (it == sources.end()) it = sources.emplace(r.source, load_motion_file(opt.data / r.source)).first;
    const MotionSequence centred = remove_global_translation(it->second, r.root);
    if (r.start + r.observed + r.future > centred.num_frames()) {
      throw DataError("observation " + r.obs_id + " runs past the end of " + r.source);
    }
    auto windows = make_windows(centred, r.observed, r.future, 1);
    WindowPair& w = windows.at(r.start);
    std::vector<Tensor> samples;
    for (const auto& file : r.files) {
      MotionSequence s = load_motion_file(opt.pred / file);
      if (!s.frames.same_shape(w.future)) {
        throw DataError(file + ": shape " + s.frames.shape_str() + " does not match the future window " +
                        w.future.shape_str());
      }
      samples.push_back(std::move(s.frames));
    }
    predictions.push_back(std::move(samples));
    observations.push_back(std::move(w.observed));
    futures.push_back(std::move(w.future));
    ids.push_back(r.obs_id);
  }
  const auto records = evaluate_predictions(predictions, observations, futures, ids, opt.delta);
  std::ofstream out = open_out(opt.out);
  write_eval_csv(out, records);
}

void diagnose(const DiagnoseOptions& opt) {
  if (opt.n < 1) throw ConfigError("--n must be >= 1");
  if (!(opt.delta > 0.0)) throw ConfigError("--delta must be positive");
  if (opt.k_grid.empty()) throw ConfigError("--k-grid is empty");
  const Checkpoint ckpt = load_checkpoint(opt.checkpoint);
  const ExperimentConfig& cfg = ckpt.config;
  for (int k : opt.k_grid) {
    if (k < 0 || k > cfg.schedule.steps) {
      throw ConfigError("--k-grid entry " + std::to_string(k) + " outside [0, " + std::to_string(cfg.schedule.steps) +
                        "]");
    }
  }
  const auto windows = load_windows(opt.data, cfg.data, cfg.network.joints, cfg.data.eval_stride);
  const ModelParams diffusion = ckpt.diffusion_params();
  const auto conditions = encode_conditions(cfg.network, diffusion, windows);
  std::vector<Tensor> observations;
  std::vector<Tensor> futures;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    observations.push_back(windows[i].observed);
    futures.push_back(windows[i].future);
    ids.push_back(std::to_string(i));
  }
  const std::set<int> wanted(opt.k_grid.begin(), opt.k_grid.end());
  const std::size_t n = static_cast<std::size_t>(opt.n);
  std::map<int, EvalRecord> rows;
  auto observer = [&](int k, std::span<const Tensor> states) {
    if (!wanted.count(k)) return;
    std::vector<std::vector<Tensor>> predictions(windows.size());
    for (std::size_t o = 0; o < windows.size(); ++o) {
      predictions[o].assign(states.begin() + static_cast<std::ptrdiff_t>(o * n),
                            states.begin() + static_cast<std::ptrdiff_t>((o + 1) * n));
    }
    const auto records = evaluate_predictions(predictions, observations, futures, ids, opt.delta);
    rows[k] = mean_record(records);
  };
  sample_futures(cfg, diffusion, conditions, opt.n, opt.seed, observer);

  std::ofstream out = open_out(opt.out);
  out << "k,APD,ADE,FDE,MMADE,MMFDE\n";
  std::set<int> written;
  for (int k : opt.k_grid) {
    if (!written.insert(k).second) continue;
    write_metric_row(out, std::to_string(k), rows.at(k));
  }
}

}  // namespace motiondiff::cli
