#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "motiondiff/model.hpp"
#include "motiondiff/refine.hpp"

namespace motiondiff {

struct DataConfig {
  std::string train_dir = "data/train";
  int observed = 8;
  int future = 16;
  int train_stride = 1;
  int eval_stride = 24;
  int root = 0;
};

struct ScheduleConfig {
  int steps = 50;
  double beta_1 = 1e-4;
  double beta_K = 0.05;
};

struct TrainConfig {
  double lr = 5e-4;
  int epochs = 500;
  int batch_size = 64;
  int decay_start = 100;
  double decay_final_fraction = 0.1;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  // Diffusion steps drawn per training window per epoch.
  int k_per_example = 1;
  // "sum": squared error summed over coordinates, mean over the batch.
  // "mean": additionally divided by the number of coordinates.
  std::string loss_reduction = "sum";
  // false writes 0 in the wallclock column so logs are reproducible.
  bool record_wallclock = false;
};

struct RefineTrainConfig {
  RefineConfig net;
  int samples = 10;  // N futures drawn per observation
  int epochs = 20;
  double lr = 5e-4;
  int decay_start = 10;
  int batch_size = 8;  // observations per step
  int train_stride = 4;
  std::uint64_t seed = 1;
};

struct EvalConfig {
  int samples = 50;
  double delta = 0.5;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  DataConfig data;
  ScheduleConfig schedule;
  NetworkConfig network;
  TrainConfig train;
  RefineTrainConfig refine;
  EvalConfig eval;

  // network.observed/future mirror data.observed/future.
  void sync();
  void validate() const;
};

// Minimal TOML: [section] headers, key = value with integers, floats,
// booleans, basic strings and flat arrays; '#' comments.
using TomlScalar = std::variant<std::int64_t, double, bool, std::string>;
struct TomlValue {
  TomlScalar scalar;
  std::vector<TomlScalar> array;
  bool is_array = false;
};
using TomlTable = std::map<std::string, std::map<std::string, TomlValue>>;

TomlTable parse_toml(std::istream& in, const std::string& source);

// Every key is required; missing and unknown keys are ConfigErrors naming
// the key as [section] key.
ExperimentConfig config_from_toml(const TomlTable& table);
ExperimentConfig load_config(const std::filesystem::path& path);
void write_config_toml(std::ostream& out, const ExperimentConfig& cfg);

nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& j);

}  // namespace motiondiff
