#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "motiondiff/config.hpp"
#include "motiondiff/motion.hpp"

using namespace motiondiff;
namespace fs = std::filesystem;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("motiondiff_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

struct RunResult {
  int code = -1;
  std::string err;
};

RunResult run(const std::string& args) {
  const fs::path err = work_dir() / "stderr.txt";
  const std::string cmd = std::string(MOTIONDIFF_BIN) + " " + args + " > /dev/null 2> " + err.string();
  const int status = std::system(cmd.c_str());
  std::ifstream in(err);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

ExperimentConfig tiny_config(const fs::path& train_dir) {
  ExperimentConfig cfg;
  cfg.data.train_dir = train_dir.string();
  cfg.data.observed = 3;
  cfg.data.future = 4;
  cfg.data.train_stride = 2;
  cfg.data.eval_stride = 7;
  cfg.schedule.steps = 6;
  cfg.network.joints = 3;
  cfg.network.joint_dim = 4;
  cfg.network.d_model = 8;
  cfg.network.n_heads = 2;
  cfg.network.n_spatial_layers = 1;
  cfg.network.n_temporal_layers = 1;
  cfg.network.cond_dim = 8;
  cfg.network.head_dims = {8};
  cfg.train.epochs = 2;
  cfg.train.decay_start = 1;
  cfg.train.batch_size = 8;
  cfg.train.seed = 3;
  cfg.refine.net.n_gcn_layers = 2;
  cfg.refine.net.gcn_hidden = 8;
  cfg.refine.net.cond_proj = 4;
  cfg.refine.samples = 3;
  cfg.refine.epochs = 2;
  cfg.refine.decay_start = 1;
  cfg.refine.batch_size = 4;
  cfg.refine.train_stride = 3;
  cfg.eval.samples = 4;
  cfg.sync();
  return cfg;
}

// Synthetic data, a tiny config and a trained diffusion checkpoint shared by
// the tests below.
class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const fs::path w = work_dir();
    ASSERT_EQ(run("synth-data --out " + (w / "train").string() + " --sequences 2 --frames 40 --joints 3 --seed 1").code, 0);
    ASSERT_EQ(run("synth-data --out " + (w / "test").string() + " --sequences 2 --frames 30 --joints 3 --seed 2").code, 0);
    std::ofstream cfg(w / "tiny.toml");
    write_config_toml(cfg, tiny_config(w / "train"));
    cfg.close();
    const RunResult r = run("train --config " + (w / "tiny.toml").string() + " --out " + (w / "run").string());
    ASSERT_EQ(r.code, 0) << r.err;
  }

  static fs::path dir(const std::string& name) { return work_dir() / name; }
};

}  // namespace

TEST_F(CliPipeline, SynthWritesFilesAndManifest) {
  const fs::path a = dir("synth_a"), b = dir("synth_b");
  ASSERT_EQ(run("synth-data --out " + a.string() + " --sequences 3 --frames 20 --joints 4 --seed 5").code, 0);
  ASSERT_EQ(run("synth-data --out " + b.string() + " --sequences 3 --frames 20 --joints 4 --seed 5").code, 0);
  const auto manifest = read_csv(a / "manifest.csv");
  ASSERT_EQ(manifest.size(), 4u);
  EXPECT_EQ(manifest[0], (std::vector<std::string>{"file", "frames", "joints", "fps"}));
  std::size_t txt = 0;
  for (const auto& e : fs::directory_iterator(a)) txt += e.path().extension() == ".txt";
  EXPECT_EQ(txt, 3u);
  for (std::size_t i = 1; i < manifest.size(); ++i) {
    const MotionSequence seq = load_motion_file(a / manifest[i][0]);
    EXPECT_EQ(std::to_string(seq.num_frames()), manifest[i][1]);
    EXPECT_EQ(std::to_string(seq.num_joints()), manifest[i][2]);
    EXPECT_EQ(slurp(a / manifest[i][0]), slurp(b / manifest[i][0]));
  }
  EXPECT_EQ(slurp(a / "manifest.csv"), slurp(b / "manifest.csv"));
}

TEST_F(CliPipeline, TrainIsReproducible) {
  const fs::path again = dir("run_again");
  ASSERT_EQ(run("train --config " + dir("tiny.toml").string() + " --out " + again.string()).code, 0);
  for (const char* f : {"diffusion_log.csv", "diffusion_last.ckpt", "diffusion_best.ckpt"}) {
    ASSERT_TRUE(fs::exists(dir("run") / f)) << f;
    EXPECT_EQ(slurp(dir("run") / f), slurp(again / f)) << f;
  }
  EXPECT_EQ(read_csv(dir("run") / "diffusion_log.csv").front(),
            (std::vector<std::string>{"epoch", "loss", "lr", "wallclock_s"}));
}

TEST_F(CliPipeline, BadConfigKeyExitsWithKeyName) {
  std::string text = slurp(dir("tiny.toml"));
  text.replace(text.find("batch_size = 8"), 14, "batch_sise = 8");
  std::ofstream(dir("bad.toml")) << text;
  const RunResult r = run("train --config " + dir("bad.toml").string() + " --out " + dir("bad_run").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("batch_sise"), std::string::npos) << r.err;
  EXPECT_EQ(run("train --no-such-flag").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
}

TEST_F(CliPipeline, RefineWithoutCheckpointIsAnError) {
  const RunResult r = run("train --config " + dir("tiny.toml").string() + " --stage refine --out " +
                          dir("empty_run").string());
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("diffusion_last.ckpt"), std::string::npos) << r.err;
  EXPECT_EQ(run("train --config " + dir("tiny.toml").string() + " --stage polish --out " + dir("x").string()).code, 2);
}

TEST_F(CliPipeline, MissingDataIsADataError) {
  EXPECT_EQ(run("sample --checkpoint " + (dir("run") / "diffusion_last.ckpt").string() + " --data " +
                dir("nowhere").string() + " --out " + dir("p").string())
                .code,
            3);
  EXPECT_EQ(run("sample --checkpoint " + dir("nowhere.ckpt").string() + " --data " + dir("test").string() +
                " --out " + dir("p").string())
                .code,
            3);
}

TEST_F(CliPipeline, SampleCountAndDeterminism) {
  const std::string ckpt = (dir("run") / "diffusion_last.ckpt").string();
  ASSERT_EQ(run("sample --checkpoint " + ckpt + " --data " + dir("test").string() + " --n 3 --seed 4 --out " +
                dir("s1").string())
                .code,
            0);
  ASSERT_EQ(run("sample --checkpoint " + ckpt + " --data " + dir("test").string() + " --n 3 --seed 4 --out " +
                dir("s2").string())
                .code,
            0);
  ASSERT_EQ(run("sample --checkpoint " + ckpt + " --data " + dir("test").string() + " --n 3 --seed 5 --out " +
                dir("s3").string())
                .code,
            0);
  const auto index = read_csv(dir("s1") / "index.csv");
  // Two 30-frame files with windows of 7 frames at stride 7: 4 each.
  ASSERT_EQ(index.size(), 1u + 8u);
  std::size_t samples = 0;
  for (const auto& e : fs::directory_iterator(dir("s1"))) {
    const std::string name = e.path().filename().string();
    if (name.rfind("sample_", 0) == 0) {
      ++samples;
      EXPECT_EQ(slurp(e.path()), slurp(dir("s2") / name)) << name;
    }
  }
  EXPECT_EQ(samples, 8u * 3u);
  EXPECT_EQ(slurp(dir("s1") / "index.csv"), slurp(dir("s2") / "index.csv"));
  EXPECT_NE(slurp(dir("s1") / "sample_0_0.txt"), slurp(dir("s3") / "sample_0_0.txt"));
}

TEST_F(CliPipeline, EvaluateGroundTruthGivesZeroErrors) {
  const std::string ckpt = (dir("run") / "diffusion_last.ckpt").string();
  ASSERT_EQ(run("sample --checkpoint " + ckpt + " --data " + dir("test").string() + " --n 2 --out " +
                dir("gt").string())
                .code,
            0);
  // Overwrite every sample with its ground-truth future.
  for (const auto& row : read_csv(dir("gt") / "index.csv")) {
    if (row[0] == "obs_id") continue;
    const std::size_t start = std::stoul(row[2]);
    const MotionSequence src = remove_global_translation(load_motion_file(dir("test") / row[1]));
    std::stringstream files(row[6]);
    std::string file;
    while (std::getline(files, file, ';')) {
      MotionSequence s = load_motion_file(dir("gt") / file);
      for (std::size_t t = 0; t < s.num_frames(); ++t)
        for (std::size_t c = 0; c < s.frames.cols(); ++c) s.frames(t, c) = src.frames(start + 3 + t, c);
      save_motion_file(dir("gt") / file, s);
    }
  }
  ASSERT_EQ(run("evaluate --pred " + dir("gt").string() + " --data " + dir("test").string() + " --out " +
                dir("gt.csv").string())
                .code,
            0);
  const auto rows = read_csv(dir("gt.csv"));
  EXPECT_EQ(rows.front(), (std::vector<std::string>{"obs_id", "APD", "ADE", "FDE", "MMADE", "MMFDE"}));
  ASSERT_EQ(rows.size(), 1u + 8u + 1u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i][1], "0.000000");  // both samples coincide
    EXPECT_EQ(rows[i][2], "0.000000");
    EXPECT_EQ(rows[i][3], "0.000000");
  }
  EXPECT_EQ(rows.back()[0], "mean");
}

TEST_F(CliPipeline, EvaluateMeanRowAndLayout) {
  const std::string ckpt = (dir("run") / "diffusion_last.ckpt").string();
  ASSERT_EQ(run("sample --checkpoint " + ckpt + " --data " + dir("test").string() + " --n 3 --out " +
                dir("ev").string())
                .code,
            0);
  ASSERT_EQ(run("evaluate --pred " + dir("ev").string() + " --data " + dir("test").string() + " --out " +
                dir("ev.csv").string())
                .code,
            0);
  const auto rows = read_csv(dir("ev.csv"));
  ASSERT_EQ(rows.size(), 10u);
  for (std::size_t c = 1; c < 6; ++c) {
    double sum = 0.0;
    for (std::size_t i = 1; i + 1 < rows.size(); ++i) {
      ASSERT_EQ(rows[i].size(), 6u);
      const auto dot = rows[i][c].find('.');
      ASSERT_NE(dot, std::string::npos);
      EXPECT_EQ(rows[i][c].size() - dot - 1, 6u);
      sum += std::stod(rows[i][c]);
    }
    // Per-row values are rounded to 6 places before averaging here.
    EXPECT_NEAR(std::stod(rows.back()[c]), sum / 8.0, 1e-6);
  }
  ASSERT_EQ(run("evaluate --pred " + dir("ev").string() + " --data " + dir("test").string() + " --out " +
                dir("ev2.csv").string())
                .code,
            0);
  EXPECT_EQ(slurp(dir("ev.csv")), slurp(dir("ev2.csv")));
}

TEST_F(CliPipeline, DiagnoseGridAndFinalRow) {
  const std::string ckpt = (dir("run") / "diffusion_last.ckpt").string();
  ASSERT_EQ(run("diagnose --checkpoint " + ckpt + " --data " + dir("test").string() + " --k-grid 6 --n 3 --out " +
                dir("d1.csv").string())
                .code,
            0);
  const auto single = read_csv(dir("d1.csv"));
  ASSERT_EQ(single.size(), 2u);
  EXPECT_EQ(single[0], (std::vector<std::string>{"k", "APD", "ADE", "FDE", "MMADE", "MMFDE"}));
  EXPECT_EQ(single[1][0], "6");

  ASSERT_EQ(run("diagnose --checkpoint " + ckpt + " --data " + dir("test").string() +
                " --k-grid 6:0:2 --n 3 --seed 2 --out " + dir("d2.csv").string())
                .code,
            0);
  ASSERT_EQ(run("sample --checkpoint " + ckpt + " --data " + dir("test").string() + " --n 3 --seed 2 --out " +
                dir("d2pred").string())
                .code,
            0);
  ASSERT_EQ(run("evaluate --pred " + dir("d2pred").string() + " --data " + dir("test").string() + " --out " +
                dir("d2eval.csv").string())
                .code,
            0);
  const auto grid = read_csv(dir("d2.csv"));
  ASSERT_EQ(grid.size(), 5u);
  EXPECT_EQ(grid.back()[0], "0");
  const auto final_eval = read_csv(dir("d2eval.csv")).back();
  // Sample files hold 9 significant digits, so allow that much slack.
  for (std::size_t c = 1; c < 6; ++c) EXPECT_NEAR(std::stod(grid.back()[c]), std::stod(final_eval[c]), 2e-6);
  EXPECT_EQ(run("diagnose --checkpoint " + ckpt + " --data " + dir("test").string() + " --k-grid 7 --out " +
                dir("d3.csv").string())
                .code,
            2);
}

TEST_F(CliPipeline, RefineStageAndRefinedEvaluation) {
  const fs::path r = dir("run");
  ASSERT_EQ(run("train --config " + dir("tiny.toml").string() + " --stage refine --out " + r.string()).code, 0);
  ASSERT_TRUE(fs::exists(r / "refiner_last.ckpt"));
  ASSERT_TRUE(fs::exists(r / "refiner_log.csv"));
  ASSERT_EQ(run("sample --checkpoint " + (r / "refiner_last.ckpt").string() + " --data " + dir("test").string() +
                " --n 3 --out " + dir("rs").string())
                .code,
            0);
  EXPECT_TRUE(fs::exists(dir("rs") / "refined_index.csv"));
  EXPECT_TRUE(fs::exists(dir("rs") / "refined_sample_0_0.txt"));
  ASSERT_EQ(run("evaluate --refined --pred " + dir("rs").string() + " --data " + dir("test").string() + " --out " +
                dir("rs.csv").string())
                .code,
            0);
  EXPECT_EQ(read_csv(dir("rs.csv")).size(), 10u);
  // The diffusion part of the merged checkpoint samples exactly like the
  // original diffusion checkpoint.
  ASSERT_EQ(run("sample --checkpoint " + (r / "diffusion_last.ckpt").string() + " --data " + dir("test").string() +
                " --n 3 --out " + dir("ds").string())
                .code,
            0);
  EXPECT_EQ(slurp(dir("rs") / "sample_3_1.txt"), slurp(dir("ds") / "sample_3_1.txt"));
}
