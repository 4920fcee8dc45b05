#include <iostream>

#include "CLI11.hpp"
#include "motiondiff/commands.hpp"
#include "motiondiff/runtime.hpp"
#include "motiondiff/tensor.hpp"

namespace cli = motiondiff::cli;

int main(int argc, char** argv) {
  motiondiff::tune_allocator();
  CLI::App app{"Diffusion-based stochastic human motion prediction"};
  app.require_subcommand(1);

  cli::SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth-data", "Write synthetic kinematic-chain sequences");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--sequences", synth.sequences, "Number of sequences")->capture_default_str();
  synth_cmd->add_option("--frames", synth.frames, "Frames per sequence")->capture_default_str();
  synth_cmd->add_option("--joints", synth.joints, "Joints per skeleton")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
  synth_cmd->add_option("--fps", synth.fps, "Frame rate")->capture_default_str();

  cli::TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Train the diffusion model or the refiner");
  train_cmd->add_option("--config", train.config, "TOML configuration")->required();
  train_cmd->add_option("--stage", train.stage, "diffusion or refine")->capture_default_str();
  train_cmd->add_option("--out", train.out, "Output directory")->required();
  train_cmd->add_option("--diffusion", train.diffusion,
                        "Frozen diffusion checkpoint for --stage refine (default <out>/diffusion_last.ckpt)");

  cli::SampleOptions sample;
  auto* sample_cmd = app.add_subcommand("sample", "Draw N futures per observation window");
  sample_cmd->add_option("--checkpoint", sample.checkpoint, "Diffusion or refiner checkpoint")->required();
  sample_cmd->add_option("--data", sample.data, "Directory of motion files")->required();
  sample_cmd->add_option("--n", sample.n, "Samples per observation")->capture_default_str();
  sample_cmd->add_option("--seed", sample.seed, "Sampling seed")->capture_default_str();
  sample_cmd->add_option("--out", sample.out, "Output directory")->required();

  cli::EvaluateOptions eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score prediction sets against ground truth");
  eval_cmd->add_option("--pred", eval.pred, "Directory written by sample")->required();
  eval_cmd->add_option("--data", eval.data, "Directory of motion files")->required();
  eval_cmd->add_option("--delta", eval.delta, "Multimodal grouping threshold")->capture_default_str();
  eval_cmd->add_option("--out", eval.out, "Output CSV")->required();
  eval_cmd->add_flag("--refined", eval.refined, "Score the refined sets");

  cli::DiagnoseOptions diag;
  std::string k_grid;
  auto* diag_cmd = app.add_subcommand("diagnose", "Metrics at intermediate reverse steps");
  diag_cmd->add_option("--checkpoint", diag.checkpoint, "Diffusion checkpoint")->required();
  diag_cmd->add_option("--data", diag.data, "Directory of motion files")->required();
  diag_cmd->add_option("--k-grid", k_grid, "Steps, e.g. 50,40,30 or 50:0:10")->required();
  diag_cmd->add_option("--n", diag.n, "Samples per observation")->capture_default_str();
  diag_cmd->add_option("--seed", diag.seed, "Sampling seed")->capture_default_str();
  diag_cmd->add_option("--delta", diag.delta, "Multimodal grouping threshold")->capture_default_str();
  diag_cmd->add_option("--out", diag.out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth_cmd) cli::synth_data(synth);
    if (*train_cmd) cli::train(train, std::cerr);
    if (*sample_cmd) cli::sample(sample);
    if (*eval_cmd) cli::evaluate(eval);
    if (*diag_cmd) {
      diag.k_grid = cli::parse_k_grid(k_grid);
      cli::diagnose(diag);
    }
  } catch (const motiondiff::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const motiondiff::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const motiondiff::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
