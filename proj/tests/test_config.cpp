#include <gtest/gtest.h>

#include <sstream>

#include "motiondiff/config.hpp"

using namespace motiondiff;

namespace {

std::string default_toml() {
  ExperimentConfig cfg;
  cfg.sync();
  std::ostringstream out;
  write_config_toml(out, cfg);
  return out.str();
}

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return config_from_toml(parse_toml(in, "test.toml"));
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string without_line(const std::string& text, const std::string& prefix) {
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line))
    if (line.rfind(prefix, 0) != 0) out += line + "\n";
  return out;
}

}  // namespace

TEST(Config, WriterAndReaderRoundTrip) {
  ExperimentConfig cfg;
  cfg.train.lr = 0.0005;
  cfg.train.seed = 17;
  cfg.refine.net.sigma = 12.5;
  cfg.network.head_dims = {512, 256, 128};
  cfg.data.train_dir = "some dir/with \"quotes\"";
  cfg.sync();
  std::ostringstream out;
  write_config_toml(out, cfg);
  const ExperimentConfig back = parse(out.str());
  EXPECT_EQ(config_to_json(back), config_to_json(cfg));
  EXPECT_EQ(back.network.head_dims, (std::vector<int>{512, 256, 128}));
  EXPECT_EQ(back.data.train_dir, cfg.data.train_dir);
  EXPECT_EQ(config_to_json(config_from_json(config_to_json(cfg))), config_to_json(cfg));
}

TEST(Config, DefaultsAreFullScaleSettings) {
  const ExperimentConfig cfg;
  EXPECT_EQ(cfg.train.lr, 0.0005);
  EXPECT_EQ(cfg.train.epochs, 500);
  EXPECT_EQ(cfg.train.batch_size, 64);
  EXPECT_EQ(cfg.train.decay_start, 100);
  EXPECT_EQ(cfg.refine.net.lambda, 0.01);
  EXPECT_EQ(cfg.refine.net.gamma, 0.005);
  EXPECT_EQ(cfg.refine.net.n_gcn_layers, 12);
  EXPECT_EQ(cfg.refine.net.gcn_hidden, 256);
  EXPECT_EQ(cfg.eval.samples, 50);
}

TEST(Config, MissingKeyIsNamed) {
  const std::string err = error_of(without_line(default_toml(), "beta_K"));
  EXPECT_NE(err.find("[schedule] beta_K"), std::string::npos) << err;
  // Dropping a header folds its keys into the previous section, where
  // `samples` already exists.
  EXPECT_NE(error_of(without_line(default_toml(), "[eval]")).find("duplicate key samples"), std::string::npos);
}

TEST(Config, UnknownKeyIsNamed) {
  std::string text = default_toml();
  text.replace(text.find("[train]\n"), 8, "[train]\nlearning_rate = 0.1\n");
  EXPECT_NE(error_of(text).find("[train] learning_rate"), std::string::npos);
}

TEST(Config, TypeAndSyntaxErrors) {
  std::string text = default_toml();
  text.replace(text.find("epochs = 500"), 12, "epochs = \"many\"");
  EXPECT_NE(error_of(text).find("[train] epochs"), std::string::npos);
  EXPECT_NE(error_of("[data]\ntrain_dir = \"x\n").find("test.toml:2"), std::string::npos);
  EXPECT_NE(error_of("orphan = 1\n").find("outside of any section"), std::string::npos);
}

TEST(Config, ValidationRejectsInconsistentValues) {
  std::string text = default_toml();
  text.replace(text.find("decay_start = 100"), 17, "decay_start = 900");
  EXPECT_NE(error_of(text).find("decay_start"), std::string::npos);
  text = default_toml();
  text.replace(text.find("samples = 10"), 12, "samples = 1");
  EXPECT_NE(error_of(text).find("[refine] samples"), std::string::npos);
}

TEST(Config, TomlSubsetParsing) {
  std::istringstream in("# top\n[a]\nx = 1_000 # trailing\ny = -2.5e-3\nz = \"h#sh\"\nw = [1, 2 ,3]\nb = true\n");
  const TomlTable t = parse_toml(in, "t");
  EXPECT_EQ(std::get<std::int64_t>(t.at("a").at("x").scalar), 1000);
  EXPECT_EQ(std::get<double>(t.at("a").at("y").scalar), -2.5e-3);
  EXPECT_EQ(std::get<std::string>(t.at("a").at("z").scalar), "h#sh");
  EXPECT_EQ(t.at("a").at("w").array.size(), 3u);
  EXPECT_TRUE(std::get<bool>(t.at("a").at("b").scalar));
}
