#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "run_config.hpp"

namespace sml::cli {
namespace {

namespace fs = std::filesystem;

fs::path write_file(const std::string& name, const std::string& text) {
  const fs::path dir = fs::temp_directory_path() / "sml_test_config";
  fs::create_directories(dir);
  std::ofstream(dir / name) << text;
  return dir / name;
}

TEST(Override, ValueParsing) {
  EXPECT_EQ(parse_override_value("1.5"), 1.5);
  EXPECT_EQ(parse_override_value("[4,8]"), (nlohmann::json{4, 8}));
  EXPECT_EQ(parse_override_value("true"), true);
  EXPECT_EQ(parse_override_value("meta_tanh"), "meta_tanh");
  EXPECT_EQ(parse_override_value("\"7\""), "7");
}

TEST(Override, PathErrors) {
  auto cfg = default_config_json();
  EXPECT_THROW(apply_override(cfg, "nosuch.key", 1), ConfigError);
  EXPECT_THROW(apply_override(cfg, "train", 1), ConfigError);
  EXPECT_THROW(apply_override(cfg, "train.", 1), ConfigError);
  apply_override(cfg, "train.epochs", 9);
  EXPECT_EQ(cfg["train"]["epochs"], 9);
}

TEST(Resolve, DefaultsRoundTrip) {
  const auto c = resolve_config(std::nullopt, {}, 3);
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.synthetic.seed, 3u);
  EXPECT_EQ(c.model.seed, 3u);
  EXPECT_EQ(c.train.seed, 3u);
  EXPECT_EQ(c.theory.seed, 3u);
  const auto again = config_from_json(c.to_json());
  EXPECT_EQ(again.to_json().dump(), c.to_json().dump());
}

TEST(Resolve, PrecedenceFileThenOverridesThenSeed) {
  const auto file = write_file("prec.json", R"({"train": {"epochs": 4, "batch_size": 32}, "model": {"seed": 11}})");
  const auto c = resolve_config(file, {{"train.epochs", "6"}}, std::nullopt);
  EXPECT_EQ(c.train.epochs, 6u);
  EXPECT_EQ(c.train.batch_size, 32u);
  EXPECT_EQ(c.model.seed, 11u);
  const auto s = resolve_config(file, {{"model.seed", "12"}}, 2);
  EXPECT_EQ(s.model.seed, 2u);
}

TEST(Resolve, TypedOverrides) {
  const auto c = resolve_config(std::nullopt,
                                {{"model.skip", "vanilla"},
                                 {"model.tower_widths", "[8,8]"},
                                 {"sweep.depths", "[2,3]"},
                                 {"diagnostics.input", "gaussian"},
                                 {"theory.tolerance", "1e-6"}},
                                0);
  EXPECT_EQ(c.model.skip, network::SkipVariant::vanilla());
  EXPECT_EQ(c.model.tower_widths, (std::vector<std::size_t>{8, 8}));
  EXPECT_EQ(c.sweep.depths, (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(c.diagnostics.input, "gaussian");
  EXPECT_EQ(c.theory.tolerance, 1e-6);
}

TEST(Resolve, InvalidValuesAreConfigErrors) {
  const std::vector<std::pair<std::string, std::string>> bad[] = {
      {{"train.epochs", "\"five\""}},
      {{"train.lr", "-1"}},
      {{"train.unknown", "1"}},
      {{"model.skip", "resnet"}},
      {{"diagnostics.mode", "later"}},
      {{"diagnostics.split", "dev"}},
      {{"sweep.depths", "[0]"}},
      {{"sweep.variants", "[\"meta_cos\"]"}},
      {{"theory.min_dim", "6"}},
      {{"synthetic.vocab_size", "0"}},
  };
  for (const auto& o : bad) EXPECT_THROW(resolve_config(std::nullopt, o, 0), ConfigError) << o[0].first;
}

TEST(Resolve, FileErrors) {
  EXPECT_THROW(resolve_config(write_file("broken.json", "{not json"), {}, 0), ConfigError);
  EXPECT_THROW(resolve_config(write_file("array.json", "[1]"), {}, 0), ConfigError);
  EXPECT_THROW(resolve_config(write_file("section.json", R"({"nosuch": {}})"), {}, 0), ConfigError);
  EXPECT_THROW(resolve_config(fs::path("/nonexistent/cfg.json"), {}, 0), ConfigError);
}

}  // namespace
}  // namespace sml::cli
