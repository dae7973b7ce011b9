#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "commands.hpp"
#include "ilr/error.hpp"
#include "test_util.hpp"

namespace ilr {
namespace {

RunConfig small_run(const std::filesystem::path& root) {
  RunConfig c;
  c.set("data_dir", (root / "data").string());
  c.set("features_dir", (root / "features").string());
  c.set("checkpoint", (root / "model" / "model.ilrc").string());
  c.set("reports_dir", (root / "reports").string());
  c.set("synth.n_users", "40");
  c.set("synth.n_items", "50");
  c.set("d_model", "8");
  c.set("n_layers", "1");
  c.set("ffn_dim", "16");
  c.set("adaptor_hidden", "8");
  c.set("shared_dim", "6");
  c.set("epochs", "1");
  c.set("n_negatives", "20");
  c.set("types", "img,cf");
  return c;
}

nlohmann::json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

TEST(Cli, OracleScorerIsPerfectEndToEnd) {
  const auto root = test::temp_dir("cli");
  const auto c = small_run(root);
  std::ostringstream out;
  cli::cmd_synth(c, out);
  cli::cmd_prepare(c, out);
  cli::cmd_eval(c, cli::EvalFlags{cli::ScorerKind::Oracle, EvalTarget::Test, true}, out);
  const auto report = read_json(root / "reports" / "eval.json");
  EXPECT_EQ(report["metadata"]["scorer"], "oracle");
  EXPECT_EQ(report["metrics"][0]["hit"], 1.0);
  EXPECT_TRUE(std::filesystem::exists(root / "reports" / "eval_metrics.csv"));
  EXPECT_TRUE(std::filesystem::exists(root / "reports" / "eval_scores.csv"));
  EXPECT_NE(out.str().find("hit@5 1"), std::string::npos) << out.str();
}

TEST(Cli, TrainEvalBenchReport) {
  const auto root = test::temp_dir("cli_full");
  auto c = small_run(root);
  c.set("budgets", "0,256");
  c.set("bench_modes", "image");
  c.set("group_size", "3");
  std::ostringstream out;
  cli::cmd_synth(c, out);
  cli::cmd_prepare(c, out);
  cli::cmd_train(c, out);
  EXPECT_TRUE(std::filesystem::exists(c.get("checkpoint")));
  EXPECT_TRUE(std::filesystem::exists(root / "reports" / "train_log.csv"));
  cli::cmd_eval(c, cli::EvalFlags{}, out);
  cli::cmd_overlap(c, out);
  cli::cmd_bench(c, cli::BenchFlags{}, out);
  cli::cmd_report(c, out);
  const auto summary = read_json(root / "reports" / "summary.json");
  EXPECT_FALSE(summary.empty());
  const auto overlap = read_json(root / "reports" / "overlap.json");
  EXPECT_FALSE(overlap.empty());
}

TEST(Cli, MissingCheckpointIsConfigError) {
  const auto root = test::temp_dir("cli_missing");
  const auto c = small_run(root);
  std::ostringstream out;
  cli::cmd_synth(c, out);
  cli::cmd_prepare(c, out);
  try {
    cli::cmd_eval(c, cli::EvalFlags{}, out);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
    EXPECT_EQ(exit_code_for(e.kind()), 3);
    EXPECT_NE(std::string(e.what()).find("model.ilrc"), std::string::npos);
  }
}

TEST(Cli, MissingInputsNameTheFile) {
  const auto root = test::temp_dir("cli_empty");
  const auto c = small_run(root);
  std::ostringstream out;
  try {
    cli::cmd_prepare(c, out);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
    EXPECT_NE(std::string(e.what()).find("interactions.tsv"), std::string::npos);
  }
}

TEST(Cli, UnwritableDirectoryIsIoError) {
  const auto root = test::temp_dir("cli_io");
  // A regular file where a directory is expected.
  std::ofstream(root / "blocker") << "x";
  auto c = small_run(root);
  c.set("data_dir", (root / "blocker" / "data").string());
  std::ostringstream out;
  try {
    cli::cmd_synth(c, out);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Io);
    EXPECT_EQ(exit_code_for(e.kind()), 2);
  }
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(exit_code_for(ErrorKind::Io), 2);
  EXPECT_EQ(exit_code_for(ErrorKind::Config), 3);
  EXPECT_EQ(exit_code_for(ErrorKind::Parse), 3);
  EXPECT_EQ(exit_code_for(ErrorKind::Numeric), 4);
}

}  // namespace
}  // namespace ilr
