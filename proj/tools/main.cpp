#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <vector>

#include "commands.hpp"
#include "ilr/config.hpp"
#include "ilr/error.hpp"

namespace {

// Every subcommand accepts --config plus one flag per configuration key, so
// `ilr <cmd> --help` lists all of them with their defaults.
struct ConfigFlags {
  std::string file;
  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, CLI::Option*>> options;

  void attach(CLI::App* sub) {
    sub->add_option("--config", file, "key=value configuration file")
        ->check(CLI::ExistingFile);
    for (const auto& k : ilr::config_keys()) {
      auto* opt = sub->add_option("--" + k.name, values[k.name], k.help)
                      ->default_str(k.default_value)
                      ->group("Configuration");
      options.emplace_back(k.name, opt);
    }
  }

  // File first, then flags given on the command line.
  ilr::RunConfig build() const {
    ilr::RunConfig c = file.empty() ? ilr::RunConfig() : ilr::RunConfig::from_file(file);
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) {
        c.set(key, values.at(key));
      }
    }
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential recommendation with injected image tokens: data, training, "
               "evaluation and benchmarks"};
  app.name("ilr");
  app.require_subcommand(1, 1);

  struct Sub {
    CLI::App* app;
    ConfigFlags flags;
  };
  std::map<std::string, Sub> subs;
  auto add = [&](const std::string& name, const std::string& help) -> CLI::App* {
    auto& s = subs[name];
    s.app = app.add_subcommand(name, help);
    s.flags.attach(s.app);
    return s.app;
  };

  add("synth", "Generate a synthetic catalog, interactions and feature files");
  add("prepare", "k-core filter the interactions and write the leave-one-out split");
  add("train", "Train the model and write the checkpoint and training log");
  auto* eval = add("eval", "Evaluate on the test (or validation) targets with sampled negatives");
  add("overlap", "Image vs joint-text cosine overlap report");
  auto* bench = add("bench", "Token counts, complexity estimates, timing and context-budget sweep");
  add("report", "Summarise the JSON reports in reports_dir");

  std::string scorer = "model";
  std::string target = "test";
  bool dump = false;
  eval->add_option("--scorer", scorer, "model, oracle or random")
      ->check(CLI::IsMember({"model", "oracle", "random"}))
      ->capture_default_str();
  eval->add_option("--target", target, "test or validation")
      ->check(CLI::IsMember({"test", "validation"}))
      ->capture_default_str();
  eval->add_flag("--dump-scores", dump, "also write per-candidate scores to eval_scores.csv");

  bool skip_timing = false;
  bool skip_sweep = false;
  bench->add_flag("--skip-timing", skip_timing, "skip the timing bench");
  bench->add_flag("--skip-sweep", skip_sweep, "skip the context-budget sweep");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 3;
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    const ilr::RunConfig config = subs.at(name).flags.build();
    namespace cli = ilr::cli;
    if (name == "synth") {
      cli::cmd_synth(config, std::cout);
    } else if (name == "prepare") {
      cli::cmd_prepare(config, std::cout);
    } else if (name == "train") {
      cli::cmd_train(config, std::cout);
    } else if (name == "eval") {
      cli::EvalFlags f;
      f.scorer = scorer == "oracle"   ? cli::ScorerKind::Oracle
                 : scorer == "random" ? cli::ScorerKind::Random
                                      : cli::ScorerKind::Model;
      f.target = target == "validation" ? ilr::EvalTarget::Validation : ilr::EvalTarget::Test;
      f.dump_scores = dump;
      cli::cmd_eval(config, f, std::cout);
    } else if (name == "overlap") {
      cli::cmd_overlap(config, std::cout);
    } else if (name == "bench") {
      cli::cmd_bench(config, cli::BenchFlags{!skip_timing, !skip_sweep}, std::cout);
    } else {
      cli::cmd_report(config, std::cout);
    }
  } catch (const ilr::Error& e) {
    std::cerr << "ilr: " << e.what() << "\n";
    return ilr::exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "ilr: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "ilr: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
