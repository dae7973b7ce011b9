#pragma once

// Bodies of the ilr subcommands. They report progress on `out` and throw
// ilr::Error on failure; the executable maps the error kind to an exit code.
//
// File layout under the configured directories:
//   data_dir/interactions.tsv, data_dir/items.tsv   raw data (synth writes both)
//   data_dir/split.tsv                              leave-one-out split (prepare)
//   features_dir/<type>.ilrf                        feature matrices
//   checkpoint                                      trained model (train)
//   reports_dir/*.csv, reports_dir/*.json           reports

#include <iosfwd>

#include "ilr/config.hpp"
#include "ilr/evaluation.hpp"

namespace ilr::cli {

enum class ScorerKind { Model, Oracle, Random };

struct EvalFlags {
  ScorerKind scorer = ScorerKind::Model;
  EvalTarget target = EvalTarget::Test;
  bool dump_scores = false;
};

struct BenchFlags {
  bool timing = true;
  bool sweep = true;
};

void cmd_synth(const RunConfig& config, std::ostream& out);
void cmd_prepare(const RunConfig& config, std::ostream& out);
void cmd_train(const RunConfig& config, std::ostream& out);
void cmd_eval(const RunConfig& config, const EvalFlags& flags, std::ostream& out);
void cmd_overlap(const RunConfig& config, std::ostream& out);
void cmd_bench(const RunConfig& config, const BenchFlags& flags, std::ostream& out);
void cmd_report(const RunConfig& config, std::ostream& out);

}  // namespace ilr::cli
