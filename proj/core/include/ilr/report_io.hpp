#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ilr/bench.hpp"
#include "ilr/checkpoint.hpp"
#include "ilr/evaluation.hpp"

namespace ilr {

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row);
};

std::string format_number(double x);

// CSV with "# key=value" metadata lines before the header.
void write_csv(const std::filesystem::path& path, const Table& table, const KeyValues& metadata);

// <base>_<name>.csv per table plus <base>.json holding metadata and every
// table as an array of row objects.
void write_report(const std::filesystem::path& base, const std::map<std::string, Table>& tables,
                  const KeyValues& metadata);

Table metrics_table(const MetricsReport& report, const std::string& label = "all");
void append_metrics(Table& table, const MetricsReport& report, const std::string& label);
Table overlap_table(const OverlapReport& report);
Table histogram_table(const Histogram& h);
Table token_table(const TokenHistogram& h);
Table timing_table(const std::vector<TimingRow>& rows);
Table sweep_table(const std::vector<SweepRow>& rows);

// user_id,item_id,score,is_truth; scores printed with round-trip precision.
void write_score_dump(const std::filesystem::path& path, const EvalResult& result,
                      const KeyValues& metadata);

struct DumpedUser {
  std::string user_id;
  std::string truth;
  std::vector<std::string> items;
  std::vector<double> scores;
};
std::vector<DumpedUser> read_score_dump(const std::filesystem::path& path);

}  // namespace ilr
