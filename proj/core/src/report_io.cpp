#include "ilr/report_io.hpp"

#include <charconv>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "ilr/error.hpp"

namespace ilr {

void Table::add(std::vector<std::string> row) {
  if (row.size() != columns.size()) {
    fail(ErrorKind::Argument, "table row has " + std::to_string(row.size()) + " cells, expected " +
                                  std::to_string(columns.size()));
  }
  rows.push_back(std::move(row));
}

std::string format_number(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    fail(ErrorKind::Io, "cannot write " + path.string());
  }
  return out;
}

void write_meta(std::ostream& out, const KeyValues& metadata) {
  for (const auto& [k, v] : metadata) {
    out << "# " << k << "=" << v << "\n";
  }
}

void write_row(std::ostream& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    out << (i ? "," : "") << cells[i];
  }
  out << "\n";
}

std::string str(std::size_t v) { return std::to_string(v); }

}  // namespace

void write_csv(const std::filesystem::path& path, const Table& table, const KeyValues& metadata) {
  auto out = open_out(path);
  write_meta(out, metadata);
  write_row(out, table.columns);
  for (const auto& r : table.rows) {
    write_row(out, r);
  }
  if (!out) {
    fail(ErrorKind::Io, "write failed: " + path.string());
  }
}

void write_report(const std::filesystem::path& base, const std::map<std::string, Table>& tables,
                  const KeyValues& metadata) {
  nlohmann::ordered_json doc;
  doc["metadata"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : metadata) {
    doc["metadata"][k] = v;
  }
  for (const auto& [name, table] : tables) {
    write_csv(base.string() + "_" + name + ".csv", table, metadata);
    auto arr = nlohmann::ordered_json::array();
    for (const auto& row : table.rows) {
      nlohmann::ordered_json obj;
      for (std::size_t i = 0; i < row.size(); ++i) {
        const auto& cell = row[i];
        double num = 0;
        const auto r = std::from_chars(cell.data(), cell.data() + cell.size(), num);
        if (r.ec == std::errc() && r.ptr == cell.data() + cell.size()) {
          obj[table.columns[i]] = num;
        } else {
          obj[table.columns[i]] = cell;
        }
      }
      arr.push_back(std::move(obj));
    }
    doc[name] = std::move(arr);
  }
  auto out = open_out(base.string() + ".json");
  out << doc.dump(2) << "\n";
  if (!out) {
    fail(ErrorKind::Io, "write failed: " + base.string() + ".json");
  }
}

void append_metrics(Table& table, const MetricsReport& report, const std::string& label) {
  for (const auto k : report.ks) {
    table.add({label, str(k), format_number(report.hit.at(k)), format_number(report.ndcg.at(k)),
               str(report.n_users)});
  }
}

Table metrics_table(const MetricsReport& report, const std::string& label) {
  Table t{{"group", "k", "hit", "ndcg", "users"}, {}};
  append_metrics(t, report, label);
  return t;
}

Table overlap_table(const OverlapReport& report) {
  Table t{{"pairs", "mean", "stdev", "n", "excluded"}, {}};
  t.add({"positive", format_number(report.positive.mean), format_number(report.positive.stdev),
         str(report.positive.n), str(report.excluded)});
  t.add({"negative", format_number(report.negative.mean), format_number(report.negative.stdev),
         str(report.negative.n), str(report.excluded)});
  return t;
}

Table histogram_table(const Histogram& h) {
  Table t{{"bin_start", "count"}, {}};
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    t.add({format_number(h.start + static_cast<double>(i) * h.bin_width), str(h.counts[i])});
  }
  return t;
}

Table token_table(const TokenHistogram& h) {
  Table t{{"bin_start", "count"}, {}};
  for (const auto& [start, count] : h.bins) {
    t.add({str(start), str(count)});
  }
  return t;
}

Table timing_table(const std::vector<TimingRow>& rows) {
  Table t{{"mode", "group", "min_length", "users", "token_total", "seconds"}, {}};
  for (const auto& r : rows) {
    t.add({std::string(to_string(r.mode)), std::to_string(r.group), str(r.lower_bound),
           str(r.users), str(r.token_total), format_number(r.seconds)});
  }
  return t;
}

Table sweep_table(const std::vector<SweepRow>& rows) {
  Table t{{"mode", "budget", "k", "hit", "ndcg", "users", "mean_retained", "max_retained"}, {}};
  for (const auto& r : rows) {
    for (const auto k : r.report.ks) {
      const std::string budget = r.budget == kUnlimitedBudget ? "unlimited" : str(r.budget);
      t.add({std::string(to_string(r.mode)), budget, str(k),
             format_number(r.report.hit.at(k)), format_number(r.report.ndcg.at(k)),
             str(r.report.n_users), format_number(r.mean_retained), str(r.max_retained)});
    }
  }
  return t;
}

void write_score_dump(const std::filesystem::path& path, const EvalResult& result,
                      const KeyValues& metadata) {
  auto out = open_out(path);
  write_meta(out, metadata);
  out << "user_id,item_id,score,is_truth\n";
  for (const auto& u : result.users) {
    if (u.candidates.size() != u.scores.size() || u.candidates.empty()) {
      fail(ErrorKind::Argument, "score dump needs evaluation with keep_scores");
    }
    for (std::size_t i = 0; i < u.candidates.size(); ++i) {
      out << u.user_id << ',' << u.candidates[i] << ',' << format_number(u.scores[i]) << ','
          << (u.candidates[i] == u.truth ? 1 : 0) << "\n";
    }
  }
  if (!out) {
    fail(ErrorKind::Io, "write failed: " + path.string());
  }
}

std::vector<DumpedUser> read_score_dump(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    fail(ErrorKind::Io, "cannot open " + path.string());
  }
  std::vector<DumpedUser> users;
  std::string line;
  bool header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') {
      continue;
    }
    if (!header) {
      header = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) {
      f.push_back(cell);
    }
    double score = 0;
    if (f.size() != 4 ||
        std::from_chars(f[2].data(), f[2].data() + f[2].size(), score).ec != std::errc()) {
      fail(ErrorKind::Parse, path.string() + ":" + std::to_string(lineno) + ": bad score row");
    }
    if (users.empty() || users.back().user_id != f[0]) {
      users.push_back({f[0], "", {}, {}});
    }
    users.back().items.push_back(f[1]);
    users.back().scores.push_back(score);
    if (f[3] == "1") {
      users.back().truth = f[1];
    }
  }
  return users;
}

}  // namespace ilr
