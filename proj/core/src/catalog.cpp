#include "ilr/catalog.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <string_view>

#include "ilr/error.hpp"
#include "ilr/random.hpp"

namespace ilr {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
}

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    fail(ErrorKind::Io, "cannot open " + path.string());
  }
  return in;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    fail(ErrorKind::Io, "cannot write " + path.string());
  }
  return out;
}

}  // namespace

Catalog::Catalog(std::vector<ItemRecord> items) {
  for (auto& item : items) {
    add(std::move(item));
  }
}

void Catalog::add(ItemRecord item) {
  if (item.item_id.empty()) {
    fail(ErrorKind::Argument, "item with empty id");
  }
  if (index_.contains(item.item_id)) {
    fail(ErrorKind::Argument, "duplicate item id " + item.item_id);
  }
  index_.emplace(item.item_id, items_.size());
  items_.push_back(std::move(item));
}

const ItemRecord& Catalog::at(const std::string& item_id) const {
  const ItemRecord* item = find(item_id);
  if (item == nullptr) {
    fail(ErrorKind::Argument, "unknown item " + item_id);
  }
  return *item;
}

const ItemRecord* Catalog::find(const std::string& item_id) const {
  auto it = index_.find(item_id);
  return it == index_.end() ? nullptr : &items_[it->second];
}

std::vector<std::string> Catalog::sorted_ids() const {
  std::vector<std::string> ids;
  ids.reserve(items_.size());
  for (const auto& item : items_) {
    ids.push_back(item.item_id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::unordered_set<std::string> UserSplit::history() const {
  std::unordered_set<std::string> h(train.begin(), train.end());
  h.insert(validation);
  h.insert(test);
  return h;
}

const UserSplit& DatasetSplit::user(const std::string& user_id) const {
  for (const auto& u : users) {
    if (u.user_id == user_id) {
      return u;
    }
  }
  fail(ErrorKind::Argument, "unknown user " + user_id);
}

std::vector<InteractionRecord> ingest_interactions(const std::filesystem::path& path) {
  std::ifstream in = open_for_read(path);
  std::vector<InteractionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) {
      continue;
    }
    auto fields = split_tabs(line);
    // Comma-separated lines are accepted too so hand-written fixtures work.
    if (fields.size() == 1) {
      std::vector<std::string_view> comma;
      std::string_view rest = line;
      std::size_t start = 0;
      while (true) {
        const std::size_t c = rest.find(',', start);
        comma.push_back(rest.substr(start, c == std::string_view::npos ? rest.npos : c - start));
        if (c == std::string_view::npos) {
          break;
        }
        start = c + 1;
      }
      fields = comma;
    }
    const std::string where = path.string() + ": line " + std::to_string(line_no);
    if (fields.size() != 3) {
      fail(ErrorKind::Parse, where + ": expected 3 fields, got " + std::to_string(fields.size()));
    }
    if (fields[0].empty() || fields[1].empty()) {
      fail(ErrorKind::Parse, where + ": empty user or item id");
    }
    std::int64_t ts = 0;
    const auto* first = fields[2].data();
    const auto* last = first + fields[2].size();
    auto [ptr, ec] = std::from_chars(first, last, ts);
    if (ec != std::errc() || ptr != last || ts < 0) {
      fail(ErrorKind::Parse, where + ": bad timestamp '" + std::string(fields[2]) + "'");
    }
    records.push_back({std::string(fields[0]), std::string(fields[1]), ts});
  }
  return records;
}

void write_interactions(const std::filesystem::path& path,
                        const std::vector<InteractionRecord>& records) {
  std::ofstream out = open_for_write(path);
  for (const auto& r : records) {
    out << r.user_id << '\t' << r.item_id << '\t' << r.timestamp << '\n';
  }
  if (!out) {
    fail(ErrorKind::Io, "write failed: " + path.string());
  }
}

Catalog ingest_items(const std::filesystem::path& path) {
  std::ifstream in = open_for_read(path);
  Catalog catalog;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) {
      continue;
    }
    const auto fields = split_tabs(line);
    const std::string where = path.string() + ": line " + std::to_string(line_no);
    if (fields.size() != 6) {
      fail(ErrorKind::Parse, where + ": expected 6 fields, got " + std::to_string(fields.size()));
    }
    ItemRecord item{std::string(fields[0]), std::string(fields[1]), std::string(fields[2]),
                    std::string(fields[3]), std::string(fields[4]), std::string(fields[5]),
                    !fields[5].empty()};
    if (item.item_id.empty() || item.title.empty()) {
      fail(ErrorKind::Parse, where + ": item id and title must be nonempty");
    }
    if (catalog.contains(item.item_id)) {
      fail(ErrorKind::Parse, where + ": duplicate item id " + item.item_id);
    }
    catalog.add(std::move(item));
  }
  return catalog;
}

void write_items(const std::filesystem::path& path, const Catalog& catalog) {
  std::ofstream out = open_for_write(path);
  for (const auto& it : catalog.items()) {
    out << it.item_id << '\t' << it.title << '\t' << it.brand << '\t' << it.category << '\t'
        << it.description << '\t' << (it.has_image ? it.image_ref : std::string()) << '\n';
  }
  if (!out) {
    fail(ErrorKind::Io, "write failed: " + path.string());
  }
}

std::vector<InteractionRecord> k_core_filter(const std::vector<InteractionRecord>& records,
                                             std::size_t k) {
  if (k == 0) {
    fail(ErrorKind::Argument, "k_core_filter: k must be >= 1");
  }
  std::vector<bool> alive(records.size(), true);
  bool changed = true;
  while (changed) {
    changed = false;
    std::unordered_map<std::string, std::size_t> user_deg;
    std::unordered_map<std::string, std::size_t> item_deg;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (alive[i]) {
        ++user_deg[records[i].user_id];
        ++item_deg[records[i].item_id];
      }
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (alive[i] &&
          (user_deg[records[i].user_id] < k || item_deg[records[i].item_id] < k)) {
        alive[i] = false;
        changed = true;
      }
    }
  }
  std::vector<InteractionRecord> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (alive[i]) {
      out.push_back(records[i]);
    }
  }
  return out;
}

std::vector<UserSequence> build_sequences(const std::vector<InteractionRecord>& records) {
  std::map<std::string, std::vector<std::pair<std::int64_t, std::string>>> by_user;
  for (const auto& r : records) {
    by_user[r.user_id].emplace_back(r.timestamp, r.item_id);
  }
  std::vector<UserSequence> out;
  out.reserve(by_user.size());
  for (auto& [user, events] : by_user) {
    std::sort(events.begin(), events.end());
    events.erase(std::unique(events.begin(), events.end()), events.end());
    UserSequence seq{user, {}};
    seq.items.reserve(events.size());
    for (auto& e : events) {
      seq.items.push_back(std::move(e.second));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

DatasetSplit leave_one_out(const std::vector<UserSequence>& sequences) {
  DatasetSplit split;
  split.users.reserve(sequences.size());
  for (const auto& seq : sequences) {
    const std::size_t n = seq.items.size();
    if (n < 3) {
      fail(ErrorKind::Argument, "leave_one_out: user " + seq.user_id + " has " +
                                    std::to_string(n) + " interactions, need at least 3");
    }
    UserSplit u;
    u.user_id = seq.user_id;
    u.train.assign(seq.items.begin(), seq.items.end() - 2);
    u.validation = seq.items[n - 2];
    u.test = seq.items[n - 1];
    split.users.push_back(std::move(u));
  }
  return split;
}

void write_split(const std::filesystem::path& path, const DatasetSplit& split) {
  std::ofstream out = open_for_write(path);
  for (const auto& u : split.users) {
    out << u.user_id << '\t';
    for (std::size_t i = 0; i < u.train.size(); ++i) {
      out << (i ? " " : "") << u.train[i];
    }
    out << '\t' << u.validation << '\t' << u.test << '\n';
  }
  if (!out) {
    fail(ErrorKind::Io, "write failed: " + path.string());
  }
}

DatasetSplit read_split(const std::filesystem::path& path) {
  std::ifstream in = open_for_read(path);
  DatasetSplit split;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) {
      continue;
    }
    const auto fields = split_tabs(line);
    if (fields.size() != 4 || fields[0].empty() || fields[2].empty() || fields[3].empty()) {
      fail(ErrorKind::Parse, path.string() + ":" + std::to_string(line_no) +
                                 ": expected user, train items, validation, test");
    }
    UserSplit u;
    u.user_id = std::string(fields[0]);
    std::istringstream items{std::string(fields[1])};
    for (std::string id; items >> id;) {
      u.train.push_back(id);
    }
    u.validation = std::string(fields[2]);
    u.test = std::string(fields[3]);
    split.users.push_back(std::move(u));
  }
  return split;
}

std::vector<std::string> sample_candidates_for(const UserSplit& user, const std::string& truth,
                                               const Catalog& catalog, std::size_t n,
                                               std::uint64_t seed) {
  const auto history = user.history();
  std::vector<std::string> eligible;
  for (const auto& id : catalog.sorted_ids()) {
    if (!history.contains(id) && id != truth) {
      eligible.push_back(id);
    }
  }
  if (eligible.size() < n) {
    fail(ErrorKind::Argument, "sample_candidates: user " + user.user_id + " has " +
                                  std::to_string(eligible.size()) + " eligible negatives, " +
                                  std::to_string(n) + " requested (short by " +
                                  std::to_string(n - eligible.size()) + ")");
  }
  Rng rng(mix_seed(seed, user.user_id));
  // Partial Fisher-Yates over the sorted eligible list.
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + uniform_index(rng, eligible.size() - i);
    std::swap(eligible[i], eligible[j]);
  }
  eligible.resize(n);
  eligible.push_back(truth);
  return eligible;
}

std::vector<std::string> sample_candidates(const UserSplit& user, const Catalog& catalog,
                                           std::size_t n, std::uint64_t seed) {
  return sample_candidates_for(user, user.test, catalog, n, seed);
}

std::unordered_map<std::string, std::size_t> item_counts(
    const std::vector<InteractionRecord>& records) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& r : records) {
    ++counts[r.item_id];
  }
  return counts;
}

std::map<std::string, int> popularity_groups(const std::vector<InteractionRecord>& records,
                                             int g) {
  if (g < 1) {
    fail(ErrorKind::Argument, "popularity_groups: g must be >= 1");
  }
  const auto counts = item_counts(records);
  std::vector<std::pair<std::size_t, std::string>> order;
  order.reserve(counts.size());
  for (const auto& [id, c] : counts) {
    order.emplace_back(c, id);
  }
  std::sort(order.begin(), order.end());
  const std::size_t n = order.size();
  const std::size_t groups = static_cast<std::size_t>(g);
  const std::size_t base = n / groups;
  const std::size_t extra = n % groups;
  std::map<std::string, int> out;
  std::size_t pos = 0;
  for (std::size_t j = 0; j < groups; ++j) {
    const std::size_t size = base + (j < extra ? 1 : 0);
    for (std::size_t t = 0; t < size; ++t, ++pos) {
      out[order[pos].second] = static_cast<int>(j + 1);
    }
  }
  return out;
}

}  // namespace ilr
