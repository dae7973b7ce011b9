#pragma once

// Interaction logs, item metadata, k-core filtering, leave-one-out splits and
// evaluation candidate sampling.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace ilr {

struct InteractionRecord {
  std::string user_id;
  std::string item_id;
  std::int64_t timestamp = 0;

  bool operator==(const InteractionRecord&) const = default;
};

struct UserSequence {
  std::string user_id;
  std::vector<std::string> items;  // chronological
};

struct ItemRecord {
  std::string item_id;
  std::string title;
  std::string brand;
  std::string category;
  std::string description;
  std::string image_ref;
  bool has_image = false;
};

// Item metadata with an id index. Row order is the order items were added.
class Catalog {
 public:
  Catalog() = default;
  explicit Catalog(std::vector<ItemRecord> items);

  void add(ItemRecord item);
  const ItemRecord& at(const std::string& item_id) const;
  const ItemRecord* find(const std::string& item_id) const;
  bool contains(const std::string& item_id) const { return index_.contains(item_id); }
  const std::vector<ItemRecord>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }

  // Item ids in ascending order.
  std::vector<std::string> sorted_ids() const;

 private:
  std::vector<ItemRecord> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct UserSplit {
  std::string user_id;
  std::vector<std::string> train;
  std::string validation;
  std::string test;

  // train + validation + test as a set.
  std::unordered_set<std::string> history() const;
};

struct DatasetSplit {
  std::vector<UserSplit> users;  // same order as the input sequences

  const UserSplit& user(const std::string& user_id) const;
};

// Tab-separated `user_id<TAB>item_id<TAB>timestamp` lines. Blank lines are
// skipped; a line with any other shape raises a parse error naming it.
std::vector<InteractionRecord> ingest_interactions(const std::filesystem::path& path);
void write_interactions(const std::filesystem::path& path,
                        const std::vector<InteractionRecord>& records);

// Tab-separated item metadata: item_id, title, brand, category, description,
// image_ref. has_image is true iff image_ref is nonempty.
Catalog ingest_items(const std::filesystem::path& path);
void write_items(const std::filesystem::path& path, const Catalog& catalog);

// Largest subset in which every user and every item has at least k
// interactions; removal is iterated to a fixpoint. Input order is preserved.
std::vector<InteractionRecord> k_core_filter(const std::vector<InteractionRecord>& records,
                                             std::size_t k);

// One sequence per user, ordered by (timestamp, item_id). Exact duplicate
// triples are dropped. Users come out in ascending user_id order.
std::vector<UserSequence> build_sequences(const std::vector<InteractionRecord>& records);

// Last item is the test target, the one before it validation, the rest train.
DatasetSplit leave_one_out(const std::vector<UserSequence>& sequences);

// One line per user: user_id<TAB>train items (space separated)<TAB>validation<TAB>test.
void write_split(const std::filesystem::path& path, const DatasetSplit& split);
DatasetSplit read_split(const std::filesystem::path& path);

// n distinct negatives drawn uniformly from items the user never touched,
// followed by the test item. Deterministic per (user, seed).
std::vector<std::string> sample_candidates(const UserSplit& user, const Catalog& catalog,
                                           std::size_t n, std::uint64_t seed);

// Same as sample_candidates but with an arbitrary ground-truth item.
std::vector<std::string> sample_candidates_for(const UserSplit& user, const std::string& truth,
                                               const Catalog& catalog, std::size_t n,
                                               std::uint64_t seed);

// Items sorted ascending by interaction count (ties by item_id) and cut into
// g contiguous groups numbered 1..g whose sizes differ by at most one.
std::map<std::string, int> popularity_groups(const std::vector<InteractionRecord>& records,
                                             int g);

// Interaction counts per item.
std::unordered_map<std::string, std::size_t> item_counts(
    const std::vector<InteractionRecord>& records);

}  // namespace ilr
