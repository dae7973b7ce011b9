#include "ilr/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "ilr/error.hpp"
#include "ilr/random.hpp"

namespace ilr {

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys{
      {"data_dir", "data", "interactions.tsv, items.tsv and the prepared split"},
      {"features_dir", "features", "directory of <type>.ilrf feature files"},
      {"checkpoint", "model.ckpt", "checkpoint path"},
      {"reports_dir", "reports", "report output directory"},
      {"seed", "7", "synthetic data seed"},
      {"train_seed", "1", "seed for initialisation, batching and sampled negatives"},
      {"synth.n_users", "400", "synthetic users"},
      {"synth.n_items", "150", "synthetic items"},
      {"synth.latent_dim", "8", "synthetic latent dimension"},
      {"synth.noise", "0.1", "synthetic feature noise"},
      {"synth.mean_length", "12", "mean synthetic sequence length"},
      {"synth.missing_images", "0", "fraction of items without an image"},
      {"kcore", "5", "k-core threshold used by prepare"},
      {"vocab_size", "4096", "vocabulary cap including reserved tokens"},
      {"mode", "image", "item representation: image, attribute, description, image+description"},
      {"types", "img", "active retrieval types, comma separated: img, cf, text"},
      {"lr", "0.001", "learning rate"},
      {"batch_size", "32", "users per step"},
      {"epochs", "5", "training epochs"},
      {"patience", "3", "early-stopping patience in epochs"},
      {"trainable", "true", "train the backbone"},
      {"two_stage", "false", "alignment first, then retrieval with the adaptor frozen"},
      {"lm_pretrain_epochs", "0", "language-model epochs before the main phase"},
      {"reri_target", "last", "retrieval positive: last training item or random position"},
      {"fallback", "false", "use joint-text rows for items without images"},
      {"d_model", "32", "backbone width"},
      {"n_layers", "2", "backbone layers"},
      {"n_heads", "2", "attention heads"},
      {"ffn_dim", "64", "feed-forward width"},
      {"max_context", "4096", "positional table size"},
      {"adaptor_hidden", "512", "adaptor hidden width"},
      {"shared_dim", "64", "shared retrieval space dimension"},
      {"context_budget", "0", "prompt token budget, 0 = unlimited"},
      {"n_negatives", "100", "sampled negatives per evaluated user"},
      {"ks", "5,10", "cutoffs for Hit and NDCG"},
      {"eval_seed", "0", "candidate sampling seed"},
      {"item_groups", "5", "popularity groups for the group report"},
      {"length_groups", "5,10,20", "lower bounds of the |S_u| groups"},
      {"budgets", "4096,2048,1024,512,256", "context budgets for the sweep (0 = unlimited)"},
      {"bench_modes", "image,attribute,description", "modes for token and timing benches"},
      {"group_size", "100", "users timed per length group"},
  };
  return keys;
}

RunConfig::RunConfig() {
  for (const auto& k : config_keys()) {
    values_[k.name] = k.default_value;
  }
}

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::Config, origin + ":" + std::to_string(lineno) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    try {
      c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      fail(ErrorKind::Config, origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return c;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    fail(ErrorKind::Config, "cannot open config " + path.string());
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!values_.contains(key)) {
    fail(ErrorKind::Config, "unknown config key '" + key + "'");
  }
  values_[key] = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    fail(ErrorKind::Config, "unknown config key '" + key + "'");
  }
  return it->second;
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  const auto& v = get(key);
  try {
    std::size_t used = 0;
    const auto x = std::stoull(v, &used);
    if (used == v.size() && v[0] != '-') {
      return x;
    }
  } catch (const std::exception&) {
  }
  fail(ErrorKind::Config, "config '" + key + "' must be a non-negative integer, got '" + v + "'");
}

std::size_t RunConfig::get_size(const std::string& key) const {
  return static_cast<std::size_t>(get_u64(key));
}

double RunConfig::get_double(const std::string& key) const {
  const auto& v = get(key);
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size()) {
      return x;
    }
  } catch (const std::exception&) {
  }
  fail(ErrorKind::Config, "config '" + key + "' must be a number, got '" + v + "'");
}

bool RunConfig::get_bool(const std::string& key) const {
  const auto& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(ErrorKind::Config, "config '" + key + "' must be true or false, got '" + v + "'");
}

std::vector<std::string> RunConfig::get_list(const std::string& key) const {
  std::vector<std::string> out;
  std::stringstream ss(get(key));
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) {
      out.push_back(item);
    }
  }
  return out;
}

std::vector<std::size_t> RunConfig::get_size_list(const std::string& key) const {
  std::vector<std::size_t> out;
  for (const auto& s : get_list(key)) {
    try {
      std::size_t used = 0;
      const auto x = std::stoull(s, &used);
      if (used != s.size()) {
        throw std::invalid_argument(s);
      }
      out.push_back(static_cast<std::size_t>(x));
    } catch (const std::exception&) {
      fail(ErrorKind::Config, "config '" + key + "' has a non-integer entry '" + s + "'");
    }
  }
  return out;
}

std::string RunConfig::serialize() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    out += k + "=" + v + "\n";
  }
  return out;
}

std::string RunConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(serialize())));
  return buf;
}

}  // namespace ilr
