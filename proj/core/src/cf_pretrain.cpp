#include "ilr/cf_pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "ilr/error.hpp"
#include "ilr/random.hpp"

namespace ilr {

namespace {

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

}  // namespace

FeatureMatrix cf_pretrain_cooccurrence(const std::vector<InteractionRecord>& records,
                                       const CfPretrainOptions& options) {
  if (records.empty()) {
    fail(ErrorKind::Argument, "cf_pretrain_cooccurrence: no interactions");
  }
  if (options.dim == 0) {
    fail(ErrorKind::Argument, "cf_pretrain_cooccurrence: dim must be positive");
  }
  std::map<std::string, std::size_t> index;
  for (const auto& r : records) {
    index.emplace(r.item_id, 0);
  }
  std::vector<std::string> ids;
  for (auto& [id, row] : index) {
    row = ids.size();
    ids.push_back(id);
  }
  const std::size_t n = ids.size();
  const std::size_t dim = options.dim;

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<std::set<std::size_t>> neighbours(n);
  for (const auto& seq : build_sequences(records)) {
    for (std::size_t t = 1; t < seq.items.size(); ++t) {
      const std::size_t a = index.at(seq.items[t - 1]);
      const std::size_t b = index.at(seq.items[t]);
      if (a == b) {
        continue;
      }
      pairs.emplace_back(a, b);
      neighbours[a].insert(b);
      neighbours[b].insert(a);
    }
  }

  Rng rng(mix_seed(options.seed, "cf-pretrain"));
  std::vector<double> emb(n * dim);
  for (auto& v : emb) {
    v = uniform(rng, -options.init_scale, options.init_scale);
  }

  auto row = [&](std::size_t i) { return emb.data() + i * dim; };
  auto dot = [&](std::size_t a, std::size_t b) {
    double s = 0;
    for (std::size_t k = 0; k < dim; ++k) {
      s += row(a)[k] * row(b)[k];
    }
    return s;
  };
  // One logistic SGD step on the pair (a, b) with label y.
  std::vector<double> ga(dim);
  auto step = [&](std::size_t a, std::size_t b, double y) {
    const double g = options.learning_rate * (y - sigmoid(dot(a, b)));
    for (std::size_t k = 0; k < dim; ++k) {
      ga[k] = g * row(b)[k];
      row(b)[k] += g * row(a)[k];
    }
    for (std::size_t k = 0; k < dim; ++k) {
      row(a)[k] += ga[k];
    }
  };

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    shuffle(pairs, rng);
    for (const auto& [a, b] : pairs) {
      step(a, b, 1.0);
      // Negative: uniform over items that are neither a nor adjacent to a.
      if (neighbours[a].size() + 1 < n) {
        std::size_t c = uniform_index(rng, n);
        while (c == a || neighbours[a].contains(c)) {
          c = uniform_index(rng, n);
        }
        step(a, c, 0.0);
      }
    }
  }

  FeatureMatrix out(FeatureType::CF, dim);
  std::vector<float> r(dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < dim; ++k) {
      r[k] = static_cast<float>(row(i)[k]);
    }
    out.add_row(ids[i], r);
  }
  return out;
}

}  // namespace ilr
