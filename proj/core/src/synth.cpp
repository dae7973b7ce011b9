#include "ilr/synth.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <string_view>
#include <unordered_map>

#include "ilr/error.hpp"
#include "ilr/random.hpp"
#include "ilr/vocab.hpp"

namespace ilr {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Descriptive words, one pool per (latent dimension, sign).
constexpr std::array<std::array<std::string_view, 6>, 16> kTraitWords{{
    {"bright", "vivid", "colorful", "radiant", "sunny", "glossy"},
    {"dark", "muted", "matte", "shadowed", "charcoal", "dim"},
    {"large", "spacious", "oversized", "roomy", "wide", "bulky"},
    {"compact", "small", "slim", "pocket", "mini", "narrow"},
    {"rugged", "durable", "tough", "sturdy", "heavy", "solid"},
    {"delicate", "light", "airy", "soft", "gentle", "fine"},
    {"modern", "sleek", "digital", "smart", "futuristic", "techy"},
    {"classic", "vintage", "retro", "antique", "traditional", "rustic"},
    {"sporty", "athletic", "active", "fast", "dynamic", "energetic"},
    {"relaxed", "calm", "cozy", "lounge", "leisurely", "quiet"},
    {"premium", "luxury", "elegant", "refined", "deluxe", "polished"},
    {"budget", "basic", "simple", "plain", "practical", "economical"},
    {"natural", "organic", "wooden", "green", "earthy", "bamboo"},
    {"synthetic", "plastic", "metallic", "chrome", "nylon", "steel"},
    {"playful", "fun", "quirky", "whimsical", "cheerful", "cute"},
    {"serious", "formal", "professional", "minimal", "strict", "sober"},
}};

constexpr std::array<std::string_view, 40> kFillerWords{
    "this",    "product", "is",      "designed", "for",    "with",     "and",    "the",
    "a",       "of",      "to",      "in",       "features", "made",   "offers", "great",
    "perfect", "everyday", "use",    "item",     "quality", "comes",   "your",   "it",
    "on",      "that",    "provides", "includes", "built",  "ideal",   "users",  "who",
    "want",    "style",   "comfort", "easy",     "set",    "design",   "from",   "every"};

constexpr std::array<std::string_view, 24> kBrands{
    "WOLT",   "Arvena", "Brisko", "Calder", "Dunmore", "Elvix",  "Fenwold", "Gravik",
    "Hollis", "Izora",  "Juniper", "Kestrel", "Lumio",  "Marwen", "Nordby",  "Orrin",
    "Pellam", "Quarto", "Rinske", "Solvik", "Tamber", "Ulmo",    "Veyra",   "Wrenly"};

struct CategoryDef {
  std::array<std::string_view, 4> levels;  // last level may hold two words
  std::string_view noun;
};

constexpr std::array<CategoryDef, 8> kCategories{{
    {{"Sports", "Outdoor", "Camping", "Hiking Tents"}, "tent"},
    {{"Home", "Kitchen", "Cookware", "Cast Pans"}, "pan"},
    {{"Electronics", "Audio", "Headphones", "Wireless Earbuds"}, "earbuds"},
    {{"Arts", "Crafts", "Painting", "Acrylic Paints"}, "paints"},
    {{"Grocery", "Snacks", "Chips", "Kettle Chips"}, "chips"},
    {{"Clothing", "Men", "Outerwear", "Rain Jackets"}, "jacket"},
    {{"Toys", "Games", "Puzzles", "Jigsaw Puzzles"}, "puzzle"},
    {{"Office", "Supplies", "Writing", "Gel Pens"}, "pens"},
}};

std::string padded_id(char prefix, std::size_t i, std::size_t n) {
  const std::size_t width = std::to_string(std::max<std::size_t>(n, 1)).size();
  std::string num = std::to_string(i + 1);
  return std::string(1, prefix) + std::string(width - std::min(width, num.size()), '0') + num;
}

MatrixXd gaussian_matrix(std::size_t rows, std::size_t cols, double scale, Rng& rng) {
  MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = scale * normal01(rng);
    }
  }
  return m;
}

VectorXd gaussian_vector(std::size_t n, double scale, Rng& rng) {
  VectorXd v(n);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v(i) = scale * normal01(rng);
  }
  return v;
}

std::vector<float> unit_row(const VectorXd& v) {
  const double norm = v.norm();
  std::vector<float> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out[static_cast<std::size_t>(i)] = static_cast<float>(norm > 0 ? v(i) / norm : 0.0);
  }
  return out;
}

std::size_t poisson(double lambda, Rng& rng) {
  if (lambda <= 0) {
    return 0;
  }
  const double limit = std::exp(-lambda);
  std::size_t k = 0;
  double p = uniform01(rng);
  while (p > limit) {
    ++k;
    p *= uniform01(rng);
  }
  return k;
}

std::string_view trait_word(const VectorXd& z, std::size_t dim, Rng& rng) {
  const std::size_t pool = 2 * (dim % 8) + (z(static_cast<Eigen::Index>(dim)) >= 0 ? 0 : 1);
  return kTraitWords[pool][uniform_index(rng, kTraitWords[pool].size())];
}

// Latent dimension drawn with probability proportional to |z_d|.
std::size_t weighted_dim(const VectorXd& z, Rng& rng) {
  const double total = z.cwiseAbs().sum();
  double u = uniform01(rng) * total;
  for (Eigen::Index d = 0; d < z.size(); ++d) {
    u -= std::abs(z(d));
    if (u <= 0) {
      return static_cast<std::size_t>(d);
    }
  }
  return static_cast<std::size_t>(z.size() - 1);
}

std::string make_description(const VectorXd& z, std::size_t target_tokens, Rng& rng) {
  // Exactly target_tokens word-level tokens: words plus sentence periods.
  std::string out;
  std::size_t emitted = 0;
  std::size_t sentence = 0;
  std::size_t sentence_len = 8 + uniform_index(rng, 7);
  bool capitalize = true;
  while (emitted < target_tokens) {
    const bool last = emitted + 1 == target_tokens;
    if (last || sentence == sentence_len) {
      out += ".";
      ++emitted;
      sentence = 0;
      sentence_len = 8 + uniform_index(rng, 7);
      capitalize = true;
      continue;
    }
    std::string word(uniform01(rng) < 0.5 ? trait_word(z, weighted_dim(z, rng), rng)
                                          : kFillerWords[uniform_index(rng, kFillerWords.size())]);
    if (capitalize) {
      word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
      capitalize = false;
    }
    if (!out.empty()) {
      out += ' ';
    }
    out += word;
    ++emitted;
    ++sentence;
  }
  return out;
}

std::string make_category(const CategoryDef& def, std::size_t attribute_tokens) {
  // Brand and the separating comma take two of the attribute tokens; each
  // category level adds a word and a '>' except the last, which holds two
  // words.
  const std::size_t budget = attribute_tokens > 2 ? attribute_tokens - 2 : 1;
  const std::size_t levels = std::clamp<std::size_t>(budget / 2, 1, def.levels.size());
  std::string out;
  for (std::size_t i = 0; i < levels; ++i) {
    if (i > 0) {
      out += " > ";
    }
    out += def.levels[def.levels.size() - levels + i];
  }
  return out;
}

// Deterministic pseudo-embedding of a word for the text-feature stub.
VectorXd word_vector(std::string_view word, std::size_t dim, std::uint64_t seed) {
  Rng rng(mix_seed(seed, word));
  return gaussian_vector(dim, 1.0, rng);
}

}  // namespace

void SyntheticSpec::validate() const {
  if (n_users == 0 || n_items == 0 || latent_dim == 0 || description_tokens == 0 ||
      attribute_tokens == 0 || visual_dim == 0 || cf_dim == 0 || text_dim == 0) {
    fail(ErrorKind::Config, "synthetic spec: counts and dims must be positive");
  }
  if (!(noise >= 0) || !(mean_sequence_length > 0)) {
    fail(ErrorKind::Config, "synthetic spec: noise must be >= 0 and mean length > 0");
  }
  if (missing_image_fraction < 0 || missing_image_fraction > 1) {
    fail(ErrorKind::Config, "synthetic spec: missing_image_fraction must be in [0, 1]");
  }
}

SyntheticData synth_generate(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t L = spec.latent_dim;
  const std::size_t nI = spec.n_items;
  Rng rng(mix_seed(spec.seed, "synth"));

  // Item latents and popularity.
  std::vector<VectorXd> z(nI);
  VectorXd popularity(nI);
  for (std::size_t i = 0; i < nI; ++i) {
    z[i] = gaussian_vector(L, 1.0, rng);
    popularity(static_cast<Eigen::Index>(i)) = normal01(rng);
  }
  const MatrixXd cat_dirs = gaussian_matrix(kCategories.size(), L, 1.0, rng);
  const MatrixXd brand_dirs = gaussian_matrix(kBrands.size(), L, 1.0, rng);

  SyntheticData data;
  std::vector<std::size_t> item_category(nI);
  std::vector<std::size_t> missing_order(nI);
  std::iota(missing_order.begin(), missing_order.end(), 0);
  {
    Rng mrng(mix_seed(spec.seed, "missing-images"));
    shuffle(missing_order, mrng);
  }
  const auto n_missing =
      static_cast<std::size_t>(std::floor(spec.missing_image_fraction * static_cast<double>(nI)));
  std::vector<bool> has_image(nI, true);
  for (std::size_t k = 0; k < n_missing; ++k) {
    has_image[missing_order[k]] = false;
  }

  for (std::size_t i = 0; i < nI; ++i) {
    Eigen::Index c = 0;
    (cat_dirs * z[i]).maxCoeff(&c);
    item_category[i] = static_cast<std::size_t>(c);
    VectorXd brand_scores = brand_dirs * z[i] + gaussian_vector(kBrands.size(), 0.5, rng);
    Eigen::Index b = 0;
    brand_scores.maxCoeff(&b);

    // Title: the two strongest traits plus the category noun.
    std::vector<std::size_t> dims(L);
    std::iota(dims.begin(), dims.end(), 0);
    std::sort(dims.begin(), dims.end(), [&](std::size_t a, std::size_t d) {
      return std::abs(z[i](static_cast<Eigen::Index>(a))) >
             std::abs(z[i](static_cast<Eigen::Index>(d)));
    });
    std::string title(trait_word(z[i], dims[0], rng));
    title[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(title[0])));
    title += " ";
    title += trait_word(z[i], dims[std::min<std::size_t>(1, L - 1)], rng);
    title += " ";
    title += kCategories[item_category[i]].noun;

    ItemRecord item;
    item.item_id = padded_id('i', i, nI);
    item.title = std::move(title);
    item.brand = std::string(kBrands[static_cast<std::size_t>(b)]);
    item.category = make_category(kCategories[item_category[i]], spec.attribute_tokens);
    const auto jitter = static_cast<long>(uniform_index(rng, 9)) - 4;
    const auto desc_len = static_cast<std::size_t>(
        std::max<long>(1, static_cast<long>(spec.description_tokens) + jitter));
    item.description = make_description(z[i], desc_len, rng);
    item.has_image = has_image[i];
    item.image_ref = has_image[i] ? "images/" + item.item_id + ".jpg" : std::string();
    data.catalog.add(std::move(item));
  }

  // Interaction sequences.
  for (std::size_t u = 0; u < spec.n_users; ++u) {
    const std::string user_id = padded_id('u', u, spec.n_users);
    VectorXd pref = gaussian_vector(L, 1.0, rng);
    pref /= std::max(pref.norm(), 1e-12);
    std::size_t len = spec.mean_sequence_length >= 5.0
                          ? 5 + poisson(spec.mean_sequence_length - 5.0, rng)
                          : 1 + poisson(spec.mean_sequence_length - 1.0, rng);
    len = std::min(len, spec.max_sequence_length);
    std::int64_t t = 1'000'000'000 + static_cast<std::int64_t>(uniform_index(rng, 100'000'000));
    std::vector<bool> used(nI, false);
    std::size_t used_count = 0;
    std::optional<std::size_t> prev;
    std::vector<double> logits(nI);
    for (std::size_t step = 0; step < len; ++step) {
      const bool allow_repeat = used_count == nI;
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < nI; ++i) {
        if (used[i] && !allow_repeat) {
          logits[i] = -std::numeric_limits<double>::infinity();
          continue;
        }
        double l = spec.preference_strength * pref.dot(z[i]) +
                   spec.popularity_strength * popularity(static_cast<Eigen::Index>(i));
        if (prev && item_category[*prev] == item_category[i]) {
          l += spec.category_drift;
        }
        logits[i] = l;
        best = std::max(best, l);
      }
      double total = 0;
      for (auto& l : logits) {
        l = std::exp(l - best);
        total += l;
      }
      double draw = uniform01(rng) * total;
      std::size_t chosen = nI - 1;
      for (std::size_t i = 0; i < nI; ++i) {
        draw -= logits[i];
        if (draw <= 0 && logits[i] > 0) {
          chosen = i;
          break;
        }
      }
      if (!used[chosen]) {
        used[chosen] = true;
        ++used_count;
      }
      prev = chosen;
      t += 1 + static_cast<std::int64_t>(uniform_index(rng, 86'400));
      data.records.push_back({user_id, data.catalog.items()[chosen].item_id, t});
    }
  }

  // Popularity quantile from realized counts (0 = rarest, 1 = most popular).
  std::vector<std::size_t> counts(nI, 0);
  {
    std::unordered_map<std::string, std::size_t> row_of;
    for (std::size_t i = 0; i < nI; ++i) {
      row_of.emplace(data.catalog.items()[i].item_id, i);
    }
    for (const auto& r : data.records) {
      ++counts[row_of.at(r.item_id)];
    }
  }
  std::vector<std::size_t> by_count(nI);
  std::iota(by_count.begin(), by_count.end(), 0);
  std::stable_sort(by_count.begin(), by_count.end(),
                   [&](std::size_t a, std::size_t b) { return counts[a] < counts[b]; });
  std::vector<double> quantile(nI, 1.0);
  for (std::size_t r = 0; r < nI; ++r) {
    quantile[by_count[r]] = nI > 1 ? static_cast<double>(r) / static_cast<double>(nI - 1) : 1.0;
  }

  // Feature views.
  Rng frng(mix_seed(spec.seed, "features"));
  const double map_scale = 1.0 / std::sqrt(static_cast<double>(L));
  const MatrixXd a_img = gaussian_matrix(spec.visual_dim, L, map_scale, frng);
  const MatrixXd a_other = gaussian_matrix(spec.visual_dim, L, map_scale, frng);
  const double rho = spec.joint_correlation;
  const MatrixXd a_txt = rho * a_img + std::sqrt(std::max(0.0, 1.0 - rho * rho)) * a_other;
  const MatrixXd a_cf = gaussian_matrix(spec.cf_dim, L + 1, map_scale, frng);

  double pop_mean = popularity.mean();
  double pop_sd = std::sqrt((popularity.array() - pop_mean).square().mean());
  if (pop_sd <= 0) {
    pop_sd = 1.0;
  }

  FeatureMatrix img(FeatureType::Img, spec.visual_dim);
  FeatureMatrix joint(FeatureType::JointText, spec.visual_dim);
  FeatureMatrix cf(FeatureType::CF, spec.cf_dim);
  FeatureMatrix text(FeatureType::Text, spec.text_dim);

  std::vector<VectorXd> text_raw(nI);
  VectorXd text_mean = VectorXd::Zero(static_cast<Eigen::Index>(spec.text_dim));
  for (std::size_t i = 0; i < nI; ++i) {
    VectorXd acc = VectorXd::Zero(static_cast<Eigen::Index>(spec.text_dim));
    for (const auto& w : split_words(data.catalog.items()[i].description)) {
      // Stop words and punctuation carry no item signal.
      if (w.size() < 2 ||
          std::find(kFillerWords.begin(), kFillerWords.end(), w) != kFillerWords.end()) {
        continue;
      }
      acc += word_vector(w, spec.text_dim, spec.seed);
    }
    text_raw[i] = acc;
    text_mean += acc;
  }
  text_mean /= static_cast<double>(nI);

  for (std::size_t i = 0; i < nI; ++i) {
    const std::string& id = data.catalog.items()[i].item_id;
    const VectorXd v_img = a_img * z[i] + gaussian_vector(spec.visual_dim, spec.noise, frng);
    const VectorXd v_txt = a_txt * z[i] + gaussian_vector(spec.visual_dim, spec.noise, frng);
    VectorXd zc(static_cast<Eigen::Index>(L + 1));
    zc.head(static_cast<Eigen::Index>(L)) = z[i];
    zc(static_cast<Eigen::Index>(L)) =
        2.0 * (popularity(static_cast<Eigen::Index>(i)) - pop_mean) / pop_sd;
    const double cf_noise = spec.noise + spec.cf_cold_noise * (1.0 - quantile[i]);
    const VectorXd v_cf = a_cf * zc + gaussian_vector(spec.cf_dim, cf_noise, frng);
    if (has_image[i]) {
      img.add_row(id, unit_row(v_img));
    }
    joint.add_row(id, unit_row(v_txt));
    cf.add_row(id, unit_row(v_cf));
    text.add_row(id, unit_row(text_raw[i] - text_mean));
  }
  data.features.set(std::move(img));
  data.features.set(std::move(joint));
  data.features.set(std::move(cf));
  data.features.set(std::move(text));
  return data;
}

}  // namespace ilr
