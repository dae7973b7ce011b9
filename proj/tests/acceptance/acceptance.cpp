// Acceptance checks A1..A11. Prints one "A<n> PASS|FAIL <detail>" line per
// criterion and exits nonzero if any fails. Arguments select a subset
// ("A5 A10"); no arguments runs everything.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../oracles.hpp"
#include "commands.hpp"
#include "ilr/backbone.hpp"
#include "ilr/bench.hpp"
#include "ilr/error.hpp"
#include "ilr/evaluation.hpp"
#include "ilr/metrics.hpp"
#include "ilr/reri.hpp"
#include "ilr/risa.hpp"
#include "ilr/synth.hpp"
#include "ilr/training.hpp"

namespace fs = std::filesystem;
using namespace ilr;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const std::vector<FeatureType> kImg{FeatureType::Img};
const std::vector<FeatureType> kCF{FeatureType::CF};
const std::vector<FeatureType> kImgCF{FeatureType::Img, FeatureType::CF};
const std::vector<FeatureType> kAll{FeatureType::Img, FeatureType::CF, FeatureType::Text};

// The default synthetic world after the 5-core filter and leave-one-out.
struct World {
  SyntheticData data;
  DatasetSplit split;
  Vocabulary vocab;

  ModelContext context(bool fallback = false) const {
    return {&vocab, &data.catalog, &data.features, fallback};
  }
};

World make_world(const SyntheticSpec& spec) {
  World w;
  w.data = synth_generate(spec);
  w.split = leave_one_out(build_sequences(k_core_filter(w.data.records, 5)));
  w.vocab = build_model_vocab(w.data.catalog);
  return w;
}

const World& default_world() {
  static const World w = make_world(SyntheticSpec{});
  return w;
}

const World& half_missing_world() {
  static const World w = [] {
    SyntheticSpec spec;
    spec.missing_image_fraction = 0.5;
    return make_world(spec);
  }();
  return w;
}

EvalOptions test_options() { return EvalOptions{}; }

// Recorded end-to-end recipe: train_seed 1, lr 0.001, batch 32, no early
// stop inside the run; the best-validation parameters are evaluated on test.
struct Run {
  TrainResult result;
  ModelConfig model;
  double hit5 = 0;
  double seconds = 0;
};

Run train_run(const World& w, const std::vector<FeatureType>& types, Mode mode, bool frozen,
              std::size_t epochs, bool fallback = false) {
  TrainConfig tc;
  tc.types = types;
  tc.mode = mode;
  tc.epochs = epochs;
  tc.patience = epochs;
  tc.fallback = fallback;
  Run r;
  r.model = make_model_config(ModelConfig{}, w.vocab, w.data.features, types, mode, fallback);
  r.model.backbone.trainable = !frozen;
  const auto ctx = w.context(fallback);
  const auto t0 = std::chrono::steady_clock::now();
  r.result = train(ctx, w.split, r.model, tc);
  r.seconds = seconds_since(t0);
  r.hit5 = evaluate(w.split, w.data.catalog, model_scorer(r.result.best, ctx, mode, types),
                    test_options())
               .report.hit.at(5);
  return r;
}

const Run& cached_run(const std::string& key, const std::function<Run()>& make) {
  static std::map<std::string, Run> runs;
  auto it = runs.find(key);
  if (it == runs.end()) it = runs.emplace(key, make()).first;
  return it->second;
}

const Run& image_run(const std::vector<FeatureType>& types, const std::string& name) {
  return cached_run("frozen-image-" + name,
                    [&] { return train_run(default_world(), types, Mode::Image, true, 5); });
}

// A1 -------------------------------------------------------------------------

Outcome a1() {
  const auto& w = default_world();
  const auto ctx = w.context();
  const auto cfg = make_model_config(ModelConfig{}, w.vocab, w.data.features, kAll, Mode::Image,
                                     false);
  const auto layout = std::make_shared<ParamLayout>(cfg);
  auto p = init_params<double>(layout, 1);
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    if (layout->specs()[i].group == ParamGroup::Projector) p[i].setZero();
  }
  const auto& u = w.split.users[0];
  const std::vector<std::string> prefix(u.train.begin(), u.train.end() - 1);
  const auto terms = reri_loss(p, ctx, prefix, u.train.back(), u.test, kAll);
  double worst = 0;
  for (double l : terms.loss) worst = std::max(worst, std::abs(l - 2 * std::log(2.0)));

  auto q = init_params<double>(layout, 2);
  q[layout->tok_emb].setZero();
  Rng rng(3);
  const auto plan = oracle::random_plan(rng, w.vocab.size(), w.data.catalog.sorted_ids(), 60);
  std::vector<bool> mask(plan.size(), true);
  mask[0] = false;
  const auto out = forward(q, assemble_input_embeddings<double>(plan, q, w.data.features, false).x);
  const double nll = lm_nll(out, plan.tokens, mask);
  const double lnv = std::log(static_cast<double>(w.vocab.size()));
  const bool pass = worst < 1e-6 && std::abs(nll - lnv) < 1e-6;
  return {pass, fmt("reri at zero scores: max |L - 2ln2| = %.2e over 3 types; lm_nll %.9f vs "
                    "ln V %.9f",
                    worst, nll, lnv)};
}

// A2 -------------------------------------------------------------------------

Outcome a2() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& w = default_world();
  const auto ctx = w.context();
  ModelConfig base;
  base.backbone.d_model = 16;
  base.backbone.n_layers = 1;
  const auto cfg = make_model_config(base, w.vocab, w.data.features, kAll, Mode::Image, false);
  const auto layout = std::make_shared<ParamLayout>(cfg);
  const auto p = init_params<double>(layout, 21);
  Rng rng(4);
  const auto& u = w.split.users[0];
  const auto ex = make_risa_example(ctx, u, rng);
  const std::vector<std::string> prefix(u.train.begin(), u.train.end() - 1);
  const std::string neg = sample_negative(u.history(), w.data.catalog, rng);
  LossClosure<double> loss = [&](const ParamSet<double>& q, ParamSet<double>* g) {
    return risa_example_loss(q, ctx, ex, g) +
           reri_loss(q, ctx, prefix, u.train.back(), neg, kAll, Mode::Image, kUnlimitedBudget, g)
               .total();
  };
  bool pass = true;
  std::string detail;
  for (auto g : {ParamGroup::Adaptor, ParamGroup::Projector, ParamGroup::RecToken,
                 ParamGroup::Backbone}) {
    const auto samples =
        oracle::finite_difference_check(p, loss, g, 20, 100 + static_cast<int>(g));
    double worst = 0;
    for (const auto& s : samples) worst = std::max(worst, s.rel);
    pass = pass && samples.size() == 20 && worst < 1e-4;
    detail += fmt("%s max rel %.1e; ", std::string(to_string(g)).c_str(), worst);
  }
  const double secs = seconds_since(t0);
  pass = pass && secs < 60;
  return {pass, detail + fmt("%.1fs", secs)};
}

// A3 -------------------------------------------------------------------------

Outcome a3() {
  const auto& w = default_world();
  const auto cfg = make_model_config(ModelConfig{}, w.vocab, w.data.features, kAll, Mode::Image,
                                     false);
  const auto layout = std::make_shared<ParamLayout>(cfg);
  const auto pf = init_params<float>(layout, 5);
  const auto pd = init_params<double>(layout, 5);
  const auto items = w.data.catalog.sorted_ids();
  Rng rng(11);
  int causal_ok = 0;
  int inject_ok = 0;
  int plans = 0;
  while (plans < 50) {
    const auto plan = oracle::random_plan(rng, w.vocab.size(), items, 120);
    bool checked = false;
    Rng probe = rng;
    oracle::injection_locality_holds(pf, plan, w.data.features, probe, &checked);
    if (!checked) continue;  // needs a visual slot whose item occurs once
    ++plans;
    if (oracle::injection_locality_holds(pf, plan, w.data.features, rng) &&
        oracle::injection_locality_holds(pd, plan, w.data.features, rng)) {
      ++inject_ok;
    }
    const auto x = assemble_input_embeddings<double>(plan, pd, w.data.features, false).x;
    const std::size_t t = 1 + uniform_index(rng, plan.size() - 1);
    const Mat<float> xf = x.cast<float>();
    if (oracle::causal_perturbation_holds(pd, x, t, rng) &&
        oracle::causal_perturbation_holds(pf, xf, t, rng)) {
      ++causal_ok;
    }
  }
  return {causal_ok == 50 && inject_ok == 50,
          fmt("causal %d/50, injection %d/50 (float and double)", causal_ok, inject_ok)};
}

// A4 -------------------------------------------------------------------------

Outcome a4() {
  SyntheticSpec spec;
  spec.n_users = 200;
  const World w = make_world(spec);
  EvalOptions opt;
  opt.keep_scores = true;
  opt.ks = {1, 5, 10, 20};
  const auto res = evaluate(w.split, w.data.catalog, random_scorer(99), opt);
  std::map<std::size_t, double> hit, ndcg;
  std::size_t rank_mismatch = 0;
  for (const auto& u : res.users) {
    const std::size_t rank = oracle::brute_force_rank(u.candidates, u.scores, u.truth);
    if (rank != u.rank) ++rank_mismatch;
    for (std::size_t k : opt.ks) {
      hit[k] += rank <= k ? 1.0 : 0.0;
      ndcg[k] += oracle::brute_force_ndcg(rank, k);
    }
  }
  bool exact = rank_mismatch == 0 && res.users.size() == 200;
  for (std::size_t k : opt.ks) {
    exact = exact && res.report.hit.at(k) == hit[k] / res.users.size() &&
            std::abs(res.report.ndcg.at(k) - ndcg[k] / res.users.size()) < 1e-12;
  }

  const auto& dw = default_world();
  const auto rnd = evaluate(dw.split, dw.data.catalog, random_scorer(7), test_options());
  const double p = 5.0 / 101.0;
  const double n = static_cast<double>(rnd.users.size());
  const double sigma = std::sqrt(p * (1 - p) / n);
  const double h5 = rnd.report.hit.at(5);
  const bool in_band = std::abs(h5 - p) <= 3 * sigma;
  return {exact && in_band,
          fmt("%zu users match brute force: %s; random Hit@5 %.4f vs %.4f +- %.4f (3 sigma, n=%.0f)",
              res.users.size(), exact ? "yes" : "no", h5, p, 3 * sigma, n)};
}

// A5 -------------------------------------------------------------------------

Outcome a5() {
  const auto& img = image_run(kImg, "img");
  const auto& cf = image_run(kCF, "cf");
  const auto& img_cf = image_run(kImgCF, "img+cf");
  const auto& all = image_run(kAll, "img+cf+text");
  const double chance = 5.0 / 101.0;
  const double slowest =
      std::max({img.seconds, cf.seconds, img_cf.seconds, all.seconds});
  const double tol = 0.01 + 1e-12;
  const bool learns = img.hit5 >= 4 * chance;
  const bool no_loss = all.hit5 >= img.hit5 - tol;
  const bool order = all.hit5 >= img_cf.hit5 - tol &&
                     img_cf.hit5 >= std::max(img.hit5, cf.hit5) - tol;
  const bool fast = slowest < 600;
  return {learns && no_loss && order && fast,
          fmt("test Hit@5 Img %.4f (need >= %.4f), CF %.4f, Img+CF %.4f, Img+CF+Text %.4f; "
              "slowest run %.1fs",
              img.hit5, 4 * chance, cf.hit5, img_cf.hit5, all.hit5, slowest)};
}

// A6 -------------------------------------------------------------------------

Outcome a6() {
  const auto& w = default_world();
  std::size_t bad_image = 0, bad_attr = 0, bad_desc = 0;
  double attr_sum = 0, desc_sum = 0;
  for (const auto& item : w.data.catalog.items()) {
    const auto img = count_item_tokens(w.vocab, item, Mode::Image).content_only;
    const auto attr = count_item_tokens(w.vocab, item, Mode::Attribute).content_only;
    const auto desc = count_item_tokens(w.vocab, item, Mode::Description).content_only;
    bad_image += img != 1;
    bad_attr += attr < 5 || attr > 15;
    bad_desc += desc < 150 || desc > 170;
    attr_sum += attr;
    desc_sum += desc;
  }
  const auto img_len = prompt_lengths(w.split, w.vocab, w.data.catalog, Mode::Image);
  const auto desc_len = prompt_lengths(w.split, w.vocab, w.data.catalog, Mode::Description);
  double min_ratio = 1e300;
  for (std::size_t i = 0; i < img_len.size(); ++i) {
    min_ratio = std::min(min_ratio, static_cast<double>(desc_len[i]) / img_len[i]);
  }
  const double n = static_cast<double>(w.data.catalog.items().size());
  return {bad_image == 0 && bad_attr == 0 && bad_desc == 0 && min_ratio >= 10,
          fmt("out of range: image %zu, attribute %zu, description %zu of %.0f items; mean "
              "attribute %.1f, description %.1f; min description/image prompt ratio %.2f",
              bad_image, bad_attr, bad_desc, n, attr_sum / n, desc_sum / n, min_ratio)};
}

// A7 -------------------------------------------------------------------------

Outcome a7() {
  bool pass = true;
  double last = 0;
  for (double d : {1.0, 16.0, 32.0, 768.0, 4096.0}) {
    last = complexity_estimate(160, 10, d) / complexity_estimate(1, 10, d);
    pass = pass && last == 25600.0;
  }
  return {pass, fmt("ratio %.1f for d in {1, 16, 32, 768, 4096}", last)};
}

// A8 -------------------------------------------------------------------------

SweepRow sweep_at(const World& w, const Run& run, Mode mode, const std::vector<FeatureType>& types,
                  std::size_t budget) {
  const auto ctx = w.context();
  const auto rows = context_budget_sweep(
      w.split, w.vocab, w.data.catalog, mode, {budget},
      [&](std::size_t b) { return model_scorer(run.result.best, ctx, mode, types, b); },
      test_options());
  return rows.front();
}

Outcome a8() {
  const auto& w = default_world();
  const auto& img = image_run(kImg, "img");
  const auto& desc = cached_run("description", [&] {
    return train_run(w, kImg, Mode::Description, false, 3);
  });
  const auto d_full = sweep_at(w, desc, Mode::Description, kImg, kUnlimitedBudget);
  const auto d_256 = sweep_at(w, desc, Mode::Description, kImg, 256);
  const auto i_full = sweep_at(w, img, Mode::Image, kImg, kUnlimitedBudget);
  const auto i_256 = sweep_at(w, img, Mode::Image, kImg, 256);
  const double d_drop = d_full.report.hit.at(5) - d_256.report.hit.at(5);
  const double i_change = std::abs(i_full.report.hit.at(5) - i_256.report.hit.at(5));
  const bool pass = d_256.max_retained <= 1 && d_drop >= 0.05 - 1e-12 && i_change <= 0.02 + 1e-12;
  return {pass, fmt("description: max items kept at 256 = %zu, Hit@5 %.4f -> %.4f (drop %.4f, "
                    "need >= 0.05); image: Hit@5 %.4f -> %.4f (change %.4f, need <= 0.02), mean "
                    "items kept %.1f",
                    d_256.max_retained, d_full.report.hit.at(5), d_256.report.hit.at(5), d_drop,
                    i_full.report.hit.at(5), i_256.report.hit.at(5), i_change,
                    i_256.mean_retained)};
}

// A9 -------------------------------------------------------------------------

Outcome a9() {
  const auto& f = default_world().data.features;
  const auto r = overlap_report(f.get(FeatureType::Img), f.get(FeatureType::JointText), 0);
  const double gap = r.positive.mean - r.negative.mean;
  const auto same = overlap_report(f.get(FeatureType::Img), f.get(FeatureType::Img), 0);
  return {gap >= 0.2 && same.positive.mean == 1.0,
          fmt("positive %.4f, negative %.4f, gap %.4f; identical matrices positive mean %.17g",
              r.positive.mean, r.negative.mean, gap, same.positive.mean)};
}

// A10 ------------------------------------------------------------------------

Outcome a10() {
  const auto& w = half_missing_world();
  const auto& base = image_run(kImg, "img");
  const auto& run = cached_run("fallback", [&] {
    return train_run(w, kImg, Mode::Image, true, 5, true);
  });

  const auto on = w.context(true);
  const auto off = w.context(false);
  std::vector<std::string> with_image;
  for (const auto& item : w.data.catalog.items()) {
    if (item.has_image) with_image.push_back(item.item_id);
  }
  // Each user's history restricted to image-bearing items, so that both
  // contexts can build the prompt.
  std::size_t users = 0, compared = 0, differing = 0;
  for (const auto& u : w.split.users) {
    std::vector<std::string> prefix;
    for (const auto& id : eval_prefix(u, EvalTarget::Test)) {
      if (w.data.catalog.find(id)->has_image) prefix.push_back(id);
    }
    if (prefix.empty()) continue;
    ++users;
    const auto h_on = user_repr(run.result.best, on, prefix, Mode::Image);
    const auto h_off = user_repr(run.result.best, off, prefix, Mode::Image);
    const auto s_on = score_candidates(run.result.best, on, h_on, with_image, kImg);
    const auto s_off = score_candidates(run.result.best, off, h_off, with_image, kImg);
    for (std::size_t i = 0; i < s_on.size(); ++i) {
      ++compared;
      differing += std::memcmp(&s_on[i], &s_off[i], sizeof(double)) != 0;
    }
  }
  const double ratio = run.hit5 / base.hit5;
  const bool pass = users > 0 && differing == 0 && ratio >= 0.8;
  return {pass, fmt("%zu of %zu scores differ (%zu users, image-bearing histories); Hit@5 %.4f "
                    "vs %.4f without missing images (%.3fx, need >= 0.8x)",
                    differing, compared, users, run.hit5, base.hit5, ratio)};
}

// A11 ------------------------------------------------------------------------

std::uint64_t file_hash(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return fnv1a64(bytes);
}

// Every output file except the training log, whose wall-clock column varies.
std::map<std::string, std::uint64_t> pipeline_hashes(const fs::path& root) {
  fs::remove_all(root);
  fs::create_directories(root);
  RunConfig c;
  c.set("data_dir", (root / "data").string());
  c.set("features_dir", (root / "features").string());
  c.set("checkpoint", (root / "model.ckpt").string());
  c.set("reports_dir", (root / "reports").string());
  c.set("types", "img,cf");
  c.set("epochs", "2");
  std::ostringstream sink;
  cli::cmd_synth(c, sink);
  cli::cmd_prepare(c, sink);
  cli::cmd_train(c, sink);
  cli::cmd_eval(c, cli::EvalFlags{}, sink);
  std::map<std::string, std::uint64_t> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), root).string();
    if (e.path().filename().string().find("train_log") != std::string::npos) continue;
    out[rel] = file_hash(e.path());
  }
  return out;
}

Outcome a11() {
  const auto root = fs::temp_directory_path() / "ilr_acceptance_a11";
  const auto first = pipeline_hashes(root);
  const auto second = pipeline_hashes(root);
  fs::remove_all(root);
  std::size_t differing = 0;
  std::string names;
  for (const auto& [name, h] : first) {
    const auto it = second.find(name);
    if (it == second.end() || it->second != h) {
      ++differing;
      names += " " + name;
    }
  }
  const bool pass = differing == 0 && first.size() == second.size() && first.size() >= 6;
  return {pass, fmt("%zu files hashed, %zu differ%s", first.size(), differing, names.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"A1", a1}, {"A2", a2}, {"A3", a3}, {"A4", a4},  {"A5", a5},  {"A6", a6},
      {"A7", a7}, {"A8", a8}, {"A9", a9}, {"A10", a10}, {"A11", a11}};
  std::set<std::string> wanted(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& [id, check] : criteria) {
    if (!wanted.empty() && wanted.count(id) == 0) continue;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %s %s\n", id.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
