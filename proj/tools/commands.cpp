#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "ilr/bench.hpp"
#include "ilr/catalog.hpp"
#include "ilr/checkpoint.hpp"
#include "ilr/error.hpp"
#include "ilr/random.hpp"
#include "ilr/report_io.hpp"
#include "ilr/synth.hpp"
#include "ilr/training.hpp"

namespace fs = std::filesystem;

namespace ilr::cli {
namespace {

fs::path data_dir(const RunConfig& c) { return c.get("data_dir"); }
fs::path features_dir(const RunConfig& c) { return c.get("features_dir"); }
fs::path reports_dir(const RunConfig& c) { return c.get("reports_dir"); }
fs::path interactions_path(const RunConfig& c) { return data_dir(c) / "interactions.tsv"; }
fs::path items_path(const RunConfig& c) { return data_dir(c) / "items.tsv"; }
fs::path split_path(const RunConfig& c) { return data_dir(c) / "split.tsv"; }

void make_dirs(const fs::path& dir) {
  if (dir.empty()) {
    return;
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    fail(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
  }
}

void require(const fs::path& path, const std::string& hint) {
  if (!fs::exists(path)) {
    fail(ErrorKind::Config, "missing input " + path.string() + " (" + hint + ")");
  }
}

std::string hex16(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    fail(ErrorKind::Io, "cannot read " + path.string());
  }
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return hex16(fnv1a64(bytes));
}

std::size_t budget_of(const RunConfig& c) {
  const auto b = c.get_size("context_budget");
  return b == 0 ? kUnlimitedBudget : b;
}

std::vector<FeatureType> parse_types(const std::vector<std::string>& names) {
  std::vector<FeatureType> out;
  for (const auto& n : names) {
    out.push_back(parse_feature_type(n));
  }
  return out;
}

std::string join_types(const std::vector<FeatureType>& types) {
  std::string s;
  for (const auto t : types) {
    if (!s.empty()) {
      s += ",";
    }
    s += to_string(t);
  }
  return s;
}

std::vector<Mode> parse_modes(const std::vector<std::string>& names) {
  std::vector<Mode> out;
  for (const auto& n : names) {
    out.push_back(parse_mode(n));
  }
  return out;
}

KeyValues base_meta(const RunConfig& c, const std::string& command) {
  return {{"command", command}, {"config_hash", c.hash()}};
}

struct Inputs {
  Catalog catalog;
  DatasetSplit split;
  FeatureStore features;
};

Inputs load_inputs(const RunConfig& c) {
  require(items_path(c), "run synth or provide item metadata");
  require(split_path(c), "run prepare first");
  require(features_dir(c), "feature directory");
  Inputs in;
  in.catalog = ingest_items(items_path(c));
  in.split = read_split(split_path(c));
  in.features = load_feature_dir(features_dir(c));
  return in;
}

Checkpoint load_model(const RunConfig& c) {
  const fs::path path = c.get("checkpoint");
  require(path, "run train first");
  return load_checkpoint(path);
}

TrainConfig train_config(const RunConfig& c) {
  TrainConfig t;
  t.lr = c.get_double("lr");
  t.batch_size = c.get_size("batch_size");
  t.epochs = c.get_size("epochs");
  t.seed = c.get_u64("train_seed");
  t.types = parse_types(c.get_list("types"));
  t.mode = parse_mode(c.get("mode"));
  t.patience = c.get_size("patience");
  t.two_stage = c.get_bool("two_stage");
  t.lm_pretrain_epochs = c.get_size("lm_pretrain_epochs");
  t.context_budget = budget_of(c);
  t.fallback = c.get_bool("fallback");
  const auto& target = c.get("reri_target");
  if (target == "last") {
    t.reri_target = ReriTarget::Last;
  } else if (target == "random") {
    t.reri_target = ReriTarget::Random;
  } else {
    fail(ErrorKind::Config, "reri_target must be last or random, got '" + target + "'");
  }
  t.n_negatives = c.get_size("n_negatives");
  t.eval_seed = c.get_u64("eval_seed");
  return t;
}

ModelConfig model_base(const RunConfig& c) {
  ModelConfig m;
  m.backbone.d_model = c.get_size("d_model");
  m.backbone.n_layers = c.get_size("n_layers");
  m.backbone.n_heads = c.get_size("n_heads");
  m.backbone.ffn_dim = c.get_size("ffn_dim");
  m.backbone.max_context = c.get_size("max_context");
  m.backbone.trainable = c.get_bool("trainable");
  m.adaptor_hidden = c.get_size("adaptor_hidden");
  m.shared_dim = c.get_size("shared_dim");
  return m;
}

EvalOptions eval_options(const RunConfig& c) {
  EvalOptions o;
  o.ks = c.get_size_list("ks");
  o.n_negatives = c.get_size("n_negatives");
  o.seed = c.get_u64("eval_seed");
  return o;
}

// Mode, active types and fallback the checkpoint was trained with.
struct ModelRun {
  Mode mode = Mode::Image;
  std::vector<FeatureType> types;
  bool fallback = false;
};

ModelRun model_run(const Checkpoint& ck) {
  auto get = [&](const std::string& k) -> const std::string& {
    const auto it = ck.meta.find(k);
    if (it == ck.meta.end()) {
      fail(ErrorKind::Format, "checkpoint has no '" + k + "' entry");
    }
    return it->second;
  };
  ModelRun r;
  r.mode = parse_mode(get("mode"));
  std::stringstream ss(get("types"));
  for (std::string t; std::getline(ss, t, ',');) {
    if (!t.empty()) {
      r.types.push_back(parse_feature_type(t));
    }
  }
  r.fallback = get("fallback") == "1";
  return r;
}

Scorer oracle_scorer(EvalTarget target) {
  return [target](const UserSplit& user, const std::vector<std::string>&,
                  const std::vector<std::string>& candidates) {
    const std::string& truth = eval_truth(user, target);
    std::vector<double> s(candidates.size(), 0.0);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (candidates[i] == truth) {
        s[i] = 1.0;
      }
    }
    return s;
  };
}

}  // namespace

void cmd_synth(const RunConfig& c, std::ostream& out) {
  SyntheticSpec spec;
  spec.n_users = c.get_size("synth.n_users");
  spec.n_items = c.get_size("synth.n_items");
  spec.latent_dim = c.get_size("synth.latent_dim");
  spec.noise = c.get_double("synth.noise");
  spec.mean_sequence_length = c.get_double("synth.mean_length");
  spec.missing_image_fraction = c.get_double("synth.missing_images");
  spec.seed = c.get_u64("seed");
  const SyntheticData data = synth_generate(spec);

  make_dirs(data_dir(c));
  make_dirs(features_dir(c));
  std::vector<fs::path> files{interactions_path(c), items_path(c)};
  write_interactions(files[0], data.records);
  write_items(files[1], data.catalog);
  for (const auto t : {FeatureType::Img, FeatureType::JointText, FeatureType::CF,
                       FeatureType::Text}) {
    files.push_back(features_dir(c) / feature_file_name(t));
    save_feature_matrix(data.features.get(t), files.back());
  }

  nlohmann::ordered_json manifest;
  manifest["seed"] = spec.seed;
  manifest["n_users"] = spec.n_users;
  manifest["n_items"] = spec.n_items;
  manifest["n_interactions"] = data.records.size();
  manifest["config_hash"] = c.hash();
  manifest["files"] = nlohmann::ordered_json::object();
  for (const auto& f : files) {
    manifest["files"][f.string()] = file_hash(f);
  }
  const fs::path manifest_path = data_dir(c) / "manifest.json";
  std::ofstream mf(manifest_path);
  mf << manifest.dump(2) << "\n";
  if (!mf) {
    fail(ErrorKind::Io, "cannot write " + manifest_path.string());
  }
  out << manifest.dump(2) << "\n";
}

void cmd_prepare(const RunConfig& c, std::ostream& out) {
  require(interactions_path(c), "run synth or provide interactions");
  const auto records = ingest_interactions(interactions_path(c));
  const auto kept = k_core_filter(records, c.get_size("kcore"));
  const auto split = leave_one_out(build_sequences(kept));
  if (split.users.empty()) {
    fail(ErrorKind::Config, "prepare: no user survives the " + c.get("kcore") + "-core filter");
  }
  write_split(split_path(c), split);
  out << "interactions " << records.size() << " kept " << kept.size() << " users "
      << split.users.size() << "\nsplit " << split_path(c).string() << " "
      << file_hash(split_path(c)) << "\n";
}

void cmd_train(const RunConfig& c, std::ostream& out) {
  const Inputs in = load_inputs(c);
  const TrainConfig tc = train_config(c);
  const Vocabulary vocab = build_model_vocab(in.catalog, c.get_size("vocab_size"));
  const ModelConfig mc =
      make_model_config(model_base(c), vocab, in.features, tc.types, tc.mode, tc.fallback);
  const ModelContext ctx{&vocab, &in.catalog, &in.features, tc.fallback};
  const TrainResult result = train(ctx, in.split, mc, tc);

  KeyValues meta = base_meta(c, "train");
  meta["mode"] = std::string(to_string(tc.mode));
  meta["types"] = join_types(tc.types);
  meta["fallback"] = tc.fallback ? "1" : "0";
  meta["train_seed"] = std::to_string(tc.seed);
  meta["best_epoch"] = std::to_string(result.best_epoch);
  meta["best_val_hit5"] = format_number(result.best_val_hit5);
  meta["epochs_run"] = std::to_string(result.epochs_run);

  const fs::path ckpt = c.get("checkpoint");
  make_dirs(ckpt.parent_path());
  save_checkpoint(Checkpoint{mc, vocab, meta, result.best}, ckpt);
  make_dirs(reports_dir(c));
  const fs::path log = reports_dir(c) / "train_log.csv";
  write_training_log(log, result.log, meta);

  for (std::size_t e = 0; e < result.val_hit5.size(); ++e) {
    out << "epoch " << e << " val_hit5 " << format_number(result.val_hit5[e]) << "\n";
  }
  out << "best epoch " << result.best_epoch << "\ncheckpoint " << ckpt.string() << " "
      << file_hash(ckpt) << "\nlog " << log.string() << "\n";
}

void cmd_eval(const RunConfig& c, const EvalFlags& flags, std::ostream& out) {
  const Inputs in = load_inputs(c);
  EvalOptions opt = eval_options(c);
  opt.target = flags.target;
  opt.keep_scores = flags.dump_scores;

  KeyValues meta = base_meta(c, "eval");
  meta["target"] = flags.target == EvalTarget::Test ? "test" : "validation";
  meta["eval_seed"] = std::to_string(opt.seed);
  EvalResult result;
  switch (flags.scorer) {
    case ScorerKind::Oracle:
      meta["scorer"] = "oracle";
      result = evaluate(in.split, in.catalog, oracle_scorer(flags.target), opt);
      break;
    case ScorerKind::Random:
      meta["scorer"] = "random";
      result = evaluate(in.split, in.catalog, random_scorer(c.get_u64("train_seed")), opt);
      break;
    case ScorerKind::Model: {
      const Checkpoint ck = load_model(c);
      const ModelRun run = model_run(ck);
      const ModelContext ctx{&ck.vocab, &in.catalog, &in.features, run.fallback};
      meta["scorer"] = "model";
      meta["mode"] = std::string(to_string(run.mode));
      meta["types"] = join_types(run.types);
      meta["checkpoint"] = c.get("checkpoint");
      result = evaluate(in.split, in.catalog,
                        model_scorer(ck.params, ctx, run.mode, run.types, budget_of(c)), opt);
      break;
    }
  }

  // Cold/warm groups by the held-out item's popularity and |S_u| groups.
  require(interactions_path(c), "interactions are needed for popularity groups");
  const auto records = k_core_filter(ingest_interactions(interactions_path(c)), c.get_size("kcore"));
  const auto pop = popularity_groups(records, static_cast<int>(c.get_size("item_groups")));
  const auto by_item = group_eval(
      result,
      [&](const UserResult& u) -> std::optional<int> {
        const auto it = pop.find(u.truth);
        return it == pop.end() ? std::nullopt : std::optional<int>(it->second);
      },
      opt.ks);
  std::unordered_map<std::string, std::size_t> seq_len;
  for (const auto& u : in.split.users) {
    seq_len[u.user_id] = u.train.size() + 2;
  }
  const auto bounds = c.get_size_list("length_groups");
  const auto by_length = group_eval(
      result, [&](const UserResult& u) { return length_group(seq_len.at(u.user_id), bounds); },
      opt.ks);

  std::map<std::string, Table> tables;
  tables["metrics"] = metrics_table(result.report);
  Table items{{"group", "k", "hit", "ndcg", "users"}, {}};
  for (const auto& [g, r] : by_item) {
    append_metrics(items, r, "pop" + std::to_string(g));
  }
  tables["item_groups"] = items;
  Table lengths{{"group", "k", "hit", "ndcg", "users"}, {}};
  for (const auto& [g, r] : by_length) {
    append_metrics(lengths, r, "len>=" + std::to_string(bounds[static_cast<std::size_t>(g - 1)]));
  }
  tables["length_groups"] = lengths;

  make_dirs(reports_dir(c));
  write_report(reports_dir(c) / "eval", tables, meta);
  if (flags.dump_scores) {
    write_score_dump(reports_dir(c) / "eval_scores.csv", result, meta);
  }
  for (const auto k : result.report.ks) {
    out << "hit@" << k << " " << format_number(result.report.hit.at(k)) << "  ndcg@" << k << " "
        << format_number(result.report.ndcg.at(k)) << "\n";
  }
  out << "users " << result.report.n_users << "\nreport " << (reports_dir(c) / "eval.json").string()
      << "\n";
}

void cmd_overlap(const RunConfig& c, std::ostream& out) {
  require(features_dir(c), "feature directory");
  const FeatureStore store = load_feature_dir(features_dir(c));
  for (const auto t : {FeatureType::Img, FeatureType::JointText}) {
    if (!store.has(t)) {
      fail(ErrorKind::Config, "overlap needs the " + std::string(to_string(t)) + " feature file");
    }
  }
  const OverlapReport r = overlap_report(store.get(FeatureType::Img),
                                         store.get(FeatureType::JointText), c.get_u64("seed"));
  KeyValues meta = base_meta(c, "overlap");
  meta["seed"] = c.get("seed");
  make_dirs(reports_dir(c));
  write_report(reports_dir(c) / "overlap",
               {{"summary", overlap_table(r)},
                {"positive_hist", histogram_table(r.positive.hist)},
                {"negative_hist", histogram_table(r.negative.hist)}},
               meta);
  out << "positive mean " << format_number(r.positive.mean) << " (n=" << r.positive.n
      << ")\nnegative mean " << format_number(r.negative.mean) << " (n=" << r.negative.n
      << ")\nexcluded " << r.excluded << "\nreport " << (reports_dir(c) / "overlap.json").string()
      << "\n";
}

void cmd_bench(const RunConfig& c, const BenchFlags& flags, std::ostream& out) {
  const Inputs in = load_inputs(c);
  const std::vector<Mode> modes = parse_modes(c.get_list("bench_modes"));
  const bool need_model = flags.timing || flags.sweep;
  std::optional<Checkpoint> ck;
  if (need_model) {
    ck = load_model(c);
  }
  const Vocabulary vocab = ck ? ck->vocab : build_model_vocab(in.catalog, c.get_size("vocab_size"));
  const double d = static_cast<double>(ck ? ck->model.backbone.d_model : c.get_size("d_model"));

  KeyValues meta = base_meta(c, "bench");
  std::map<std::string, Table> tables;

  // Token counts per item and per user prompt.
  Table per_item{{"mode", "mean_content_tokens", "mean_segment_tokens", "mean_prompt_tokens"}, {}};
  Table complexity{{"mode", "per_item_tokens", "seq_len", "d", "estimate", "ratio_to_image"}, {}};
  double seq_len = 0;
  for (const auto& u : in.split.users) {
    seq_len += static_cast<double>(u.train.size() + 1);
  }
  seq_len /= static_cast<double>(std::max<std::size_t>(1, in.split.users.size()));
  const double image_estimate = complexity_estimate(1.0, seq_len, d);
  for (const Mode mode : modes) {
    double content = 0;
    double segment = 0;
    for (const auto& item : in.catalog.items()) {
      const TokenCount tc = count_item_tokens(vocab, item, mode);
      content += static_cast<double>(tc.content_only);
      segment += static_cast<double>(tc.total);
    }
    content /= static_cast<double>(in.catalog.size());
    segment /= static_cast<double>(in.catalog.size());
    const TokenHistogram h = token_histogram(in.split, vocab, in.catalog, mode);
    const std::string name(to_string(mode));
    per_item.add({name, format_number(content), format_number(segment), format_number(h.mean())});
    tables["tokens_" + name] = token_table(h);
    const double est = complexity_estimate(content, seq_len, d);
    complexity.add({name, format_number(content), format_number(seq_len), format_number(d),
                    format_number(est), format_number(est / image_estimate)});
    out << name << ": " << format_number(content) << " content tokens per item, mean prompt "
        << format_number(h.mean()) << " tokens\n";
  }
  tables["per_item"] = per_item;
  tables["complexity"] = complexity;

  if (need_model) {
    const ModelRun run = model_run(*ck);
    const ModelContext ctx{&ck->vocab, &in.catalog, &in.features, run.fallback};
    meta["checkpoint"] = c.get("checkpoint");
    meta["types"] = join_types(run.types);
    if (flags.timing) {
      const auto rows = timing_bench(
          in.split, vocab, in.catalog, c.get_size_list("length_groups"),
          c.get_size("group_size"), modes, c.get_u64("eval_seed"),
          [&](Mode m) { return model_scorer(ck->params, ctx, m, run.types); },
          c.get_size("n_negatives"));
      tables["timing"] = timing_table(rows);
      for (const auto& r : rows) {
        out << "timing " << to_string(r.mode) << " group " << r.group << ": " << r.users
            << " users, " << r.token_total << " tokens, " << format_number(r.seconds) << " s\n";
      }
    }
    if (flags.sweep) {
      std::vector<std::size_t> budgets = c.get_size_list("budgets");
      for (auto& b : budgets) {
        b = b == 0 ? kUnlimitedBudget : b;
      }
      std::vector<SweepRow> rows;
      for (const Mode mode : modes) {
        auto part = context_budget_sweep(
            in.split, vocab, in.catalog, mode, budgets,
            [&](std::size_t b) { return model_scorer(ck->params, ctx, mode, run.types, b); },
            eval_options(c));
        for (const auto& r : part) {
          out << "sweep " << to_string(r.mode) << " budget "
              << (r.budget == kUnlimitedBudget ? std::string("unlimited") : std::to_string(r.budget))
              << ": hit@5 "
              << format_number(r.report.hit.count(5) ? r.report.hit.at(5) : 0.0)
              << ", retained " << format_number(r.mean_retained) << "\n";
        }
        rows.insert(rows.end(), part.begin(), part.end());
      }
      tables["sweep"] = sweep_table(rows);
    }
  }

  make_dirs(reports_dir(c));
  write_report(reports_dir(c) / "bench", tables, meta);
  out << "report " << (reports_dir(c) / "bench.json").string() << "\n";
}

void cmd_report(const RunConfig& c, std::ostream& out) {
  require(reports_dir(c), "no reports yet");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(reports_dir(c))) {
    if (e.path().extension() == ".json" && e.path().stem() != "summary") {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    fail(ErrorKind::Config, "no reports in " + reports_dir(c).string());
  }
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
  for (const auto& f : files) {
    std::ifstream in(f);
    nlohmann::ordered_json doc;
    try {
      doc = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Parse, f.string() + ": " + e.what());
    }
    const std::string name = f.stem().string();
    out << name;
    if (doc.contains("metadata") && doc["metadata"].contains("config_hash")) {
      out << " [config " << doc["metadata"]["config_hash"].get<std::string>() << "]";
    }
    out << "\n";
    for (const auto& [table, rows] : doc.items()) {
      if (table == "metadata" || !rows.is_array()) {
        continue;
      }
      out << "  " << table << ": " << rows.size() << " rows\n";
      if (table == "metrics" || table == "summary") {
        for (const auto& row : rows) {
          out << "    " << row.dump() << "\n";
        }
      }
    }
    summary[name] = std::move(doc);
  }
  std::ofstream sf(reports_dir(c) / "summary.json");
  sf << summary.dump(2) << "\n";
  if (!sf) {
    fail(ErrorKind::Io, "cannot write summary.json");
  }
}

}  // namespace ilr::cli
