#include "nnmf/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "json.hpp"
#include "nnmf/serialization.hpp"

namespace nnmf {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------- config

namespace {

void check_keys(const YAML::Node& node, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!node.IsMap()) throw ConfigError(where + " must be a mapping");
  for (const auto& entry : node) {
    const auto key = entry.first.as<std::string>();
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
T read(const YAML::Node& parent, const char* key, T fallback, const std::string& where) {
  const auto node = parent[key];
  if (!node) return fallback;
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("invalid value for " + where + "." + key);
  }
}

Range read_range(const YAML::Node& node, const std::string& where) {
  if (!node.IsSequence() || node.size() != 2) throw ConfigError(where + " must be a [low, high] pair");
  try {
    return {node[0].as<double>(), node[1].as<double>()};
  } catch (const YAML::Exception&) {
    throw ConfigError("invalid range for " + where);
  }
}

std::map<std::string, std::string> scalar_fields(const YAML::Node& node, const std::string& where) {
  if (!node.IsMap()) throw ConfigError(where + " must be a mapping");
  std::map<std::string, std::string> fields;
  for (const auto& entry : node) {
    if (!entry.second.IsScalar()) throw ConfigError(where + "." + entry.first.as<std::string>() + " must be a scalar");
    fields[entry.first.as<std::string>()] = entry.second.as<std::string>();
  }
  return fields;
}

}  // namespace

void SearchSpace::validate() const {
  if (budget < 1) throw ConfigError("search budget must be at least 1");
  auto check = [](const std::optional<Range>& r, const char* name, bool positive) {
    if (!r) return;
    if (!(r->lo <= r->hi) || (positive && !(r->lo > 0)) || r->lo < 0) {
      throw ConfigError(std::string("search range for ") + name + " is empty or out of domain");
    }
  };
  check(learning_rate, "learning_rate", true);
  check(reg, "reg", true);
  check(factors, "factors", true);
  check(user_k, "user_k", false);
  check(item_k, "item_k", false);
  check(shrink, "shrink", false);
}

void ExperimentConfig::validate() const {
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (dataset.path.has_value() == dataset.synthetic.has_value()) {
    throw ConfigError("dataset needs exactly one of 'path' or 'synthetic'");
  }
  if (preprocess.min_interactions < 1) throw ConfigError("min_interactions must be at least 1");
  if (!(split.train > 0 && split.validation > 0 && split.test > 0) ||
      std::abs(split.train + split.validation + split.test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must be positive and sum to 1");
  }
  std::set<std::string> names;
  for (const auto& m : models) {
    if (m.name.empty() || !names.insert(m.name).second) throw ConfigError("model names must be unique and non-empty");
    try {
      m.config.validate();
    } catch (const ConfigError& e) {
      throw ConfigError("model '" + m.name + "': " + e.what());
    }
  }
  for (const auto& b : baselines) {
    if (b.name.empty() || !names.insert(b.name).second) throw ConfigError("model names must be unique and non-empty");
  }
  if (cutoffs.empty()) throw ConfigError("evaluation needs at least one cutoff");
  for (Index k : cutoffs) {
    if (k < 1) throw ConfigError("evaluation cutoffs must be at least 1");
  }
  if (!(tail_fraction > 0 && tail_fraction < 1)) throw ConfigError("tail_fraction must lie in (0, 1)");
  const std::set<std::uint64_t> distinct(stability.seeds.begin(), stability.seeds.end());
  if (distinct.size() != stability.seeds.size()) throw ConfigError("stability seeds must be distinct");
  if (stability.list_length < 1) throw ConfigError("stability list_length must be at least 1");
  if (search) {
    search->space.validate();
    if (std::none_of(models.begin(), models.end(), [&](const NamedModel& m) { return m.name == search->base; })) {
      throw ConfigError("search base '" + search->base + "' is not a configured model");
    }
  }
}

ExperimentConfig parse_experiment_config(const std::string& yaml_text, const fs::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  if (!root.IsMap()) throw ConfigError("config must be a mapping");
  check_keys(root,
             {"output", "threads", "dataset", "preprocess", "split", "models", "baselines", "evaluation", "stability",
              "search"},
             "config");
  ExperimentConfig c;
  c.output = read<std::string>(root, "output", "out", "config");
  c.threads = read<int>(root, "threads", 1, "config");

  const auto ds = root["dataset"];
  if (!ds) throw ConfigError("config needs a dataset section");
  check_keys(ds, {"name", "path", "delimiter", "header", "synthetic"}, "dataset");
  if (ds["path"]) {
    fs::path p = read<std::string>(ds, "path", "", "dataset");
    c.dataset.path = p.is_absolute() ? p : base_dir / p;
  }
  if (const auto syn = ds["synthetic"]) {
    check_keys(syn, {"users", "items", "interactions", "exponent", "seed"}, "dataset.synthetic");
    SyntheticSpec s;
    s.users = read<Index>(syn, "users", s.users, "dataset.synthetic");
    s.items = read<Index>(syn, "items", s.items, "dataset.synthetic");
    s.interactions = read<Index>(syn, "interactions", s.interactions, "dataset.synthetic");
    s.exponent = read<double>(syn, "exponent", s.exponent, "dataset.synthetic");
    s.seed = read<std::uint64_t>(syn, "seed", s.seed, "dataset.synthetic");
    c.dataset.synthetic = s;
  }
  c.dataset.format.delimiter = read<std::string>(ds, "delimiter", "\t", "dataset");
  c.dataset.format.header = read<bool>(ds, "header", false, "dataset");
  c.dataset.name = read<std::string>(ds, "name", "", "dataset");
  if (c.dataset.name.empty()) c.dataset.name = c.dataset.path ? c.dataset.path->stem().string() : "synthetic";

  // Synthetic data is already implicit and needs no filtering by default.
  c.preprocess.min_interactions = c.dataset.synthetic ? 1 : 5;
  if (const auto pre = root["preprocess"]) {
    check_keys(pre, {"threshold", "min_interactions", "filter"}, "preprocess");
    if (pre["threshold"]) c.preprocess.threshold = read<double>(pre, "threshold", 0.0, "preprocess");
    c.preprocess.min_interactions = read<Index>(pre, "min_interactions", c.preprocess.min_interactions, "preprocess");
    const auto mode = read<std::string>(pre, "filter", "fixpoint", "preprocess");
    if (mode == "fixpoint") c.preprocess.filter = FilterMode::fixpoint;
    else if (mode == "single_pass") c.preprocess.filter = FilterMode::single_pass;
    else throw ConfigError("preprocess.filter must be fixpoint or single_pass");
  }

  if (const auto sp = root["split"]) {
    check_keys(sp, {"train", "validation", "test", "seed"}, "split");
    c.split.train = read<double>(sp, "train", c.split.train, "split");
    c.split.validation = read<double>(sp, "validation", c.split.validation, "split");
    c.split.test = read<double>(sp, "test", c.split.test, "split");
    c.split_seed = read<std::uint64_t>(sp, "seed", c.split_seed, "split");
  }

  if (const auto models = root["models"]) {
    if (!models.IsSequence()) throw ConfigError("models must be a list");
    for (std::size_t n = 0; n < models.size(); ++n) {
      auto fields = scalar_fields(models[n], "models[" + std::to_string(n) + "]");
      NamedModel m;
      m.name = fields.count("name") ? fields["name"] : "";
      fields.erase("name");
      m.config = config_from_fields(fields);
      if (m.name.empty()) m.name = m.config.kind();
      c.models.push_back(std::move(m));
    }
  }

  if (const auto baselines = root["baselines"]) {
    if (!baselines.IsSequence()) throw ConfigError("baselines must be a list");
    for (std::size_t n = 0; n < baselines.size(); ++n) {
      const auto node = baselines[n];
      const std::string where = "baselines[" + std::to_string(n) + "]";
      check_keys(node, {"name", "kind", "k", "shrink", "factors", "learning_rate", "reg", "epochs", "seed"}, where);
      BaselineConfig b;
      b.kind = parse_baseline_kind(read<std::string>(node, "kind", "", where));
      b.name = read<std::string>(node, "name", to_string(b.kind), where);
      b.k = read<Index>(node, "k", b.kind == BaselineKind::slim_bpr ? b.slim.k : b.k, where);
      b.shrink = read<double>(node, "shrink", b.shrink, where);
      b.factors = read<Index>(node, "factors", b.factors, where);
      b.seed = read<std::uint64_t>(node, "seed", b.seed, where);
      b.slim.k = b.k;
      b.slim.learning_rate = read<double>(node, "learning_rate", b.slim.learning_rate, where);
      b.slim.reg = read<double>(node, "reg", b.slim.reg, where);
      b.slim.epochs = read<int>(node, "epochs", b.slim.epochs, where);
      b.slim.seed = b.seed;
      c.baselines.push_back(b);
    }
  }

  if (const auto ev = root["evaluation"]) {
    check_keys(ev, {"cutoffs", "tail_fraction"}, "evaluation");
    c.cutoffs = read<std::vector<Index>>(ev, "cutoffs", c.cutoffs, "evaluation");
    c.tail_fraction = read<double>(ev, "tail_fraction", c.tail_fraction, "evaluation");
  }

  if (const auto st = root["stability"]) {
    check_keys(st, {"seeds", "list_length", "neighbor_cutoffs", "bin_thresholds", "embeddings"}, "stability");
    c.stability.seeds = read<std::vector<std::uint64_t>>(st, "seeds", c.stability.seeds, "stability");
    c.stability.list_length = read<Index>(st, "list_length", c.stability.list_length, "stability");
    c.stability.neighbor_cutoffs =
        read<std::vector<Index>>(st, "neighbor_cutoffs", c.stability.neighbor_cutoffs, "stability");
    c.stability.bin_thresholds =
        read<std::vector<double>>(st, "bin_thresholds", c.stability.bin_thresholds, "stability");
    const auto source = read<std::string>(st, "embeddings", "materialized", "stability");
    if (source == "materialized") c.stability.embeddings = EmbeddingSource::materialized;
    else if (source == "base") c.stability.embeddings = EmbeddingSource::base;
    else throw ConfigError("stability.embeddings must be materialized or base");
  }

  if (const auto se = root["search"]) {
    check_keys(se, {"base", "budget", "seed", "space"}, "search");
    SearchConfig s;
    s.base = read<std::string>(se, "base", c.models.empty() ? "" : c.models.front().name, "search");
    s.space.budget = read<int>(se, "budget", s.space.budget, "search");
    s.space.seed = read<std::uint64_t>(se, "seed", s.space.seed, "search");
    if (const auto space = se["space"]) {
      check_keys(space, {"learning_rate", "reg", "factors", "user_k", "item_k", "shrink"}, "search.space");
      if (space["learning_rate"]) s.space.learning_rate = read_range(space["learning_rate"], "search.space.learning_rate");
      if (space["reg"]) s.space.reg = read_range(space["reg"], "search.space.reg");
      if (space["factors"]) s.space.factors = read_range(space["factors"], "search.space.factors");
      if (space["user_k"]) s.space.user_k = read_range(space["user_k"], "search.space.user_k");
      if (space["item_k"]) s.space.item_k = read_range(space["item_k"], "search.space.item_k");
      if (space["shrink"]) s.space.shrink = read_range(space["shrink"], "search.space.shrink");
    }
    c.search = s;
  }

  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  return parse_experiment_config(text.str(), path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

// ---------------------------------------------------------------- search

std::vector<ModelConfig> sample_trials(const ModelConfig& base, const SearchSpace& space) {
  space.validate();
  // Every (trial, parameter) pair has its own generator, so a parameter's
  // value in trial t does not depend on which other ranges are searched.
  auto generator = [&](int trial, std::string_view name) {
    return std::mt19937_64(Fnv1a().add(space.seed).add(static_cast<std::uint64_t>(trial)).add(name).value());
  };
  auto log_uniform = [&](int trial, std::string_view name, const Range& r) {
    auto rng = generator(trial, name);
    return std::exp(std::uniform_real_distribution<double>(std::log(r.lo), std::log(r.hi))(rng));
  };
  auto int_uniform = [&](int trial, std::string_view name, const Range& r) {
    auto rng = generator(trial, name);
    return std::uniform_int_distribution<long long>(std::llround(std::ceil(r.lo)), std::llround(std::floor(r.hi)))(rng);
  };
  std::vector<ModelConfig> trials;
  for (int t = 0; t < space.budget; ++t) {
    ModelConfig c = base;
    if (space.learning_rate) c.learning_rate = log_uniform(t, "learning_rate", *space.learning_rate);
    if (space.reg) c.reg_p = c.reg_q = log_uniform(t, "reg", *space.reg);
    if (space.factors) c.factors = int_uniform(t, "factors", *space.factors);
    if (space.user_k) c.user_k = int_uniform(t, "user_k", *space.user_k);
    if (space.item_k) c.item_k = int_uniform(t, "item_k", *space.item_k);
    if (space.shrink) c.user_shrink = c.item_shrink = static_cast<double>(int_uniform(t, "shrink", *space.shrink));
    trials.push_back(c);
  }
  return trials;
}

namespace {

double validation_map(const TrainedModel& model, const DatasetSplit& split, Index cutoff) {
  const auto truth = restrict_to_profiled_users(split.validation, split.train);
  const auto recs = recommend_topn(model.scorer(), split.train, cutoff);
  return map_at_k(recs, truth, cutoff);
}

}  // namespace

SearchResult random_search(const DatasetSplit& split, const ModelConfig& base, const SearchSpace& space) {
  const auto configs = sample_trials(base, space);
  SearchResult result;
  result.trials.resize(configs.size());
  parallel_for(0, static_cast<Index>(configs.size()), [&](Index lo, Index hi) {
    for (Index t = lo; t < hi; ++t) {
      Trial& trial = result.trials[t];
      trial.index = static_cast<int>(t);
      trial.config = configs[t];
      try {
        auto [su, si] = similarities_for(trial.config, split.train);
        const auto model = train(split, trial.config, su, si);
        trial.val_metric = validation_map(model, split, trial.config.early_stop.cutoff);
        trial.epochs_run = model.epochs_run;
        trial.status = "ok";
      } catch (const Error& e) {
        trial.status = e.what();
      }
    }
  });
  bool found = false;
  for (std::size_t t = 0; t < result.trials.size(); ++t) {
    const auto& trial = result.trials[t];
    if (trial.status != "ok") continue;
    if (!found || trial.val_metric > result.trials[result.best].val_metric) {
      result.best = t;
      found = true;
    }
  }
  if (!found) throw DivergenceError("all " + std::to_string(result.trials.size()) + " search trials failed", 0);
  return result;
}

// ---------------------------------------------------------------- pipeline

namespace {

fs::path split_dir(const fs::path& out) { return out / "split"; }
fs::path similarity_dir(const fs::path& out) { return out / "similarity"; }
fs::path model_dir(const fs::path& out) { return out / "models"; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f << text;
  if (!f) throw DataError("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot read " + path.string());
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

[[noreturn]] void rethrow_annotated(const Error& e, const std::string& prefix) {
  const std::string what = prefix + ": " + e.what();
  if (const auto* d = dynamic_cast<const DivergenceError*>(&e)) throw DivergenceError(what, d->epoch());
  if (dynamic_cast<const DataError*>(&e)) throw DataError(what);
  throw ConfigError(what);
}

SimilarityResolver resolver_for(const fs::path& out) {
  return [dir = similarity_dir(out)](const std::string& key) {
    const auto path = dir / (key + ".csv");
    if (!fs::exists(path)) throw DataError("missing similarity cache " + path.string());
    return read_similarity(path);
  };
}

struct LoadedModel {
  std::string name;
  std::string kind;
  std::optional<TrainedModel> trained;
  std::optional<ScoreModel> baseline;

  Scorer scorer(const InteractionMatrix& train) const {
    return trained ? trained->scorer() : baseline->scorer(train);
  }
};

std::vector<LoadedModel> load_models(const ExperimentConfig& config) {
  std::vector<std::string> names;
  for (const auto& m : config.models) names.push_back(m.name);
  for (const auto& b : config.baselines) names.push_back(b.name);
  if (names.empty()) throw ConfigError("config lists no models");
  std::vector<std::string> missing;
  for (const auto& n : names) {
    const auto path = model_dir(config.output) / (n + ".model");
    if (!fs::exists(path)) missing.push_back(path.string());
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += "\n  " + m;
    throw DataError("missing model files (run train first):" + list);
  }
  const auto resolve = resolver_for(config.output);
  std::vector<LoadedModel> models;
  for (std::size_t n = 0; n < names.size(); ++n) {
    const auto file = read_model_file(model_dir(config.output) / (names[n] + ".model"));
    LoadedModel m;
    m.name = names[n];
    m.kind = file.get("kind");
    if (n < config.models.size()) {
      m.trained = trained_model_from_file(file, resolve);
    } else {
      m.baseline = score_model_from_file(file, resolve);
    }
    models.push_back(std::move(m));
  }
  return models;
}

}  // namespace

DatasetSplit load_split(const fs::path& output) {
  const auto dir = split_dir(output);
  if (!fs::exists(dir / "split.json")) throw DataError("no split in " + dir.string() + " (run preprocess first)");
  Json meta;
  try {
    meta = Json::parse(read_text(dir / "split.json"));
  } catch (const Json::exception&) {
    throw DataError("malformed " + (dir / "split.json").string());
  }
  const Index n_users = meta.at("n_users").get<Index>();
  const Index n_items = meta.at("n_items").get<Index>();
  return {read_matrix(dir / "train.tsv", n_users, n_items), read_matrix(dir / "validation.tsv", n_users, n_items),
          read_matrix(dir / "test.tsv", n_users, n_items)};
}

void cmd_preprocess(const ExperimentConfig& config) {
  const auto dir = split_dir(config.output);
  fs::create_directories(dir);

  InteractionMatrix matrix;
  std::vector<std::string> user_tokens, item_tokens;
  if (config.dataset.synthetic) {
    const auto& s = *config.dataset.synthetic;
    matrix = synthesize_powerlaw(s.users, s.items, s.interactions, s.exponent, s.seed);
    for (Index u = 0; u < matrix.n_users(); ++u) user_tokens.push_back(std::to_string(u));
    for (Index i = 0; i < matrix.n_items(); ++i) item_tokens.push_back(std::to_string(i));
  } else {
    auto loaded = load_interactions(*config.dataset.path, config.dataset.format);
    const auto kept = config.preprocess.threshold ? binarize(loaded.interactions, *config.preprocess.threshold)
                                                  : loaded.interactions;
    matrix = InteractionMatrix::from_interactions(loaded.n_users(), loaded.n_items(), kept);
    user_tokens = std::move(loaded.user_tokens);
    item_tokens = std::move(loaded.item_tokens);
  }
  if (config.preprocess.min_interactions > 1 || config.dataset.path) {
    auto filtered = core_filter(matrix, config.preprocess.min_interactions, config.preprocess.filter);
    std::vector<std::string> users, items;
    for (Index u : filtered.kept_users) users.push_back(user_tokens[u]);
    for (Index i : filtered.kept_items) items.push_back(item_tokens[i]);
    matrix = std::move(filtered.matrix);
    user_tokens = std::move(users);
    item_tokens = std::move(items);
  }
  if (matrix.empty()) throw DataError("dataset is empty after preprocessing");

  const auto split = holdout_split(matrix, config.split, config.split_seed);
  write_matrix(dir / "train.tsv", split.train);
  write_matrix(dir / "validation.tsv", split.validation);
  write_matrix(dir / "test.tsv", split.test);
  write_index_map(dir / "user_map.csv", user_tokens);
  write_index_map(dir / "item_map.csv", item_tokens);

  Json meta;
  meta["dataset"] = config.dataset.name;
  meta["n_users"] = matrix.n_users();
  meta["n_items"] = matrix.n_items();
  meta["train"] = split.train.nnz();
  meta["validation"] = split.validation.nnz();
  meta["test"] = split.test.nnz();
  meta["seed"] = config.split_seed;
  meta["content_hash"] = to_hex(matrix.content_hash());
  write_text(dir / "split.json", meta.dump(2) + "\n");

  const double density =
      static_cast<double>(matrix.nnz()) / (static_cast<double>(matrix.n_users()) * static_cast<double>(matrix.n_items()));
  write_text(dir / "stats.csv", "dataset,users,items,interactions,density\n" + config.dataset.name + "," +
                                    std::to_string(matrix.n_users()) + "," + std::to_string(matrix.n_items()) + "," +
                                    std::to_string(matrix.nnz()) + "," + format_double(density) + "\n");
  Json stats;
  stats["dataset"] = config.dataset.name;
  stats["users"] = matrix.n_users();
  stats["items"] = matrix.n_items();
  stats["interactions"] = matrix.nnz();
  stats["density"] = density;
  write_text(dir / "stats.json", stats.dump(2) + "\n");
}

void cmd_train(const ExperimentConfig& config) {
  const auto split = load_split(config.output);
  const auto sims = similarity_dir(config.output);
  const auto models = model_dir(config.output);
  fs::create_directories(sims);
  fs::create_directories(models);
  for (const auto& m : config.models) {
    try {
      std::string user_key, item_key;
      const auto su = cached_similarity(sims, split.train, Axis::user, m.config.user_k, m.config.user_shrink, &user_key);
      const auto si = cached_similarity(sims, split.train, Axis::item, m.config.item_k, m.config.item_shrink, &item_key);
      const auto model = train(split, m.config, su, si);
      write_model_file(models / (m.name + ".model"), to_model_file(model, user_key, item_key));
      write_history_csv(models / (m.name + ".history.csv"), model.history);
    } catch (const Error& e) {
      rethrow_annotated(e, "model '" + m.name + "' (" + to_hex(m.config.hash()) + ")");
    }
  }
  for (const auto& b : config.baselines) {
    try {
      ScoreModel model;
      std::string key;
      switch (b.kind) {
        case BaselineKind::item_knn:
        case BaselineKind::user_knn: {
          const Axis axis = b.kind == BaselineKind::item_knn ? Axis::item : Axis::user;
          if (b.k < 1) throw ConfigError("knn baselines need k >= 1");
          model.kind = b.kind;
          model.similarity = cached_similarity(sims, split.train, axis, b.k, b.shrink, &key);
          break;
        }
        case BaselineKind::slim_bpr:
          model = fit_slim_bpr(split.train, b.slim);
          break;
        case BaselineKind::pure_svd:
          model = fit_pure_svd(split.train, b.factors, b.seed);
          break;
      }
      write_model_file(models / (b.name + ".model"), to_model_file(model, key));
    } catch (const Error& e) {
      rethrow_annotated(e, "baseline '" + b.name + "'");
    }
  }
}

void cmd_evaluate(const ExperimentConfig& config) {
  const auto split = load_split(config.output);
  const auto models = load_models(config);
  const auto dir = config.output / "eval";
  fs::create_directories(dir);

  const auto tail = longtail_items(split.train, config.tail_fraction);
  const auto truth = restrict_to_profiled_users(restrict_to_items(split.test, tail), split.train);
  const Index depth = *std::max_element(config.cutoffs.begin(), config.cutoffs.end());

  std::string csv = "algorithm,dataset,metric,cutoff,value\n";
  std::string per_user = "algorithm,metric,cutoff,user,value\n";
  Json results = Json::array();
  for (const auto& m : models) {
    const auto recs = recommend_topn(m.scorer(split.train), split.train, depth);
    const auto report = evaluate(recs, truth, config.cutoffs);
    for (const auto& e : report.entries) {
      csv += m.name + "," + config.dataset.name + "," + e.metric + "," + std::to_string(e.cutoff) + "," +
             format_double(e.result.mean) + "\n";
      for (std::size_t n = 0; n < e.result.users.size(); ++n) {
        per_user += m.name + "," + e.metric + "," + std::to_string(e.cutoff) + "," +
                    std::to_string(e.result.users[n]) + "," + format_double(e.result.values[n]) + "\n";
      }
      results.push_back(
          {{"algorithm", m.name}, {"kind", m.kind}, {"metric", e.metric}, {"cutoff", e.cutoff}, {"value", e.result.mean}});
    }
  }
  write_text(dir / "eval.csv", csv);
  write_text(dir / "per_user.csv", per_user);
  Json summary;
  summary["dataset"] = config.dataset.name;
  summary["tail_fraction"] = config.tail_fraction;
  summary["longtail_items"] = tail.size();
  summary["evaluated_users"] = truth.n_users() == 0 ? 0 : [&] {
    Index n = 0;
    for (Index u = 0; u < truth.n_users(); ++u) n += truth.row_size(u) > 0;
    return n;
  }();
  summary["results"] = results;
  write_text(dir / "eval.json", summary.dump(2) + "\n");
}

void cmd_stability(const ExperimentConfig& config) {
  if (config.models.empty()) throw ConfigError("config lists no factorization models");
  const auto split = load_split(config.output);
  const auto dir = config.output / "stability";
  fs::create_directories(dir / "entities");
  fs::create_directories(similarity_dir(config.output));
  const auto bins = popularity_bins(split.train, config.stability.bin_thresholds);

  std::string summary_csv = "model,kind,cutoff,overall\n";
  std::string per_bin_csv = "model,cutoff,bin,mean_jaccard\n";
  std::string failures_csv = "model,seed,error\n";
  Json summary = Json::array();
  bool any_failure = false;

  for (const auto& m : config.models) {
    const auto su = cached_similarity(similarity_dir(config.output), split.train, Axis::user, m.config.user_k,
                                      m.config.user_shrink);
    const auto si = cached_similarity(similarity_dir(config.output), split.train, Axis::item, m.config.item_k,
                                      m.config.item_shrink);
    const auto runs = run_seeds(split, m.config, su, si, config.stability.seeds);
    for (const auto& [seed, error] : runs.failures) {
      any_failure = true;
      std::cerr << "stability: model '" << m.name << "' seed " << seed << " failed: " << error << "\n";
      std::string clean = error;
      std::replace(clean.begin(), clean.end(), ',', ';');
      failures_csv += m.name + "," + std::to_string(seed) + "," + clean + "\n";
    }
    if (runs.models.size() < 2) {
      std::cerr << "stability: model '" << m.name << "' has fewer than 2 successful runs; skipped\n";
      continue;
    }

    std::vector<StabilityReport> reports;
    std::vector<Scorer> scorers;
    for (const auto& t : runs.models) scorers.push_back(t.scorer());
    reports.push_back(recommendation_stability(scorers, split.train, config.stability.list_length));
    for (Axis axis : {Axis::user, Axis::item}) {
      const Index n = axis == Axis::user ? split.train.n_users() : split.train.n_items();
      for (Index k : config.stability.neighbor_cutoffs) {
        if (k >= n) {
          std::cerr << "stability: K=" << k << " is not below the " << to_string(axis) << " count; skipped\n";
          continue;
        }
        auto report = representation_stability(runs.models, axis, k, config.stability.embeddings);
        if (axis == Axis::item) report = per_bin_stability(std::move(report), bins);
        reports.push_back(std::move(report));
      }
    }

    Json model_json;
    model_json["model"] = m.name;
    model_json["kind"] = m.config.kind();
    model_json["seeds"] = runs.seeds;
    Json entries = Json::array();
    for (const auto& r : reports) {
      const auto kind = to_string(r.kind);
      summary_csv += m.name + "," + kind + "," + std::to_string(r.cutoff) + "," + format_double(r.overall) + "\n";
      std::string entity_csv = "entity_id,bin,mean_jaccard\n";
      for (std::size_t e = 0; e < r.entities.size(); ++e) {
        const Index id = r.entities[e];
        const std::string bin = r.kind == StabilityKind::representations_item ? std::to_string(bins.assignment[id]) : "";
        entity_csv += std::to_string(id) + "," + bin + "," + format_double(r.per_entity[e]) + "\n";
      }
      write_text(dir / "entities" / (m.name + "_" + kind + "_" + std::to_string(r.cutoff) + ".csv"), entity_csv);
      Json entry;
      entry["kind"] = kind;
      entry["cutoff"] = r.cutoff;
      entry["overall"] = number(r.overall);
      entry["entities"] = r.entities.size();
      entry["skipped"] = r.skipped;
      if (!r.per_bin.empty()) {
        Json per_bin = Json::object();
        for (const auto& [bin, v] : r.per_bin) {
          per_bin[std::to_string(bin)] = v;
          per_bin_csv += m.name + "," + std::to_string(r.cutoff) + "," + std::to_string(bin) + "," +
                         format_double(v) + "\n";
        }
        entry["per_bin"] = per_bin;
      }
      entries.push_back(entry);
    }
    model_json["reports"] = entries;
    summary.push_back(model_json);
  }
  write_text(dir / "summary.csv", summary_csv);
  write_text(dir / "per_bin.csv", per_bin_csv);
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  if (any_failure) write_text(dir / "failures.csv", failures_csv);
}

void cmd_search(const ExperimentConfig& config) {
  if (!config.search) throw ConfigError("config has no search section");
  const auto split = load_split(config.output);
  const auto& base = std::find_if(config.models.begin(), config.models.end(),
                                  [&](const NamedModel& m) { return m.name == config.search->base; })
                         ->config;
  const auto result = random_search(split, base, config.search->space);
  const auto dir = config.output / "search";
  fs::create_directories(dir);

  std::string csv =
      "# tuner: seeded random search (seed " + std::to_string(config.search->space.seed) +
      ", stands in for Bayesian optimization)\n"
      "trial,algorithm,factors,learning_rate,reg_p,reg_q,user_k,item_k,user_shrink,item_shrink,val_map,epochs_run,"
      "status\n";
  for (const auto& t : result.trials) {
    std::string status = t.status;
    std::replace(status.begin(), status.end(), ',', ';');
    const auto& c = t.config;
    csv += std::to_string(t.index) + "," + to_string(c.algorithm) + "," + std::to_string(c.factors) + "," +
           format_double(c.learning_rate) + "," + format_double(c.reg_p) + "," + format_double(c.reg_q) + "," +
           std::to_string(c.user_k) + "," + std::to_string(c.item_k) + "," + format_double(c.user_shrink) + "," +
           format_double(c.item_shrink) + "," + (std::isnan(t.val_metric) ? "" : format_double(t.val_metric)) + "," +
           std::to_string(t.epochs_run) + "," + status + "\n";
  }
  write_text(dir / "trials.csv", csv);

  YAML::Emitter out;
  out << YAML::BeginMap << YAML::Key << "name" << YAML::Value << config.search->base + "-best";
  for (const auto& [k, v] : config_fields(result.best_trial().config)) out << YAML::Key << k << YAML::Value << v;
  out << YAML::Key << "val_map" << YAML::Value << format_double(result.best_trial().val_metric) << YAML::EndMap;
  write_text(dir / "best.yaml", std::string(out.c_str()) + "\n");
}

namespace {

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(read_text(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    rows.push_back(std::move(fields));
  }
  return rows;
}

void markdown_table(std::string& md, const std::vector<std::vector<std::string>>& rows) {
  for (std::size_t r = 0; r < rows.size(); ++r) {
    md += "|";
    for (const auto& f : rows[r]) md += " " + f + " |";
    md += "\n";
    if (r == 0) {
      md += "|";
      for (std::size_t c = 0; c < rows[r].size(); ++c) md += " --- |";
      md += "\n";
    }
  }
  md += "\n";
}

}  // namespace

void cmd_report(const ExperimentConfig& config) {
  const fs::path sources[] = {config.output / "split" / "stats.csv", config.output / "eval" / "eval.csv",
                              config.output / "stability" / "summary.csv", config.output / "stability" / "per_bin.csv",
                              config.output / "search" / "trials.csv"};
  const char* titles[] = {"Dataset", "Long-tail accuracy", "Stability", "Item stability per popularity bin",
                          "Search trials"};
  std::string md = "# Experiment report: " + config.dataset.name + "\n\n";
  bool any = false;
  for (std::size_t s = 0; s < std::size(sources); ++s) {
    if (!fs::exists(sources[s])) continue;
    any = true;
    md += std::string("## ") + titles[s] + "\n\n";
    markdown_table(md, read_csv_rows(sources[s]));
  }
  if (!any) throw DataError("nothing to report under " + config.output.string());
  fs::create_directories(config.output / "report");
  write_text(config.output / "report" / "report.md", md);
}

}  // namespace nnmf
