#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nnmf/baselines.hpp"
#include "nnmf/data.hpp"
#include "nnmf/factorization.hpp"
#include "nnmf/stability.hpp"

namespace nnmf {

struct SyntheticSpec {
  Index users = 1000;
  Index items = 500;
  Index interactions = 20000;
  double exponent = 1.0;
  std::uint64_t seed = 1;
};

struct DatasetConfig {
  std::string name;  // defaults to the file stem or "synthetic"
  std::optional<std::filesystem::path> path;
  std::optional<SyntheticSpec> synthetic;
  DelimiterSpec format;
};

struct PreprocessConfig {
  std::optional<double> threshold;  // binarization threshold; absent keeps values
  Index min_interactions = 5;       // 1 disables filtering
  FilterMode filter = FilterMode::fixpoint;
};

struct NamedModel {
  std::string name;
  ModelConfig config;
};

struct BaselineConfig {
  std::string name;
  BaselineKind kind = BaselineKind::item_knn;
  Index k = 100;
  double shrink = 0.0;
  Index factors = 50;
  SlimConfig slim;
  std::uint64_t seed = 1;
};

struct StabilityConfig {
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  Index list_length = 10;
  std::vector<Index> neighbor_cutoffs{10, 100};
  std::vector<double> bin_thresholds = kDefaultBinThresholds;
  EmbeddingSource embeddings = EmbeddingSource::materialized;
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Random-search space. Log-uniform for learning rate and regularization,
/// integer-uniform for the rest. Unset ranges keep the base model's value.
/// Each parameter of each trial is drawn from its own seeded stream, so two
/// spaces sharing a seed propose the same values for their common ranges.
struct SearchSpace {
  std::optional<Range> learning_rate;
  std::optional<Range> reg;
  std::optional<Range> factors;
  std::optional<Range> user_k;
  std::optional<Range> item_k;
  std::optional<Range> shrink;
  int budget = 20;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SearchConfig {
  std::string base;  // name of the model the trials start from
  SearchSpace space;
};

struct ExperimentConfig {
  std::filesystem::path output = "out";
  int threads = 1;
  DatasetConfig dataset;
  PreprocessConfig preprocess;
  SplitRatios split;
  std::uint64_t split_seed = 1;
  std::vector<NamedModel> models;
  std::vector<BaselineConfig> baselines;
  std::vector<Index> cutoffs{5, 10};
  double tail_fraction = 0.66;
  StabilityConfig stability;
  std::optional<SearchConfig> search;

  void validate() const;
};

/// Parses the YAML experiment file; relative dataset paths resolve against
/// the file's directory. Throws ConfigError.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig parse_experiment_config(const std::string& yaml_text,
                                         const std::filesystem::path& base_dir = ".");

struct Trial {
  int index = 0;
  ModelConfig config;
  double val_metric = NAN;
  int epochs_run = 0;
  std::string status;  // "ok" or the error message
};

struct SearchResult {
  std::vector<Trial> trials;
  std::size_t best = 0;

  const Trial& best_trial() const { return trials.at(best); }
};

/// Draws the trial configurations of a search (no training).
std::vector<ModelConfig> sample_trials(const ModelConfig& base, const SearchSpace& space);

/// Trains every trial with early stopping and ranks by validation MAP.
/// Trials run concurrently. Throws DivergenceError if no trial succeeds.
SearchResult random_search(const DatasetSplit& split, const ModelConfig& base, const SearchSpace& space);

// Pipeline commands. Each reads and writes files under config.output only.
void cmd_preprocess(const ExperimentConfig& config);
void cmd_train(const ExperimentConfig& config);
void cmd_evaluate(const ExperimentConfig& config);
void cmd_stability(const ExperimentConfig& config);
void cmd_search(const ExperimentConfig& config);
void cmd_report(const ExperimentConfig& config);

/// Split written by cmd_preprocess.
DatasetSplit load_split(const std::filesystem::path& output);

}  // namespace nnmf
