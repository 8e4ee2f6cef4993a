#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "nnmf/baselines.hpp"
#include "nnmf/factorization.hpp"

namespace nnmf {

using Fields = std::vector<std::pair<std::string, std::string>>;

/// ModelConfig as flat key/value text (also the config-file model schema).
Fields config_fields(const ModelConfig& config);
/// Missing keys keep their defaults; unknown keys are a ConfigError.
ModelConfig config_from_fields(const std::map<std::string, std::string>& fields);

/// Model file: "NNMFMODEL1" line, "key=value" header lines closed by "end",
/// then named blocks, each a "block <name> <rows> <cols>" line followed by
/// the row-major entries as little-endian float64.
struct ModelFile {
  Fields header;
  std::vector<std::pair<std::string, Matrix>> blocks;

  const std::string& get(const std::string& key) const;
  const Matrix& block(const std::string& name) const;
};

void write_model_file(const std::filesystem::path& path, const ModelFile& file);
ModelFile read_model_file(const std::filesystem::path& path);

using SimilarityResolver = std::function<SimilarityMatrix(const std::string& cache_key)>;

/// Stores base P and Q; similarities are referenced by their cache keys.
ModelFile to_model_file(const TrainedModel& model, const std::string& user_similarity_key,
                        const std::string& item_similarity_key);
/// Rebuilds base, similarities and materialized embeddings (no history).
TrainedModel trained_model_from_file(const ModelFile& file, const SimilarityResolver& resolve);

ModelFile to_model_file(const ScoreModel& model, const std::string& similarity_key);
ScoreModel score_model_from_file(const ModelFile& file, const SimilarityResolver& resolve);

/// "epoch,loss,val_metric"; val_metric is empty for epochs without evaluation.
void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history);

}  // namespace nnmf
