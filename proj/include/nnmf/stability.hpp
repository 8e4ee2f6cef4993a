#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "nnmf/common.hpp"
#include "nnmf/evaluation.hpp"
#include "nnmf/factorization.hpp"

namespace nnmf {

/// |a ∩ b| / |a ∪ b| over id sets (duplicates ignored). Two empty sets count
/// as identical (1.0) and increment `empty_pairs` when given.
double jaccard(std::span<const Index> a, std::span<const Index> b, Index* empty_pairs = nullptr);

enum class StabilityKind { recommendations, representations_item, representations_user };

std::string to_string(StabilityKind kind);

struct StabilityReport {
  StabilityKind kind = StabilityKind::recommendations;
  Index cutoff = 0;
  std::vector<Index> entities;     // evaluated entities, ascending
  std::vector<double> per_entity;  // mean Jaccard of model 1 vs each other model
  double overall = 0.0;            // mean of per_entity
  std::map<int, double> per_bin;   // filled by per_bin_stability; empty bins absent
  Index skipped = 0;               // entities with a zero-norm embedding
  Index empty_pairs = 0;           // comparisons of two empty sets
};

struct SeedRuns {
  std::vector<std::uint64_t> seeds;  // init seeds of the successful runs, in input order
  std::vector<TrainedModel> models;
  std::vector<std::pair<std::uint64_t, std::string>> failures;
};

/// One model per init seed; sample_seed stays as configured. Runs execute
/// concurrently on the worker threads but results are in seed order.
SeedRuns run_seeds(const DatasetSplit& split, const ModelConfig& config, const SimilarityMatrix& user_similarity,
                   const SimilarityMatrix& item_similarity, std::span<const std::uint64_t> seeds);

/// Model 1's top-N set of every user against every other model's.
StabilityReport recommendation_stability(std::span<const RankedList> lists);
StabilityReport recommendation_stability(std::span<const Scorer> scorers, const InteractionMatrix& train,
                                         Index n = 10);

/// Ids of the k most cosine-similar rows of each row (self excluded, ties by
/// ascending id). Zero-norm rows get an empty list and are never neighbors.
std::vector<std::vector<Index>> cosine_neighbors(const Matrix& embeddings, Index k);

/// Neighbor-set stability of one entity type across embedding matrices (one
/// per model, model 1 first). Entities with a zero-norm row in any model are
/// skipped.
StabilityReport representation_stability(std::span<const Matrix* const> embeddings, StabilityKind kind, Index k);

enum class EmbeddingSource { materialized, base };

StabilityReport representation_stability(std::span<const TrainedModel> models, Axis axis, Index k,
                                         EmbeddingSource source = EmbeddingSource::materialized);

/// Mean per-entity value within each popularity bin.
StabilityReport per_bin_stability(StabilityReport report, const PopularityBins& bins);

}  // namespace nnmf
