#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "nnmf/common.hpp"

namespace nnmf {

struct Interaction {
  Index user = 0;
  Index item = 0;
  double value = 0.0;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

/// Sparse user x item preference matrix. Rows are users; within a row the
/// stored item ids are strictly increasing.
class InteractionMatrix {
 public:
  InteractionMatrix() = default;
  InteractionMatrix(Index n_users, Index n_items);

  /// Builds from a list of interactions; on duplicate (user, item) pairs the
  /// last occurrence wins. Throws DataError on out-of-range ids.
  static InteractionMatrix from_interactions(Index n_users, Index n_items,
                                             std::span<const Interaction> interactions);

  Index n_users() const { return ratings_.rows(); }
  Index n_items() const { return ratings_.cols(); }
  Index nnz() const { return ratings_.nonZeros(); }
  bool empty() const { return nnz() == 0; }

  const SparseMatrix& ratings() const { return ratings_; }

  /// Item ids of user u (sorted) and the matching values.
  std::span<const int> items_of(Index u) const;
  std::span<const double> values_of(Index u) const;
  Index row_size(Index u) const;
  bool contains(Index u, Index i) const;

  /// Stored entries per item.
  std::vector<Index> item_popularity() const;
  std::vector<Index> user_activity() const;

  /// Interactions in row-major (user, then item) order.
  std::vector<Interaction> to_interactions() const;

  /// Content hash over dims and stored triples.
  std::uint64_t content_hash() const;

 private:
  explicit InteractionMatrix(SparseMatrix ratings);
  SparseMatrix ratings_;
};

struct DelimiterSpec {
  std::string delimiter = "\t";
  bool header = false;
};

struct LoadedInteractions {
  std::vector<Interaction> interactions;
  std::vector<std::string> user_tokens;  // dense index -> original token
  std::vector<std::string> item_tokens;

  Index n_users() const { return static_cast<Index>(user_tokens.size()); }
  Index n_items() const { return static_cast<Index>(item_tokens.size()); }
  InteractionMatrix to_matrix() const;
};

/// Reads "user<d>item<d>value" records. Tokens are remapped to dense 0-based
/// indices in first-seen order; duplicate pairs keep the last value.
LoadedInteractions load_interactions(const std::filesystem::path& path, const DelimiterSpec& spec = {});

/// Writes records using the original tokens (round-trips with load_interactions).
void write_interactions(const std::filesystem::path& path, const LoadedInteractions& data,
                        const DelimiterSpec& spec = {});

/// Writes a token map as "index,token" CSV.
void write_index_map(const std::filesystem::path& path, std::span<const std::string> tokens);

/// Keeps interactions with value >= threshold and sets them to 1.
std::vector<Interaction> binarize(std::span<const Interaction> interactions, double threshold);

enum class FilterMode { fixpoint, single_pass };

struct FilterResult {
  InteractionMatrix matrix;
  std::vector<Index> kept_users;  // new index -> old index
  std::vector<Index> kept_items;
};

/// Removes users and items with fewer than min_interactions entries, repeated
/// until nothing changes (or once in single_pass mode), then re-indexes densely.
FilterResult core_filter(const InteractionMatrix& matrix, Index min_interactions,
                         FilterMode mode = FilterMode::fixpoint);

struct DatasetSplit {
  InteractionMatrix train;
  InteractionMatrix validation;
  InteractionMatrix test;
};

struct SplitRatios {
  double train = 0.6;
  double validation = 0.2;
  double test = 0.2;
};

/// Seeded global holdout. Validation and test sizes are floor(n * ratio); the
/// remainder goes to train.
DatasetSplit holdout_split(const InteractionMatrix& matrix, const SplitRatios& ratios, std::uint64_t seed);

/// Synthetic implicit dataset: items drawn with probability proportional to
/// (id + 1)^-exponent, users uniformly, duplicates rejected.
InteractionMatrix synthesize_powerlaw(Index n_users, Index n_items, Index n_interactions, double exponent,
                                      std::uint64_t seed);

/// Split files: one "user\titem\tvalue" file per partition plus dims.
void write_matrix(const std::filesystem::path& path, const InteractionMatrix& matrix);
InteractionMatrix read_matrix(const std::filesystem::path& path, Index n_users, Index n_items);

}  // namespace nnmf
