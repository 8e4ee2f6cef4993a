#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "nnmf/common.hpp"
#include "nnmf/data.hpp"

namespace nnmf {

enum class Axis { user, item };

std::string to_string(Axis axis);
Axis parse_axis(const std::string& text);

/// Square sparse similarity with a unit self-entry in every row and at most
/// `k` further entries per row, all non-negative. Neighbor ids are sorted.
struct SimilarityMatrix {
  SparseMatrix weights;
  Index k = 0;

  Index size() const { return weights.rows(); }
  bool is_identity() const { return weights.nonZeros() == weights.rows(); }
};

/// Shrunk cosine between the profiles of `axis` entities,
///   s(x, y) = r_x . r_y / (|r_x| |r_y| + shrink),
/// keeping per row the k largest positive non-self values (ties toward the
/// smaller id) plus the self-entry fixed at 1.
SimilarityMatrix cosine_topk(const InteractionMatrix& matrix, Axis axis, Index k, double shrink);

/// Diagonal-only similarity; plugging it into NNMF gives plain MF.
SimilarityMatrix identity_similarity(Index n);

/// Cache key over axis, k, shrink and the dataset content hash.
std::string similarity_cache_key(Axis axis, Index k, double shrink, std::uint64_t dataset_hash);

/// Sorted coordinate triples "row,col,weight" with a "# n=<n> k=<k>" first line.
void write_similarity(const std::filesystem::path& path, const SimilarityMatrix& s);
SimilarityMatrix read_similarity(const std::filesystem::path& path);

/// Loads `<dir>/<key>.csv` when present, otherwise computes and stores it.
/// k == 0 yields the identity without touching the cache.
SimilarityMatrix cached_similarity(const std::filesystem::path& dir, const InteractionMatrix& matrix, Axis axis,
                                   Index k, double shrink, std::string* key_out = nullptr);

}  // namespace nnmf
