#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nnmf/common.hpp"
#include "nnmf/data.hpp"

namespace nnmf {

/// Fills `scores` (length n_items) for one user. Must be safe to call
/// concurrently for different users.
using Scorer = std::function<void(Index user, Eigen::Ref<Vector> scores)>;

/// Per-user top-N items, best first. Train items of the user never appear;
/// equal scores are ordered by ascending item id.
struct RankedList {
  Index cutoff = 0;
  std::vector<std::vector<Index>> lists;

  Index n_users() const { return static_cast<Index>(lists.size()); }
};

RankedList recommend_topn(const Scorer& scorer, const InteractionMatrix& train, Index n);

/// Same ranking rule applied to a dense users x items score table.
RankedList recommend_topn(const Matrix& scores, const InteractionMatrix& train, Index n);

/// Scores through materialized embeddings: score(u, i) = users.row(u) . items.row(i).
/// The scorer keeps references; both matrices must outlive it.
Scorer embedding_scorer(const Matrix& users, const Matrix& items);

struct UserMetric {
  double mean = 0.0;
  std::vector<Index> users;  // users with non-empty ground truth
  std::vector<double> values;
};

/// AP@k = sum_{n<=k} precision@n * rel(n) / min(k, |GT_u|), averaged over
/// users with non-empty ground truth. Throws DataError if there are none.
UserMetric average_precision_at_k(const RankedList& recs, const InteractionMatrix& ground_truth, Index k);
UserMetric recall_per_user_at_k(const RankedList& recs, const InteractionMatrix& ground_truth, Index k);

double map_at_k(const RankedList& recs, const InteractionMatrix& ground_truth, Index k);
double recall_at_k(const RankedList& recs, const InteractionMatrix& ground_truth, Index k);

struct EvalEntry {
  std::string metric;  // "MAP" or "Recall"
  Index cutoff = 0;
  UserMetric result;
};

struct EvalReport {
  std::vector<EvalEntry> entries;

  double value(const std::string& metric, Index cutoff) const;
};

/// MAP and Recall at each cutoff.
EvalReport evaluate(const RankedList& recs, const InteractionMatrix& ground_truth, std::span<const Index> cutoffs);

/// Least popular items (by train interactions) accounting for `tail_fraction`
/// of the interactions: the complement of the minimal most-popular prefix
/// whose share reaches 1 - tail_fraction. Items without train interactions
/// belong to neither part.
std::vector<Index> longtail_items(const InteractionMatrix& train, double tail_fraction = 0.66);
std::vector<Index> short_head_items(const InteractionMatrix& train, double tail_fraction = 0.66);

/// Keeps only the entries whose item is listed.
InteractionMatrix restrict_to_items(const InteractionMatrix& matrix, std::span<const Index> items);

/// Drops ground-truth rows of users with an empty train profile.
InteractionMatrix restrict_to_profiled_users(const InteractionMatrix& ground_truth, const InteractionMatrix& train);

inline const std::vector<double> kDefaultBinThresholds{1.0, 0.66, 0.4, 0.3, 0.2, 0.1, 0.0};

/// Item popularity bins over cumulative interaction share. With items sorted
/// by descending popularity, bin b holds the items whose interactions start
/// inside [1 - t[b-1], 1 - t[b]); bin 1 is therefore the short head.
struct PopularityBins {
  std::vector<double> thresholds;
  std::vector<int> assignment;  // item -> bin in 1..n_bins, 0 for items without interactions

  int n_bins() const { return static_cast<int>(thresholds.size()) - 1; }
  std::vector<Index> items_in(int bin) const;
};

PopularityBins popularity_bins(const InteractionMatrix& train,
                               std::span<const double> thresholds = kDefaultBinThresholds);

/// Items with at least one interaction, most popular first (ties by id).
std::vector<Index> items_by_popularity(const InteractionMatrix& train);

}  // namespace nnmf
