#include "nnmf/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace nnmf {

namespace {

void top_items(const Vector& scores, std::span<const int> masked, Index n, std::vector<Index>& out,
               std::vector<Index>& scratch) {
  const Index n_items = scores.size();
  scratch.clear();
  std::size_t next_masked = 0;
  for (Index i = 0; i < n_items; ++i) {
    if (next_masked < masked.size() && masked[next_masked] == i) {
      ++next_masked;
      continue;
    }
    if (std::isnan(scores[i])) continue;
    scratch.push_back(i);
  }
  const auto keep = std::min<std::size_t>(static_cast<std::size_t>(n), scratch.size());
  std::partial_sort(scratch.begin(), scratch.begin() + keep, scratch.end(), [&](Index a, Index b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  });
  out.assign(scratch.begin(), scratch.begin() + keep);
}

UserMetric per_user_metric(const RankedList& recs, const InteractionMatrix& ground_truth, Index k,
                           double (*metric)(std::span<const Index>, std::span<const int>, Index)) {
  if (k < 1) throw ConfigError("metric cutoff must be at least 1");
  if (k > recs.cutoff) {
    throw ConfigError("cutoff " + std::to_string(k) + " exceeds list length " + std::to_string(recs.cutoff));
  }
  if (recs.n_users() != ground_truth.n_users()) throw DataError("ranked lists and ground truth disagree on users");
  UserMetric result;
  double sum = 0.0;
  for (Index u = 0; u < ground_truth.n_users(); ++u) {
    const auto relevant = ground_truth.items_of(u);
    if (relevant.empty()) continue;
    const auto& list = recs.lists[u];
    const auto head = std::span<const Index>(list).first(std::min<std::size_t>(list.size(), static_cast<std::size_t>(k)));
    const double v = metric(head, relevant, k);
    result.users.push_back(u);
    result.values.push_back(v);
    sum += v;
  }
  if (result.users.empty()) throw DataError("metric undefined: no user has ground-truth items");
  result.mean = sum / static_cast<double>(result.users.size());
  return result;
}

bool is_relevant(std::span<const int> relevant, Index item) {
  return std::binary_search(relevant.begin(), relevant.end(), static_cast<int>(item));
}

double ap_of(std::span<const Index> head, std::span<const int> relevant, Index k) {
  double hits = 0.0, sum = 0.0;
  for (std::size_t n = 0; n < head.size(); ++n) {
    if (is_relevant(relevant, head[n])) {
      hits += 1.0;
      sum += hits / static_cast<double>(n + 1);
    }
  }
  return sum / static_cast<double>(std::min<Index>(k, static_cast<Index>(relevant.size())));
}

double recall_of(std::span<const Index> head, std::span<const int> relevant, Index) {
  double hits = 0.0;
  for (Index item : head) hits += is_relevant(relevant, item) ? 1.0 : 0.0;
  return hits / static_cast<double>(relevant.size());
}

}  // namespace

RankedList recommend_topn(const Scorer& scorer, const InteractionMatrix& train, Index n) {
  if (n < 1) throw ConfigError("top-N cutoff must be at least 1");
  RankedList recs;
  recs.cutoff = n;
  recs.lists.resize(train.n_users());
  parallel_for(0, train.n_users(), [&](Index lo, Index hi) {
    Vector scores(train.n_items());
    std::vector<Index> scratch;
    for (Index u = lo; u < hi; ++u) {
      scorer(u, scores);
      top_items(scores, train.items_of(u), n, recs.lists[u], scratch);
    }
  });
  return recs;
}

RankedList recommend_topn(const Matrix& scores, const InteractionMatrix& train, Index n) {
  if (scores.rows() != train.n_users() || scores.cols() != train.n_items()) {
    throw DataError("score table dimensions do not match the train matrix");
  }
  return recommend_topn([&](Index u, Eigen::Ref<Vector> out) { out = scores.row(u).transpose(); }, train, n);
}

Scorer embedding_scorer(const Matrix& users, const Matrix& items) {
  return [&users, &items](Index u, Eigen::Ref<Vector> out) {
    for (Index i = 0; i < items.rows(); ++i) out(i) = sequential_dot(users.row(u), items.row(i));
  };
}

UserMetric average_precision_at_k(const RankedList& recs, const InteractionMatrix& ground_truth, Index k) {
  return per_user_metric(recs, ground_truth, k, ap_of);
}

UserMetric recall_per_user_at_k(const RankedList& recs, const InteractionMatrix& ground_truth, Index k) {
  return per_user_metric(recs, ground_truth, k, recall_of);
}

double map_at_k(const RankedList& recs, const InteractionMatrix& ground_truth, Index k) {
  return average_precision_at_k(recs, ground_truth, k).mean;
}

double recall_at_k(const RankedList& recs, const InteractionMatrix& ground_truth, Index k) {
  return recall_per_user_at_k(recs, ground_truth, k).mean;
}

double EvalReport::value(const std::string& metric, Index cutoff) const {
  for (const auto& e : entries) {
    if (e.metric == metric && e.cutoff == cutoff) return e.result.mean;
  }
  throw ConfigError("report has no " + metric + "@" + std::to_string(cutoff));
}

EvalReport evaluate(const RankedList& recs, const InteractionMatrix& ground_truth, std::span<const Index> cutoffs) {
  EvalReport report;
  for (Index k : cutoffs) report.entries.push_back({"MAP", k, average_precision_at_k(recs, ground_truth, k)});
  for (Index k : cutoffs) report.entries.push_back({"Recall", k, recall_per_user_at_k(recs, ground_truth, k)});
  return report;
}

std::vector<Index> items_by_popularity(const InteractionMatrix& train) {
  const auto popularity = train.item_popularity();
  std::vector<Index> order;
  for (Index i = 0; i < train.n_items(); ++i) {
    if (popularity[i] > 0) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return popularity[a] > popularity[b]; });
  return order;
}

namespace {

// Items whose interactions start before `share` of the total (the minimal
// most-popular prefix reaching that share), and the rest.
std::pair<std::vector<Index>, std::vector<Index>> split_by_share(const InteractionMatrix& train, double share) {
  const auto popularity = train.item_popularity();
  const auto total = static_cast<double>(std::accumulate(popularity.begin(), popularity.end(), Index{0}));
  const double bound = share * total - 1e-9 * total;
  std::pair<std::vector<Index>, std::vector<Index>> parts;
  double before = 0.0;
  for (Index i : items_by_popularity(train)) {
    (before < bound ? parts.first : parts.second).push_back(i);
    before += static_cast<double>(popularity[i]);
  }
  std::sort(parts.first.begin(), parts.first.end());
  std::sort(parts.second.begin(), parts.second.end());
  return parts;
}

}  // namespace

std::vector<Index> longtail_items(const InteractionMatrix& train, double tail_fraction) {
  if (!(tail_fraction > 0 && tail_fraction < 1)) throw ConfigError("tail_fraction must lie in (0, 1)");
  return split_by_share(train, 1.0 - tail_fraction).second;
}

std::vector<Index> short_head_items(const InteractionMatrix& train, double tail_fraction) {
  if (!(tail_fraction > 0 && tail_fraction < 1)) throw ConfigError("tail_fraction must lie in (0, 1)");
  return split_by_share(train, 1.0 - tail_fraction).first;
}

InteractionMatrix restrict_to_items(const InteractionMatrix& matrix, std::span<const Index> items) {
  std::vector<char> keep(matrix.n_items(), 0);
  for (Index i : items) keep.at(i) = 1;
  std::vector<Interaction> kept;
  for (const auto& x : matrix.to_interactions()) {
    if (keep[x.item]) kept.push_back(x);
  }
  return InteractionMatrix::from_interactions(matrix.n_users(), matrix.n_items(), kept);
}

InteractionMatrix restrict_to_profiled_users(const InteractionMatrix& ground_truth, const InteractionMatrix& train) {
  std::vector<Interaction> kept;
  for (const auto& x : ground_truth.to_interactions()) {
    if (train.row_size(x.user) > 0) kept.push_back(x);
  }
  return InteractionMatrix::from_interactions(ground_truth.n_users(), ground_truth.n_items(), kept);
}

std::vector<Index> PopularityBins::items_in(int bin) const {
  std::vector<Index> items;
  for (Index i = 0; i < static_cast<Index>(assignment.size()); ++i) {
    if (assignment[i] == bin) items.push_back(i);
  }
  return items;
}

PopularityBins popularity_bins(const InteractionMatrix& train, std::span<const double> thresholds) {
  if (thresholds.size() < 2 || thresholds.front() != 1.0 || thresholds.back() != 0.0) {
    throw ConfigError("bin thresholds must run from 1 down to 0");
  }
  for (std::size_t b = 1; b < thresholds.size(); ++b) {
    if (!(thresholds[b] < thresholds[b - 1])) throw ConfigError("bin thresholds must be strictly descending");
  }
  PopularityBins bins;
  bins.thresholds.assign(thresholds.begin(), thresholds.end());
  bins.assignment.assign(train.n_items(), 0);

  const auto popularity = train.item_popularity();
  const auto total = static_cast<double>(std::accumulate(popularity.begin(), popularity.end(), Index{0}));
  const double tol = 1e-9 * total;
  double before = 0.0;
  for (Index i : items_by_popularity(train)) {
    int bin = bins.n_bins();
    for (int b = 1; b <= bins.n_bins(); ++b) {
      if (before < (1.0 - thresholds[b]) * total - tol) {
        bin = b;
        break;
      }
    }
    bins.assignment[i] = bin;
    before += static_cast<double>(popularity[i]);
  }
  return bins;
}

}  // namespace nnmf
