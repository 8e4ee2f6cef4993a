#include "nnmf/stability.hpp"

#include <algorithm>
#include <cmath>

namespace nnmf {

double jaccard(std::span<const Index> a, std::span<const Index> b, Index* empty_pairs) {
  std::vector<Index> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  x.erase(std::unique(x.begin(), x.end()), x.end());
  std::sort(y.begin(), y.end());
  y.erase(std::unique(y.begin(), y.end()), y.end());
  if (x.empty() && y.empty()) {
    if (empty_pairs) ++*empty_pairs;
    return 1.0;
  }
  std::size_t common = 0;
  for (std::size_t i = 0, j = 0; i < x.size() && j < y.size();) {
    if (x[i] == y[j]) {
      ++common, ++i, ++j;
    } else if (x[i] < y[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return static_cast<double>(common) / static_cast<double>(x.size() + y.size() - common);
}

std::string to_string(StabilityKind kind) {
  switch (kind) {
    case StabilityKind::recommendations: return "recommendations";
    case StabilityKind::representations_item: return "representations_item";
    case StabilityKind::representations_user: return "representations_user";
  }
  return "unknown";
}

SeedRuns run_seeds(const DatasetSplit& split, const ModelConfig& config, const SimilarityMatrix& user_similarity,
                   const SimilarityMatrix& item_similarity, std::span<const std::uint64_t> seeds) {
  if (seeds.size() < 2) throw ConfigError("stability needs at least 2 seeds");
  const auto n = static_cast<Index>(seeds.size());
  std::vector<TrainedModel> models(seeds.size());
  std::vector<std::string> errors(seeds.size());
  std::vector<char> ok(seeds.size(), 0);
  parallel_for(0, n, [&](Index lo, Index hi) {
    for (Index s = lo; s < hi; ++s) {
      ModelConfig run = config;
      run.init_seed = seeds[s];
      try {
        models[s] = train(split, run, user_similarity, item_similarity);
        ok[s] = 1;
      } catch (const Error& e) {
        errors[s] = e.what();
      }
    }
  });
  SeedRuns result;
  for (Index s = 0; s < n; ++s) {
    if (ok[s]) {
      result.seeds.push_back(seeds[s]);
      result.models.push_back(std::move(models[s]));
    } else {
      result.failures.emplace_back(seeds[s], errors[s]);
    }
  }
  return result;
}

namespace {

void finish(StabilityReport& report) {
  double sum = 0.0;
  for (double v : report.per_entity) sum += v;
  report.overall = report.per_entity.empty() ? 0.0 : sum / static_cast<double>(report.per_entity.size());
}

}  // namespace

StabilityReport recommendation_stability(std::span<const RankedList> lists) {
  if (lists.size() < 2) throw ConfigError("stability needs at least 2 models");
  const Index n_users = lists.front().n_users();
  for (const auto& l : lists) {
    if (l.n_users() != n_users) throw DataError("ranked lists disagree on the number of users");
  }
  StabilityReport report;
  report.kind = StabilityKind::recommendations;
  report.cutoff = lists.front().cutoff;
  for (Index u = 0; u < n_users; ++u) {
    double sum = 0.0;
    for (std::size_t m = 1; m < lists.size(); ++m) {
      sum += jaccard(lists.front().lists[u], lists[m].lists[u], &report.empty_pairs);
    }
    report.entities.push_back(u);
    report.per_entity.push_back(sum / static_cast<double>(lists.size() - 1));
  }
  finish(report);
  return report;
}

StabilityReport recommendation_stability(std::span<const Scorer> scorers, const InteractionMatrix& train, Index n) {
  std::vector<RankedList> lists;
  for (const auto& s : scorers) lists.push_back(recommend_topn(s, train, n));
  return recommendation_stability(lists);
}

std::vector<std::vector<Index>> cosine_neighbors(const Matrix& embeddings, Index k) {
  const Index n = embeddings.rows();
  if (k < 1 || k >= n) throw ConfigError("neighbor count must lie in [1, " + std::to_string(n - 1) + "]");
  Matrix unit = embeddings;
  std::vector<char> zero(n, 0);
  for (Index r = 0; r < n; ++r) {
    const double norm = std::sqrt(sequential_dot(unit.row(r), unit.row(r)));
    if (norm == 0.0) {
      zero[r] = 1;
    } else {
      for (Index d = 0; d < unit.cols(); ++d) unit(r, d) /= norm;
    }
  }
  std::vector<std::vector<Index>> neighbors(n);
  parallel_for(0, n, [&](Index lo, Index hi) {
    std::vector<double> sims(n);
    std::vector<Index> candidates;
    for (Index r = lo; r < hi; ++r) {
      if (zero[r]) continue;
      candidates.clear();
      for (Index c = 0; c < n; ++c) {
        if (c == r || zero[c]) continue;
        sims[c] = sequential_dot(unit.row(r), unit.row(c));
        candidates.push_back(c);
      }
      const auto keep = std::min<std::size_t>(static_cast<std::size_t>(k), candidates.size());
      std::partial_sort(candidates.begin(), candidates.begin() + keep, candidates.end(),
                        [&](Index a, Index b) { return sims[a] > sims[b] || (sims[a] == sims[b] && a < b); });
      neighbors[r].assign(candidates.begin(), candidates.begin() + keep);
    }
  });
  return neighbors;
}

StabilityReport representation_stability(std::span<const Matrix* const> embeddings, StabilityKind kind, Index k) {
  if (embeddings.size() < 2) throw ConfigError("stability needs at least 2 models");
  const Index n = embeddings.front()->rows();
  std::vector<std::vector<std::vector<Index>>> neighbors;
  std::vector<char> skip(n, 0);
  for (const Matrix* e : embeddings) {
    if (e->rows() != n) throw DataError("embedding matrices disagree on the number of rows");
    neighbors.push_back(cosine_neighbors(*e, k));
    for (Index r = 0; r < n; ++r) {
      if (e->row(r).squaredNorm() == 0.0) skip[r] = 1;
    }
  }
  StabilityReport report;
  report.kind = kind;
  report.cutoff = k;
  for (Index r = 0; r < n; ++r) {
    if (skip[r]) {
      ++report.skipped;
      continue;
    }
    double sum = 0.0;
    for (std::size_t m = 1; m < neighbors.size(); ++m) {
      sum += jaccard(neighbors.front()[r], neighbors[m][r], &report.empty_pairs);
    }
    report.entities.push_back(r);
    report.per_entity.push_back(sum / static_cast<double>(neighbors.size() - 1));
  }
  finish(report);
  return report;
}

StabilityReport representation_stability(std::span<const TrainedModel> models, Axis axis, Index k,
                                         EmbeddingSource source) {
  std::vector<const Matrix*> embeddings;
  for (const auto& m : models) {
    const EmbeddingPair& pair = source == EmbeddingSource::materialized ? m.materialized : m.base;
    embeddings.push_back(axis == Axis::user ? &pair.users : &pair.items);
  }
  return representation_stability(
      embeddings, axis == Axis::user ? StabilityKind::representations_user : StabilityKind::representations_item, k);
}

StabilityReport per_bin_stability(StabilityReport report, const PopularityBins& bins) {
  if (report.kind != StabilityKind::representations_item) {
    throw ConfigError("per-bin stability is defined for item representations only");
  }
  std::map<int, std::pair<double, Index>> acc;
  for (std::size_t e = 0; e < report.entities.size(); ++e) {
    const Index item = report.entities[e];
    if (item >= static_cast<Index>(bins.assignment.size())) throw DataError("item outside popularity bins");
    const int bin = bins.assignment[item];
    if (bin == 0) continue;
    acc[bin].first += report.per_entity[e];
    acc[bin].second += 1;
  }
  report.per_bin.clear();
  for (const auto& [bin, sum] : acc) report.per_bin[bin] = sum.first / static_cast<double>(sum.second);
  return report;
}

}  // namespace nnmf
