#include "nnmf/factorization.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace nnmf {

std::string to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::funk: return "funk";
    case Algorithm::bpr: return "bpr";
    case Algorithm::pmf: return "pmf";
  }
  return "unknown";
}

Algorithm parse_algorithm(const std::string& text) {
  if (text == "funk") return Algorithm::funk;
  if (text == "bpr") return Algorithm::bpr;
  if (text == "pmf") return Algorithm::pmf;
  throw ConfigError("unknown algorithm '" + text + "' (expected funk, bpr or pmf)");
}

std::string ModelConfig::kind() const { return to_string(algorithm) + (uses_neighbors() ? "-nnmf" : "-mf"); }

void ModelConfig::validate() const {
  if (factors < 1) throw ConfigError("factors must be at least 1");
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
  if (!(reg_p >= 0) || !(reg_q >= 0)) throw ConfigError("regularization must be non-negative");
  if (epochs_max < 1) throw ConfigError("epochs_max must be at least 1");
  if (user_k < 0 || item_k < 0) throw ConfigError("neighbor counts must be non-negative");
  if (!(user_shrink >= 0) || !(item_shrink >= 0)) throw ConfigError("shrink must be non-negative");
  if (uses_neighbors() && user_k < 2 && item_k < 2) {
    throw ConfigError("NNMF needs at least 2 neighbors for users or items (got user_k=" + std::to_string(user_k) +
                      ", item_k=" + std::to_string(item_k) + ")");
  }
  if (negative_ratio < 0) throw ConfigError("negative_ratio must be non-negative");
  if (early_stop.eval_every < 0 || early_stop.patience < 1 || early_stop.cutoff < 1) {
    throw ConfigError("invalid early stopping settings");
  }
}

std::uint64_t ModelConfig::hash() const {
  Fnv1a h;
  h.add(to_string(algorithm))
      .add(static_cast<std::uint64_t>(factors))
      .add(learning_rate)
      .add(reg_p)
      .add(reg_q)
      .add(static_cast<std::uint64_t>(epochs_max))
      .add(static_cast<std::uint64_t>(user_k))
      .add(static_cast<std::uint64_t>(item_k))
      .add(user_shrink)
      .add(item_shrink)
      .add(static_cast<std::uint64_t>(negative_ratio))
      .add(static_cast<std::uint64_t>(early_stop.eval_every))
      .add(static_cast<std::uint64_t>(early_stop.patience))
      .add(static_cast<std::uint64_t>(early_stop.cutoff))
      .add(init_seed)
      .add(sample_seed);
  return h.value();
}

EmbeddingPair init_embeddings(Index n_users, Index n_items, Index factors, std::uint64_t seed) {
  if (n_users < 1 || n_items < 1 || factors < 1) throw ConfigError("embedding dimensions must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.1 / std::sqrt(static_cast<double>(factors)));
  EmbeddingPair e{Matrix(n_users, factors), Matrix(n_items, factors)};
  for (Index k = 0; k < e.users.size(); ++k) e.users.data()[k] = normal(rng);
  for (Index k = 0; k < e.items.size(); ++k) e.items.data()[k] = normal(rng);
  return e;
}

EmbeddingPair materialize(const EmbeddingPair& base, const SimilarityMatrix& user_similarity,
                          const SimilarityMatrix& item_similarity) {
  if (user_similarity.size() != base.users.rows() || item_similarity.size() != base.items.rows()) {
    throw DataError("similarity dimensions do not match the embeddings");
  }
  EmbeddingPair out{Matrix(base.users.rows(), base.factors()), Matrix(base.items.rows(), base.factors())};
  for (Index u = 0; u < out.users.rows(); ++u) {
    auto row = out.users.row(u);
    neighborhood_sum(user_similarity.weights, base.users, u, row);
  }
  for (Index i = 0; i < out.items.rows(); ++i) {
    auto row = out.items.row(i);
    neighborhood_sum(item_similarity.weights, base.items, i, row);
  }
  return out;
}

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// ln(1 + e^-x)
double softplus_neg(double x) { return x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x)); }

void ensure_rows(Matrix& m, Index rows, Index cols) {
  if (m.rows() < rows || m.cols() != cols) m.resize(std::max(rows, m.rows()), cols);
}

struct Workspace {
  Eigen::RowVectorXd user_star;
  Eigen::RowVectorXd item_star;
  Eigen::RowVectorXd negative_star;
};

Workspace& workspace(Index f) {
  thread_local Workspace ws;
  if (ws.user_star.size() != f) {
    ws.user_star.resize(f);
    ws.item_star.resize(f);
    ws.negative_star.resize(f);
  }
  return ws;
}

// Gradient rows for the user side: reg * p_v - coef_v * direction.
double fill_user_rows(const EmbeddingPair& base, const SimilarityMatrix& s, Index u, double scale,
                      const Eigen::RowVectorXd& direction, double reg, SampleGradient& out) {
  const Index f = base.factors();
  ensure_rows(out.user_grad, s.weights.outerIndexPtr()[u + 1] - s.weights.outerIndexPtr()[u], f);
  double penalty = 0.0;
  Index r = 0;
  for (SparseMatrix::InnerIterator it(s.weights, u); it; ++it, ++r) {
    const Index v = it.index();
    const double coef = scale * it.value();
    out.user_rows.push_back(v);
    for (Index d = 0; d < f; ++d) out.user_grad(r, d) = reg * base.users(v, d) - coef * direction(d);
    penalty += 0.5 * reg * sequential_dot(base.users.row(v), base.users.row(v));
  }
  return penalty;
}

double fill_item_rows(const EmbeddingPair& base, const SimilarityMatrix& s, Index i, double scale,
                      const Eigen::RowVectorXd& direction, double reg, SampleGradient& out) {
  const Index f = base.factors();
  ensure_rows(out.item_grad, s.weights.outerIndexPtr()[i + 1] - s.weights.outerIndexPtr()[i], f);
  double penalty = 0.0;
  Index r = 0;
  for (SparseMatrix::InnerIterator it(s.weights, i); it; ++it, ++r) {
    const Index k = it.index();
    const double coef = scale * it.value();
    out.item_rows.push_back(k);
    for (Index d = 0; d < f; ++d) out.item_grad(r, d) = reg * base.items(k, d) - coef * direction(d);
    penalty += 0.5 * reg * sequential_dot(base.items.row(k), base.items.row(k));
  }
  return penalty;
}

// BPR item side: union of the neighborhoods of i and j, each row weighted by
// s_ik - s_jk.
double fill_pair_rows(const EmbeddingPair& base, const SimilarityMatrix& s, Index i, Index j, double scale,
                      const Eigen::RowVectorXd& direction, double reg, SampleGradient& out) {
  const Index f = base.factors();
  const int* outer = s.weights.outerIndexPtr();
  const int* inner = s.weights.innerIndexPtr();
  const double* value = s.weights.valuePtr();
  ensure_rows(out.item_grad, (outer[i + 1] - outer[i]) + (outer[j + 1] - outer[j]), f);
  double penalty = 0.0;
  Index r = 0;
  int a = outer[i], b = outer[j];
  while (a < outer[i + 1] || b < outer[j + 1]) {
    Index k;
    double weight;
    if (b >= outer[j + 1] || (a < outer[i + 1] && inner[a] < inner[b])) {
      k = inner[a];
      weight = value[a++];
    } else if (a >= outer[i + 1] || inner[b] < inner[a]) {
      k = inner[b];
      weight = -value[b++];
    } else {
      k = inner[a];
      weight = value[a++] - value[b++];
    }
    const double coef = scale * weight;
    out.item_rows.push_back(k);
    for (Index d = 0; d < f; ++d) out.item_grad(r, d) = reg * base.items(k, d) - coef * direction(d);
    penalty += 0.5 * reg * sequential_dot(base.items.row(k), base.items.row(k));
    ++r;
  }
  return penalty;
}

void check_sample(const EmbeddingPair& base, const SimilarityMatrix& su, const SimilarityMatrix& si,
                  const Sample& sample, Algorithm algorithm) {
  if (su.size() != base.users.rows() || si.size() != base.items.rows()) {
    throw DataError("similarity dimensions do not match the embeddings");
  }
  if (sample.user < 0 || sample.user >= base.users.rows() || sample.item < 0 || sample.item >= base.items.rows()) {
    throw DataError("sample outside the embedding range");
  }
  if (algorithm == Algorithm::bpr && (sample.negative < 0 || sample.negative >= base.items.rows())) {
    throw DataError("BPR sample needs a negative item");
  }
}

}  // namespace

void sample_gradient(Algorithm algorithm, const EmbeddingPair& base, const SimilarityMatrix& user_similarity,
                     const SimilarityMatrix& item_similarity, const Sample& sample, double reg_p, double reg_q,
                     SampleGradient& out) {
  check_sample(base, user_similarity, item_similarity, sample, algorithm);
  auto& ws = workspace(base.factors());
  out.user_rows.clear();
  out.item_rows.clear();

  neighborhood_sum(user_similarity.weights, base.users, sample.user, ws.user_star);
  neighborhood_sum(item_similarity.weights, base.items, sample.item, ws.item_star);

  switch (algorithm) {
    case Algorithm::funk: {
      const double err = sample.target - sequential_dot(ws.user_star, ws.item_star);
      out.loss = 0.5 * err * err;
      out.loss += fill_user_rows(base, user_similarity, sample.user, err, ws.item_star, reg_p, out);
      out.loss += fill_item_rows(base, item_similarity, sample.item, err, ws.user_star, reg_q, out);
      break;
    }
    case Algorithm::pmf: {
      const double prob = sigmoid(sequential_dot(ws.user_star, ws.item_star));
      const double err = sample.target - prob;
      const double scale = err * prob * (1.0 - prob);
      out.loss = 0.5 * err * err;
      out.loss += fill_user_rows(base, user_similarity, sample.user, scale, ws.item_star, reg_p, out);
      out.loss += fill_item_rows(base, item_similarity, sample.item, scale, ws.user_star, reg_q, out);
      break;
    }
    case Algorithm::bpr: {
      neighborhood_sum(item_similarity.weights, base.items, sample.negative, ws.negative_star);
      const double x = sequential_dot(ws.user_star, ws.item_star) - sequential_dot(ws.user_star, ws.negative_star);
      const double scale = sigmoid(-x);
      out.loss = softplus_neg(x);
      Eigen::RowVectorXd& diff = ws.negative_star;
      for (Index d = 0; d < diff.size(); ++d) diff(d) = ws.item_star(d) - diff(d);
      out.loss += fill_user_rows(base, user_similarity, sample.user, scale, diff, reg_p, out);
      out.loss += fill_pair_rows(base, item_similarity, sample.item, sample.negative, scale, ws.user_star, reg_q, out);
      break;
    }
  }
}

double sample_loss(Algorithm algorithm, const EmbeddingPair& base, const SimilarityMatrix& user_similarity,
                   const SimilarityMatrix& item_similarity, const Sample& sample, double reg_p, double reg_q) {
  SampleGradient g;
  sample_gradient(algorithm, base, user_similarity, item_similarity, sample, reg_p, reg_q, g);
  return g.loss;
}

void apply_gradient(EmbeddingPair& base, const SampleGradient& gradient, double learning_rate, int epoch) {
  constexpr double kLimit = 1e6;
  const Index f = base.factors();
  auto update = [&](Matrix& target, const std::vector<Index>& rows, const Matrix& grad) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (Index d = 0; d < f; ++d) {
        double& w = target(rows[r], d);
        w -= learning_rate * grad(static_cast<Index>(r), d);
        if (!(std::abs(w) <= kLimit)) {
          throw DivergenceError("training diverged at epoch " + std::to_string(epoch) +
                                    " (embedding entry magnitude above 1e6 or non-finite)",
                                epoch);
        }
      }
    }
  };
  update(base.users, gradient.user_rows, gradient.user_grad);
  update(base.items, gradient.item_rows, gradient.item_grad);
}

std::pair<SimilarityMatrix, SimilarityMatrix> similarities_for(const ModelConfig& config,
                                                               const InteractionMatrix& train) {
  return {config.user_k > 0 ? cosine_topk(train, Axis::user, config.user_k, config.user_shrink)
                            : identity_similarity(train.n_users()),
          config.item_k > 0 ? cosine_topk(train, Axis::item, config.item_k, config.item_shrink)
                            : identity_similarity(train.n_items())};
}

TrainedModel train(const DatasetSplit& split, const ModelConfig& config, const SimilarityMatrix& user_similarity,
                   const SimilarityMatrix& item_similarity, const TrainOptions& options) {
  config.validate();
  const InteractionMatrix& data = split.train;
  if (data.empty()) throw DataError("train matrix is empty");
  if (user_similarity.size() != data.n_users() || item_similarity.size() != data.n_items()) {
    throw DataError("similarity dimensions do not match the dataset");
  }

  TrainedModel model;
  model.config = config;
  model.user_similarity = user_similarity;
  model.item_similarity = item_similarity;
  model.base = init_embeddings(data.n_users(), data.n_items(), config.factors, config.init_seed);

  const auto positives = data.to_interactions();
  std::vector<std::size_t> order(positives.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(config.sample_seed);
  std::uniform_int_distribution<Index> pick_item(0, data.n_items() - 1);
  auto draw_negative = [&](Index u) {
    Index j;
    do {
      j = pick_item(rng);
    } while (data.contains(u, j));
    return j;
  };

  const InteractionMatrix ground_truth = restrict_to_profiled_users(split.validation, data);
  const bool early_stopping = config.early_stop.eval_every > 0 && !ground_truth.empty();
  EmbeddingPair best_base;
  int stale = 0;

  SampleGradient grad;
  int epoch = 1;
  int current_epoch = 0;
  auto step = [&](const Sample& sample) -> double {
    if (model.sample_trace.size() < options.trace_length) model.sample_trace.push_back(sample);
    sample_gradient(config.algorithm, model.base, user_similarity, item_similarity, sample, config.reg_p,
                    config.reg_q, grad);
    apply_gradient(model.base, grad, config.learning_rate, current_epoch);
    return grad.loss;
  };

  for (epoch = 1; epoch <= config.epochs_max; ++epoch) {
    current_epoch = epoch;
    std::shuffle(order.begin(), order.end(), rng);
    double loss = 0.0;
    std::size_t count = 0;
    for (std::size_t idx : order) {
      const auto& x = positives[idx];
      const bool saturated = data.row_size(x.user) == data.n_items();
      if (config.algorithm == Algorithm::bpr) {
        if (saturated) {
          ++model.skipped_samples;
          continue;
        }
        loss += step({x.user, x.item, draw_negative(x.user), 1.0});
        ++count;
      } else {
        loss += step({x.user, x.item, -1, x.value});
        ++count;
        for (int r = 0; r < config.negative_ratio && !saturated; ++r) {
          loss += step({x.user, draw_negative(x.user), -1, 0.0});
          ++count;
        }
      }
    }
    EpochRecord record{epoch, count > 0 ? loss / static_cast<double>(count) : 0.0, NAN};
    if (!std::isfinite(record.loss)) {
      throw DivergenceError("training loss became non-finite at epoch " + std::to_string(epoch), epoch);
    }
    model.epochs_run = epoch;

    bool stop = false;
    if (early_stopping && epoch % config.early_stop.eval_every == 0) {
      const auto current = materialize(model.base, user_similarity, item_similarity);
      const auto recs =
          recommend_topn(embedding_scorer(current.users, current.items), data, config.early_stop.cutoff);
      record.val_metric = map_at_k(recs, ground_truth, config.early_stop.cutoff);
      if (model.best_epoch == 0 || record.val_metric > model.best_metric) {
        model.best_metric = record.val_metric;
        model.best_epoch = epoch;
        best_base = model.base;
        stale = 0;
      } else if (++stale >= config.early_stop.patience) {
        stop = true;
      }
    }
    model.history.push_back(record);
    if (stop) break;
  }

  if (model.best_epoch > 0) {
    model.base = std::move(best_base);
  } else {
    model.best_epoch = model.epochs_run;
  }
  model.materialized = materialize(model.base, user_similarity, item_similarity);
  return model;
}

namespace {

TrainedModel train_checked(Algorithm expected, const DatasetSplit& split, const ModelConfig& config,
                           const SimilarityMatrix& su, const SimilarityMatrix& si) {
  if (config.algorithm != expected) {
    throw ConfigError("config algorithm is " + to_string(config.algorithm) + ", expected " + to_string(expected));
  }
  return train(split, config, su, si);
}

}  // namespace

TrainedModel train_funk(const DatasetSplit& split, const ModelConfig& config, const SimilarityMatrix& user_similarity,
                        const SimilarityMatrix& item_similarity) {
  return train_checked(Algorithm::funk, split, config, user_similarity, item_similarity);
}

TrainedModel train_bpr(const DatasetSplit& split, const ModelConfig& config, const SimilarityMatrix& user_similarity,
                       const SimilarityMatrix& item_similarity) {
  return train_checked(Algorithm::bpr, split, config, user_similarity, item_similarity);
}

TrainedModel train_pmf(const DatasetSplit& split, const ModelConfig& config, const SimilarityMatrix& user_similarity,
                       const SimilarityMatrix& item_similarity) {
  return train_checked(Algorithm::pmf, split, config, user_similarity, item_similarity);
}

}  // namespace nnmf
