#include "nnmf/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace nnmf {

std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::item_knn: return "item_knn";
    case BaselineKind::user_knn: return "user_knn";
    case BaselineKind::slim_bpr: return "slim_bpr";
    case BaselineKind::pure_svd: return "pure_svd";
  }
  return "unknown";
}

BaselineKind parse_baseline_kind(const std::string& text) {
  if (text == "item_knn") return BaselineKind::item_knn;
  if (text == "user_knn") return BaselineKind::user_knn;
  if (text == "slim_bpr" || text == "slim") return BaselineKind::slim_bpr;
  if (text == "pure_svd") return BaselineKind::pure_svd;
  throw ConfigError("unknown baseline kind '" + text + "'");
}

Scorer ScoreModel::scorer(const InteractionMatrix& train) const {
  switch (kind) {
    case BaselineKind::item_knn: {
      // s_il for fixed l lives in column l of S, i.e. row l of S^T.
      auto transposed = std::make_shared<const SparseMatrix>(similarity.weights.transpose());
      return [transposed, &train](Index u, Eigen::Ref<Vector> out) {
        out.setZero();
        auto items = train.items_of(u);
        auto values = train.values_of(u);
        for (std::size_t n = 0; n < items.size(); ++n) {
          for (SparseMatrix::InnerIterator it(*transposed, items[n]); it; ++it) {
            if (it.index() != items[n]) out(it.index()) += values[n] * it.value();
          }
        }
      };
    }
    case BaselineKind::user_knn:
      return [this, &train](Index u, Eigen::Ref<Vector> out) {
        out.setZero();
        for (SparseMatrix::InnerIterator it(similarity.weights, u); it; ++it) {
          if (it.index() == u) continue;
          auto items = train.items_of(it.index());
          auto values = train.values_of(it.index());
          for (std::size_t n = 0; n < items.size(); ++n) out(items[n]) += it.value() * values[n];
        }
      };
    case BaselineKind::slim_bpr:
      return [this, &train](Index u, Eigen::Ref<Vector> out) {
        out.setZero();
        auto items = train.items_of(u);
        auto values = train.values_of(u);
        for (std::size_t n = 0; n < items.size(); ++n) {
          for (SparseMatrix::InnerIterator it(weights, items[n]); it; ++it) out(it.index()) += values[n] * it.value();
        }
      };
    case BaselineKind::pure_svd:
      return [this, &train](Index u, Eigen::Ref<Vector> out) {
        Vector latent = Vector::Zero(item_factors.cols());
        auto items = train.items_of(u);
        auto values = train.values_of(u);
        for (std::size_t n = 0; n < items.size(); ++n) latent += values[n] * item_factors.row(items[n]).transpose();
        for (Index i = 0; i < item_factors.rows(); ++i) out(i) = sequential_dot(item_factors.row(i), latent.transpose());
      };
  }
  throw ConfigError("unknown baseline kind");
}

ScoreModel fit_knn(const InteractionMatrix& train, Axis axis, Index k, double shrink) {
  ScoreModel model;
  model.kind = axis == Axis::item ? BaselineKind::item_knn : BaselineKind::user_knn;
  model.similarity = cosine_topk(train, axis, k, shrink);
  return model;
}

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double slim_score(const Matrix& w, std::span<const int> items, std::span<const double> values, Index target) {
  double s = 0.0;
  for (std::size_t n = 0; n < items.size(); ++n) {
    if (items[n] != target) s += values[n] * w(items[n], target);
  }
  return s;
}

}  // namespace

double slim_sample_gradient(const Matrix& weights, const InteractionMatrix& train, Index u, Index i, Index j,
                            double reg, Matrix* gradient) {
  auto items = train.items_of(u);
  auto values = train.values_of(u);
  const double x = slim_score(weights, items, values, i) - slim_score(weights, items, values, j);
  double loss = x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
  const double g = sigmoid(-x);
  if (gradient) gradient->setZero(weights.rows(), weights.cols());
  for (std::size_t n = 0; n < items.size(); ++n) {
    const Index l = items[n];
    if (l != i) {
      loss += 0.5 * reg * weights(l, i) * weights(l, i);
      if (gradient) (*gradient)(l, i) += -g * values[n] + reg * weights(l, i);
    }
    if (l != j) {
      loss += 0.5 * reg * weights(l, j) * weights(l, j);
      if (gradient) (*gradient)(l, j) += g * values[n] + reg * weights(l, j);
    }
  }
  return loss;
}

ScoreModel fit_slim_bpr(const InteractionMatrix& train, const SlimConfig& config,
                        const std::function<void(int, const Matrix&)>& on_epoch) {
  if (train.empty()) throw DataError("train matrix is empty");
  if (config.k < 1 || config.epochs < 1 || !(config.learning_rate > 0) || !(config.reg >= 0)) {
    throw ConfigError("invalid SLIM settings");
  }
  const Index n_items = train.n_items();
  Matrix w = Matrix::Zero(n_items, n_items);
  const auto positives = train.to_interactions();
  std::vector<std::size_t> order(positives.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<Index> pick_item(0, n_items - 1);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t idx : order) {
      const Index u = positives[idx].user;
      const Index i = positives[idx].item;
      if (train.row_size(u) == n_items) continue;
      Index j;
      do {
        j = pick_item(rng);
      } while (train.contains(u, j));

      auto items = train.items_of(u);
      auto values = train.values_of(u);
      const double x = slim_score(w, items, values, i) - slim_score(w, items, values, j);
      const double g = sigmoid(-x);
      for (std::size_t n = 0; n < items.size(); ++n) {
        const Index l = items[n];
        if (l != i) w(l, i) += config.learning_rate * (g * values[n] - config.reg * w(l, i));
        w(l, j) += config.learning_rate * (-g * values[n] - config.reg * w(l, j));
      }
      w(i, i) = 0.0;
      w(j, j) = 0.0;
    }
    if (!w.allFinite() || w.cwiseAbs().maxCoeff() > 1e6) {
      throw DivergenceError("SLIM training diverged at epoch " + std::to_string(epoch), epoch);
    }
    if (on_epoch) on_epoch(epoch, w);
  }

  // Keep the k largest weights of every target column.
  std::vector<Eigen::Triplet<double, int>> triplets;
  std::vector<Index> rows(n_items);
  for (Index i = 0; i < n_items; ++i) {
    std::iota(rows.begin(), rows.end(), Index{0});
    const auto keep = std::min<Index>(config.k, n_items);
    std::partial_sort(rows.begin(), rows.begin() + keep, rows.end(), [&](Index a, Index b) {
      return w(a, i) > w(b, i) || (w(a, i) == w(b, i) && a < b);
    });
    for (Index n = 0; n < keep; ++n) {
      if (rows[n] != i && w(rows[n], i) != 0.0) {
        triplets.emplace_back(static_cast<int>(rows[n]), static_cast<int>(i), w(rows[n], i));
      }
    }
  }
  ScoreModel model;
  model.kind = BaselineKind::slim_bpr;
  model.weights.resize(n_items, n_items);
  model.weights.setFromTriplets(triplets.begin(), triplets.end());
  model.weights.makeCompressed();
  return model;
}

namespace {

Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& m) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  return qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), m.cols());
}

}  // namespace

SvdResult randomized_svd(const SparseMatrix& a, Index rank, std::uint64_t seed, Index oversampling,
                         int power_iterations) {
  const Index m = a.rows(), n = a.cols();
  if (rank < 1 || rank > std::min(m, n)) {
    throw ConfigError("SVD rank " + std::to_string(rank) + " outside [1, " + std::to_string(std::min(m, n)) + "]");
  }
  const Index width = std::min(rank + oversampling, std::min(m, n));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd omega(n, width);
  for (Index c = 0; c < width; ++c) {
    for (Index r = 0; r < n; ++r) omega(r, c) = normal(rng);
  }
  const Eigen::SparseMatrix<double> at = a.transpose();
  Eigen::MatrixXd q = orthonormalize(a * omega);
  for (int it = 0; it < power_iterations; ++it) {
    const Eigen::MatrixXd z = orthonormalize(at * q);
    q = orthonormalize(a * z);
  }
  const Eigen::MatrixXd b = (at * q).transpose();  // width x n
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);

  SvdResult result;
  result.values = svd.singularValues().head(rank);
  result.left = q * svd.matrixU().leftCols(rank);
  result.right = svd.matrixV().leftCols(rank);
  for (Index c = 0; c < rank; ++c) {
    Index arg = 0;
    result.right.col(c).cwiseAbs().maxCoeff(&arg);
    if (result.right(arg, c) < 0) {
      result.right.col(c) *= -1.0;
      result.left.col(c) *= -1.0;
    }
  }
  return result;
}

ScoreModel fit_pure_svd(const InteractionMatrix& train, Index factors, std::uint64_t seed) {
  if (train.empty()) throw DataError("train matrix is empty");
  auto svd = randomized_svd(train.ratings(), factors, seed);
  ScoreModel model;
  model.kind = BaselineKind::pure_svd;
  model.item_factors = svd.right;
  model.singular_values = svd.values;
  return model;
}

}  // namespace nnmf
