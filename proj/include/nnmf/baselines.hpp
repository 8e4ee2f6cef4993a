#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "nnmf/common.hpp"
#include "nnmf/data.hpp"
#include "nnmf/evaluation.hpp"
#include "nnmf/similarity.hpp"

namespace nnmf {

enum class BaselineKind { item_knn, user_knn, slim_bpr, pure_svd };

std::string to_string(BaselineKind kind);
BaselineKind parse_baseline_kind(const std::string& text);

/// Fitted non-embedding baseline. Which members are populated depends on kind.
struct ScoreModel {
  BaselineKind kind = BaselineKind::item_knn;
  SimilarityMatrix similarity;  // knn
  SparseMatrix weights;         // slim: row l holds w_l* (contribution of item l to each target item)
  Matrix item_factors;          // pure svd: top right singular vectors, items x f
  Vector singular_values;

  /// Scores users from their train profile. The scorer references this model
  /// and `train`; both must outlive it.
  Scorer scorer(const InteractionMatrix& train) const;
};

/// item_knn: score(u, i) = sum_l r_ul s_il; user_knn: score(u, .) = sum_v s_uv r_v.
/// Self-similarities are not used.
ScoreModel fit_knn(const InteractionMatrix& train, Axis axis, Index k, double shrink);

struct SlimConfig {
  Index k = 100;  // weights kept per target item after training
  double learning_rate = 0.05;
  double reg = 1e-4;
  int epochs = 30;
  std::uint64_t seed = 1;
};

/// BPR-trained item-item weights. `on_epoch`, when set, sees the dense
/// weights after every epoch.
ScoreModel fit_slim_bpr(const InteractionMatrix& train, const SlimConfig& config,
                        const std::function<void(int, const Matrix&)>& on_epoch = {});

/// -ln sigma(x_ui - x_uj) + 1/2 reg (sum of squared weights touched), with
/// x_ui = sum_{l in r_u, l != i} r_ul w_li. Gradient is written densely.
double slim_sample_gradient(const Matrix& weights, const InteractionMatrix& train, Index u, Index i, Index j,
                            double reg, Matrix* gradient);

struct SvdResult {
  Eigen::MatrixXd left;   // m x rank
  Vector values;          // descending
  Eigen::MatrixXd right;  // n x rank, largest-magnitude entry of each column positive
};

/// Randomized subspace iteration (Gaussian test matrix from `seed`,
/// re-orthonormalized at every step).
SvdResult randomized_svd(const SparseMatrix& a, Index rank, std::uint64_t seed, Index oversampling = 10,
                         int power_iterations = 7);

/// score(u, .) = r_u V V^T with V the top-f right singular vectors of train.
ScoreModel fit_pure_svd(const InteractionMatrix& train, Index factors, std::uint64_t seed);

}  // namespace nnmf
