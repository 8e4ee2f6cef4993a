#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nnmf/common.hpp"
#include "nnmf/data.hpp"
#include "nnmf/evaluation.hpp"
#include "nnmf/similarity.hpp"

namespace nnmf {

enum class Algorithm { funk, bpr, pmf };

std::string to_string(Algorithm algorithm);
Algorithm parse_algorithm(const std::string& text);

struct EarlyStopping {
  int eval_every = 10;  // epochs between validation evaluations; 0 disables
  int patience = 5;     // evaluations without improvement before stopping
  Index cutoff = 5;     // validation MAP cutoff
};

struct ModelConfig {
  Algorithm algorithm = Algorithm::bpr;
  Index factors = 32;
  double learning_rate = 0.01;
  double reg_p = 1e-4;
  double reg_q = 1e-4;
  int epochs_max = 500;
  // Neighbor counts; both 0 means plain MF (identity similarities).
  Index user_k = 0;
  Index item_k = 0;
  double user_shrink = 0.0;
  double item_shrink = 0.0;
  int negative_ratio = 1;  // funk / pmf only
  EarlyStopping early_stop;
  std::uint64_t init_seed = 1;
  std::uint64_t sample_seed = 1;

  bool uses_neighbors() const { return user_k > 0 || item_k > 0; }
  /// "funk-mf", "bpr-nnmf", ...
  std::string kind() const;
  /// Throws ConfigError; NNMF needs at least 2 neighbors on some axis.
  void validate() const;
  std::uint64_t hash() const;
};

/// P (users x f) and Q (items x f). Under NNMF these are the generating-set
/// matrices; `materialize` turns them into embeddings.
struct EmbeddingPair {
  Matrix users;
  Matrix items;

  Index factors() const { return users.cols(); }
};

/// Entries i.i.d. Normal(0, 0.1 / sqrt(f)) from a seeded mt19937_64.
EmbeddingPair init_embeddings(Index n_users, Index n_items, Index factors, std::uint64_t seed);

/// sum_v s(row, v) * base.row(v) over the stored neighbors of `row`.
template <typename Scalar, typename DerivedBase, typename DerivedOut>
void neighborhood_sum(const SparseRowMatrix<Scalar>& similarity, const Eigen::MatrixBase<DerivedBase>& base, Index row,
                      Eigen::MatrixBase<DerivedOut>& out) {
  out.setZero();
  for (typename SparseRowMatrix<Scalar>::InnerIterator it(similarity, row); it; ++it) {
    for (Index d = 0; d < base.cols(); ++d) out(d) += it.value() * base(it.index(), d);
  }
}

/// p_u . q_i
template <typename DerivedP, typename DerivedQ>
typename DerivedP::Scalar predict_mf(const Eigen::MatrixBase<DerivedP>& users, const Eigen::MatrixBase<DerivedQ>& items,
                                     Index u, Index i) {
  return sequential_dot(users.row(u), items.row(i));
}

/// (sum_v s_uv p_v) . (sum_j s_ij q_j)
template <typename Scalar>
Scalar predict_nnmf(const DenseMatrix<Scalar>& users, const DenseMatrix<Scalar>& items,
                    const SparseRowMatrix<Scalar>& user_similarity, const SparseRowMatrix<Scalar>& item_similarity,
                    Index u, Index i) {
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> p(users.cols()), q(items.cols());
  neighborhood_sum(user_similarity, users, u, p);
  neighborhood_sum(item_similarity, items, i, q);
  return sequential_dot(p, q);
}

inline double predict_nnmf(const EmbeddingPair& base, const SimilarityMatrix& user_similarity,
                           const SimilarityMatrix& item_similarity, Index u, Index i) {
  return predict_nnmf<double>(base.users, base.items, user_similarity.weights, item_similarity.weights, u, i);
}

/// (S^U P, S^I Q).
EmbeddingPair materialize(const EmbeddingPair& base, const SimilarityMatrix& user_similarity,
                          const SimilarityMatrix& item_similarity);

/// One training sample. `negative` is the sampled item j of a BPR triple
/// (unused otherwise); `target` is the regression target for funk / pmf.
struct Sample {
  Index user = 0;
  Index item = 0;
  Index negative = -1;
  double target = 1.0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Per-sample loss and its gradient with respect to the base rows it touches.
/// Only the first user_rows.size() / item_rows.size() rows of the gradient
/// matrices are meaningful.
struct SampleGradient {
  double loss = 0.0;
  std::vector<Index> user_rows;
  std::vector<Index> item_rows;
  Matrix user_grad;
  Matrix item_grad;
};

/// Per-sample losses (minimized):
///   funk  1/2 (r - x)^2
///   bpr   -ln sigma(x_ui - x_uj)
///   pmf   1/2 (r - sigma(x))^2
/// where x = p*_u . q*_i, each plus 1/2 reg_p |p_v|^2 for every touched user
/// row and 1/2 reg_q |q_k|^2 for every touched item row.
double sample_loss(Algorithm algorithm, const EmbeddingPair& base, const SimilarityMatrix& user_similarity,
                   const SimilarityMatrix& item_similarity, const Sample& sample, double reg_p, double reg_q);

void sample_gradient(Algorithm algorithm, const EmbeddingPair& base, const SimilarityMatrix& user_similarity,
                     const SimilarityMatrix& item_similarity, const Sample& sample, double reg_p, double reg_q,
                     SampleGradient& out);

/// base.row -= learning_rate * gradient for every touched row. Throws
/// DivergenceError when an updated entry is non-finite or exceeds 1e6.
void apply_gradient(EmbeddingPair& base, const SampleGradient& gradient, double learning_rate, int epoch);

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;        // mean per-sample loss over the epoch
  double val_metric = NAN;  // validation MAP@cutoff, NaN when not evaluated
};

struct TrainedModel {
  ModelConfig config;
  EmbeddingPair base;
  SimilarityMatrix user_similarity;
  SimilarityMatrix item_similarity;
  EmbeddingPair materialized;
  std::vector<EpochRecord> history;
  int epochs_run = 0;
  int best_epoch = 0;  // epoch whose parameters were kept
  double best_metric = NAN;
  std::vector<Sample> sample_trace;  // first samples visited, in order
  Index skipped_samples = 0;         // BPR positives of users with no negative item

  Scorer scorer() const { return embedding_scorer(materialized.users, materialized.items); }
};

struct TrainOptions {
  std::size_t trace_length = 100;
};

/// Epoch-wise per-sample SGD. Every epoch visits all train positives in an
/// order reshuffled from a generator seeded with sample_seed (so the visiting
/// and negative-sampling stream does not depend on init_seed). Funk / pmf add
/// negative_ratio uniformly sampled unobserved items with target 0 per
/// positive; bpr draws one unobserved item per positive. With early stopping
/// enabled and a non-empty validation set, the best validation MAP parameters
/// are restored at the end.
TrainedModel train(const DatasetSplit& split, const ModelConfig& config, const SimilarityMatrix& user_similarity,
                   const SimilarityMatrix& item_similarity, const TrainOptions& options = {});

TrainedModel train_funk(const DatasetSplit& split, const ModelConfig& config, const SimilarityMatrix& user_similarity,
                        const SimilarityMatrix& item_similarity);
TrainedModel train_bpr(const DatasetSplit& split, const ModelConfig& config, const SimilarityMatrix& user_similarity,
                       const SimilarityMatrix& item_similarity);
TrainedModel train_pmf(const DatasetSplit& split, const ModelConfig& config, const SimilarityMatrix& user_similarity,
                       const SimilarityMatrix& item_similarity);

/// Builds the similarities a config asks for (identity on axes with k == 0).
std::pair<SimilarityMatrix, SimilarityMatrix> similarities_for(const ModelConfig& config,
                                                               const InteractionMatrix& train);

}  // namespace nnmf
