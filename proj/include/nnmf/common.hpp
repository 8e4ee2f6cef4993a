#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace nnmf {

using Index = Eigen::Index;

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using SparseRowMatrix = Eigen::SparseMatrix<Scalar, Eigen::RowMajor, int>;

using Matrix = DenseMatrix<double>;
using Vector = Eigen::VectorXd;
using SparseMatrix = SparseRowMatrix<double>;

// Errors carry the process exit code the CLI reports for them.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const { return 1; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 1; }
};

class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 2; }
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int epoch) : Error(what), epoch_(epoch) {}
  int exit_code() const override { return 3; }
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

// Dot products accumulate left to right so results are bit-reproducible and
// independent of vectorization or memory alignment.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar sequential_dot(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  typename DerivedA::Scalar sum(0);
  for (Index d = 0; d < a.size(); ++d) sum += a(d) * b(d);
  return sum;
}

// Worker-thread count used by the internally parallel routines. Results never
// depend on it.
void set_num_threads(int n);
int num_threads();

namespace detail {
void run_parallel(Index begin, Index end, const void* ctx, void (*fn)(const void*, Index, Index));
}

// Splits [begin, end) into contiguous chunks, one per worker; body(lo, hi).
template <typename F>
void parallel_for(Index begin, Index end, const F& body) {
  detail::run_parallel(begin, end, &body, [](const void* ctx, Index lo, Index hi) {
    (*static_cast<const F*>(ctx))(lo, hi);
  });
}

// 64-bit FNV-1a, stable across platforms; used for cache keys and config hashes.
class Fnv1a {
 public:
  Fnv1a& add(std::string_view bytes);
  Fnv1a& add(std::uint64_t v);
  Fnv1a& add(double v);
  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = 14695981039346656037ull;
};

std::string to_hex(std::uint64_t v);

// Shortest representation that parses back to the same double.
std::string format_double(double v);

}  // namespace nnmf
