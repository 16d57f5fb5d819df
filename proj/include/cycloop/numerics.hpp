#pragma once

// Dense linear-algebra building blocks: truncated SVD, minimum-norm least
// squares, Kronecker helpers and the saddle-point (KKT) solve.

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "cycloop/matrix.hpp"

namespace cycloop {

inline constexpr double kDefaultRelTol = 1e-12;
// Constraint rows with a smaller Euclidean norm are treated as absent.
inline constexpr double kZeroRowTol = 1e-12;

struct SvdTruncation {
  Matrix basis;          // rows x rank, orthonormal columns
  Vector singular_values;  // descending, all > 0
  Matrix right_vectors;  // cols x rank, orthonormal columns
  std::size_t requested_rank = 0;

  std::size_t rank() const noexcept { return singular_values.size(); }
  bool truncated_below_request() const noexcept { return rank() < requested_rank; }
};

// Top-`rank` singular triplets of `m`. Triplets with sigma <= rel_tol * sigma_max
// are dropped; the effective rank is then smaller than requested.
// Columns are sign-normalized so the largest-magnitude entry of each left
// vector is positive.
SvdTruncation truncated_svd(const Matrix& m, std::size_t rank, double rel_tol = kDefaultRelTol);

// All singular values of `m`, descending.
Vector singular_values(const Matrix& m);

// argmin_A ||targets - A * inputs||_F, minimum Frobenius norm when `inputs` is
// rank deficient (pseudoinverse with relative cutoff).
Matrix lstsq_operator(const Matrix& targets, const Matrix& inputs, double rel_tol = kDefaultRelTol);

struct KktSolution {
  Vector primal;
  Vector dual;
  double residual = 0.0;           // ||K [primal; dual] - rhs||_2
  double relative_residual = 0.0;  // residual / (1 + ||rhs||_2)
  std::size_t dropped_rows = 0;
};

// Factorized saddle-point matrix [[H, C^T], [C, 0]].
//
// Numerically zero constraint rows are removed before factorization and get a
// zero multiplier. The factorization is a full-pivot LU of the dense saddle
// matrix; a singular matrix is reported through SingularKktError, never
// regularized. One factorization serves any number of right-hand sides.
class KktSystem {
 public:
  KktSystem(const Matrix& hessian, const Matrix& constraints);

  KktSolution solve(std::span<const double> rhs_primal, std::span<const double> rhs_dual) const;

  std::size_t primal_dim() const noexcept { return primal_dim_; }
  std::size_t constraint_rows() const noexcept { return constraint_rows_; }
  std::size_t dropped_rows() const noexcept { return constraint_rows_ - kept_rows_.size(); }

 private:
  struct Factorization;

  std::size_t primal_dim_ = 0;
  std::size_t constraint_rows_ = 0;
  std::vector<std::size_t> kept_rows_;
  std::shared_ptr<const Factorization> factor_;
};

KktSolution solve_kkt(const Matrix& hessian, const Matrix& constraints,
                      std::span<const double> rhs_primal, std::span<const double> rhs_dual);

Matrix kron(const Matrix& a, const Matrix& b);

// Column-major vectorization, so that (s^T kron I_r) vec(G) == G s.
Vector vec(const Matrix& m);
Matrix unvec(std::span<const double> v, std::size_t rows, std::size_t cols);

std::vector<std::complex<double>> eigenvalues(const Matrix& square);
double spectral_radius(const Matrix& square);

}  // namespace cycloop
