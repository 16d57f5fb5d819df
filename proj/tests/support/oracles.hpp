#pragma once

// Reference routines for tests. Everything here is written with plain loops
// and does not call the library's kernels, factorizations or rollout code.

#include <complex>
#include <cstddef>
#include <random>
#include <vector>

#include "cycloop/matrix.hpp"

namespace oracle {

using cycloop::Matrix;
using cycloop::Vector;

Matrix naive_matmul(const Matrix& a, const Matrix& b);
Vector naive_matvec(const Matrix& a, const Vector& x);
double naive_dot(const Vector& a, const Vector& b);
double naive_norm(const Vector& a);
double frobenius_diff(const Matrix& a, const Matrix& b);
double max_abs_diff(const Vector& a, const Vector& b);

// Gaussian elimination with partial pivoting; throws std::runtime_error on a
// zero pivot.
Vector gauss_solve(Matrix a, Vector b);
Matrix inverse(const Matrix& a);

// Orthonormal basis of null(C) as columns, by Gram-Schmidt against the
// orthonormalized rows of C.
Matrix nullspace(const Matrix& c, std::size_t dim, double tol = 1e-10);

// Eigenvalues of a symmetric matrix, cyclic Jacobi rotations.
Vector symmetric_eigenvalues(Matrix a);

// Roots of the characteristic polynomial (Faddeev-LeVerrier coefficients,
// Durand-Kerner iteration).
std::vector<std::complex<double>> char_poly_roots(const Matrix& a);
double spectral_radius(const Matrix& a);

// min 1/2 q'Hq - b'q + c  s.t. Cq = 0, by nullspace elimination.
struct QpResult {
  Vector q;
  double objective = 0.0;
  double reduced_condition = 0.0;  // cond of N'HN
};
QpResult nullspace_qp(const Matrix& h, const Vector& b, const Matrix& c, double constant);

// s_t from the closed form, t one-based.
Vector fourier(std::size_t t, std::size_t period, std::size_t harmonics, bool constant = false);

// z_1..z_{T+1} under z_{t+1} = K z_t + G s_t.
std::vector<Vector> controlled_recursion(const Matrix& k, const Matrix& g, const Vector& z1, std::size_t period,
                                         std::size_t harmonics);

// The cyclic QP built column by column from the recursion: column i of every
// block is the response to the unit unknown e_i.
struct CyclicQp {
  Matrix hessian;
  Vector rhs;
  Matrix constraint;
  double constant = 0.0;
};
CyclicQp direct_cyclic_qp(const Matrix& k, const Matrix& observed, std::size_t harmonics, double w_red,
                          double w_u, bool gram_energy);

// Direct objective w_red sum ||z_t - y_t||^2 + w_u sum ||G s_t||^2.
double direct_cyclic_objective(const Matrix& k, const Matrix& observed, std::size_t harmonics, double w_red,
                               double w_u, const Vector& z1, const Matrix& g);

Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0);
Vector random_vector(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0);
// Random matrix rescaled to the given spectral-norm bound (via Frobenius).
Matrix random_contraction(std::size_t n, std::mt19937_64& rng, double bound);
// 2x2 rotation by angle.
Matrix rotation(double angle);

}  // namespace oracle
