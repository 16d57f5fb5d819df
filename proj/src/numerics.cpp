#include "cycloop/numerics.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <string>

#include "cycloop/error.hpp"

namespace cycloop {

namespace {

using RowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

Eigen::MatrixXd to_eigen(const Matrix& m) {
  return RowMajorMap(m.data(), static_cast<Eigen::Index>(m.rows()),
                     static_cast<Eigen::Index>(m.cols()));
}

void require_finite(const Matrix& m, const char* who) {
  if (!all_finite(m.values())) throw InvalidArgument(std::string(who) + ": non-finite entries");
}

struct ThinSvd {
  Eigen::MatrixXd u;  // rows x k
  Eigen::VectorXd s;  // k
  Eigen::MatrixXd v;  // cols x k
};

// Thin SVD through a QR of the tall orientation, then a small square SVD of R.
// Only the leading `keep` columns of U and V are formed.
ThinSvd thin_svd(const Matrix& m, Eigen::Index keep_max) {
  const bool tall = m.rows() >= m.cols();
  Eigen::MatrixXd a = tall ? to_eigen(m) : Eigen::MatrixXd(to_eigen(m).transpose());
  const Eigen::Index k = a.cols();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Index keep = std::min(keep_max, k);

  // a = (Q U_r) S V_r^T
  Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(a.rows(), keep);
  padded.topRows(k) = svd.matrixU().leftCols(keep);
  Eigen::MatrixXd q_u = qr.householderQ() * padded;

  ThinSvd out;
  out.s = svd.singularValues().head(keep);
  if (tall) {
    out.u = std::move(q_u);
    out.v = svd.matrixV().leftCols(keep);
  } else {
    out.u = svd.matrixV().leftCols(keep);
    out.v = std::move(q_u);
  }
  return out;
}

}  // namespace

SvdTruncation truncated_svd(const Matrix& m, std::size_t rank, double rel_tol) {
  if (m.empty()) throw InvalidArgument("truncated_svd: empty matrix");
  require_finite(m, "truncated_svd");
  const std::size_t max_rank = std::min(m.rows(), m.cols());
  if (rank < 1 || rank > max_rank) {
    throw InvalidArgument("truncated_svd: rank " + std::to_string(rank) + " outside [1, " +
                          std::to_string(max_rank) + "]");
  }
  ThinSvd svd = thin_svd(m, static_cast<Eigen::Index>(rank));
  const double sigma_max = svd.s.size() ? svd.s(0) : 0.0;
  if (!(sigma_max > 0.0)) throw NumericalError("truncated_svd: matrix has numerical rank 0");

  std::size_t keep = 0;
  while (keep < rank && svd.s(static_cast<Eigen::Index>(keep)) > rel_tol * sigma_max) ++keep;

  SvdTruncation out;
  out.requested_rank = rank;
  out.singular_values.resize(keep);
  out.basis = Matrix(m.rows(), keep);
  out.right_vectors = Matrix(m.cols(), keep);
  for (std::size_t j = 0; j < keep; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    out.singular_values[j] = svd.s(jj);
    Eigen::Index arg = 0;
    svd.u.col(jj).cwiseAbs().maxCoeff(&arg);
    const double sign = svd.u(arg, jj) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < m.rows(); ++i) out.basis(i, j) = sign * svd.u(i, jj);
    for (std::size_t i = 0; i < m.cols(); ++i) out.right_vectors(i, j) = sign * svd.v(i, jj);
  }
  return out;
}

Vector singular_values(const Matrix& m) {
  if (m.empty()) return {};
  require_finite(m, "singular_values");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(to_eigen(m));
  const auto& s = svd.singularValues();
  return Vector(s.data(), s.data() + s.size());
}

Matrix lstsq_operator(const Matrix& targets, const Matrix& inputs, double rel_tol) {
  if (targets.cols() != inputs.cols()) {
    throw ShapeError("lstsq_operator: targets have " + std::to_string(targets.cols()) +
                     " columns, inputs " + std::to_string(inputs.cols()));
  }
  if (targets.rows() == 0 || inputs.rows() == 0 || inputs.cols() == 0) {
    throw ShapeError("lstsq_operator: empty operand");
  }
  require_finite(targets, "lstsq_operator");
  require_finite(inputs, "lstsq_operator");

  const SvdTruncation svd =
      truncated_svd(inputs, std::min(inputs.rows(), inputs.cols()), rel_tol);
  // A = targets V S^-1 U^T
  Matrix tv = matmul(targets, svd.right_vectors);
  for (std::size_t i = 0; i < tv.rows(); ++i)
    for (std::size_t j = 0; j < tv.cols(); ++j) tv(i, j) /= svd.singular_values[j];
  return matmul(tv, svd.basis.transposed());
}

struct KktSystem::Factorization {
  Eigen::MatrixXd saddle;
  Eigen::FullPivLU<Eigen::MatrixXd> lu;
};

KktSystem::KktSystem(const Matrix& hessian, const Matrix& constraints) {
  if (hessian.rows() != hessian.cols()) throw ShapeError("solve_kkt: Hessian is not square");
  const std::size_t n = hessian.rows();
  if (constraints.rows() > 0 && constraints.cols() != n) {
    throw ShapeError("solve_kkt: constraint matrix has " + std::to_string(constraints.cols()) +
                     " columns, expected " + std::to_string(n));
  }
  require_finite(hessian, "solve_kkt");
  require_finite(constraints, "solve_kkt");
  const double asym = frobenius_norm(hessian - hessian.transposed());
  if (asym > 1e-9 * frobenius_norm(hessian)) {
    throw InvalidArgument("solve_kkt: Hessian is not symmetric (||H - H^T|| = " +
                          std::to_string(asym) + ")");
  }

  primal_dim_ = n;
  constraint_rows_ = constraints.rows();
  for (std::size_t i = 0; i < constraints.rows(); ++i) {
    if (norm2(constraints.row(i)) >= kZeroRowTol) kept_rows_.push_back(i);
  }

  const auto p = kept_rows_.size();
  const auto dim = static_cast<Eigen::Index>(n + p);
  auto f = std::make_shared<Factorization>();
  f->saddle = Eigen::MatrixXd::Zero(dim, dim);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) f->saddle(i, j) = hessian(i, j);
  for (std::size_t k = 0; k < p; ++k) {
    const auto row = constraints.row(kept_rows_[k]);
    for (std::size_t j = 0; j < n; ++j) {
      f->saddle(static_cast<Eigen::Index>(n + k), j) = row[j];
      f->saddle(j, static_cast<Eigen::Index>(n + k)) = row[j];
    }
  }
  f->lu.compute(f->saddle);

  const auto diag = f->lu.matrixLU().diagonal().cwiseAbs();
  const double max_pivot = diag.size() ? diag.maxCoeff() : 0.0;
  const double min_pivot = diag.size() ? diag.minCoeff() : 0.0;
  const double ratio = max_pivot > 0.0 ? min_pivot / max_pivot : 0.0;
  const auto rank = static_cast<std::size_t>(f->lu.rank());
  if (rank < static_cast<std::size_t>(dim)) {
    throw SingularKktError("solve_kkt: KKT matrix is singular (rank " + std::to_string(rank) +
                               " of " + std::to_string(dim) + ", pivot ratio " +
                               std::to_string(ratio) + ")",
                           static_cast<std::size_t>(dim), rank, ratio);
  }
  factor_ = std::move(f);
}

KktSolution KktSystem::solve(std::span<const double> rhs_primal,
                             std::span<const double> rhs_dual) const {
  if (rhs_primal.size() != primal_dim_) throw ShapeError("solve_kkt: primal rhs length");
  if (rhs_dual.size() != constraint_rows_) throw ShapeError("solve_kkt: dual rhs length");
  if (!all_finite(rhs_primal) || !all_finite(rhs_dual)) {
    throw InvalidArgument("solve_kkt: non-finite right-hand side");
  }
  std::vector<bool> kept(constraint_rows_, false);
  for (std::size_t k : kept_rows_) kept[k] = true;
  for (std::size_t i = 0; i < constraint_rows_; ++i) {
    if (!kept[i] && std::abs(rhs_dual[i]) > kZeroRowTol) {
      throw NumericalError("solve_kkt: constraint row " + std::to_string(i) +
                           " is zero but its right-hand side is not");
    }
  }

  const std::size_t n = primal_dim_;
  const auto dim = static_cast<Eigen::Index>(n + kept_rows_.size());
  Eigen::VectorXd rhs(dim);
  for (std::size_t i = 0; i < n; ++i) rhs(i) = rhs_primal[i];
  for (std::size_t k = 0; k < kept_rows_.size(); ++k) rhs(n + k) = rhs_dual[kept_rows_[k]];

  const auto& f = *factor_;
  Eigen::VectorXd x = f.lu.solve(rhs);
  // one step of iterative refinement
  Eigen::VectorXd r = rhs - f.saddle * x;
  x += f.lu.solve(r);
  r = rhs - f.saddle * x;

  KktSolution out;
  out.primal.assign(x.data(), x.data() + n);
  out.dual.assign(constraint_rows_, 0.0);
  for (std::size_t k = 0; k < kept_rows_.size(); ++k) out.dual[kept_rows_[k]] = x(n + k);
  out.residual = r.norm();
  out.relative_residual = out.residual / (1.0 + rhs.norm());
  out.dropped_rows = dropped_rows();
  if (!(out.relative_residual <= 1e-8)) {
    const auto diag = f.lu.matrixLU().diagonal().cwiseAbs();
    const double ratio = diag.minCoeff() / diag.maxCoeff();
    throw SingularKktError("solve_kkt: KKT solve did not converge (relative residual " +
                               std::to_string(out.relative_residual) + ", pivot ratio " +
                               std::to_string(ratio) + ")",
                           static_cast<std::size_t>(dim), static_cast<std::size_t>(f.lu.rank()),
                           ratio);
  }
  return out;
}

KktSolution solve_kkt(const Matrix& hessian, const Matrix& constraints,
                      std::span<const double> rhs_primal, std::span<const double> rhs_dual) {
  return KktSystem(hessian, constraints).solve(rhs_primal, rhs_dual);
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix k(a.rows() * b.rows(), a.cols() * b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      for (std::size_t p = 0; p < b.rows(); ++p)
        for (std::size_t q = 0; q < b.cols(); ++q)
          k(i * b.rows() + p, j * b.cols() + q) = a(i, j) * b(p, q);
  return k;
}

Vector vec(const Matrix& m) {
  Vector v(m.size());
  for (std::size_t j = 0; j < m.cols(); ++j)
    for (std::size_t i = 0; i < m.rows(); ++i) v[j * m.rows() + i] = m(i, j);
  return v;
}

Matrix unvec(std::span<const double> v, std::size_t rows, std::size_t cols) {
  if (v.size() != rows * cols) throw ShapeError("unvec: length mismatch");
  Matrix m(rows, cols);
  for (std::size_t j = 0; j < cols; ++j)
    for (std::size_t i = 0; i < rows; ++i) m(i, j) = v[j * rows + i];
  return m;
}

std::vector<std::complex<double>> eigenvalues(const Matrix& square) {
  if (square.rows() != square.cols()) throw ShapeError("eigenvalues: matrix is not square");
  if (square.empty()) return {};
  require_finite(square, "eigenvalues");
  Eigen::EigenSolver<Eigen::MatrixXd> es(to_eigen(square), false);
  if (es.info() != Eigen::Success) throw NumericalError("eigenvalues: QR iteration failed");
  const auto& ev = es.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

double spectral_radius(const Matrix& square) {
  double rho = 0.0;
  for (const auto& l : eigenvalues(square)) rho = std::max(rho, std::abs(l));
  return rho;
}

}  // namespace cycloop
