#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "cycloop/error.hpp"
#include "cycloop/koopman.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace cycloop;

namespace {

// Columns x_1 .. x_count of x_{t+1} = k x_t.
SnapshotPair linear_snapshots(const Matrix& k, const Vector& x1, std::size_t count) {
  const std::size_t n = k.rows();
  Matrix x(n, count - 1);
  Matrix xp(n, count - 1);
  Vector cur = x1;
  for (std::size_t c = 0; c + 1 < count; ++c) {
    x.set_col(c, cur);
    cur = oracle::naive_matvec(k, cur);
    xp.set_col(c, cur);
  }
  return {x, xp};
}

double residual(const Matrix& zp, const Matrix& a, const Matrix& z) {
  return oracle::frobenius_diff(zp, oracle::naive_matmul(a, z));
}

double orthonormality_error(const Matrix& u) {
  return oracle::frobenius_diff(oracle::naive_matmul(u.transposed(), u), Matrix::identity(u.cols()));
}

}  // namespace

TEST_CASE("constant trajectory makes the state a fixed point of the full fit") {
  const Vector x{1.5, -2.0, 0.25};
  Matrix cols(3, 2);
  cols.set_col(0, x);
  cols.set_col(1, x);
  const auto fit = fit_full(cols, cols);
  CHECK(oracle::max_abs_diff(oracle::naive_matvec(fit.op, x), x) <= 1e-12);
  CHECK(fit.fit_residual <= 1e-14);
}

TEST_CASE("fit_full recovers a rotation") {
  const Matrix k0 = oracle::rotation(0.3);
  const auto snaps = linear_snapshots(k0, {1.0, 0.5}, 12);
  const auto fit = fit_full(snaps.inputs, snaps.targets);
  CHECK(oracle::frobenius_diff(fit.op, k0) <= 1e-8);
}

TEST_CASE("fit_full recovers a random 4x4 operator over 20 steps") {
  std::mt19937_64 rng(21);
  const Matrix k0 = oracle::random_contraction(4, rng, 0.95);
  const auto snaps = linear_snapshots(k0, oracle::random_vector(4, rng), 21);
  const auto fit = fit_full(snaps.inputs, snaps.targets);
  CHECK(oracle::frobenius_diff(fit.op, k0) <= 1e-8);
}

TEST_CASE("fit_full shape checks and dimension guard") {
  CHECK_THROWS_AS(fit_full(Matrix(3, 4), Matrix(3, 5)), ShapeError);
  CHECK_THROWS_AS(fit_full(Matrix(kMaxFullStateDim + 1, 2, 1.0), Matrix(kMaxFullStateDim + 1, 2, 1.0)),
                  InvalidArgument);
  std::mt19937_64 rng(2);
  const auto snaps = linear_snapshots(oracle::random_contraction(30, rng, 0.9), oracle::random_vector(30, rng), 60);
  CHECK(fit_full(snaps.inputs, snaps.targets).op.rows() == 30);
}

TEST_CASE("rank-2 linear recurrence embedded in 8 dimensions is fitted exactly at rank 2") {
  std::mt19937_64 rng(8);
  // Embed a 2x2 operator through an orthonormal-column lift P (8 x 2).
  Matrix p = oracle::random_matrix(8, 2, rng);
  for (std::size_t j = 0; j < 2; ++j) {
    Vector c = p.col(j);
    for (std::size_t i = 0; i < j; ++i) {
      const Vector prev = p.col(i);
      const double d = oracle::naive_dot(c, prev);
      for (std::size_t e = 0; e < 8; ++e) c[e] -= d * prev[e];
    }
    const double nrm = oracle::naive_norm(c);
    for (double& v : c) v /= nrm;
    p.set_col(j, c);
  }
  const Matrix small{{0.9, -0.3}, {0.2, 0.8}};
  const Matrix big = oracle::naive_matmul(oracle::naive_matmul(p, small), p.transposed());
  const auto snaps = linear_snapshots(big, oracle::naive_matvec(p, {1.0, -0.5}), 15);
  const auto model = reduce(snaps, 2);
  REQUIRE(model.rank() == 2);
  CHECK(residual(model.reduced_targets, model.op, model.reduced_inputs) <= 1e-10);
  CHECK(model.fit_residual <= 1e-10);
  CHECK(orthonormality_error(model.basis) <= 1e-10);
  // Same operator up to the change of basis U^T P.
  const Matrix change = oracle::naive_matmul(model.basis.transposed(), p);
  const Matrix expected = oracle::naive_matmul(oracle::naive_matmul(change, small), oracle::inverse(change));
  CHECK(oracle::frobenius_diff(model.op, expected) <= 1e-9);
  CHECK(model.warnings.empty());
}

TEST_CASE("full-rank reduce matches fit_full conjugated by the basis") {
  std::mt19937_64 rng(9);
  const std::size_t n = 5;
  const Matrix x = oracle::random_matrix(n, 12, rng);
  const Matrix xp = oracle::random_matrix(n, 12, rng);
  const auto full = fit_full(x, xp);
  const auto model = reduce({x, xp}, n);
  REQUIRE(model.rank() == n);
  const Matrix conj = oracle::naive_matmul(oracle::naive_matmul(model.basis.transposed(), full.op), model.basis);
  CHECK(oracle::frobenius_diff(model.op, conj) <= 1e-10);
  CHECK(std::abs(model.fit_residual - full.fit_residual) <= 1e-10);
}

TEST_CASE("reduced fit is optimal under random perturbations") {
  std::mt19937_64 rng(10);
  const Matrix x = oracle::random_matrix(12, 40, rng);
  const Matrix xp = oracle::random_matrix(12, 40, rng);
  const auto model = reduce({x, xp}, 4);
  const double base = residual(model.reduced_targets, model.op, model.reduced_inputs);
  for (int trial = 0; trial < 100; ++trial) {
    Matrix d = oracle::random_matrix(4, 4, rng);
    double nrm = 0.0;
    for (double v : d.values()) nrm += v * v;
    nrm = std::sqrt(nrm);
    Matrix a = model.op;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) a(i, j) += 1e-3 * d(i, j) / nrm;
    CHECK(residual(model.reduced_targets, a, model.reduced_inputs) >= base);
  }
}

TEST_CASE("reduce warns and falls back to the effective rank") {
  std::mt19937_64 rng(12);
  const Matrix x = oracle::random_matrix(3, 5, rng);
  const auto over = reduce({x, x}, 6);
  CHECK(over.rank() == 3);
  CHECK(over.requested_rank == 6);
  REQUIRE(!over.warnings.empty());
  CHECK(over.warnings.front().find("exceeds") != std::string::npos);

  // Rank-1 columns in 4 dimensions.
  Matrix low(4, 6);
  const Vector dir{1.0, 2.0, -1.0, 0.5};
  for (std::size_t c = 0; c < 6; ++c)
    for (std::size_t i = 0; i < 4; ++i) low(i, c) = dir[i] * (1.0 + static_cast<double>(c));
  const auto deficient = reduce({low, low}, 3);
  CHECK(deficient.rank() == 1);
  REQUIRE(!deficient.warnings.empty());
  CHECK(deficient.warnings.back().find("numerical rank 1") != std::string::npos);

  CHECK_THROWS_AS(reduce({x, x}, 0), InvalidArgument);
  CHECK_THROWS_AS(reduce({x, Matrix(3, 4)}, 1), ShapeError);
}

TEST_CASE("energy fraction selects the smallest sufficient rank") {
  const Vector s{3.0, 2.0, 1.0, 0.0};
  // energies 9, 4, 1 of 14
  CHECK(energy_rank(s, 9.0 / 14.0) == 1);
  CHECK(energy_rank(s, 13.0 / 14.0) == 2);
  CHECK(energy_rank(s, 13.5 / 14.0) == 3);
  CHECK(energy_rank(s, 1.0) == 3);
  CHECK_THROWS_AS(energy_rank(s, 0.0), InvalidArgument);

  const Vector d{3.0, 2.0, 1.0};
  const Matrix x = Matrix::diagonal(d);
  ReduceOptions opts;
  opts.energy_fraction = 0.9;
  CHECK(reduce({x, x}, 3, opts).rank() == 2);
}

TEST_CASE("rollout examples and the recursion oracle") {
  ReducedModel model;
  model.basis = Matrix::identity(2);
  model.op = Matrix::identity(2);
  const auto same = rollout(model, Vector{0.3, -0.7}, 5);
  REQUIRE(same.size() == 5);
  for (const auto& z : same) CHECK(z == Vector{0.3, -0.7});

  model.op = Matrix{{0.5, 0.0}, {0.0, 0.5}};
  const auto decay = rollout(model, Vector{1.0, 0.0}, 3);
  CHECK(decay[2][0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(decay[2][1] == 0.0);

  std::mt19937_64 rng(13);
  for (std::size_t r : {1u, 3u, 6u, 16u}) {
    model.basis = Matrix::identity(r);
    model.op = oracle::random_contraction(r, rng, 0.99);
    const Vector z1 = oracle::random_vector(r, rng);
    const auto zs = rollout(model, z1, 30);
    Vector cur = z1;
    for (std::size_t t = 0; t < 30; ++t) {
      CHECK(oracle::max_abs_diff(zs[t], cur) <= 1e-12);
      cur = oracle::naive_matvec(model.op, cur);
    }
  }
  CHECK_THROWS_AS(rollout(model, Vector(3), 2), ShapeError);
}

TEST_CASE("lift and project are the basis maps") {
  std::mt19937_64 rng(14);
  const Matrix x = oracle::random_matrix(20, 30, rng);
  const auto model = reduce({x, x}, 5);
  CHECK(orthonormality_error(model.basis) <= 1e-10);

  const Vector zero = lift(model, Vector(5, 0.0));
  for (double v : zero) CHECK(v == 0.0);

  for (int trial = 0; trial < 10; ++trial) {
    const Vector z = oracle::random_vector(5, rng);
    CHECK(std::abs(oracle::naive_norm(lift(model, z)) - oracle::naive_norm(z)) <= 1e-12);

    // lift(project(x)) is the orthogonal projection: idempotent and the
    // residual is orthogonal to every basis column.
    const Vector v = oracle::random_vector(20, rng);
    const Vector p = lift(model, project(model, v));
    CHECK(oracle::max_abs_diff(lift(model, project(model, p)), p) <= 1e-12);
    Vector res(20);
    for (std::size_t i = 0; i < 20; ++i) res[i] = v[i] - p[i];
    for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(oracle::naive_dot(res, model.basis.col(j))) <= 1e-12);
  }
  CHECK_THROWS_AS(lift(model, Vector(4)), ShapeError);
  CHECK_THROWS_AS(project(model, Vector(19)), ShapeError);
}

TEST_CASE("spectral radius agrees with the characteristic polynomial") {
  std::mt19937_64 rng(15);
  for (std::size_t r = 1; r <= 4; ++r) {
    for (int trial = 0; trial < 10; ++trial) {
      const Matrix k = oracle::random_matrix(r, r, rng);
      const auto snaps = linear_snapshots(k, oracle::random_vector(r, rng), 3 * r + 4);
      const auto model = reduce(snaps, r);
      CHECK(std::abs(model.spectral_radius - oracle::spectral_radius(model.op)) <= 1e-8);
    }
  }
}

TEST_CASE("holdout error measures one-step prediction in reduced space") {
  ReducedModel model;
  model.basis = Matrix::identity(2);
  model.op = oracle::rotation(0.5);
  const Vector prev{1.0, 0.0};
  const Vector next = oracle::naive_matvec(model.op, prev);
  CHECK(holdout_error(model, prev, next) <= 1e-15);
  CHECK(holdout_error(model, prev, Vector{next[0] + 0.3, next[1] - 0.4}) == doctest::Approx(0.5));
}

TEST_CASE("model files round-trip") {
  TempDir dir;
  std::mt19937_64 rng(16);
  const Matrix x = oracle::random_matrix(9, 14, rng);
  const Matrix xp = oracle::random_matrix(9, 14, rng);
  const auto model = reduce({x, xp}, 3);
  save_model(model, dir / "m.koop");
  const auto back = load_model(dir / "m.koop");
  CHECK(back.basis == model.basis);
  CHECK(back.op == model.op);
  CHECK(back.fit_residual == model.fit_residual);
  CHECK(fingerprint(back) == fingerprint(model));

  auto other = model;
  other.op(0, 0) += 1e-12;
  CHECK(fingerprint(other) != fingerprint(model));

  {
    std::ofstream out(dir / "bad.koop", std::ios::binary);
    out << "{\"n\":9,\"r\":3}\n";
  }
  CHECK_THROWS_AS(load_model(dir / "bad.koop"), FormatError);
}
