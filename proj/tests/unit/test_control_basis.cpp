#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cycloop/control_basis.hpp"
#include "cycloop/error.hpp"
#include "oracles.hpp"

using namespace cycloop;

namespace {

Matrix summed_gram(std::size_t period, std::size_t harmonics, bool constant) {
  const std::size_t m = 2 * harmonics + (constant ? 1 : 0);
  Matrix g(m, m);
  for (std::size_t t = 1; t <= period; ++t) {
    const Vector s = oracle::fourier(t, period, harmonics, constant);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) g(i, j) += s[i] * s[j];
  }
  return g;
}

// Model whose basis is orthonormal columns of a random n x r matrix.
ReducedModel random_model(std::size_t n, std::size_t r, std::mt19937_64& rng) {
  Matrix b = oracle::random_matrix(n, r, rng);
  for (std::size_t j = 0; j < r; ++j) {
    Vector c = b.col(j);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t i = 0; i < j; ++i) {
        const Vector prev = b.col(i);
        const double d = oracle::naive_dot(c, prev);
        for (std::size_t e = 0; e < n; ++e) c[e] -= d * prev[e];
      }
    }
    const double nrm = oracle::naive_norm(c);
    for (double& v : c) v /= nrm;
    b.set_col(j, c);
  }
  ReducedModel model;
  model.basis = b;
  model.op = Matrix::identity(r);
  return model;
}

}  // namespace

TEST_CASE("s_T alternates zero and one") {
  const FourierBasis basis(10, 4);
  const Vector s = basis.eval(10);
  REQUIRE(s.size() == 8);
  for (std::size_t h = 0; h < 4; ++h) {
    CHECK(std::abs(s[2 * h]) <= 1e-14);
    CHECK(std::abs(s[2 * h + 1] - 1.0) <= 1e-14);
  }
}

TEST_CASE("quarter period with one harmonic") {
  const FourierBasis basis(4, 1);
  const Vector s = basis.eval(1);
  CHECK(std::abs(s[0] - 1.0) <= 1e-15);
  CHECK(std::abs(s[1]) <= 1e-15);
}

TEST_CASE("samples match the closed form and are periodic") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> pick(1, 500);
  for (auto [period, harmonics] : {std::pair<std::size_t, std::size_t>{9, 4}, {100, 8}, {400, 8}, {7, 3}}) {
    for (bool constant : {false, true}) {
      const FourierBasis basis(period, harmonics, constant);
      CHECK(basis.dim() == 2 * harmonics + (constant ? 1 : 0));
      const Matrix samples = basis.samples();
      for (std::size_t t = 1; t <= period; ++t) {
        const Vector s = oracle::fourier(t, period, harmonics, constant);
        for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(samples(t - 1, i) - s[i]) <= 1e-13);
      }
      for (int trial = 0; trial < 20; ++trial) {
        const std::size_t t = pick(rng);
        CHECK(oracle::max_abs_diff(basis.eval(t), basis.eval(t + period)) <= 1e-9);
      }
    }
  }
}

TEST_CASE("gram of one harmonic over eight frames is diag(4, 4)") {
  const Matrix g = FourierBasis(8, 1).gram();
  CHECK(oracle::frobenius_diff(g, summed_gram(8, 1, false)) <= 1e-12);
  CHECK(std::abs(g(0, 0) - 4.0) <= 1e-12);
  CHECK(std::abs(g(1, 1) - 4.0) <= 1e-12);
  CHECK(std::abs(g(0, 1)) <= 1e-12);
}

TEST_CASE("gram agrees with summation and is orthogonal for 2H < T") {
  for (std::size_t period : {5u, 9u, 17u, 100u, 200u}) {
    for (std::size_t harmonics = 1; 2 * harmonics < period && harmonics <= 8; ++harmonics) {
      for (bool constant : {false, true}) {
        const FourierBasis basis(period, harmonics, constant);
        const Matrix g = basis.gram();
        const Matrix ref = summed_gram(period, harmonics, constant);
        CHECK(oracle::frobenius_diff(g, ref) <= 1e-10);
        CHECK(oracle::frobenius_diff(g, g.transposed()) == 0.0);
        for (double ev : oracle::symmetric_eigenvalues(g)) CHECK(ev >= -1e-12);
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < g.cols(); ++j)
            if (i != j) CHECK(std::abs(ref(i, j)) <= 1e-9);
        if (constant) CHECK(std::abs(g(2 * harmonics, 2 * harmonics) - static_cast<double>(period)) <= 1e-12);
      }
    }
  }
}

TEST_CASE("Fourier basis requires 2H < T") {
  CHECK_THROWS_AS(FourierBasis(8, 4), InvalidArgument);
  CHECK_THROWS_AS(FourierBasis(8, 0), InvalidArgument);
  CHECK_NOTHROW(FourierBasis(9, 4));
}

TEST_CASE("local basis column equals the explicit projection of the masked field") {
  std::mt19937_64 rng(2);
  const FieldLayout layout({{"positions", 3, 6}, {"velocities", 3, 6}});
  const ReducedModel model = random_model(36, 5, rng);
  const std::vector<std::size_t> elements{1, 3, 4};
  const Vector direction{0.0, 1.0, 0.0};
  const auto col = build_local_basis(model, layout, elements, "positions", direction);

  Vector field(36, 0.0);
  for (std::size_t e : elements) field[3 * e + 1] = 1.0;
  const Vector proj = oracle::naive_matvec(model.basis.transposed(), field);
  const double pn = oracle::naive_norm(proj);
  CHECK(std::abs(col.projection_norm - pn) <= 1e-12);
  for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(col.column[i] - proj[i] / pn) <= 1e-12);
  CHECK(std::abs(oracle::naive_norm(col.column) - 1.0) <= 1e-12);
}

TEST_CASE("a field inside the span projects with its full norm") {
  std::mt19937_64 rng(3);
  const FieldLayout layout = FieldLayout::flat(10);
  ReducedModel model;
  // Basis spans e_0..e_3 so an all-ones field on elements 0..3 is inside the span.
  model.basis = Matrix(10, 4);
  for (std::size_t j = 0; j < 4; ++j) model.basis(j, j) = 1.0;
  model.op = Matrix::identity(4);
  const std::vector<std::size_t> inside{0, 1, 2, 3};
  const auto col = build_local_basis(model, layout, inside, "state", Vector{1.0});
  CHECK(std::abs(col.projection_norm - 2.0) <= 1e-12);

  // Half the mask outside the span: alignment 1/sqrt(2) of the mask norm 2*sqrt(2).
  const std::vector<std::size_t> mixed{0, 1, 2, 3, 4, 5, 6, 7};
  const auto half = build_local_basis(model, layout, mixed, "state", Vector{1.0});
  CHECK(std::abs(half.projection_norm - 2.0) <= 1e-12);

  const std::vector<std::size_t> outside{6, 7, 9};
  CHECK_THROWS_AS(build_local_basis(model, layout, outside, "state", Vector{1.0}), DegenerateProjection);
}

TEST_CASE("direction scale does not change the column") {
  std::mt19937_64 rng(4);
  const FieldLayout layout({{"positions", 3, 4}, {"velocities", 3, 4}});
  const ReducedModel model = random_model(24, 3, rng);
  const std::vector<std::size_t> elements{0, 2};
  const auto a = build_local_basis(model, layout, elements, "velocities", Vector{1.0, -2.0, 0.5});
  const auto b = build_local_basis(model, layout, elements, "velocities", Vector{5.0, -10.0, 2.5});
  CHECK(oracle::max_abs_diff(a.column, b.column) <= 1e-14);
}

TEST_CASE("local basis argument errors") {
  std::mt19937_64 rng(5);
  const FieldLayout layout({{"positions", 3, 4}});
  const ReducedModel model = random_model(12, 2, rng);
  const std::vector<std::size_t> none;
  const std::vector<std::size_t> one{1};
  const std::vector<std::size_t> beyond{4};
  CHECK_THROWS_AS(build_local_basis(model, layout, none, "positions", Vector{1, 0, 0}), InvalidArgument);
  CHECK_THROWS_AS(build_local_basis(model, layout, one, "velocities", Vector{1, 0, 0}), InvalidArgument);
  CHECK_THROWS_AS(build_local_basis(model, layout, one, "positions", Vector{0, 0, 0}), InvalidArgument);
  CHECK_THROWS_AS(build_local_basis(model, layout, one, "positions", Vector{1, 0}), InvalidArgument);
  CHECK_THROWS_AS(build_local_basis(model, layout, beyond, "positions", Vector{1, 0, 0}), InvalidArgument);
}

TEST_CASE("basis sets reuse identical selections") {
  std::mt19937_64 rng(6);
  const FieldLayout layout({{"positions", 3, 4}});
  const ReducedModel model = random_model(12, 3, rng);
  LocalBasisSet set(3);
  const std::vector<std::size_t> sel{1, 2};
  const std::size_t a = set.add(build_local_basis(model, layout, sel, "positions", Vector{0, 1, 0}));
  const std::size_t b = set.add(build_local_basis(model, layout, sel, "positions", Vector{0, 3, 0}));
  const std::size_t c = set.add(build_local_basis(model, layout, sel, "positions", Vector{1, 0, 0}));
  CHECK(a == b);
  CHECK(c == a + 1);
  CHECK(set.matrix().cols() == 2);

  const auto id = LocalBasisSet::identity(4).matrix();
  CHECK(id == Matrix::identity(4));
}

TEST_CASE("regions resolve from indices and boxes") {
  const FieldLayout layout({{"positions", 2, 4}, {"velocities", 2, 4}});
  const Vector frame{0.0, 0.0, 1.0, 1.0, 2.0, 0.5, 0.5, 3.0, 0, 0, 0, 0, 0, 0, 0, 0};
  Region box;
  box.box_min = Vector{-0.5, -0.5};
  box.box_max = Vector{2.5, 1.5};
  CHECK(resolve_region(box, layout, frame) == std::vector<std::size_t>{0, 1, 2});

  Region idx;
  idx.indices = {3, 1, 3};
  CHECK(resolve_region(idx, layout, frame) == std::vector<std::size_t>{1, 3});

  const auto parsed = region_from_json(nlohmann::json::parse(R"({"box":{"min":[-0.5,-0.5],"max":[2.5,1.5]}})"));
  CHECK(resolve_region(parsed, layout, frame) == std::vector<std::size_t>{0, 1, 2});
  const auto round = region_from_json(region_to_json(idx));
  CHECK(round.indices == idx.indices);

  Region wrong;
  wrong.box_min = Vector{0, 0, 0};
  wrong.box_max = Vector{1, 1, 1};
  CHECK_THROWS_AS(resolve_region(wrong, layout, frame), InvalidArgument);
}

TEST_CASE("profile peaks at the target with the requested strength") {
  const TemporalProfile p = make_profile(100, 53, default_profile_width(100), 10.0);
  REQUIRE(p.values.size() == 100);
  CHECK(p.values[52] == 10.0);
  for (std::size_t t = 0; t < 100; ++t) CHECK(p.values[t] <= p.values[52]);
  const double w = 5.0;
  CHECK(std::abs(p.values[52 + 5] - 10.0 * std::exp(-25.0 / (2.0 * w * w))) <= 1e-12);
}

TEST_CASE("profile is symmetric under wrapping") {
  for (std::size_t target : {1u, 2u, 17u, 30u}) {
    const TemporalProfile p = make_profile(30, target, 3.0, 2.5);
    CHECK(p.values[target - 1] == 2.5);
    for (std::size_t d = 1; d < 15; ++d) {
      const std::size_t fwd = (target - 1 + d) % 30;
      const std::size_t back = (target - 1 + 30 - d) % 30;
      CHECK(std::abs(p.values[fwd] - p.values[back]) <= 1e-15);
    }
  }
  CHECK_THROWS_AS(make_profile(30, 0, 3.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(make_profile(30, 31, 3.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(make_profile(30, 5, 0.5, 1.0), InvalidArgument);
}
