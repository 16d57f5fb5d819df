// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "cycloop/cyclic_solver.hpp"
#include "cycloop/datagen.hpp"
#include "cycloop/interactive.hpp"
#include "cycloop/kernels.hpp"
#include "cycloop/koopman.hpp"
#include "oracles.hpp"

using namespace cycloop;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

void report(bool ok, const char* name, const std::string& detail) {
  std::printf("%s %-24s %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct DatasetRun {
  std::string name;
  Trajectory traj;
  CyclicSolution sol;
  LoopReport rep;
  double total_seconds = 0.0;
};

DatasetRun run_dataset(const std::string& cls, std::size_t rank) {
  DatasetRun d;
  d.name = cls;
  const auto t0 = Clock::now();
  d.traj = generate(cls, nlohmann::json::object());
  CyclicOptions opts;
  opts.rank = rank;
  opts.harmonics = 8;
  opts.weights = {1e-2, 3.0};
  d.sol = solve_cyclic(d.traj, opts);
  d.total_seconds = seconds_since(t0);
  d.rep = evaluate(d.sol, d.traj);
  return d;
}

// Criterion: closure at solver precision on the three generated datasets.
void closure(const std::vector<DatasetRun>& runs) {
  bool ok = true;
  std::string detail;
  for (const auto& d : runs) {
    const double bound = 1e-8 * (1.0 + oracle::naive_norm(d.sol.z1));
    const bool good = d.sol.metrics.closure_residual <= bound && d.total_seconds < 10.0 &&
                      d.sol.gamma.cols() == 16;
    ok = ok && good;
    detail += d.name + " r=" + std::to_string(d.sol.gamma.rows()) + " T=" + std::to_string(d.sol.period) +
              fmt(" closure=%.2e", d.sol.metrics.closure_residual) + fmt(" bound=%.2e", bound) +
              fmt(" time=%.2fs; ", d.total_seconds);
  }
  report(ok, "closure", detail);
}

// Criterion: objective and minimizer agree with nullspace elimination.
void oracle_equivalence() {
  std::mt19937_64 rng(20240601);
  double worst_obj = 0.0, worst_q = 0.0;
  int compared_q = 0;
  bool ok = true;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t r = 1 + trial % 3;
    const std::size_t period = 5 + trial % 6;  // T in [5, 10]
    const std::size_t harmonics = 1 + (trial / 3) % 2;
    // r-dimensional input whose rank-r basis is a full rotation of the frames
    Trajectory traj;
    traj.layout = FieldLayout::flat(r);
    const Matrix k = oracle::random_contraction(r, rng, 0.9);
    Vector x = oracle::random_vector(r, rng);
    std::normal_distribution<double> noise(0.0, 0.1);
    for (std::size_t t = 0; t <= period; ++t) {
      traj.frames.push_back(x);
      x = oracle::naive_matvec(k, x);
      for (double& v : x) v += noise(rng);
    }
    CyclicOptions opts;
    opts.rank = r;
    opts.harmonics = harmonics;
    const CyclicSolution sol = solve_cyclic(traj, opts);
    const Matrix observed = project_frames(*sol.model, traj, period);
    const auto qp = oracle::direct_cyclic_qp(sol.model->op, observed, harmonics, 1e-2, 3.0, true);
    const auto ref = oracle::nullspace_qp(qp.hessian, qp.rhs, qp.constraint, qp.constant);
    const double rel = std::abs(sol.metrics.objective - ref.objective) / std::max(std::abs(ref.objective), 1e-300);
    worst_obj = std::max(worst_obj, rel);
    ok = ok && rel <= 1e-8;
    if (ref.reduced_condition < 1e8) {
      const double dq = oracle::max_abs_diff(sol.q, ref.q);
      worst_q = std::max(worst_q, dq);
      ok = ok && dq <= 1e-6;
      ++compared_q;
    }
  }
  report(ok, "oracle_equivalence",
         "20 instances" + fmt(" max_rel_objective=%.2e", worst_obj) + fmt(" max_q_diff=%.2e", worst_q) +
             " (q compared on " + std::to_string(compared_q) + ")");
}

// Criterion: stacked rollout matrices reproduce the recursion.
void rollout_matrices() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> rd(1, 6), td(5, 40);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t r = rd(rng);
    const std::size_t period = td(rng);
    const std::size_t harmonics = std::min<std::size_t>(1 + trial % 4, (period - 1) / 2);
    const Matrix k = oracle::random_contraction(r, rng, 1.0);
    const FourierBasis basis(period, harmonics);
    const RolloutSystem sys = build_rollout(k, basis);
    const Vector q = oracle::random_vector(sys.unknowns(), rng);
    const Vector z1(q.begin(), q.begin() + static_cast<std::ptrdiff_t>(r));
    Matrix g(r, basis.dim());
    for (std::size_t a = 0; a < basis.dim(); ++a)
      for (std::size_t i = 0; i < r; ++i) g(i, a) = q[r + a * r + i];
    const auto states = oracle::controlled_recursion(k, g, z1, period, harmonics);
    const Vector aq = oracle::naive_matvec(sys.stacked, q);
    for (std::size_t t = 0; t < period; ++t)
      for (std::size_t i = 0; i < r; ++i) worst = std::max(worst, std::abs(aq[t * r + i] - states[t][i]));
    const Vector last = oracle::naive_matvec(sys.final_block, q);
    worst = std::max(worst, oracle::max_abs_diff(last, states[period]));
  }
  report(worst <= 1e-11, "rollout_matrices", "50 triples" + fmt(" max_abs_gap=%.2e", worst));
}

// Criterion: a closed rotation needs no control.
void zero_control() {
  std::mt19937_64 rng(5);
  const std::size_t n = 6, period = 40;
  Matrix p = oracle::random_matrix(n, 2, rng);
  // orthonormal embedding by Gram-Schmidt
  for (std::size_t j = 0; j < 2; ++j) {
    Vector c = p.col(j);
    for (std::size_t i = 0; i < j; ++i) {
      const Vector prev = p.col(i);
      const double d = oracle::naive_dot(c, prev);
      for (std::size_t e = 0; e < n; ++e) c[e] -= d * prev[e];
    }
    const double nrm = oracle::naive_norm(c);
    for (double& v : c) v /= nrm;
    p.set_col(j, c);
  }
  Trajectory traj;
  traj.layout = FieldLayout::flat(n);
  for (std::size_t t = 0; t <= period; ++t) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(period);
    traj.frames.push_back(oracle::naive_matvec(p, {1.5 * std::cos(a), 1.5 * std::sin(a)}));
  }
  CyclicOptions opts;
  opts.rank = 2;
  opts.harmonics = 8;
  const CyclicSolution sol = solve_cyclic(traj, opts);
  const LoopReport rep = evaluate(sol, traj);
  double gnorm = 0.0;
  for (double v : sol.gamma.values()) gnorm += v * v;
  gnorm = std::sqrt(gnorm);
  report(gnorm <= 1e-8 && rep.fidelity_rmse <= 1e-8, "zero_control",
         fmt("||Gamma||_F=%.2e", gnorm) + fmt(" fidelity_rmse=%.2e", rep.fidelity_rmse));
}

// Criterion: known stable operators are recovered from their trajectories.
void koopman_recovery() {
  std::mt19937_64 rng(31);
  double worst_full = 0.0, worst_reduced = 0.0;
  for (std::size_t r = 1; r <= 6; ++r) {
    for (int trial = 0; trial < 5; ++trial) {
      const Matrix k0 = oracle::random_contraction(r, rng, 0.95);
      const std::size_t steps = 4 * r + 16;
      Matrix x(r, steps), xp(r, steps);
      Vector cur = oracle::random_vector(r, rng);
      for (std::size_t c = 0; c < steps; ++c) {
        x.set_col(c, cur);
        cur = oracle::naive_matvec(k0, cur);
        xp.set_col(c, cur);
      }
      const FullFit full = fit_full(x, xp);
      worst_full = std::max(worst_full, oracle::frobenius_diff(full.op, k0));
      const ReducedModel model = reduce({x, xp}, r);
      const Matrix back =
          oracle::naive_matmul(oracle::naive_matmul(model.basis, model.op), model.basis.transposed());
      worst_reduced = std::max(worst_reduced, oracle::frobenius_diff(back, k0));
    }
  }
  report(worst_full <= 1e-8 && worst_reduced <= 1e-8, "koopman_recovery",
         "r=1..6 x5" + fmt(" full_err=%.2e", worst_full) + fmt(" reduced_err=%.2e", worst_reduced));
}

// Reduced data for a configuration whose full-scale asset is unavailable.
Matrix synthetic_observed(std::size_t r, std::size_t period, std::mt19937_64& rng, Matrix& op) {
  op = oracle::random_contraction(r, rng, 0.99);
  Matrix y(r, period);
  Vector z = oracle::random_vector(r, rng, -5.0, 5.0);
  for (std::size_t t = 0; t < period; ++t) {
    y.set_col(t, z);
    z = oracle::naive_matvec(op, z);
    z[0] += 0.01;  // slow drift so the input does not close
  }
  return y;
}

// Criterion: optimization stays under a second at every benchmark configuration.
void timing(const std::vector<DatasetRun>& runs) {
  bool ok = true;
  std::string detail;
  auto add = [&](const std::string& name, std::size_t r, std::size_t period, const CyclicMetrics& m) {
    ok = ok && m.solve_seconds < 1.0;
    detail += name + " r=" + std::to_string(r) + " T=" + std::to_string(period) +
              fmt(" proc=%.3fs", m.processing_seconds) + fmt(" opt=%.3fs; ", m.solve_seconds);
  };
  for (const auto& d : runs) add(d.name, d.sol.gamma.rows(), d.sol.period, d.sol.metrics);
  std::mt19937_64 rng(99);
  const struct {
    const char* name;
    std::size_t r, period;
  } synthetic[] = {{"synthetic-8", 8, 300}, {"synthetic-16", 16, 100}};
  for (const auto& s : synthetic) {
    Matrix op;
    const Matrix y = synthetic_observed(s.r, s.period, rng, op);
    const CyclicSolution sol = solve_reduced(op, y, FourierBasis(s.period, 8), {1e-2, 3.0});
    ok = ok && sol.metrics.closure_relative <= 1e-8;
    add(s.name, s.r, s.period, sol.metrics);
  }
  report(ok, "timing", detail);
}

// Criterion: the local-edit solver reduces to the base solver, and every edit closes.
void interactive(const DatasetRun& water, const DatasetRun& nbody) {
  bool ok = true;
  double worst_gap = 0.0, worst_closure = 0.0;
  std::size_t edits = 0;

  for (const DatasetRun* d : {&nbody, &water}) {
    const ReducedModel& model = *d->sol.model;
    const std::size_t r = model.rank();
    const Matrix observed = project_frames(model, d->traj, d->sol.period);
    const FourierBasis basis(d->sol.period, 8);
    EditProblem p{model.op, basis, Matrix::identity(r), 0, make_profile(basis.period(), 1, 1.0, 0.0),
                  {1e-2, 3.0, 0.0}};
    const EditSolution edit = solve_edit(p, observed);
    const CyclicSolution base = solve_reduced(model.op, observed, basis, {1e-2, 3.0}, ControlEnergy::identity);
    for (std::size_t t = 0; t < base.reduced_cycle.size(); ++t) {
      const Vector a = lift(model, edit.reduced_cycle[t]);
      const Vector b = lift(model, base.reduced_cycle[t]);
      worst_gap = std::max(worst_gap, oracle::max_abs_diff(a, b));
    }
  }
  ok = ok && worst_gap <= 1e-8;

  // A run of localized edits on the water session.
  const auto model = water.sol.model;
  const Matrix observed = project_frames(*model, water.traj, water.sol.period);
  EditSession session(model, observed, FourierBasis(water.sol.period, 8), LocalBasisSet(model->rank()));
  const FieldLayout& layout = water.traj.layout;
  const std::size_t nx = 150;
  const std::size_t centres[][2] = {{52, 63}, {75, 75}, {30, 110}, {120, 40}};
  for (const auto& c : centres) {
    std::vector<std::size_t> cells;
    for (std::size_t j = c[1] - 4; j <= c[1] + 4; ++j)
      for (std::size_t i = c[0] - 4; i <= c[0] + 4; ++i) cells.push_back(j * nx + i);
    session.add_basis(build_local_basis(*model, layout, cells, "height", Vector{1.0}));
  }
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> frame(1, water.sol.period);
  std::uniform_real_distribution<double> strength(-10.0, 10.0);
  for (int i = 0; i < 12; ++i) {
    EditRequest req;
    req.selected = static_cast<std::size_t>(i) % session.basis_count();
    req.target_frame = i == 0 ? 53 : frame(rng);
    req.strength = i == 0 ? 10.0 : strength(rng);
    if (i % 3 == 2) req.weights.profile = 0.0;
    const auto sol = session.apply(req);
    worst_closure = std::max(worst_closure, sol->metrics.closure_relative);
    ok = ok && sol->metrics.closure_relative <= 1e-9;
    ++edits;
  }
  report(ok, "interactive_equivalence",
         fmt("max_traj_gap=%.2e", worst_gap) + " edits=" + std::to_string(edits) +
             fmt(" max_closure=%.2e", worst_closure));
}

// Criterion: every generated dataset has a wider seam before than after.
void seam_gap(const std::vector<DatasetRun>& runs) {
  bool ok = true;
  std::string detail;
  for (const auto& d : runs) {
    ok = ok && d.rep.raw_seam_gap > d.rep.edited_seam_gap;
    detail += d.name + fmt(" raw=%.3e", d.rep.raw_seam_gap) + fmt(" edited=%.3e; ", d.rep.edited_seam_gap);
  }
  report(ok, "seam_gap", detail);
}

}  // namespace

int main() {
  std::printf("kernels: %s\n", std::string(kernels::active().name).c_str());
  try {
    std::vector<DatasetRun> runs;
    runs.push_back(run_dataset("nbody", 3));
    runs.push_back(run_dataset("sheet", 8));
    runs.push_back(run_dataset("water", 16));

    closure(runs);
    oracle_equivalence();
    rollout_matrices();
    zero_control();
    koopman_recovery();
    timing(runs);
    interactive(runs[2], runs[0]);
    seam_gap(runs);
  } catch (const std::exception& e) {
    std::printf("FAIL %-24s %s\n", "exception", e.what());
    return 1;
  }
  return failures == 0 ? 0 : 1;
}
