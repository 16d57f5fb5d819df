#include "cycloop/cyclic_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "cycloop/error.hpp"
#include "cycloop/numerics.hpp"
#include "detail/binary_io.hpp"

namespace cycloop {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void symmetrize_upper(Matrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j) m(j, i) = m(i, j);
}

// ||z~_t - R_t q|| over all t, with R_t taken from the stacked system.
double recursion_gap(const RolloutSystem& sys, const std::vector<Vector>& states, std::span<const double> q) {
  const Vector stacked = matvec(sys.stacked, q);
  const Vector last = matvec(sys.final_block, q);
  const std::size_t r = sys.reduced_dim;
  double gap = 0.0;
  for (std::size_t t = 0; t < sys.period; ++t) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
      const double d = states[t][i] - stacked[t * r + i];
      d2 += d * d;
    }
    gap = std::max(gap, std::sqrt(d2));
  }
  return std::max(gap, norm2(subtract(states[sys.period], last)));
}

}  // namespace

void SolverWeights::validate() const {
  if (!(fidelity > 0.0) || !std::isfinite(fidelity)) throw InvalidArgument("w_red must be positive");
  if (!(control > 0.0) || !std::isfinite(control)) throw InvalidArgument("w_u must be positive");
}

std::string to_string(ControlEnergy e) { return e == ControlEnergy::gram ? "gram" : "identity"; }

ControlEnergy control_energy_from_string(const std::string& s) {
  if (s == "gram") return ControlEnergy::gram;
  if (s == "identity") return ControlEnergy::identity;
  throw InvalidArgument("unknown control energy \"" + s + "\" (expected gram or identity)");
}

Matrix RolloutSystem::block(std::size_t t) const {
  if (t < 1 || t > period + 1) throw InvalidArgument("RolloutSystem::block: t out of range");
  if (t == period + 1) return final_block;
  return stacked.block((t - 1) * reduced_dim, 0, reduced_dim, unknowns());
}

RolloutSystem build_controlled_rollout(const Matrix& op, const FourierBasis& basis,
                                       const Matrix& control_basis) {
  const std::size_t r = op.rows();
  if (op.cols() != r || r == 0) throw ShapeError("rollout: operator must be square and nonempty");
  if (control_basis.rows() != r) {
    throw ShapeError("rollout: control basis has " + std::to_string(control_basis.rows()) +
                     " rows, operator has dimension " + std::to_string(r));
  }
  RolloutSystem sys;
  sys.reduced_dim = r;
  sys.control_dim = control_basis.cols();
  sys.basis_dim = basis.dim();
  sys.period = basis.period();
  sys.gram = basis.gram();
  const std::size_t k = sys.control_dim;
  const std::size_t m = sys.basis_dim;
  const std::size_t n_q = sys.unknowns();
  const std::size_t T = sys.period;

  sys.stacked = Matrix(r * T, n_q);
  Matrix current(r, n_q);
  for (std::size_t i = 0; i < r; ++i) current(i, i) = 1.0;  // R_1 = [I | 0]

  Vector s(m);
  for (std::size_t t = 1; t <= T; ++t) {
    sys.stacked.set_block((t - 1) * r, 0, current);
    // R_{t+1} = op R_t + [0 | B (s_t^T kron I_k)]
    Matrix next = matmul(op, current);
    basis.eval_into(t, s);
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t col0 = r + j * k;
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t c = 0; c < k; ++c) next(i, col0 + c) += s[j] * control_basis(i, c);
    }
    current = std::move(next);
  }
  sys.final_block = current;
  sys.closure = current;
  for (std::size_t i = 0; i < r; ++i) sys.closure(i, i) -= 1.0;
  return sys;
}

RolloutSystem build_rollout(const Matrix& op, const FourierBasis& basis) {
  return build_controlled_rollout(op, basis, Matrix::identity(op.rows()));
}

double QuadraticProgram::objective(std::span<const double> q) const {
  const Vector hq = matvec(hessian, q);
  return 0.5 * dot(q, hq) - dot(rhs, q) + constant;
}

Vector QuadraticProgram::gradient(std::span<const double> q) const {
  return subtract(matvec(hessian, q), rhs);
}

Vector stack_columns(const Matrix& observed) { return vec(observed); }

QuadraticProgram assemble_qp(const RolloutSystem& sys, const Matrix& observed,
                             const SolverWeights& weights, ControlEnergy energy) {
  weights.validate();
  const std::size_t r = sys.reduced_dim;
  const std::size_t k = sys.control_dim;
  const std::size_t m = sys.basis_dim;
  if (observed.rows() != r || observed.cols() != sys.period) {
    throw ShapeError("assemble_qp: observed frames are " + std::to_string(observed.rows()) + "x" +
                     std::to_string(observed.cols()) + ", expected " + std::to_string(r) + "x" +
                     std::to_string(sys.period));
  }
  const Vector y = stack_columns(observed);

  QuadraticProgram qp;
  qp.hessian = matmul_tn(sys.stacked, sys.stacked);
  qp.hessian *= 2.0 * weights.fidelity;
  // + 2 w_u E^T (M kron I_k) E
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = 0; b < m; ++b) {
      const double mab = energy == ControlEnergy::gram ? sys.gram(a, b) : (a == b ? 1.0 : 0.0);
      if (mab == 0.0) continue;
      for (std::size_t i = 0; i < k; ++i) qp.hessian(r + a * k + i, r + b * k + i) += 2.0 * weights.control * mab;
    }
  }
  symmetrize_upper(qp.hessian);

  qp.rhs = matvec_t(sys.stacked, y);
  for (double& v : qp.rhs) v *= 2.0 * weights.fidelity;
  qp.constraint = sys.closure;
  qp.constant = weights.fidelity * dot(y, y);
  return qp;
}

std::vector<Vector> controlled_rollout(const Matrix& op, const Matrix& gamma,
                                       const FourierBasis& basis, std::span<const double> z1) {
  const std::size_t r = op.rows();
  if (gamma.rows() != r || gamma.cols() != basis.dim() || z1.size() != r) {
    throw ShapeError("controlled_rollout: shape mismatch");
  }
  std::vector<Vector> states;
  states.reserve(basis.period() + 1);
  states.emplace_back(z1.begin(), z1.end());
  Vector s(basis.dim());
  for (std::size_t t = 1; t <= basis.period(); ++t) {
    basis.eval_into(t, s);
    Vector next = matvec(op, states.back());
    const Vector u = matvec(gamma, s);
    for (std::size_t i = 0; i < r; ++i) next[i] += u[i];
    states.push_back(std::move(next));
  }
  return states;
}

CyclicSolution solve_reduced(const Matrix& op, const Matrix& observed, const FourierBasis& basis,
                             const SolverWeights& weights, ControlEnergy energy) {
  const auto t0 = Clock::now();
  const RolloutSystem sys = build_rollout(op, basis);
  const QuadraticProgram qp = assemble_qp(sys, observed, weights, energy);
  const double processing = seconds_since(t0);

  const auto t1 = Clock::now();
  const KktSystem kkt(qp.hessian, qp.constraint);
  const Vector zero_dual(qp.constraint.rows(), 0.0);
  KktSolution sol = kkt.solve(qp.rhs, zero_dual);
  const double solve = seconds_since(t1);

  const std::size_t r = sys.reduced_dim;
  const std::size_t m = sys.basis_dim;
  CyclicSolution out;
  out.q = sol.primal;
  out.z1.assign(out.q.begin(), out.q.begin() + static_cast<std::ptrdiff_t>(r));
  out.gamma = unvec(std::span<const double>(out.q).subspan(r), r, m);
  out.dual = std::move(sol.dual);
  out.reduced_cycle = controlled_rollout(op, out.gamma, basis, out.z1);
  out.harmonics = basis.harmonics();
  out.include_constant = basis.include_constant();
  out.period = basis.period();
  out.weights = weights;
  out.energy = energy;

  auto& mt = out.metrics;
  mt.closure_residual = norm2(subtract(out.reduced_cycle.back(), out.reduced_cycle.front()));
  mt.closure_relative = mt.closure_residual / (1.0 + norm2(out.z1));
  Vector s(m);
  for (std::size_t t = 1; t <= sys.period; ++t) {
    const Vector zt = observed.col(t - 1);
    const Vector d = subtract(out.reduced_cycle[t - 1], zt);
    mt.fidelity_cost += dot(d, d);
    basis.eval_into(t, s);
    const Vector u = matvec(out.gamma, s);
    mt.control_cost += dot(u, u);
  }
  mt.objective = qp.objective(out.q);
  mt.kkt_residual = sol.relative_residual;
  mt.recursion_gap = recursion_gap(sys, out.reduced_cycle, out.q);
  mt.processing_seconds = processing;
  mt.solve_seconds = solve;
  mt.dropped_constraints = sol.dropped_rows;

  double scale = 1.0;
  for (const auto& z : out.reduced_cycle) scale = std::max(scale, norm2(z));
  if (mt.recursion_gap > 1e-8 * scale) {
    throw NumericalError("solve_cyclic: re-rolled trajectory departs from the rollout matrices by " +
                         std::to_string(mt.recursion_gap));
  }
  return out;
}

std::size_t default_rank(const std::string& source) {
  if (source == "nbody") return 3;
  if (source == "sheet") return 8;
  if (source == "water") return 16;
  return 8;
}

CyclicSolution solve_cyclic(const Trajectory& input, const CyclicOptions& options) {
  input.validate();
  options.weights.validate();
  const FrameSplit split = split_frames(input);
  const std::size_t T = split.fit_frames;
  if (2 * options.harmonics >= T) {
    throw InvalidArgument("solve_cyclic: 2 * harmonics = " + std::to_string(2 * options.harmonics) +
                          " must be below the fit frame count " + std::to_string(T));
  }

  const bool scaled = !options.block_scale.empty();
  const Vector scale = scaled ? expand_block_scale(input.layout, options.block_scale) : Vector{};
  const Trajectory traj = scaled ? scale_trajectory(input, scale) : input;

  const auto t0 = Clock::now();
  const SnapshotPair snaps = snapshot_pair(traj, T);
  ReduceOptions ropt;
  ropt.rel_tol = options.rel_tol;
  ropt.energy_fraction = options.energy_fraction;
  auto model = std::make_shared<ReducedModel>(options.full_space
                                                  ? full_space_model(snaps, options.rel_tol)
                                                  : reduce(snaps, options.rank, ropt));
  const Matrix observed = project_frames(*model, traj, T);
  const FourierBasis basis(T, options.harmonics, options.include_constant);
  const double fit_seconds = std::chrono::duration<double>(Clock::now() - t0).count();

  CyclicSolution sol = solve_reduced(model->op, observed, basis, options.weights, options.energy);
  sol.metrics.processing_seconds += fit_seconds;
  sol.metrics.fit_residual = model->fit_residual;
  sol.metrics.holdout_error = holdout_error(*model, traj.frames[T - 1], traj.frames[T]);

  if (options.lift_frames) {
    sol.full_cycle.dt = input.dt;
    sol.full_cycle.layout = input.layout;
    sol.full_cycle.source = input.source;
    sol.full_cycle.frames.reserve(sol.reduced_cycle.size());
    for (const auto& z : sol.reduced_cycle) {
      Vector x = lift(*model, z);
      if (scaled) {
        for (std::size_t i = 0; i < x.size(); ++i) x[i] /= scale[i];
      }
      sol.full_cycle.frames.push_back(std::move(x));
    }
  }
  sol.model = std::move(model);
  return sol;
}

LoopReport evaluate(const CyclicSolution& solution, const Trajectory& traj) {
  LoopReport rep;
  const auto& frames = solution.full_cycle.frames;
  if (frames.empty()) throw InvalidArgument("evaluate: solution carries no lifted frames");
  if (frames.front().size() != traj.state_dim()) {
    throw ShapeError("evaluate: solution frames have dimension " + std::to_string(frames.front().size()) +
                     ", trajectory " + std::to_string(traj.state_dim()));
  }
  const std::size_t T = frames.size() - 1;
  if (traj.frame_count() < T) {
    throw ShapeError("evaluate: trajectory has " + std::to_string(traj.frame_count()) +
                     " frames, solution covers " + std::to_string(T));
  }
  double sq = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const Vector d = subtract(frames[t], traj.frames[t]);
    const double f = dot(d, d);
    sq += f;
    rep.max_frame_rmse = std::max(rep.max_frame_rmse, std::sqrt(f / static_cast<double>(d.size())));
  }
  rep.fidelity_rmse = std::sqrt(sq / static_cast<double>(T * traj.state_dim()));
  rep.closure_full = norm2(subtract(frames[T], frames[0]));
  rep.edited_seam_gap = rep.closure_full;
  rep.closure_reduced = solution.reduced_cycle.empty()
                            ? solution.metrics.closure_residual
                            : norm2(subtract(solution.reduced_cycle.back(), solution.reduced_cycle.front()));
  rep.raw_seam_gap = norm2(subtract(traj.frames.back(), traj.frames.front()));

  if (solution.gamma.rows() > 0) {
    const FourierBasis basis(solution.period, solution.harmonics, solution.include_constant);
    Vector s(basis.dim());
    for (std::size_t t = 1; t <= basis.period(); ++t) {
      basis.eval_into(t, s);
      const Vector u = matvec(solution.gamma, s);
      rep.control_energy += dot(u, u);
    }
  }
  return rep;
}

nlohmann::json metrics_to_json(const CyclicMetrics& m) {
  return {{"closure_residual", m.closure_residual},
          {"closure_relative", m.closure_relative},
          {"fidelity_cost", m.fidelity_cost},
          {"control_cost", m.control_cost},
          {"objective", m.objective},
          {"kkt_residual", m.kkt_residual},
          {"recursion_gap", m.recursion_gap},
          {"holdout_error", m.holdout_error},
          {"fit_residual", m.fit_residual},
          {"processing_seconds", m.processing_seconds},
          {"solve_seconds", m.solve_seconds},
          {"dropped_constraints", m.dropped_constraints}};
}

CyclicMetrics metrics_from_json(const nlohmann::json& j) {
  CyclicMetrics m;
  m.closure_residual = j.value("closure_residual", 0.0);
  m.closure_relative = j.value("closure_relative", 0.0);
  m.fidelity_cost = j.value("fidelity_cost", 0.0);
  m.control_cost = j.value("control_cost", 0.0);
  m.objective = j.value("objective", 0.0);
  m.kkt_residual = j.value("kkt_residual", 0.0);
  m.recursion_gap = j.value("recursion_gap", 0.0);
  m.holdout_error = j.value("holdout_error", 0.0);
  m.fit_residual = j.value("fit_residual", 0.0);
  m.processing_seconds = j.value("processing_seconds", 0.0);
  m.solve_seconds = j.value("solve_seconds", 0.0);
  m.dropped_constraints = j.value("dropped_constraints", std::size_t{0});
  return m;
}

nlohmann::json report_to_json(const LoopReport& r) {
  return {{"closure_reduced", r.closure_reduced},     {"closure_full", r.closure_full},
          {"fidelity_rmse", r.fidelity_rmse},         {"max_frame_rmse", r.max_frame_rmse},
          {"control_energy", r.control_energy},       {"raw_seam_gap", r.raw_seam_gap},
          {"edited_seam_gap", r.edited_seam_gap}};
}

void save_solution(const CyclicSolution& sol, const std::filesystem::path& path, bool include_frames) {
  const std::size_t r = sol.z1.size();
  const std::size_t m = sol.gamma.cols();
  const bool frames = include_frames && !sol.full_cycle.frames.empty();
  nlohmann::json header = {{"format", "cycloop-cyclic"},
                           {"version", 1},
                           {"r", r},
                           {"m", m},
                           {"T", sol.period},
                           {"harmonics", sol.harmonics},
                           {"include_constant", sol.include_constant},
                           {"weights", {{"w_red", sol.weights.fidelity}, {"w_u", sol.weights.control}}},
                           {"control_energy", to_string(sol.energy)},
                           {"metrics", metrics_to_json(sol.metrics)},
                           {"vec_order", "column-major"},
                           {"has_frames", frames}};
  if (frames) {
    header["n"] = sol.full_cycle.state_dim();
    header["frame_count"] = sol.full_cycle.frame_count();
    header["dt"] = sol.full_cycle.dt;
    nlohmann::json layout = nlohmann::json::array();
    for (const auto& b : sol.full_cycle.layout.blocks()) {
      layout.push_back({{"name", b.name}, {"components", b.components}, {"count", b.count}});
    }
    header["layout"] = layout;
    if (!sol.full_cycle.source.empty()) header["source"] = sol.full_cycle.source;
  }
  auto out = detail::open_for_write(path);
  detail::write_header(out, "", header);
  detail::write_f64(out, sol.z1);
  detail::write_f64(out, vec(sol.gamma));
  if (frames) {
    for (const auto& f : sol.full_cycle.frames) detail::write_f64(out, f);
  }
  if (!out) throw Error("write failed: " + path.string());
}

CyclicSolution load_solution(const std::filesystem::path& path) {
  const std::string what = path.string();
  auto in = detail::open_for_read(path);
  const nlohmann::json header = detail::read_header(in, "", what);
  CyclicSolution sol;
  std::size_t r = 0;
  std::size_t m = 0;
  bool frames = false;
  std::size_t n = 0;
  std::size_t frame_count = 0;
  try {
    if (header.value("format", std::string()) != "cycloop-cyclic") {
      throw FormatError(what + ": not a cyclic solution file");
    }
    r = header.at("r").get<std::size_t>();
    m = header.at("m").get<std::size_t>();
    sol.period = header.at("T").get<std::size_t>();
    sol.harmonics = header.at("harmonics").get<std::size_t>();
    sol.include_constant = header.at("include_constant").get<bool>();
    sol.weights.fidelity = header.at("weights").at("w_red").get<double>();
    sol.weights.control = header.at("weights").at("w_u").get<double>();
    sol.energy = control_energy_from_string(header.value("control_energy", std::string("gram")));
    sol.metrics = metrics_from_json(header.at("metrics"));
    frames = header.value("has_frames", false);
    if (frames) {
      n = header.at("n").get<std::size_t>();
      frame_count = header.at("frame_count").get<std::size_t>();
      sol.full_cycle.dt = header.at("dt").get<double>();
      std::vector<FieldBlock> blocks;
      for (const auto& b : header.at("layout")) {
        blocks.push_back({b.at("name").get<std::string>(), b.at("components").get<std::size_t>(),
                          b.at("count").get<std::size_t>()});
      }
      sol.full_cycle.layout = FieldLayout(std::move(blocks));
      sol.full_cycle.source = header.value("source", std::string());
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(what + ": malformed header: " + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(what + ": malformed header: " + e.what());
  }
  const std::size_t expected = (r + r * m + (frames ? n * frame_count : 0)) * sizeof(double);
  if (detail::remaining_bytes(in) != expected) {
    throw FormatError(what + ": payload size mismatch, expected " + std::to_string(expected) +
                      " bytes, got " + std::to_string(detail::remaining_bytes(in)));
  }
  sol.z1 = detail::read_f64(in, r, what);
  sol.gamma = unvec(detail::read_f64(in, r * m, what), r, m);
  sol.q = sol.z1;
  const Vector g = vec(sol.gamma);
  sol.q.insert(sol.q.end(), g.begin(), g.end());
  if (frames) {
    for (std::size_t t = 0; t < frame_count; ++t) sol.full_cycle.frames.push_back(detail::read_f64(in, n, what));
  }
  return sol;
}

}  // namespace cycloop
