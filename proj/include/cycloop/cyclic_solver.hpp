#pragma once

// Cyclic loop synthesis on a reduced Koopman surrogate.
//
// Unknowns q = [z~_1; vec(G)] with vec column-major, so (s_t^T kron I) vec(G)
// equals G s_t. Each controlled state is linear in q (z~_t = R_t q); the
// fidelity/control objective is quadratic and the closure z~_{T+1} = z~_1 is
// the linear constraint (R_{T+1} - R_1) q = 0. The resulting equality
// constrained QP is solved through its KKT system.

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cycloop/control_basis.hpp"
#include "cycloop/koopman.hpp"
#include "cycloop/matrix.hpp"
#include "cycloop/trajectory.hpp"

namespace cycloop {

struct SolverWeights {
  double fidelity = 1e-2;  // w_red
  double control = 3.0;    // w_u
  void validate() const;
};

// Weighting of the control regularizer: the Gram matrix M of the Fourier
// samples (sum_t ||G s_t||^2) or the identity (||G||_F^2).
enum class ControlEnergy { gram, identity };

std::string to_string(ControlEnergy e);
ControlEnergy control_energy_from_string(const std::string& s);

// Rollout matrices for z~_{t+1} = op z~_t + B C s_t with control basis B (r x k).
// With B = I_r this is the plain cyclic problem.
struct RolloutSystem {
  std::size_t reduced_dim = 0;  // r
  std::size_t control_dim = 0;  // k
  std::size_t basis_dim = 0;    // m
  std::size_t period = 0;       // T
  Matrix stacked;               // (r T) x unknowns; rows [r(t-1), r t) hold R_t
  Matrix final_block;           // R_{T+1}
  Matrix closure;               // R_{T+1} - R_1
  Matrix gram;                  // M

  std::size_t unknowns() const noexcept { return reduced_dim + control_dim * basis_dim; }
  // R_t for t in [1, T+1]
  Matrix block(std::size_t t) const;
};

RolloutSystem build_rollout(const Matrix& op, const FourierBasis& basis);
RolloutSystem build_controlled_rollout(const Matrix& op, const FourierBasis& basis,
                                       const Matrix& control_basis);

// J(q) = 1/2 q^T H q - rhs^T q + constant, subject to constraint q = 0.
struct QuadraticProgram {
  Matrix hessian;
  Vector rhs;
  Matrix constraint;
  double constant = 0.0;

  double objective(std::span<const double> q) const;
  Vector gradient(std::span<const double> q) const;
};

// observed: r x T, column t-1 holds z_t.
QuadraticProgram assemble_qp(const RolloutSystem& sys, const Matrix& observed,
                             const SolverWeights& weights,
                             ControlEnergy energy = ControlEnergy::gram);

Vector stack_columns(const Matrix& observed);

struct CyclicMetrics {
  double closure_residual = 0.0;   // ||z~_{T+1} - z~_1||
  double closure_relative = 0.0;   // closure_residual / (1 + ||z~_1||)
  double fidelity_cost = 0.0;      // sum_t ||z~_t - z_t||^2
  double control_cost = 0.0;       // sum_t ||G s_t||^2
  double objective = 0.0;
  double kkt_residual = 0.0;       // relative
  double recursion_gap = 0.0;      // max_t ||recursion z~_t - R_t q||
  double holdout_error = 0.0;      // one-step prediction error on the held-out frame
  double fit_residual = 0.0;
  double processing_seconds = 0.0;
  double solve_seconds = 0.0;
  std::size_t dropped_constraints = 0;
};

nlohmann::json metrics_to_json(const CyclicMetrics& m);
CyclicMetrics metrics_from_json(const nlohmann::json& j);

struct CyclicSolution {
  Vector z1;
  Matrix gamma;  // r x m
  Vector dual;
  Vector q;
  std::vector<Vector> reduced_cycle;  // z~_1 .. z~_{T+1}
  Trajectory full_cycle;              // lifted frames, empty unless requested
  CyclicMetrics metrics;
  std::size_t harmonics = 0;
  bool include_constant = false;
  std::size_t period = 0;
  SolverWeights weights;
  ControlEnergy energy = ControlEnergy::gram;
  std::shared_ptr<const ReducedModel> model;
};

// Core solve on reduced data; observed is r x T.
CyclicSolution solve_reduced(const Matrix& op, const Matrix& observed, const FourierBasis& basis,
                             const SolverWeights& weights, ControlEnergy energy = ControlEnergy::gram);

// z~_{t+1} = op z~_t + G s_t for t = 1..T, returns T+1 states.
std::vector<Vector> controlled_rollout(const Matrix& op, const Matrix& gamma,
                                       const FourierBasis& basis, std::span<const double> z1);

struct CyclicOptions {
  std::size_t rank = 8;
  std::size_t harmonics = 8;
  bool include_constant = false;
  SolverWeights weights;
  ControlEnergy energy = ControlEnergy::gram;
  double rel_tol = kDefaultRelTol;
  std::optional<double> energy_fraction;
  BlockScale block_scale;
  // Identity basis with the dense full-space operator.
  bool full_space = false;
  bool lift_frames = true;
};

// Default rank for a dataset class (nbody 3, sheet 8, water 16, otherwise 8).
std::size_t default_rank(const std::string& source);

// Fits on the first T = frames-1 frames and synthesizes a T-periodic loop.
CyclicSolution solve_cyclic(const Trajectory& traj, const CyclicOptions& options);

struct LoopReport {
  double closure_reduced = 0.0;
  double closure_full = 0.0;
  double fidelity_rmse = 0.0;        // sqrt(mean over t <= T, entries of (x~ - x)^2)
  double max_frame_rmse = 0.0;
  double control_energy = 0.0;       // sum_t ||u_t||^2
  double raw_seam_gap = 0.0;         // ||x_{T+1} - x_1|| of the input
  double edited_seam_gap = 0.0;      // ||x~_{T+1} - x~_1||
};

LoopReport evaluate(const CyclicSolution& solution, const Trajectory& traj);
nlohmann::json report_to_json(const LoopReport& r);

// .cyc: one JSON line {r, m, T, weights, metrics, ...} then z~_1 (r), vec(G)
// column-major (r m) and optionally the lifted frames ((T+1) x n), all
// little-endian float64.
void save_solution(const CyclicSolution& solution, const std::filesystem::path& path,
                   bool include_frames = true);
CyclicSolution load_solution(const std::filesystem::path& path);

}  // namespace cycloop
