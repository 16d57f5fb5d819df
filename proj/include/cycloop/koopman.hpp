#pragma once

// Least-squares Koopman fits: the dense full-space operator and the reduced
// surrogate in the span of the leading left singular vectors of the inputs.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cycloop/matrix.hpp"
#include "cycloop/numerics.hpp"
#include "cycloop/trajectory.hpp"

namespace cycloop {

// Dense n x n fits above this state dimension are refused; use reduce().
inline constexpr std::size_t kMaxFullStateDim = 2000;

struct FullFit {
  Matrix op;
  double fit_residual = 0.0;  // ||X' - K X||_F / ||X'||_F
};

FullFit fit_full(const Matrix& inputs, const Matrix& targets, double rel_tol = kDefaultRelTol);

struct ReduceOptions {
  double rel_tol = kDefaultRelTol;
  // When set, the rank is the smallest r whose leading singular values carry
  // this fraction of the squared-singular-value energy (the rank argument is
  // then an upper bound).
  std::optional<double> energy_fraction;
};

struct ReducedModel {
  Matrix basis;            // n x r, orthonormal columns
  Matrix op;               // r x r
  Matrix reduced_inputs;   // Z  = basis^T X, empty for models read from disk
  Matrix reduced_targets;  // Z' = basis^T X'
  Vector singular_values;  // of X, leading r
  double fit_residual = 0.0;
  double spectral_radius = 0.0;
  std::size_t requested_rank = 0;
  std::vector<std::string> warnings;

  std::size_t rank() const noexcept { return op.rows(); }
  std::size_t state_dim() const noexcept { return basis.rows(); }
};

ReducedModel reduce(const SnapshotPair& snapshots, std::size_t rank, const ReduceOptions& options = {});

// Model with the identity basis and the dense full-space operator, so the
// reduced solvers run the full-space problem unchanged.
ReducedModel full_space_model(const SnapshotPair& snapshots, double rel_tol = kDefaultRelTol);

// z_1 .. z_steps under z_{t+1} = op z_t.
std::vector<Vector> rollout(const ReducedModel& model, std::span<const double> z1, std::size_t steps);

Vector lift(const ReducedModel& model, std::span<const double> z);
Vector project(const ReducedModel& model, std::span<const double> x);
// r x count matrix of reduced coordinates of frames [0, count).
Matrix project_frames(const ReducedModel& model, const Trajectory& traj, std::size_t count);

// ||basis^T x_next - op basis^T x_prev||: one-step prediction error on a held-out pair.
double holdout_error(const ReducedModel& model, std::span<const double> x_prev,
                     std::span<const double> x_next);

std::size_t energy_rank(std::span<const double> singular_values, double fraction);

// Stable content hash of basis and operator.
std::uint64_t fingerprint(const ReducedModel& model);

// .koop: one JSON line {n, r, fit_residual, ...} followed by the basis (n x r)
// and the operator (r x r), row-major little-endian float64.
void save_model(const ReducedModel& model, const std::filesystem::path& path);
ReducedModel load_model(const std::filesystem::path& path);

}  // namespace cycloop
