#pragma once

// Localized, user-guided edits of a cyclic loop.
//
// The control coefficient matrix is factorized as G = B C with B (r x k) a set
// of unit-norm localized directions and C (k x m) their temporal Fourier
// coefficients. An edit asks the coefficient signal of one selected direction,
// alpha_t = (C s_t)_sel, to follow a wrapped-Gaussian profile a_t:
//
//   min  w_red ||F q - y||^2 + w_u ||vec(C)||^2 + w_profile ||S vec(C) - a||^2
//   s.t. A_cl q = 0,     q = [z~_1; vec(C)]
//
// Note the regularizer is the plain coefficient norm, not the Gram-weighted
// control energy used by the base loop solver.

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "cycloop/error.hpp"
#include "cycloop/control_basis.hpp"
#include "cycloop/cyclic_solver.hpp"
#include "cycloop/koopman.hpp"
#include "cycloop/matrix.hpp"
#include "cycloop/numerics.hpp"

namespace cycloop {

struct EditWeights {
  double fidelity = 1e-2;  // w_red
  double control = 3.0;    // w_u
  double profile = 10.0;   // w_profile, may be zero
  void validate() const;
  bool operator==(const EditWeights&) const = default;
};

struct EditProblem {
  Matrix op;            // r x r
  FourierBasis basis;
  Matrix local_basis;   // r x k
  std::size_t selected = 0;  // zero-based column of local_basis
  TemporalProfile profile;
  EditWeights weights;

  void validate() const;
};

struct EditMetrics {
  double closure_residual = 0.0;
  double closure_relative = 0.0;
  double profile_rmse = 0.0;  // sqrt(mean_t (alpha_t - a_t)^2)
  double fidelity_cost = 0.0;
  double coefficient_norm = 0.0;  // ||C||_F
  double kkt_residual = 0.0;
  double constraint_residual = 0.0;  // ||A_cl q||
  double solve_seconds = 0.0;
};

nlohmann::json edit_metrics_to_json(const EditMetrics& m);

struct EditSolution {
  Vector z1;
  Matrix coeffs;  // k x m
  Vector dual;
  Vector q;
  Vector selected_signal;             // alpha_{t,sel}, t = 1..T
  std::vector<Vector> reduced_cycle;  // z~_1 .. z~_{T+1}
  std::vector<Vector> full_cycle;     // lifted frames, empty unless requested
  EditMetrics metrics;
  std::uint64_t version = 0;
};

// Rollout blocks A_t with z~_t = A_t q for the factorized control.
RolloutSystem build_edit_rollout(const Matrix& op, const FourierBasis& basis, const Matrix& local_basis);

// S (T x k m): row t-1 picks alpha_{t,sel} out of vec(C).
Matrix selection_matrix(const FourierBasis& basis, std::size_t control_dim, std::size_t selected);

// observed: r x T
EditSolution solve_edit(const EditProblem& problem, const Matrix& observed);

class StaleModelError : public Error {
 public:
  using Error::Error;
};

struct EditRequest {
  std::size_t selected = 0;
  std::size_t target_frame = 1;
  std::optional<double> width;  // defaults to T/20
  double strength = 0.0;
  EditWeights weights;
  // Rejected with StaleModelError when it does not match the session model.
  std::optional<std::uint64_t> model_version;
};

// Incremental edit solver over one fitted model.
//
// F^T F, F^T y and A_cl are cached per (model, basis, local bases) and the
// KKT factorization per (selected column, weights); an edit that only moves
// the target frame or strength rebuilds just the profile right-hand side.
// apply() calls are serialized; latest() is safe from any thread.
class EditSession {
 public:
  EditSession(std::shared_ptr<const ReducedModel> model, Matrix observed, FourierBasis basis,
              LocalBasisSet bases, bool lift_frames = false);

  std::shared_ptr<const EditSolution> apply(const EditRequest& request);
  std::shared_ptr<const EditSolution> latest() const;

  // Adds (or reuses) a local basis column; returns its index.
  std::size_t add_basis(LocalBasisColumn column);

  std::uint64_t version() const noexcept { return version_.load(); }
  std::uint64_t model_version() const noexcept { return model_version_; }
  const ReducedModel& model() const noexcept { return *model_; }
  const FourierBasis& basis() const noexcept { return basis_; }
  const Matrix& observed() const noexcept { return observed_; }
  std::size_t basis_count() const;

  // Cache statistics, for diagnostics and tests.
  std::size_t rollout_builds() const noexcept { return rollout_builds_; }
  std::size_t factorizations() const noexcept { return factorizations_; }

 private:
  struct Assembly;
  struct Factor;

  std::shared_ptr<const ReducedModel> model_;
  Matrix observed_;
  FourierBasis basis_;
  LocalBasisSet bases_;
  bool lift_frames_;
  std::uint64_t model_version_;

  mutable std::mutex write_mutex_;
  std::shared_ptr<const Assembly> assembly_;
  std::shared_ptr<const Factor> factor_;
  std::shared_ptr<const EditSolution> latest_;
  std::atomic<std::uint64_t> version_{0};
  std::size_t rollout_builds_ = 0;
  std::size_t factorizations_ = 0;
};

}  // namespace cycloop
