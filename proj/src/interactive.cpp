#include "cycloop/interactive.hpp"

#include <chrono>
#include <cmath>

#include "cycloop/error.hpp"

namespace cycloop {

nlohmann::json edit_metrics_to_json(const EditMetrics& m) {
  return {{"closure_residual", m.closure_residual},
          {"closure_relative", m.closure_relative},
          {"profile_rmse", m.profile_rmse},
          {"fidelity_cost", m.fidelity_cost},
          {"coefficient_norm", m.coefficient_norm},
          {"kkt_residual", m.kkt_residual},
          {"constraint_residual", m.constraint_residual},
          {"solve_seconds", m.solve_seconds}};
}

namespace {

using Clock = std::chrono::steady_clock;

void symmetrize_upper(Matrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j) m(j, i) = m(i, j);
}

struct Assembled {
  RolloutSystem sys;
  Matrix ftf;  // F^T F
  Vector fty;  // F^T y
};

Assembled assemble(const Matrix& op, const FourierBasis& basis, const Matrix& local_basis,
                   const Matrix& observed) {
  Assembled a;
  a.sys = build_edit_rollout(op, basis, local_basis);
  if (observed.rows() != a.sys.reduced_dim || observed.cols() != a.sys.period) {
    throw ShapeError("solve_edit: observed frames must be r x T");
  }
  a.ftf = matmul_tn(a.sys.stacked, a.sys.stacked);
  symmetrize_upper(a.ftf);
  a.fty = matvec_t(a.sys.stacked, vec(observed));
  return a;
}

Matrix edit_hessian(const Assembled& a, const Matrix& selection, const EditWeights& w) {
  const std::size_t r = a.sys.reduced_dim;
  const std::size_t kmd = a.sys.control_dim * a.sys.basis_dim;
  Matrix h = a.ftf;
  h *= 2.0 * w.fidelity;
  for (std::size_t i = 0; i < kmd; ++i) h(r + i, r + i) += 2.0 * w.control;
  if (w.profile != 0.0) {
    const Matrix sts = matmul_tn(selection, selection);
    for (std::size_t i = 0; i < kmd; ++i)
      for (std::size_t j = 0; j < kmd; ++j) h(r + i, r + j) += 2.0 * w.profile * sts(i, j);
  }
  symmetrize_upper(h);
  return h;
}

Vector edit_rhs(const Assembled& a, const Matrix& selection, const TemporalProfile& profile,
                const EditWeights& w) {
  const std::size_t r = a.sys.reduced_dim;
  Vector b = scaled(a.fty, 2.0 * w.fidelity);
  if (w.profile != 0.0) {
    const Vector sta = matvec_t(selection, profile.values);
    for (std::size_t i = 0; i < sta.size(); ++i) b[r + i] += 2.0 * w.profile * sta[i];
  }
  return b;
}

EditSolution finish(const Assembled& a, const Matrix& op, const FourierBasis& basis,
                    const Matrix& local_basis, const Matrix& selection, const TemporalProfile& profile,
                    const Matrix& observed, KktSolution kkt, double seconds) {
  const std::size_t r = a.sys.reduced_dim;
  const std::size_t k = a.sys.control_dim;
  const std::size_t m = a.sys.basis_dim;
  EditSolution out;
  out.q = std::move(kkt.primal);
  out.dual = std::move(kkt.dual);
  out.z1.assign(out.q.begin(), out.q.begin() + static_cast<std::ptrdiff_t>(r));
  const std::span<const double> c = std::span<const double>(out.q).subspan(r);
  out.coeffs = unvec(c, k, m);
  out.selected_signal = matvec(selection, c);
  out.reduced_cycle = controlled_rollout(op, matmul(local_basis, out.coeffs), basis, out.z1);

  auto& mt = out.metrics;
  mt.closure_residual = norm2(subtract(out.reduced_cycle.back(), out.reduced_cycle.front()));
  mt.closure_relative = mt.closure_residual / (1.0 + norm2(out.z1));
  double sq = 0.0;
  for (std::size_t t = 0; t < profile.values.size(); ++t) {
    const double d = out.selected_signal[t] - profile.values[t];
    sq += d * d;
  }
  mt.profile_rmse = std::sqrt(sq / static_cast<double>(profile.values.size()));
  for (std::size_t t = 0; t < a.sys.period; ++t) {
    const Vector d = subtract(out.reduced_cycle[t], observed.col(t));
    mt.fidelity_cost += dot(d, d);
  }
  mt.coefficient_norm = frobenius_norm(out.coeffs);
  mt.kkt_residual = kkt.relative_residual;
  mt.constraint_residual = norm2(matvec(a.sys.closure, out.q));
  mt.solve_seconds = seconds;
  return out;
}

}  // namespace

void EditWeights::validate() const {
  if (!(fidelity > 0.0) || !std::isfinite(fidelity)) throw InvalidArgument("w_red must be positive");
  if (!(control > 0.0) || !std::isfinite(control)) throw InvalidArgument("w_u must be positive");
  if (!(profile >= 0.0) || !std::isfinite(profile)) throw InvalidArgument("w_profile must be non-negative");
}

void EditProblem::validate() const {
  weights.validate();
  if (op.rows() != op.cols()) throw ShapeError("edit: operator must be square");
  if (local_basis.rows() != op.rows()) throw ShapeError("edit: local basis rows must equal r");
  if (local_basis.cols() == 0) throw InvalidArgument("edit: local basis set is empty");
  if (selected >= local_basis.cols()) {
    throw InvalidArgument("edit: selected column " + std::to_string(selected) + " outside [0, " +
                          std::to_string(local_basis.cols()) + ")");
  }
  if (profile.values.size() != basis.period()) {
    throw ShapeError("edit: profile length " + std::to_string(profile.values.size()) +
                     " differs from the period " + std::to_string(basis.period()));
  }
  if (!all_finite(profile.values)) throw InvalidArgument("edit: profile is not finite");
  if (norm2(local_basis.col(selected)) == 0.0) {
    throw InvalidArgument("edit: selected basis column has zero influence");
  }
}

RolloutSystem build_edit_rollout(const Matrix& op, const FourierBasis& basis, const Matrix& local_basis) {
  return build_controlled_rollout(op, basis, local_basis);
}

Matrix selection_matrix(const FourierBasis& basis, std::size_t control_dim, std::size_t selected) {
  if (selected >= control_dim) throw InvalidArgument("selection_matrix: selected index out of range");
  const std::size_t m = basis.dim();
  Matrix s(basis.period(), control_dim * m);
  Vector st(m);
  for (std::size_t t = 1; t <= basis.period(); ++t) {
    basis.eval_into(t, st);
    // alpha_{t,sel} = sum_j C(sel, j) s_t[j], vec(C)[j k + sel] = C(sel, j)
    for (std::size_t j = 0; j < m; ++j) s(t - 1, j * control_dim + selected) = st[j];
  }
  return s;
}

EditSolution solve_edit(const EditProblem& problem, const Matrix& observed) {
  problem.validate();
  const auto t0 = Clock::now();
  const Assembled a = assemble(problem.op, problem.basis, problem.local_basis, observed);
  const Matrix sel = selection_matrix(problem.basis, problem.local_basis.cols(), problem.selected);
  const Matrix h = edit_hessian(a, sel, problem.weights);
  const Vector b = edit_rhs(a, sel, problem.profile, problem.weights);
  KktSolution kkt = KktSystem(h, a.sys.closure).solve(b, Vector(a.sys.reduced_dim, 0.0));
  const double seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return finish(a, problem.op, problem.basis, problem.local_basis, sel, problem.profile, observed,
                std::move(kkt), seconds);
}

struct EditSession::Assembly {
  Matrix local_basis;
  Assembled data;
};

struct EditSession::Factor {
  std::size_t selected;
  EditWeights weights;
  Matrix selection;
  KktSystem kkt;
};

EditSession::EditSession(std::shared_ptr<const ReducedModel> model, Matrix observed, FourierBasis basis,
                         LocalBasisSet bases, bool lift_frames)
    : model_(std::move(model)),
      observed_(std::move(observed)),
      basis_(std::move(basis)),
      bases_(std::move(bases)),
      lift_frames_(lift_frames),
      model_version_(fingerprint(*model_)) {
  if (bases_.reduced_dim() != model_->rank()) throw ShapeError("EditSession: basis set dimension");
  if (observed_.rows() != model_->rank() || observed_.cols() != basis_.period()) {
    throw ShapeError("EditSession: observed frames must be r x T");
  }
}

std::size_t EditSession::add_basis(LocalBasisColumn column) {
  std::lock_guard lock(write_mutex_);
  const std::size_t before = bases_.size();
  const std::size_t idx = bases_.add(std::move(column));
  if (bases_.size() != before) {
    assembly_.reset();
    factor_.reset();
  }
  return idx;
}

std::size_t EditSession::basis_count() const {
  std::lock_guard lock(write_mutex_);
  return bases_.size();
}

std::shared_ptr<const EditSolution> EditSession::latest() const { return std::atomic_load(&latest_); }

std::shared_ptr<const EditSolution> EditSession::apply(const EditRequest& request) {
  std::lock_guard lock(write_mutex_);
  if (request.model_version && *request.model_version != model_version_) {
    throw StaleModelError("edit targets model version " + std::to_string(*request.model_version) +
                          ", session holds " + std::to_string(model_version_));
  }
  request.weights.validate();
  if (bases_.size() == 0) throw InvalidArgument("edit: session has no local bases");
  if (request.selected >= bases_.size()) throw InvalidArgument("edit: selected basis out of range");

  const auto t0 = Clock::now();
  const double width = request.width.value_or(default_profile_width(basis_.period()));
  const TemporalProfile profile =
      make_profile(basis_.period(), request.target_frame, std::max(width, 1.0), request.strength);

  if (!assembly_) {
    auto a = std::make_shared<Assembly>();
    a->local_basis = bases_.matrix();
    a->data = assemble(model_->op, basis_, a->local_basis, observed_);
    assembly_ = std::move(a);
    ++rollout_builds_;
  }
  if (!factor_ || factor_->selected != request.selected || !(factor_->weights == request.weights)) {
    Matrix sel = selection_matrix(basis_, bases_.size(), request.selected);
    const Matrix h = edit_hessian(assembly_->data, sel, request.weights);
    factor_ = std::make_shared<Factor>(
        Factor{request.selected, request.weights, std::move(sel), KktSystem(h, assembly_->data.sys.closure)});
    ++factorizations_;
  }
  const Vector b = edit_rhs(assembly_->data, factor_->selection, profile, request.weights);
  KktSolution kkt = factor_->kkt.solve(b, Vector(model_->rank(), 0.0));
  const double seconds = std::chrono::duration<double>(Clock::now() - t0).count();

  auto sol = std::make_shared<EditSolution>(finish(assembly_->data, model_->op, basis_,
                                                   assembly_->local_basis, factor_->selection, profile,
                                                   observed_, std::move(kkt), seconds));
  if (lift_frames_) {
    sol->full_cycle.reserve(sol->reduced_cycle.size());
    for (const auto& z : sol->reduced_cycle) sol->full_cycle.push_back(lift(*model_, z));
  }
  sol->version = version_.load() + 1;
  std::shared_ptr<const EditSolution> published = std::move(sol);
  std::atomic_store(&latest_, published);
  version_.store(published->version);
  return published;
}

}  // namespace cycloop
