#include "cycloop/koopman.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "cycloop/error.hpp"
#include "detail/binary_io.hpp"

namespace cycloop {

namespace {

double relative_fit_residual(const Matrix& targets, const Matrix& op, const Matrix& inputs) {
  const double denom = frobenius_norm(targets);
  const double num = frobenius_norm(targets - matmul(op, inputs));
  return denom > 0.0 ? num / denom : num;
}

void fnv_mix(std::uint64_t& h, std::span<const double> v) {
  for (double x : v) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &x, sizeof bits);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffu;
      h *= 1099511628211ull;
    }
  }
}

}  // namespace

FullFit fit_full(const Matrix& inputs, const Matrix& targets, double rel_tol) {
  if (inputs.rows() != targets.rows() || inputs.cols() != targets.cols()) {
    throw ShapeError("fit_full: snapshot matrices differ in shape");
  }
  if (inputs.rows() > kMaxFullStateDim) {
    throw InvalidArgument("fit_full: state dimension " + std::to_string(inputs.rows()) +
                          " exceeds the dense limit of " + std::to_string(kMaxFullStateDim) +
                          "; fit a reduced model instead");
  }
  FullFit fit;
  fit.op = lstsq_operator(targets, inputs, rel_tol);
  fit.fit_residual = relative_fit_residual(targets, fit.op, inputs);
  return fit;
}

std::size_t energy_rank(std::span<const double> singular_values, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw InvalidArgument("energy fraction must be in (0, 1]");
  double total = 0.0;
  for (double s : singular_values) total += s * s;
  double acc = 0.0;
  for (std::size_t i = 0; i < singular_values.size(); ++i) {
    acc += singular_values[i] * singular_values[i];
    if (acc >= fraction * total) return i + 1;
  }
  return singular_values.size();
}

ReducedModel reduce(const SnapshotPair& snapshots, std::size_t rank, const ReduceOptions& options) {
  const Matrix& x = snapshots.inputs;
  const Matrix& xp = snapshots.targets;
  if (x.rows() != xp.rows() || x.cols() != xp.cols()) {
    throw ShapeError("reduce: snapshot matrices differ in shape");
  }
  if (rank < 1) throw InvalidArgument("reduce: rank must be at least 1");

  ReducedModel model;
  model.requested_rank = rank;
  const std::size_t max_rank = std::min(x.rows(), x.cols());
  std::size_t target = std::min(rank, max_rank);
  if (target < rank) {
    model.warnings.push_back("requested rank " + std::to_string(rank) + " exceeds min(n, T-1) = " +
                             std::to_string(max_rank));
  }

  SvdTruncation svd;
  if (options.energy_fraction) {
    svd = truncated_svd(x, max_rank, options.rel_tol);
    target = std::min(target, energy_rank(svd.singular_values, *options.energy_fraction));
    target = std::min(target, svd.rank());
    svd.basis = svd.basis.block(0, 0, svd.basis.rows(), target);
    svd.right_vectors = svd.right_vectors.block(0, 0, svd.right_vectors.rows(), target);
    svd.singular_values.resize(target);
  } else {
    svd = truncated_svd(x, target, options.rel_tol);
  }
  if (svd.rank() < target) {
    model.warnings.push_back("snapshot matrix has numerical rank " + std::to_string(svd.rank()) +
                             " below requested " + std::to_string(target) +
                             "; using the effective rank");
  }

  model.basis = std::move(svd.basis);
  model.singular_values = std::move(svd.singular_values);
  model.reduced_inputs = matmul_tn(model.basis, x);
  model.reduced_targets = matmul_tn(model.basis, xp);
  model.op = lstsq_operator(model.reduced_targets, model.reduced_inputs, options.rel_tol);
  model.fit_residual = relative_fit_residual(model.reduced_targets, model.op, model.reduced_inputs);
  model.spectral_radius = spectral_radius(model.op);
  return model;
}

ReducedModel full_space_model(const SnapshotPair& snapshots, double rel_tol) {
  FullFit fit = fit_full(snapshots.inputs, snapshots.targets, rel_tol);
  ReducedModel model;
  const std::size_t n = snapshots.inputs.rows();
  model.basis = Matrix::identity(n);
  model.op = std::move(fit.op);
  model.reduced_inputs = snapshots.inputs;
  model.reduced_targets = snapshots.targets;
  model.fit_residual = fit.fit_residual;
  model.spectral_radius = spectral_radius(model.op);
  model.requested_rank = n;
  return model;
}

std::vector<Vector> rollout(const ReducedModel& model, std::span<const double> z1, std::size_t steps) {
  if (z1.size() != model.rank()) throw ShapeError("rollout: initial state has the wrong length");
  std::vector<Vector> out;
  if (steps == 0) return out;
  out.reserve(steps);
  out.emplace_back(z1.begin(), z1.end());
  for (std::size_t t = 1; t < steps; ++t) out.push_back(matvec(model.op, out.back()));
  return out;
}

Vector lift(const ReducedModel& model, std::span<const double> z) {
  if (z.size() != model.rank()) throw ShapeError("lift: reduced vector has the wrong length");
  return matvec(model.basis, z);
}

Vector project(const ReducedModel& model, std::span<const double> x) {
  if (x.size() != model.state_dim()) throw ShapeError("project: state has the wrong length");
  return matvec_t(model.basis, x);
}

Matrix project_frames(const ReducedModel& model, const Trajectory& traj, std::size_t count) {
  return matmul_tn(model.basis, frames_matrix(traj, 0, count));
}

double holdout_error(const ReducedModel& model, std::span<const double> x_prev,
                     std::span<const double> x_next) {
  const Vector predicted = matvec(model.op, project(model, x_prev));
  return norm2(subtract(project(model, x_next), predicted));
}

std::uint64_t fingerprint(const ReducedModel& model) {
  std::uint64_t h = 1469598103934665603ull;
  const double dims[] = {static_cast<double>(model.basis.rows()), static_cast<double>(model.rank())};
  fnv_mix(h, dims);
  fnv_mix(h, model.basis.values());
  fnv_mix(h, model.op.values());
  return h;
}

void save_model(const ReducedModel& model, const std::filesystem::path& path) {
  nlohmann::json header = {{"format", "cycloop-koopman"},
                           {"version", 1},
                           {"n", model.state_dim()},
                           {"r", model.rank()},
                           {"fit_residual", model.fit_residual},
                           {"spectral_radius", model.spectral_radius},
                           {"requested_rank", model.requested_rank},
                           {"singular_values", model.singular_values},
                           {"order", "row-major"}};
  auto out = detail::open_for_write(path);
  detail::write_header(out, "", header);
  detail::write_f64(out, model.basis.values());
  detail::write_f64(out, model.op.values());
  if (!out) throw Error("write failed: " + path.string());
}

ReducedModel load_model(const std::filesystem::path& path) {
  const std::string what = path.string();
  auto in = detail::open_for_read(path);
  const nlohmann::json header = detail::read_header(in, "", what);
  ReducedModel model;
  std::size_t n = 0;
  std::size_t r = 0;
  try {
    n = header.at("n").get<std::size_t>();
    r = header.at("r").get<std::size_t>();
    model.fit_residual = header.at("fit_residual").get<double>();
    model.spectral_radius = header.value("spectral_radius", 0.0);
    model.requested_rank = header.value("requested_rank", r);
    model.singular_values = header.value("singular_values", Vector{});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(what + ": malformed header: " + e.what());
  }
  if (n == 0 || r == 0 || r > n) throw FormatError(what + ": invalid dimensions");
  const std::size_t expected = (n * r + r * r) * sizeof(double);
  if (detail::remaining_bytes(in) != expected) {
    throw FormatError(what + ": payload size mismatch, expected " + std::to_string(expected) +
                      " bytes, got " + std::to_string(detail::remaining_bytes(in)));
  }
  model.basis = Matrix(n, r, detail::read_f64(in, n * r, what));
  model.op = Matrix(r, r, detail::read_f64(in, r * r, what));
  if (!all_finite(model.basis.values()) || !all_finite(model.op.values())) {
    throw FormatError(what + ": non-finite values");
  }
  return model;
}

}  // namespace cycloop
