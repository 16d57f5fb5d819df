#include "cycloop/control_basis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cycloop/error.hpp"

namespace cycloop {

FourierBasis::FourierBasis(std::size_t period, std::size_t harmonics, bool include_constant)
    : period_(period), harmonics_(harmonics), include_constant_(include_constant) {
  if (period_ < 2) throw InvalidArgument("FourierBasis: period must be at least 2");
  if (harmonics_ < 1) throw InvalidArgument("FourierBasis: need at least one harmonic");
  if (2 * harmonics_ >= period_) {
    throw InvalidArgument("FourierBasis: 2H = " + std::to_string(2 * harmonics_) +
                          " must stay below the period " + std::to_string(period_));
  }
}

void FourierBasis::eval_into(std::size_t t, std::span<double> out) const {
  if (out.size() != dim()) throw ShapeError("FourierBasis::eval_into: wrong output length");
  // reduce t mod T first so large t keeps full phase accuracy
  const double phase = 2.0 * std::numbers::pi * static_cast<double>(t % period_) /
                       static_cast<double>(period_);
  for (std::size_t h = 1; h <= harmonics_; ++h) {
    out[2 * (h - 1)] = std::sin(static_cast<double>(h) * phase);
    out[2 * (h - 1) + 1] = std::cos(static_cast<double>(h) * phase);
  }
  if (include_constant_) out[2 * harmonics_] = 1.0;
}

Vector FourierBasis::eval(std::size_t t) const {
  Vector s(dim());
  eval_into(t, s);
  return s;
}

Matrix FourierBasis::samples() const {
  Matrix s(period_, dim());
  for (std::size_t t = 1; t <= period_; ++t) eval_into(t, s.row(t - 1));
  return s;
}

Matrix FourierBasis::gram() const {
  const Matrix s = samples();
  Matrix m = matmul_tn(s, s);
  // exact symmetry regardless of kernel summation order
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j) m(j, i) = m(i, j);
  return m;
}

Region region_from_json(const nlohmann::json& j) {
  Region region;
  try {
    if (j.contains("indices")) {
      region.indices = j.at("indices").get<std::vector<std::size_t>>();
    } else if (j.contains("box")) {
      region.box_min = j.at("box").at("min").get<Vector>();
      region.box_max = j.at("box").at("max").get<Vector>();
      if (region.box_min->size() != region.box_max->size()) {
        throw InvalidArgument("region box corners differ in dimension");
      }
    } else {
      throw InvalidArgument("region needs \"indices\" or \"box\"");
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed region: ") + e.what());
  }
  return region;
}

nlohmann::json region_to_json(const Region& region) {
  if (region.box_min && region.box_max) {
    return {{"box", {{"min", *region.box_min}, {"max", *region.box_max}}}};
  }
  return {{"indices", region.indices}};
}

std::vector<std::size_t> resolve_region(const Region& region, const FieldLayout& layout,
                                        std::span<const double> reference_frame) {
  std::vector<std::size_t> out;
  if (region.box_min && region.box_max) {
    if (!layout.has_block("positions")) {
      throw InvalidArgument("box selection requires a \"positions\" block");
    }
    const FieldBlock& pos = layout.block("positions");
    const std::size_t off = layout.offset("positions");
    if (region.box_min->size() != pos.components) {
      throw InvalidArgument("box dimension " + std::to_string(region.box_min->size()) +
                            " does not match positions with " + std::to_string(pos.components) +
                            " components");
    }
    if (reference_frame.size() != layout.state_dim()) throw ShapeError("resolve_region: frame length");
    for (std::size_t e = 0; e < pos.count; ++e) {
      bool inside = true;
      for (std::size_t c = 0; c < pos.components && inside; ++c) {
        const double v = reference_frame[off + e * pos.components + c];
        inside = v >= (*region.box_min)[c] && v <= (*region.box_max)[c];
      }
      if (inside) out.push_back(e);
    }
  } else {
    out = region.indices;
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  }
  return out;
}

LocalBasisColumn build_local_basis(const ReducedModel& model, const FieldLayout& layout,
                                   std::span<const std::size_t> elements, const std::string& block,
                                   std::span<const double> direction) {
  if (elements.empty()) throw InvalidArgument("local basis: region selects no elements");
  if (layout.state_dim() != model.state_dim()) {
    throw ShapeError("local basis: layout does not match the model state dimension");
  }
  const FieldBlock& fb = layout.block(block);
  if (direction.size() != fb.components) {
    throw InvalidArgument("local basis: direction has " + std::to_string(direction.size()) +
                          " components, block " + block + " has " + std::to_string(fb.components));
  }
  if (!all_finite(direction) || norm2(direction) == 0.0) {
    throw InvalidArgument("local basis: direction must be finite and nonzero");
  }
  const std::size_t off = layout.offset(block);
  Vector field(layout.state_dim(), 0.0);
  for (std::size_t e : elements) {
    if (e >= fb.count) {
      throw InvalidArgument("local basis: element " + std::to_string(e) + " outside block " + block +
                            " with " + std::to_string(fb.count) + " elements");
    }
    for (std::size_t c = 0; c < fb.components; ++c) field[off + e * fb.components + c] = direction[c];
  }

  LocalBasisColumn col;
  col.column = project(model, field);
  col.projection_norm = norm2(col.column);
  // compare against the unit-direction field so the test is scale-free
  const double reference = norm2(field);
  if (col.projection_norm < kMinProjectionNorm * reference) {
    throw DegenerateProjection("local basis: selected region is invisible to the reduced basis "
                               "(projection norm " + std::to_string(col.projection_norm) + ")");
  }
  for (double& v : col.column) v /= col.projection_norm;
  col.elements.assign(elements.begin(), elements.end());
  col.block = block;
  col.direction.assign(direction.begin(), direction.end());
  const double dn = norm2(direction);
  for (double& v : col.direction) v /= dn;
  col.label = block + "[" + std::to_string(elements.size()) + " elements]";
  return col;
}

LocalBasisSet LocalBasisSet::identity(std::size_t reduced_dim) {
  LocalBasisSet set(reduced_dim);
  for (std::size_t j = 0; j < reduced_dim; ++j) {
    LocalBasisColumn col;
    col.column.assign(reduced_dim, 0.0);
    col.column[j] = 1.0;
    col.projection_norm = 1.0;
    col.label = "axis " + std::to_string(j);
    set.columns_.push_back(std::move(col));
  }
  return set;
}

std::size_t LocalBasisSet::add(LocalBasisColumn column) {
  if (column.column.size() != reduced_dim_) throw ShapeError("LocalBasisSet::add: wrong column length");
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    const auto& c = columns_[j];
    if (!c.block.empty() && c.block == column.block && c.elements == column.elements &&
        c.direction == column.direction) {
      return j;
    }
  }
  columns_.push_back(std::move(column));
  return columns_.size() - 1;
}

Matrix LocalBasisSet::matrix() const {
  Matrix h(reduced_dim_, columns_.size());
  for (std::size_t j = 0; j < columns_.size(); ++j) h.set_col(j, columns_[j].column);
  return h;
}

TemporalProfile make_profile(std::size_t period, std::size_t target_frame, double width, double strength) {
  if (period < 1) throw InvalidArgument("make_profile: period must be positive");
  if (target_frame < 1 || target_frame > period) {
    throw InvalidArgument("make_profile: target frame " + std::to_string(target_frame) +
                          " outside [1, " + std::to_string(period) + "]");
  }
  if (!(width >= 1.0)) throw InvalidArgument("make_profile: width must be at least one frame");
  if (!std::isfinite(strength)) throw InvalidArgument("make_profile: strength must be finite");
  TemporalProfile p;
  p.target_frame = target_frame;
  p.width = width;
  p.strength = strength;
  p.values.resize(period);
  for (std::size_t t = 1; t <= period; ++t) {
    const std::size_t raw = t > target_frame ? t - target_frame : target_frame - t;
    const double d = static_cast<double>(std::min(raw, period - raw));
    p.values[t - 1] = strength * std::exp(-d * d / (2.0 * width * width));
  }
  return p;
}

}  // namespace cycloop
