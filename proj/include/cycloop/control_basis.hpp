#pragma once

// Temporal Fourier basis for the control signal and user-driven localized
// spatial control directions.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cycloop/koopman.hpp"
#include "cycloop/matrix.hpp"
#include "cycloop/trajectory.hpp"

namespace cycloop {

// s_t = [sin(2 pi t/T), cos(2 pi t/T), ..., sin(2 pi H t/T), cos(2 pi H t/T) (, 1)]
class FourierBasis {
 public:
  FourierBasis(std::size_t period, std::size_t harmonics, bool include_constant = false);

  std::size_t period() const noexcept { return period_; }
  std::size_t harmonics() const noexcept { return harmonics_; }
  bool include_constant() const noexcept { return include_constant_; }
  std::size_t dim() const noexcept { return 2 * harmonics_ + (include_constant_ ? 1 : 0); }

  // t is one-based; any t >= 1 is accepted (the basis is T-periodic).
  Vector eval(std::size_t t) const;
  void eval_into(std::size_t t, std::span<double> out) const;

  // period x dim, row t-1 holds s_t.
  Matrix samples() const;

  // M = sum_{t=1}^{T} s_t s_t^T
  Matrix gram() const;

  bool operator==(const FourierBasis&) const = default;

 private:
  std::size_t period_;
  std::size_t harmonics_;
  bool include_constant_;
};

// Element selection: explicit indices, or an axis-aligned box tested against
// the positions block of a reference frame.
struct Region {
  std::vector<std::size_t> indices;
  std::optional<Vector> box_min;
  std::optional<Vector> box_max;
};

// {"indices":[...]} or {"box":{"min":[...],"max":[...]}}
Region region_from_json(const nlohmann::json& j);
nlohmann::json region_to_json(const Region& region);

std::vector<std::size_t> resolve_region(const Region& region, const FieldLayout& layout,
                                        std::span<const double> reference_frame);

struct LocalBasisColumn {
  Vector column;  // r, unit norm
  std::vector<std::size_t> elements;
  std::string block;
  Vector direction;
  std::string label;
  double projection_norm = 0.0;  // ||U_r^T v|| before normalization
};

inline constexpr double kMinProjectionNorm = 1e-10;

// Full-space field with `direction` on the selected elements of `block`,
// projected onto the reduced basis and normalized. Throws
// DegenerateProjection when the projection norm is below kMinProjectionNorm.
LocalBasisColumn build_local_basis(const ReducedModel& model, const FieldLayout& layout,
                                   std::span<const std::size_t> elements, const std::string& block,
                                   std::span<const double> direction);

class LocalBasisSet {
 public:
  explicit LocalBasisSet(std::size_t reduced_dim) : reduced_dim_(reduced_dim) {}

  static LocalBasisSet identity(std::size_t reduced_dim);

  // Returns the index of the column; an existing column with the same
  // selection and direction is reused.
  std::size_t add(LocalBasisColumn column);

  std::size_t size() const noexcept { return columns_.size(); }
  std::size_t reduced_dim() const noexcept { return reduced_dim_; }
  const LocalBasisColumn& column(std::size_t j) const { return columns_.at(j); }

  // r x k
  Matrix matrix() const;

 private:
  std::size_t reduced_dim_;
  std::vector<LocalBasisColumn> columns_;
};

struct TemporalProfile {
  Vector values;  // a_1 .. a_T at index t-1
  std::size_t target_frame = 1;
  double width = 1.0;
  double strength = 0.0;
};

// Wrapped Gaussian: a_t = strength * exp(-d(t, target)^2 / (2 width^2)) with
// d the circular frame distance on 1..T.
TemporalProfile make_profile(std::size_t period, std::size_t target_frame, double width, double strength);

inline double default_profile_width(std::size_t period) { return static_cast<double>(period) / 20.0; }

}  // namespace cycloop
