#pragma once

// Desk-scale generators for the three input classes: gravitational N-body
// (velocity Verlet), a pinned mass-spring sheet and linearized shallow water.

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cycloop/trajectory.hpp"

namespace cycloop {

using Vec3 = std::array<double, 3>;

struct NBodyConfig {
  std::vector<double> masses;
  std::vector<Vec3> positions;
  std::vector<Vec3> velocities;
  double gravity = 1.0;      // G, simulation units
  double dt = 0.05;          // time between recorded frames
  std::size_t substeps = 20; // integration steps per frame
  std::size_t frames = 401;
  double softening = 0.05;   // Plummer length

  void validate() const;
};

// Seeded five-body scene: a bounded, close-encounter-free, visibly
// non-periodic run found by scanning seeds from `seed` upward.
NBodyConfig default_nbody_config(std::uint64_t seed = 7, std::size_t frames = 401);

// Frames stack positions (3 x P) then velocities (3 x P).
Trajectory gen_nbody(const NBodyConfig& cfg);

double nbody_energy(const NBodyConfig& cfg, const Vector& state);
Vec3 nbody_momentum(const NBodyConfig& cfg, const Vector& state);

struct ShallowWaterConfig {
  std::size_t nx = 150;
  std::size_t ny = 150;
  double cell = 1.0;
  double gravity = 9.81;
  double depth = 1.0;  // mean depth of the linearization
  double dt = 0.08;
  std::size_t substeps = 2;
  std::size_t frames = 101;
  // Gaussian bump added to the still surface
  double bump_amplitude = 0.1;
  double bump_x = 0.35;  // fraction of the domain width
  double bump_y = 0.42;
  double bump_sigma = 6.0;  // cells
  // Optional explicit initial total height (nx*ny, row-major in y); overrides the bump.
  Vector initial_height;

  double cfl() const;
  void validate() const;
};

// Frames stack height (elevation above `depth`), vel_x, vel_y per cell
// (n = 3 nx ny); reflective walls.
Trajectory gen_shallow_water(const ShallowWaterConfig& cfg);

struct PinnedSheetConfig {
  std::size_t nx = 65;
  std::size_t ny = 65;
  double size = 1.0;             // edge length of the rest sheet
  double total_mass = 1.0;
  double stiffness = 60.0;       // structural springs; shear and bend are scaled
  double damping = 0.02;         // viscous drag coefficient, per unit mass
  Vec3 gravity{0.0, -9.81, 0.0};
  std::vector<std::size_t> pinned;  // node indices; default: the two corners of row 0
  double dt = 1.0 / 60.0;           // time between recorded frames
  std::size_t substeps = 24;
  std::size_t frames = 201;

  void validate() const;
};

// Frames stack positions (3 x nodes) then velocities (3 x nodes).
Trajectory gen_pinned_sheet(const PinnedSheetConfig& cfg);

// Kinetic + spring + gravitational potential energy of a sheet state.
double sheet_energy(const PinnedSheetConfig& cfg, const Vector& state);

void to_json(nlohmann::json& j, const NBodyConfig& c);
void from_json(const nlohmann::json& j, NBodyConfig& c);
void to_json(nlohmann::json& j, const ShallowWaterConfig& c);
void from_json(const nlohmann::json& j, ShallowWaterConfig& c);
void to_json(nlohmann::json& j, const PinnedSheetConfig& c);
void from_json(const nlohmann::json& j, PinnedSheetConfig& c);

// Dispatch by class name ("nbody", "sheet", "water"); `overrides` is merged
// into the class defaults.
Trajectory generate(const std::string& cls, const nlohmann::json& overrides, std::uint64_t seed = 7);

}  // namespace cycloop
