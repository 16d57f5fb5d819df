#include "cycloop/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "cycloop/error.hpp"

namespace cycloop {

namespace {

// Distance below which an unsoftened pair is treated as a collision.
constexpr double kCollisionFloor = 1e-9;

std::size_t body_count(const NBodyConfig& cfg) { return cfg.masses.size(); }

// Pairwise gravitational forces; each pair is evaluated once and applied with
// opposite signs so the momentum update is antisymmetric.
void nbody_forces(const NBodyConfig& cfg, const Vector& pos, Vector& force) {
  const std::size_t p = body_count(cfg);
  std::fill(force.begin(), force.end(), 0.0);
  const double eps2 = cfg.softening * cfg.softening;
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i + 1; j < p; ++j) {
      double d[3];
      double d2 = 0.0;
      for (int c = 0; c < 3; ++c) {
        d[c] = pos[3 * j + c] - pos[3 * i + c];
        d2 += d[c] * d[c];
      }
      if (cfg.softening == 0.0 && d2 < kCollisionFloor * kCollisionFloor) {
        throw NumericalError("nbody: collision between bodies " + std::to_string(i) + " and " +
                             std::to_string(j));
      }
      const double s2 = d2 + eps2;
      const double inv = cfg.gravity * cfg.masses[i] * cfg.masses[j] / (s2 * std::sqrt(s2));
      for (int c = 0; c < 3; ++c) {
        const double f = inv * d[c];
        force[3 * i + c] += f;
        force[3 * j + c] -= f;
      }
    }
  }
}

FieldLayout particle_layout(std::size_t count) {
  return FieldLayout({{"positions", 3, count}, {"velocities", 3, count}});
}

}  // namespace

void NBodyConfig::validate() const {
  const std::size_t p = masses.size();
  if (p == 0) throw InvalidArgument("nbody: at least one body is required");
  if (positions.size() != p || velocities.size() != p) {
    throw InvalidArgument("nbody: masses, positions and velocities must have equal counts");
  }
  for (double m : masses) {
    if (!(m > 0.0) || !std::isfinite(m)) throw InvalidArgument("nbody: masses must be positive");
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("nbody: dt must be positive");
  if (substeps == 0) throw InvalidArgument("nbody: substeps must be >= 1");
  if (frames < 3) throw InvalidArgument("nbody: frames must be >= 3");
  if (!(softening >= 0.0)) throw InvalidArgument("nbody: softening must be >= 0");
  if (!std::isfinite(gravity)) throw InvalidArgument("nbody: gravity must be finite");
}

double nbody_energy(const NBodyConfig& cfg, const Vector& state) {
  const std::size_t p = body_count(cfg);
  const double eps2 = cfg.softening * cfg.softening;
  double e = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    double v2 = 0.0;
    for (int c = 0; c < 3; ++c) v2 += state[3 * p + 3 * i + c] * state[3 * p + 3 * i + c];
    e += 0.5 * cfg.masses[i] * v2;
    for (std::size_t j = i + 1; j < p; ++j) {
      double d2 = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double d = state[3 * j + c] - state[3 * i + c];
        d2 += d * d;
      }
      e -= cfg.gravity * cfg.masses[i] * cfg.masses[j] / std::sqrt(d2 + eps2);
    }
  }
  return e;
}

Vec3 nbody_momentum(const NBodyConfig& cfg, const Vector& state) {
  const std::size_t p = body_count(cfg);
  Vec3 mom{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < p; ++i) {
    for (int c = 0; c < 3; ++c) mom[c] += cfg.masses[i] * state[3 * p + 3 * i + c];
  }
  return mom;
}

Trajectory gen_nbody(const NBodyConfig& cfg) {
  cfg.validate();
  const std::size_t p = body_count(cfg);
  Vector pos(3 * p), vel(3 * p), force(3 * p);
  for (std::size_t i = 0; i < p; ++i) {
    for (int c = 0; c < 3; ++c) {
      pos[3 * i + c] = cfg.positions[i][c];
      vel[3 * i + c] = cfg.velocities[i][c];
    }
  }
  const double h = cfg.dt / static_cast<double>(cfg.substeps);

  Trajectory traj;
  traj.dt = cfg.dt;
  traj.layout = particle_layout(p);
  traj.source = "nbody";
  traj.frames.reserve(cfg.frames);
  auto record = [&] {
    Vector x(6 * p);
    std::copy(pos.begin(), pos.end(), x.begin());
    std::copy(vel.begin(), vel.end(), x.begin() + static_cast<std::ptrdiff_t>(3 * p));
    if (!all_finite(x)) throw NumericalError("nbody: non-finite state");
    traj.frames.push_back(std::move(x));
  };

  nbody_forces(cfg, pos, force);
  record();
  for (std::size_t f = 1; f < cfg.frames; ++f) {
    for (std::size_t s = 0; s < cfg.substeps; ++s) {
      for (std::size_t i = 0; i < p; ++i) {
        const double k = 0.5 * h / cfg.masses[i];
        for (int c = 0; c < 3; ++c) vel[3 * i + c] += k * force[3 * i + c];
      }
      for (std::size_t i = 0; i < 3 * p; ++i) pos[i] += h * vel[i];
      nbody_forces(cfg, pos, force);
      for (std::size_t i = 0; i < p; ++i) {
        const double k = 0.5 * h / cfg.masses[i];
        for (int c = 0; c < 3; ++c) vel[3 * i + c] += k * force[3 * i + c];
      }
    }
    record();
  }
  return traj;
}

namespace {

// Random hierarchical scene: one heavy body near the origin and four lighter
// ones on separated, perturbed near-circular orbits; net momentum removed.
NBodyConfig random_scene(std::mt19937_64& rng, std::size_t frames) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);

  NBodyConfig cfg;
  cfg.frames = frames;
  cfg.masses.push_back(3.0 + 0.3 * unit(rng));
  cfg.positions.push_back({0.0, 0.0, 0.0});
  cfg.velocities.push_back({0.0, 0.0, 0.0});
  double enclosed = cfg.masses.front();
  const double phase = angle(rng);
  for (std::size_t i = 0; i < 4; ++i) {
    const double m = 0.15 + 0.1 * unit(rng);
    const double r = 1.0 + 0.7 * static_cast<double>(i) + 0.08 * unit(rng);
    const double a = phase + 0.5 * std::numbers::pi * static_cast<double>(i) + 0.4 * unit(rng);
    const double speed = std::sqrt(cfg.gravity * enclosed / r) * (1.0 + 0.06 * unit(rng));
    const double tilt = 0.08 * unit(rng);
    cfg.masses.push_back(m);
    cfg.positions.push_back({r * std::cos(a), r * std::sin(a), 0.1 * unit(rng)});
    cfg.velocities.push_back({-speed * std::sin(a), speed * std::cos(a), tilt * speed});
    enclosed += m;
  }
  double total = 0.0;
  Vec3 com{}, mom{};
  for (std::size_t i = 0; i < cfg.masses.size(); ++i) {
    total += cfg.masses[i];
    for (int c = 0; c < 3; ++c) {
      com[c] += cfg.masses[i] * cfg.positions[i][c];
      mom[c] += cfg.masses[i] * cfg.velocities[i][c];
    }
  }
  for (std::size_t i = 0; i < cfg.masses.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      cfg.positions[i][c] -= com[c] / total;
      cfg.velocities[i][c] -= mom[c] / total;
    }
  }
  return cfg;
}

bool acceptable_scene(const NBodyConfig& cfg, const Trajectory& traj) {
  const std::size_t p = cfg.masses.size();
  const double e0 = nbody_energy(cfg, traj.frames.front());
  if (!(e0 < 0.0)) return false;
  double min_pair = 1e300;
  for (const auto& x : traj.frames) {
    for (std::size_t i = 0; i < p; ++i) {
      double r2 = 0.0;
      for (int c = 0; c < 3; ++c) r2 += x[3 * i + c] * x[3 * i + c];
      if (r2 > 6.0 * 6.0) return false;
      for (std::size_t j = i + 1; j < p; ++j) {
        double d2 = 0.0;
        for (int c = 0; c < 3; ++c) {
          const double d = x[3 * j + c] - x[3 * i + c];
          d2 += d * d;
        }
        min_pair = std::min(min_pair, d2);
      }
    }
    const double e = nbody_energy(cfg, x);
    if (std::abs(e - e0) > 0.005 * std::abs(e0)) return false;
  }
  if (min_pair < 0.25 * 0.25) return false;
  // Reject runs that come back close to where they started.
  const auto& a = traj.frames.front();
  const auto& b = traj.frames.back();
  double gap = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < 3 * p; ++i) {
    gap += (a[i] - b[i]) * (a[i] - b[i]);
    scale += a[i] * a[i];
  }
  return gap > 0.05 * scale;
}

}  // namespace

NBodyConfig default_nbody_config(std::uint64_t seed, std::size_t frames) {
  for (std::uint64_t s = seed; s < seed + 4096; ++s) {
    std::mt19937_64 rng(s);
    NBodyConfig cfg = random_scene(rng, frames);
    try {
      if (acceptable_scene(cfg, gen_nbody(cfg))) return cfg;
    } catch (const NumericalError&) {
    }
  }
  throw NumericalError("nbody: no acceptable default scene found near seed " + std::to_string(seed));
}

// ---------------------------------------------------------------------------
// Shallow water, linearized about a still surface of depth H:
//   u' = -g dh/dx,  v' = -g dh/dy,  h' = -H (du/dx + dv/dy)
// Collocated grid, centered differences, forward-backward stepping (velocities
// first, then height from the new velocities). Reflective walls use mirrored
// ghost cells: height and tangential velocity copied, normal velocity negated.
// The recorded height block is the surface elevation h - H, so a flat pool is
// the zero state.

double ShallowWaterConfig::cfl() const {
  double hmax = depth + std::max(0.0, bump_amplitude);
  if (!initial_height.empty()) hmax = max_abs(initial_height);
  return dt * std::sqrt(gravity * hmax) / cell;
}

void ShallowWaterConfig::validate() const {
  if (nx < 2 || ny < 2) throw InvalidArgument("water: grid must be at least 2x2");
  if (!(cell > 0.0)) throw InvalidArgument("water: cell size must be positive");
  if (!(gravity > 0.0)) throw InvalidArgument("water: gravity must be positive");
  if (!(depth > 0.0)) throw InvalidArgument("water: depth must be positive");
  if (!(dt > 0.0)) throw InvalidArgument("water: dt must be positive");
  if (substeps == 0) throw InvalidArgument("water: substeps must be >= 1");
  if (frames < 3) throw InvalidArgument("water: frames must be >= 3");
  if (!initial_height.empty() && initial_height.size() != nx * ny) {
    throw InvalidArgument("water: initial_height must have nx*ny entries");
  }
  if (!initial_height.empty() && !all_finite(initial_height)) {
    throw InvalidArgument("water: initial_height must be finite");
  }
  if (!(bump_sigma > 0.0)) throw InvalidArgument("water: bump_sigma must be positive");
  const double c = cfl();
  if (!(c < 1.0)) {
    throw InvalidArgument("water: CFL number " + std::to_string(c) + " must be < 1");
  }
}

Trajectory gen_shallow_water(const ShallowWaterConfig& cfg) {
  cfg.validate();
  const std::size_t nx = cfg.nx, ny = cfg.ny, cells = nx * ny;
  const double h_step = cfg.dt / static_cast<double>(cfg.substeps);
  Vector h(cells), u(cells, 0.0), v(cells, 0.0);
  if (!cfg.initial_height.empty()) {
    h = cfg.initial_height;
  } else {
    const double cx = cfg.bump_x * static_cast<double>(nx) * cfg.cell;
    const double cy = cfg.bump_y * static_cast<double>(ny) * cfg.cell;
    const double s2 = 2.0 * (cfg.bump_sigma * cfg.cell) * (cfg.bump_sigma * cfg.cell);
    for (std::size_t j = 0; j < ny; ++j) {
      for (std::size_t i = 0; i < nx; ++i) {
        const double x = (static_cast<double>(i) + 0.5) * cfg.cell - cx;
        const double y = (static_cast<double>(j) + 0.5) * cfg.cell - cy;
        h[j * nx + i] = cfg.depth + cfg.bump_amplitude * std::exp(-(x * x + y * y) / s2);
      }
    }
  }
  const double limit = 10.0 * max_abs(h);
  for (double& x : h) x -= cfg.depth;
  const double inv2 = 1.0 / (2.0 * cfg.cell);
  auto idx = [nx](std::size_t i, std::size_t j) { return j * nx + i; };

  Trajectory traj;
  traj.dt = cfg.dt;
  traj.layout = FieldLayout({{"height", 1, cells}, {"vel_x", 1, cells}, {"vel_y", 1, cells}});
  traj.source = "water";
  traj.frames.reserve(cfg.frames);
  auto record = [&] {
    Vector x(3 * cells);
    std::copy(h.begin(), h.end(), x.begin());
    std::copy(u.begin(), u.end(), x.begin() + static_cast<std::ptrdiff_t>(cells));
    std::copy(v.begin(), v.end(), x.begin() + static_cast<std::ptrdiff_t>(2 * cells));
    traj.frames.push_back(std::move(x));
  };

  record();
  for (std::size_t f = 1; f < cfg.frames; ++f) {
    for (std::size_t s = 0; s < cfg.substeps; ++s) {
      const double gk = cfg.gravity * h_step * inv2;
      for (std::size_t j = 0; j < ny; ++j) {
        for (std::size_t i = 0; i < nx; ++i) {
          const double hc = h[idx(i, j)];
          const double he = i + 1 < nx ? h[idx(i + 1, j)] : hc;
          const double hw = i > 0 ? h[idx(i - 1, j)] : hc;
          const double hn = j + 1 < ny ? h[idx(i, j + 1)] : hc;
          const double hs = j > 0 ? h[idx(i, j - 1)] : hc;
          u[idx(i, j)] -= gk * (he - hw);
          v[idx(i, j)] -= gk * (hn - hs);
        }
      }
      const double hk = cfg.depth * h_step * inv2;
      for (std::size_t j = 0; j < ny; ++j) {
        for (std::size_t i = 0; i < nx; ++i) {
          const double uc = u[idx(i, j)];
          const double vc = v[idx(i, j)];
          const double ue = i + 1 < nx ? u[idx(i + 1, j)] : -uc;
          const double uw = i > 0 ? u[idx(i - 1, j)] : -uc;
          const double vn = j + 1 < ny ? v[idx(i, j + 1)] : -vc;
          const double vs = j > 0 ? v[idx(i, j - 1)] : -vc;
          h[idx(i, j)] -= hk * ((ue - uw) + (vn - vs));
        }
      }
      for (double x : h) {
        if (!(std::abs(x + cfg.depth) <= limit)) throw NumericalError("water: height blow-up detected");
      }
    }
    record();
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Pinned mass-spring sheet. Nodes start on a flat square in the x-z plane;
// structural, shear and bend springs take their rest lengths from that start.

namespace {

struct Spring {
  std::size_t a, b;
  double k, rest;
};

std::vector<std::size_t> effective_pins(const PinnedSheetConfig& cfg) {
  if (!cfg.pinned.empty()) return cfg.pinned;
  return {0, cfg.nx - 1};
}

Vector sheet_rest_positions(const PinnedSheetConfig& cfg) {
  Vector pos(3 * cfg.nx * cfg.ny);
  const double hx = cfg.size / static_cast<double>(cfg.nx - 1);
  const double hz = cfg.size / static_cast<double>(cfg.ny - 1);
  for (std::size_t j = 0; j < cfg.ny; ++j) {
    for (std::size_t i = 0; i < cfg.nx; ++i) {
      const std::size_t n = j * cfg.nx + i;
      pos[3 * n + 0] = static_cast<double>(i) * hx;
      pos[3 * n + 1] = 0.0;
      pos[3 * n + 2] = static_cast<double>(j) * hz;
    }
  }
  return pos;
}

double distance(const Vector& pos, std::size_t a, std::size_t b) {
  double d2 = 0.0;
  for (int c = 0; c < 3; ++c) {
    const double d = pos[3 * b + c] - pos[3 * a + c];
    d2 += d * d;
  }
  return std::sqrt(d2);
}

std::vector<Spring> sheet_springs(const PinnedSheetConfig& cfg, const Vector& rest) {
  std::vector<Spring> springs;
  const std::size_t nx = cfg.nx, ny = cfg.ny;
  auto add = [&](std::size_t a, std::size_t b, double k) {
    springs.push_back({a, b, k, distance(rest, a, b)});
  };
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      const std::size_t n = j * nx + i;
      if (i + 1 < nx) add(n, n + 1, cfg.stiffness);
      if (j + 1 < ny) add(n, n + nx, cfg.stiffness);
      if (i + 1 < nx && j + 1 < ny) {
        add(n, n + nx + 1, 0.5 * cfg.stiffness);
        add(n + 1, n + nx, 0.5 * cfg.stiffness);
      }
      if (i + 2 < nx) add(n, n + 2, 0.2 * cfg.stiffness);
      if (j + 2 < ny) add(n, n + 2 * nx, 0.2 * cfg.stiffness);
    }
  }
  return springs;
}

}  // namespace

void PinnedSheetConfig::validate() const {
  if (nx < 2 || ny < 2) throw InvalidArgument("sheet: grid must be at least 2x2");
  if (!(size > 0.0)) throw InvalidArgument("sheet: size must be positive");
  if (!(total_mass > 0.0)) throw InvalidArgument("sheet: total_mass must be positive");
  if (!(stiffness > 0.0)) throw InvalidArgument("sheet: stiffness must be positive");
  if (!(damping >= 0.0)) throw InvalidArgument("sheet: damping must be >= 0");
  if (!(dt > 0.0)) throw InvalidArgument("sheet: dt must be positive");
  if (substeps == 0) throw InvalidArgument("sheet: substeps must be >= 1");
  if (frames < 3) throw InvalidArgument("sheet: frames must be >= 3");
  for (std::size_t p : effective_pins(*this)) {
    if (p >= nx * ny) throw InvalidArgument("sheet: pinned node index out of range");
  }
}

double sheet_energy(const PinnedSheetConfig& cfg, const Vector& state) {
  const std::size_t nodes = cfg.nx * cfg.ny;
  const double m = cfg.total_mass / static_cast<double>(nodes);
  const Vector rest = sheet_rest_positions(cfg);
  double e = 0.0;
  for (std::size_t n = 0; n < nodes; ++n) {
    for (int c = 0; c < 3; ++c) {
      const double vel = state[3 * nodes + 3 * n + c];
      e += 0.5 * m * vel * vel - m * cfg.gravity[c] * state[3 * n + c];
    }
  }
  for (const Spring& s : sheet_springs(cfg, rest)) {
    const double stretch = distance(state, s.a, s.b) - s.rest;
    e += 0.5 * s.k * stretch * stretch;
  }
  return e;
}

Trajectory gen_pinned_sheet(const PinnedSheetConfig& cfg) {
  cfg.validate();
  const std::size_t nodes = cfg.nx * cfg.ny;
  const double m = cfg.total_mass / static_cast<double>(nodes);
  const double h = cfg.dt / static_cast<double>(cfg.substeps);
  Vector pos = sheet_rest_positions(cfg);
  Vector vel(3 * nodes, 0.0), force(3 * nodes);
  const auto springs = sheet_springs(cfg, pos);
  std::vector<char> pinned(nodes, 0);
  for (std::size_t p : effective_pins(cfg)) pinned[p] = 1;
  // Any node faster than this is treated as a numerical explosion.
  const double speed_limit = 1e3 * std::max(1.0, cfg.size / cfg.dt);

  Trajectory traj;
  traj.dt = cfg.dt;
  traj.layout = particle_layout(nodes);
  traj.source = "sheet";
  traj.frames.reserve(cfg.frames);
  auto record = [&] {
    Vector x(6 * nodes);
    std::copy(pos.begin(), pos.end(), x.begin());
    std::copy(vel.begin(), vel.end(), x.begin() + static_cast<std::ptrdiff_t>(3 * nodes));
    traj.frames.push_back(std::move(x));
  };

  record();
  for (std::size_t f = 1; f < cfg.frames; ++f) {
    for (std::size_t s = 0; s < cfg.substeps; ++s) {
      for (std::size_t n = 0; n < nodes; ++n) {
        for (int c = 0; c < 3; ++c) force[3 * n + c] = m * cfg.gravity[c] - m * cfg.damping * vel[3 * n + c];
      }
      for (const Spring& sp : springs) {
        double d[3];
        double len2 = 0.0;
        for (int c = 0; c < 3; ++c) {
          d[c] = pos[3 * sp.b + c] - pos[3 * sp.a + c];
          len2 += d[c] * d[c];
        }
        const double len = std::sqrt(len2);
        if (len == 0.0) continue;
        const double mag = sp.k * (len - sp.rest) / len;
        for (int c = 0; c < 3; ++c) {
          force[3 * sp.a + c] += mag * d[c];
          force[3 * sp.b + c] -= mag * d[c];
        }
      }
      double vmax2 = 0.0;
      for (std::size_t n = 0; n < nodes; ++n) {
        if (pinned[n]) continue;
        double v2 = 0.0;
        for (int c = 0; c < 3; ++c) {
          vel[3 * n + c] += h * force[3 * n + c] / m;
          pos[3 * n + c] += h * vel[3 * n + c];
          v2 += vel[3 * n + c] * vel[3 * n + c];
        }
        vmax2 = std::max(vmax2, v2);
      }
      if (!(vmax2 <= speed_limit * speed_limit)) {
        throw NumericalError("sheet: instability detected (velocity explosion)");
      }
    }
    record();
  }
  return traj;
}

// ---------------------------------------------------------------------------
// JSON configs

void to_json(nlohmann::json& j, const NBodyConfig& c) {
  j = {{"masses", c.masses},   {"positions", c.positions}, {"velocities", c.velocities},
       {"G", c.gravity},       {"dt", c.dt},               {"substeps", c.substeps},
       {"frames", c.frames},   {"softening", c.softening}};
}

void from_json(const nlohmann::json& j, NBodyConfig& c) {
  c.masses = j.value("masses", c.masses);
  c.positions = j.value("positions", c.positions);
  c.velocities = j.value("velocities", c.velocities);
  c.gravity = j.value("G", c.gravity);
  c.dt = j.value("dt", c.dt);
  c.substeps = j.value("substeps", c.substeps);
  c.frames = j.value("frames", c.frames);
  c.softening = j.value("softening", c.softening);
}

void to_json(nlohmann::json& j, const ShallowWaterConfig& c) {
  j = {{"nx", c.nx},
       {"ny", c.ny},
       {"cell", c.cell},
       {"gravity", c.gravity},
       {"depth", c.depth},
       {"dt", c.dt},
       {"substeps", c.substeps},
       {"frames", c.frames},
       {"bump", {{"amplitude", c.bump_amplitude}, {"x", c.bump_x}, {"y", c.bump_y}, {"sigma", c.bump_sigma}}}};
  if (!c.initial_height.empty()) j["initial_height"] = c.initial_height;
}

void from_json(const nlohmann::json& j, ShallowWaterConfig& c) {
  c.nx = j.value("nx", c.nx);
  c.ny = j.value("ny", c.ny);
  c.cell = j.value("cell", c.cell);
  c.gravity = j.value("gravity", c.gravity);
  c.depth = j.value("depth", c.depth);
  c.dt = j.value("dt", c.dt);
  c.substeps = j.value("substeps", c.substeps);
  c.frames = j.value("frames", c.frames);
  if (j.contains("bump")) {
    const auto& b = j.at("bump");
    c.bump_amplitude = b.value("amplitude", c.bump_amplitude);
    c.bump_x = b.value("x", c.bump_x);
    c.bump_y = b.value("y", c.bump_y);
    c.bump_sigma = b.value("sigma", c.bump_sigma);
  }
  c.initial_height = j.value("initial_height", c.initial_height);
}

void to_json(nlohmann::json& j, const PinnedSheetConfig& c) {
  j = {{"nx", c.nx},
       {"ny", c.ny},
       {"size", c.size},
       {"total_mass", c.total_mass},
       {"stiffness", c.stiffness},
       {"damping", c.damping},
       {"gravity", c.gravity},
       {"pinned", c.pinned},
       {"dt", c.dt},
       {"substeps", c.substeps},
       {"frames", c.frames}};
}

void from_json(const nlohmann::json& j, PinnedSheetConfig& c) {
  c.nx = j.value("nx", c.nx);
  c.ny = j.value("ny", c.ny);
  c.size = j.value("size", c.size);
  c.total_mass = j.value("total_mass", c.total_mass);
  c.stiffness = j.value("stiffness", c.stiffness);
  c.damping = j.value("damping", c.damping);
  c.gravity = j.value("gravity", c.gravity);
  c.pinned = j.value("pinned", c.pinned);
  c.dt = j.value("dt", c.dt);
  c.substeps = j.value("substeps", c.substeps);
  c.frames = j.value("frames", c.frames);
}

Trajectory generate(const std::string& cls, const nlohmann::json& overrides, std::uint64_t seed) {
  if (!overrides.is_null() && !overrides.is_object()) {
    throw InvalidArgument("config must be a JSON object");
  }
  const nlohmann::json cfg_json = overrides.is_null() ? nlohmann::json::object() : overrides;
  try {
    if (cls == "nbody") {
      const std::size_t frames = cfg_json.value("frames", std::size_t{401});
      NBodyConfig cfg = cfg_json.contains("masses") ? NBodyConfig{} : default_nbody_config(seed, frames);
      from_json(cfg_json, cfg);
      return gen_nbody(cfg);
    }
    if (cls == "water") {
      ShallowWaterConfig cfg = cfg_json.get<ShallowWaterConfig>();
      return gen_shallow_water(cfg);
    }
    if (cls == "sheet") {
      PinnedSheetConfig cfg = cfg_json.get<PinnedSheetConfig>();
      return gen_pinned_sheet(cfg);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("bad config: ") + e.what());
  }
  throw InvalidArgument("unknown dataset class '" + cls + "' (expected nbody, sheet or water)");
}

}  // namespace cycloop
