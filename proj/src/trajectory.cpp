#include "cycloop/trajectory.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "cycloop/error.hpp"
#include "detail/binary_io.hpp"

namespace cycloop {

FieldLayout::FieldLayout(std::vector<FieldBlock> blocks) : blocks_(std::move(blocks)) {
  std::set<std::string, std::less<>> names;
  for (const auto& b : blocks_) {
    if (b.name.empty()) throw InvalidArgument("FieldLayout: block with empty name");
    if (b.components == 0) throw InvalidArgument("FieldLayout: block " + b.name + " has 0 components");
    if (!names.insert(b.name).second) throw InvalidArgument("FieldLayout: duplicate block " + b.name);
    offsets_.push_back(state_dim_);
    state_dim_ += b.size();
  }
}

FieldLayout FieldLayout::flat(std::size_t n) { return FieldLayout({{"state", 1, n}}); }

bool FieldLayout::has_block(std::string_view name) const {
  for (const auto& b : blocks_)
    if (b.name == name) return true;
  return false;
}

const FieldBlock& FieldLayout::block(std::string_view name) const {
  for (const auto& b : blocks_)
    if (b.name == name) return b;
  throw InvalidArgument("layout has no block \"" + std::string(name) + "\"");
}

std::size_t FieldLayout::offset(std::string_view name) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    if (blocks_[i].name == name) return offsets_[i];
  throw InvalidArgument("layout has no block \"" + std::string(name) + "\"");
}

void Trajectory::validate() const {
  if (frames.size() < 3) {
    throw InvalidArgument("trajectory needs at least 3 frames, has " + std::to_string(frames.size()));
  }
  const std::size_t n = frames.front().size();
  if (n == 0) throw InvalidArgument("trajectory frames are empty");
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].size() != n) {
      throw ShapeError("frame " + std::to_string(t) + " has dimension " +
                       std::to_string(frames[t].size()) + ", expected " + std::to_string(n));
    }
    if (!all_finite(frames[t])) throw InvalidArgument("frame " + std::to_string(t) + " is not finite");
  }
  if (layout.state_dim() != n) {
    throw ShapeError("layout describes " + std::to_string(layout.state_dim()) +
                     " values per frame, frames have " + std::to_string(n));
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("trajectory dt must be positive");
}

FrameSplit split_frames(const Trajectory& traj) {
  if (traj.frame_count() < 3) throw InvalidArgument("split_frames: fewer than 3 frames");
  return {traj.frame_count() - 1, traj.frame_count() - 1};
}

Matrix frames_matrix(const Trajectory& traj, std::size_t first, std::size_t count) {
  if (first + count > traj.frame_count()) throw ShapeError("frames_matrix: range out of bounds");
  const std::size_t n = traj.state_dim();
  Matrix m(n, count);
  for (std::size_t c = 0; c < count; ++c) {
    const Vector& f = traj.frames[first + c];
    for (std::size_t i = 0; i < n; ++i) m(i, c) = f[i];
  }
  return m;
}

SnapshotPair snapshot_pair(const Trajectory& traj, std::size_t fit_count) {
  if (fit_count < 2) throw InvalidArgument("snapshot_pair: fit_count must be at least 2");
  if (fit_count > traj.frame_count()) {
    throw InvalidArgument("snapshot_pair: fit_count " + std::to_string(fit_count) + " exceeds " +
                          std::to_string(traj.frame_count()) + " frames");
  }
  return {frames_matrix(traj, 0, fit_count - 1), frames_matrix(traj, 1, fit_count - 1)};
}

void save_trajectory(const Trajectory& traj, const std::filesystem::path& path) {
  traj.validate();
  nlohmann::json layout = nlohmann::json::array();
  for (const auto& b : traj.layout.blocks()) {
    layout.push_back({{"name", b.name}, {"components", b.components}, {"count", b.count}});
  }
  nlohmann::json header = {{"version", 1},
                           {"n", traj.state_dim()},
                           {"frame_count", traj.frame_count()},
                           {"dt", traj.dt},
                           {"layout", layout}};
  if (!traj.source.empty()) header["source"] = traj.source;

  auto out = detail::open_for_write(path);
  detail::write_header(out, kTrajectoryMagic, header);
  for (const auto& f : traj.frames) detail::write_f64(out, f);
  if (!out) throw Error("write failed: " + path.string());
}

Trajectory load_trajectory(const std::filesystem::path& path) {
  const std::string what = path.string();
  auto in = detail::open_for_read(path);
  const nlohmann::json header = detail::read_header(in, kTrajectoryMagic, what);

  Trajectory traj;
  std::size_t n = 0;
  std::size_t frame_count = 0;
  try {
    if (header.at("version").get<int>() != 1) throw FormatError(what + ": unsupported version");
    n = header.at("n").get<std::size_t>();
    frame_count = header.at("frame_count").get<std::size_t>();
    traj.dt = header.at("dt").get<double>();
    std::vector<FieldBlock> blocks;
    for (const auto& b : header.at("layout")) {
      blocks.push_back({b.at("name").get<std::string>(), b.at("components").get<std::size_t>(),
                        b.at("count").get<std::size_t>()});
    }
    traj.layout = FieldLayout(std::move(blocks));
    traj.source = header.value("source", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(what + ": malformed header: " + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(what + ": malformed header: " + e.what());
  }
  if (n == 0 || frame_count == 0) throw FormatError(what + ": header declares an empty trajectory");
  if (traj.layout.state_dim() != n) {
    throw FormatError(what + ": layout describes " + std::to_string(traj.layout.state_dim()) +
                      " values per frame but header declares n=" + std::to_string(n));
  }

  const std::size_t expected = frame_count * n * sizeof(double);
  const std::size_t actual = detail::remaining_bytes(in);
  if (actual != expected) {
    if (actual < expected && actual % (frame_count * sizeof(double)) == 0) {
      throw FormatError(what + ": dimension mismatch, header declares n=" + std::to_string(n) +
                        " but payload holds " + std::to_string(actual / (frame_count * sizeof(double))) +
                        " values per frame (expected " + std::to_string(expected) + " bytes, got " +
                        std::to_string(actual) + ")");
    }
    throw FormatError(what + ": payload size mismatch, expected " + std::to_string(expected) +
                      " bytes, got " + std::to_string(actual));
  }
  traj.frames.reserve(frame_count);
  for (std::size_t t = 0; t < frame_count; ++t) {
    traj.frames.push_back(detail::read_f64(in, n, what));
    if (!all_finite(traj.frames.back())) {
      throw FormatError(what + ": non-finite value in frame " + std::to_string(t));
    }
  }
  try {
    traj.validate();
  } catch (const Error& e) {
    throw FormatError(what + ": " + e.what());
  }
  return traj;
}

Vector expand_block_scale(const FieldLayout& layout, const BlockScale& scale) {
  Vector s(layout.state_dim(), 1.0);
  for (const auto& [name, factor] : scale) {
    if (!(factor > 0.0) || !std::isfinite(factor)) {
      throw InvalidArgument("block scale for " + name + " must be positive");
    }
    const std::size_t off = layout.offset(name);
    const std::size_t len = layout.block(name).size();
    for (std::size_t i = 0; i < len; ++i) s[off + i] = factor;
  }
  return s;
}

Trajectory scale_trajectory(const Trajectory& traj, const Vector& per_entry) {
  Trajectory out = traj;
  for (auto& f : out.frames) {
    if (f.size() != per_entry.size()) throw ShapeError("scale_trajectory: length mismatch");
    for (std::size_t i = 0; i < f.size(); ++i) f[i] *= per_entry[i];
  }
  return out;
}

}  // namespace cycloop
