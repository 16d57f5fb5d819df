#pragma once

// Sampled full-space trajectories, their field layout, the snapshot-matrix
// convention and the .traj file format.
//
// .traj layout:
//   line 1: CYCLTRAJ1
//   line 2: {"version":1,"n":..,"frame_count":..,"dt":..,"layout":[{"name":..,
//            "components":..,"count":..},..],"source":".."}
//   payload: frame_count * n little-endian float64, frame-major.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cycloop/matrix.hpp"

namespace cycloop {

inline constexpr std::string_view kTrajectoryMagic = "CYCLTRAJ1";

// Block `name` stores `count` elements of `components` values each, contiguous
// and element-major within the state vector.
struct FieldBlock {
  std::string name;
  std::size_t components = 1;
  std::size_t count = 0;

  std::size_t size() const noexcept { return components * count; }
  bool operator==(const FieldBlock&) const = default;
};

class FieldLayout {
 public:
  FieldLayout() = default;
  explicit FieldLayout(std::vector<FieldBlock> blocks);

  // One unnamed block of n scalars.
  static FieldLayout flat(std::size_t n);

  const std::vector<FieldBlock>& blocks() const noexcept { return blocks_; }
  std::size_t state_dim() const noexcept { return state_dim_; }

  bool has_block(std::string_view name) const;
  const FieldBlock& block(std::string_view name) const;
  std::size_t offset(std::string_view name) const;

  bool operator==(const FieldLayout&) const = default;

 private:
  std::vector<FieldBlock> blocks_;
  std::vector<std::size_t> offsets_;
  std::size_t state_dim_ = 0;
};

struct Trajectory {
  std::vector<Vector> frames;
  double dt = 1.0;
  FieldLayout layout;
  // Dataset class label ("nbody", "sheet", "water"), empty when unknown.
  std::string source;

  std::size_t frame_count() const noexcept { return frames.size(); }
  std::size_t state_dim() const noexcept { return frames.empty() ? 0 : frames.front().size(); }

  // Throws InvalidArgument / ShapeError when an invariant is violated.
  void validate() const;
};

// The last frame is held out; the first frame_count-1 frames are fitted.
struct FrameSplit {
  std::size_t fit_frames = 0;
  std::size_t holdout = 0;  // zero-based index of the held-out frame
};
FrameSplit split_frames(const Trajectory& traj);

// inputs = [x_1 .. x_{fit-1}], targets = [x_2 .. x_fit]; both n x (fit-1).
struct SnapshotPair {
  Matrix inputs;
  Matrix targets;
};
SnapshotPair snapshot_pair(const Trajectory& traj, std::size_t fit_count);

// n x count matrix whose columns are frames [first, first+count).
Matrix frames_matrix(const Trajectory& traj, std::size_t first, std::size_t count);

void save_trajectory(const Trajectory& traj, const std::filesystem::path& path);
Trajectory load_trajectory(const std::filesystem::path& path);

// Per-block multiplicative scale; blocks not listed keep scale 1.
using BlockScale = std::map<std::string, double, std::less<>>;
Vector expand_block_scale(const FieldLayout& layout, const BlockScale& scale);
Trajectory scale_trajectory(const Trajectory& traj, const Vector& per_entry);

}  // namespace cycloop
