#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "motiondiff/tensor.hpp"

namespace motiondiff {

struct Skeleton {
  std::vector<std::string> joint_names;
  // Empty, or one entry per joint with -1 for the root (joint 0).
  std::vector<int> parents;

  std::size_t num_joints() const { return joint_names.size(); }
  // Throws DataError if J < 2 or the parent list is not a tree rooted at 0.
  void validate() const;

  static Skeleton generic(std::size_t joints);
  static Skeleton chain(std::size_t joints);
  static Skeleton human36m();  // 17 joints
  static Skeleton humaneva();  // 15 joints
};

// frames is [num_frames x 3J], joint-major within a row (x0 y0 z0 x1 ...).
struct MotionSequence {
  Skeleton skeleton;
  Tensor frames;
  double fps = 50.0;

  std::size_t num_frames() const { return frames.rows(); }
  std::size_t num_joints() const { return skeleton.num_joints(); }
  void validate() const;
};

struct WindowPair {
  Tensor observed;  // [T x 3J]
  Tensor future;    // [f x 3J]
  std::string source;
  std::size_t start = 0;
  double fps = 50.0;
};

// Text format: header `J=<int> F=<int> FPS=<float>`, then F rows of 3J
// floats. Lines starting with '#' are comments. Errors carry line numbers.
MotionSequence parse_motion(std::istream& in, const std::string& source = "<stream>");
MotionSequence load_motion_file(const std::filesystem::path& path);
// Values are written with 9 significant digits.
void write_motion(std::ostream& out, const MotionSequence& seq);
void save_motion_file(const std::filesystem::path& path, const MotionSequence& seq);

MotionSequence remove_global_translation(const MotionSequence& seq, std::size_t root = 0);

// Window i starts at frame i * stride. Throws DataError when the sequence
// holds fewer than observed + future frames.
std::vector<WindowPair> make_windows(const MotionSequence& seq, std::size_t observed, std::size_t future,
                                     std::size_t stride);

// Kinematic chain whose skeleton (bone lengths, rest angles, swing
// amplitudes) is the same for every seed; each bone direction follows
// sinusoidal polar/azimuth angles whose phases and frequencies come from
// `seed`. The root stays at the origin.
MotionSequence synth_kinematic_chain(std::size_t joints, std::size_t num_frames, std::uint64_t seed,
                                     double fps = 50.0);

// Euclidean length of the bone from joint `child` to its parent in frame t.
double bone_length(const MotionSequence& seq, std::size_t t, std::size_t child);

}  // namespace motiondiff
