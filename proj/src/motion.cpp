#include "motiondiff/motion.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace motiondiff {

namespace {

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& what) {
  throw DataError(source + ": " + what + " at line " + std::to_string(line));
}

bool is_comment_or_blank(const std::string& line) {
  const auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string::npos || line[pos] == '#';
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t j = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > j) out.push_back(line.substr(j, i - j));
  }
  return out;
}

bool parse_double(const std::string& tok, double& out) {
  if (tok.empty()) return false;
  errno = 0;
  char* end = nullptr;
  out = std::strtod(tok.c_str(), &end);
  return end == tok.c_str() + tok.size() && errno != ERANGE && std::isfinite(out);
}

bool parse_count(const std::string& tok, long& out) {
  if (tok.empty()) return false;
  errno = 0;
  char* end = nullptr;
  out = std::strtol(tok.c_str(), &end, 10);
  return end == tok.c_str() + tok.size() && errno != ERANGE;
}

std::string header_value(const std::string& tok, const std::string& key) {
  if (tok.rfind(key + "=", 0) != 0) return {};
  return tok.substr(key.size() + 1);
}

}  // namespace

void Skeleton::validate() const {
  const std::size_t j = num_joints();
  if (j < 2) throw DataError("skeleton must have at least 2 joints, got " + std::to_string(j));
  if (parents.empty()) return;
  if (parents.size() != j) throw DataError("skeleton parent list length does not match joint count");
  if (parents[0] != -1) throw DataError("skeleton joint 0 must be the root");
  for (std::size_t i = 1; i < j; ++i) {
    int p = parents[i];
    std::size_t hops = 0;
    while (p != -1) {
      if (p < 0 || static_cast<std::size_t>(p) >= j || ++hops > j) {
        throw DataError("skeleton parents do not form a tree rooted at joint 0 (joint " + std::to_string(i) + ")");
      }
      if (p == 0) break;
      p = parents[static_cast<std::size_t>(p)];
    }
    if (p != 0) throw DataError("skeleton joint " + std::to_string(i) + " is a second root");
  }
}

Skeleton Skeleton::generic(std::size_t joints) {
  Skeleton s;
  for (std::size_t i = 0; i < joints; ++i) s.joint_names.push_back("joint" + std::to_string(i));
  return s;
}

Skeleton Skeleton::chain(std::size_t joints) {
  Skeleton s = generic(joints);
  for (std::size_t i = 0; i < joints; ++i) s.parents.push_back(static_cast<int>(i) - 1);
  return s;
}

Skeleton Skeleton::human36m() {
  return {{"Hip", "RHip", "RKnee", "RFoot", "LHip", "LKnee", "LFoot", "Spine", "Thorax", "Nose", "Head",
           "LShoulder", "LElbow", "LWrist", "RShoulder", "RElbow", "RWrist"},
          {-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15}};
}

Skeleton Skeleton::humaneva() {
  return {{"Pelvis", "Thorax", "LShoulder", "LElbow", "LWrist", "RShoulder", "RElbow", "RWrist", "LHip", "LKnee",
           "LAnkle", "RHip", "RKnee", "RAnkle", "Head"},
          {-1, 0, 1, 2, 3, 1, 5, 6, 0, 8, 9, 0, 11, 12, 1}};
}

void MotionSequence::validate() const {
  skeleton.validate();
  if (num_frames() < 1) throw DataError("motion sequence has no frames");
  if (frames.cols() != 3 * num_joints()) {
    throw DataError("motion frames have " + std::to_string(frames.cols()) + " columns, expected " +
                    std::to_string(3 * num_joints()));
  }
  if (!(fps > 0.0) || !std::isfinite(fps)) throw DataError("motion fps must be positive");
  if (!frames.all_finite()) throw DataError("motion sequence contains non-finite coordinates");
}

MotionSequence parse_motion(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  long joints = 0, frames = 0;
  double fps = 0.0;
  std::vector<double> values;
  std::size_t rows = 0;

  while (std::getline(in, line)) {
    ++lineno;
    if (is_comment_or_blank(line)) continue;
    const auto toks = split_ws(line);
    if (!have_header) {
      if (toks.size() != 3) fail(source, lineno, "malformed header (expected `J=<int> F=<int> FPS=<float>`)");
      const std::string j = header_value(toks[0], "J");
      const std::string f = header_value(toks[1], "F");
      const std::string r = header_value(toks[2], "FPS");
      if (!parse_count(j, joints) || !parse_count(f, frames) || !parse_double(r, fps)) {
        fail(source, lineno, "malformed header (expected `J=<int> F=<int> FPS=<float>`)");
      }
      if (joints < 2) fail(source, lineno, "malformed header (J must be >= 2)");
      if (frames < 1) fail(source, lineno, "malformed header (F must be >= 1)");
      if (!(fps > 0.0)) fail(source, lineno, "malformed header (FPS must be > 0)");
      have_header = true;
      values.reserve(static_cast<std::size_t>(frames * joints * 3));
      continue;
    }
    if (rows == static_cast<std::size_t>(frames)) fail(source, lineno, "frame count mismatch");
    if (toks.size() != static_cast<std::size_t>(3 * joints)) {
      fail(source, lineno, "row length " + std::to_string(toks.size()) + " != 3J = " + std::to_string(3 * joints));
    }
    for (const auto& tok : toks) {
      double v = 0.0;
      if (!parse_double(tok, v)) fail(source, lineno, "non-numeric token '" + tok + "'");
      values.push_back(v);
    }
    ++rows;
  }
  if (!have_header) fail(source, lineno + 1, "malformed header (missing)");
  if (rows != static_cast<std::size_t>(frames)) fail(source, lineno + 1, "frame count mismatch");

  MotionSequence seq;
  seq.skeleton = Skeleton::generic(static_cast<std::size_t>(joints));
  seq.frames = Tensor(rows, static_cast<std::size_t>(3 * joints), std::move(values));
  seq.fps = fps;
  return seq;
}

MotionSequence load_motion_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open motion file " + path.string());
  return parse_motion(in, path.string());
}

void write_motion(std::ostream& out, const MotionSequence& seq) {
  seq.validate();
  char buf[64];
  std::snprintf(buf, sizeof(buf), "J=%zu F=%zu FPS=%.9g\n", seq.num_joints(), seq.num_frames(), seq.fps);
  out << buf;
  for (std::size_t t = 0; t < seq.num_frames(); ++t) {
    const auto row = seq.frames.row(t);
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::snprintf(buf, sizeof(buf), i == 0 ? "%.9g" : " %.9g", row[i]);
      out << buf;
    }
    out << '\n';
  }
}

void save_motion_file(const std::filesystem::path& path, const MotionSequence& seq) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write motion file " + path.string());
  write_motion(out, seq);
  if (!out) throw DataError("write failed for " + path.string());
}

MotionSequence remove_global_translation(const MotionSequence& seq, std::size_t root) {
  if (root >= seq.num_joints()) {
    throw DataError("root joint " + std::to_string(root) + " out of range for J=" + std::to_string(seq.num_joints()));
  }
  MotionSequence out = seq;
  for (std::size_t t = 0; t < out.num_frames(); ++t) {
    auto row = out.frames.row(t);
    const double rx = row[3 * root], ry = row[3 * root + 1], rz = row[3 * root + 2];
    for (std::size_t j = 0; j < out.num_joints(); ++j) {
      row[3 * j] -= rx;
      row[3 * j + 1] -= ry;
      row[3 * j + 2] -= rz;
    }
  }
  return out;
}

std::vector<WindowPair> make_windows(const MotionSequence& seq, std::size_t observed, std::size_t future,
                                     std::size_t stride) {
  if (stride < 1) throw std::invalid_argument("make_windows: stride must be >= 1");
  if (observed < 1 || future < 1) throw std::invalid_argument("make_windows: window lengths must be >= 1");
  const std::size_t n = seq.num_frames();
  if (n < observed + future) {
    throw DataError("empty input: sequence has " + std::to_string(n) + " frames, windows need " +
                    std::to_string(observed + future));
  }
  const std::size_t width = seq.frames.cols();
  const std::size_t count = (n - observed - future) / stride + 1;
  std::vector<WindowPair> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t s = i * stride;
    WindowPair w;
    w.start = s;
    w.fps = seq.fps;
    w.observed = Tensor(observed, width);
    w.future = Tensor(future, width);
    std::copy(seq.frames.data() + s * width, seq.frames.data() + (s + observed) * width, w.observed.data());
    std::copy(seq.frames.data() + (s + observed) * width, seq.frames.data() + (s + observed + future) * width,
              w.future.data());
    out.push_back(std::move(w));
  }
  return out;
}

MotionSequence synth_kinematic_chain(std::size_t joints, std::size_t num_frames, std::uint64_t seed, double fps) {
  if (joints < 2) throw std::invalid_argument("synth_kinematic_chain: J must be >= 2");
  if (num_frames < 1) throw std::invalid_argument("synth_kinematic_chain: need at least one frame");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  constexpr double kTwoPi = 2.0 * std::numbers::pi;

  struct Bone {
    double length, polar0, azimuth0;
    double polar_amp, polar_freq, polar_phase;
    double azimuth_amp, azimuth_freq, azimuth_phase;
  };
  // The skeleton (bone lengths, rest angles, swing amplitudes) is the same for
  // every seed, as in a mocap corpus of one subject; the seed only picks the
  // swing frequencies and phases.
  std::vector<Bone> bones(joints - 1);
  for (std::size_t i = 0; i < bones.size(); ++i) {
    Bone& b = bones[i];
    const double u = static_cast<double>(i % 4) / 3.0;
    b.length = 0.35 - 0.1 * u;
    b.polar0 = (0.35 + 0.1 * u) * std::numbers::pi;
    b.azimuth0 = 0.5 * static_cast<double>(i);
    b.polar_amp = 0.45 - 0.15 * u;
    b.azimuth_amp = 0.7 - 0.3 * u;
    b.polar_freq = uniform(0.3, 1.2);
    b.polar_phase = uniform(0.0, kTwoPi);
    b.azimuth_freq = uniform(0.3, 1.2);
    b.azimuth_phase = uniform(0.0, kTwoPi);
  }

  MotionSequence seq;
  seq.skeleton = Skeleton::chain(joints);
  seq.fps = fps;
  seq.frames = Tensor(num_frames, 3 * joints);
  for (std::size_t t = 0; t < num_frames; ++t) {
    const double time = static_cast<double>(t) / fps;
    auto row = seq.frames.row(t);
    for (std::size_t j = 1; j < joints; ++j) {
      const Bone& b = bones[j - 1];
      const double polar = b.polar0 + b.polar_amp * std::sin(kTwoPi * b.polar_freq * time + b.polar_phase);
      const double azimuth = b.azimuth0 + b.azimuth_amp * std::sin(kTwoPi * b.azimuth_freq * time + b.azimuth_phase);
      row[3 * j] = row[3 * (j - 1)] + b.length * std::sin(polar) * std::cos(azimuth);
      row[3 * j + 1] = row[3 * (j - 1) + 1] + b.length * std::sin(polar) * std::sin(azimuth);
      row[3 * j + 2] = row[3 * (j - 1) + 2] + b.length * std::cos(polar);
    }
  }
  return seq;
}

double bone_length(const MotionSequence& seq, std::size_t t, std::size_t child) {
  const auto& parents = seq.skeleton.parents;
  if (child == 0 || child >= parents.size()) throw std::invalid_argument("bone_length: joint has no parent");
  const auto p = static_cast<std::size_t>(parents[child]);
  const auto row = seq.frames.row(t);
  const double dx = row[3 * child] - row[3 * p];
  const double dy = row[3 * child + 1] - row[3 * p + 1];
  const double dz = row[3 * child + 2] - row[3 * p + 2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace motiondiff
