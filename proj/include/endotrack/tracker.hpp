#pragma once

// Chaining relative poses into absolute trajectories, plus a synthetic
// trajectory and noise generator for desk-scale experiments.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "endotrack/se3.hpp"

namespace endotrack {

enum class LengthUnit { Millimetre, Centimetre };

std::string_view to_string(LengthUnit unit);
LengthUnit parse_length_unit(std::string_view text);

inline constexpr int kDefaultStride = 4;
inline constexpr int kReorthonormalizeEvery = 64;

struct TrajectoryFrame {
  long index = 0;
  Posed pose;
};

/// Absolute poses sampled every `stride` frames.
struct Trajectory {
  std::vector<TrajectoryFrame> frames;
  int stride = kDefaultStride;
  LengthUnit unit = LengthUnit::Millimetre;

  std::size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }
  const Posed& pose(std::size_t i) const { return frames.at(i).pose; }

  /// Throws AlignmentError on a bad index sequence, InvalidPose on a bad pose.
  void validate() const;
};

/// P_i = P_{i-1} * rel_i starting from p0.
Trajectory chain_absolute(const Posed& p0, const std::vector<Posed>& rels, int stride = kDefaultStride,
                          LengthUnit unit = LengthUnit::Millimetre, long first_index = 0);

/// P^_i = P_{i-1} * rel_i with the ground-truth previous pose, so errors do not
/// accumulate. Throws LengthMismatch unless rels.size() == gt.size() - 1.
Trajectory chain_rebased(const Trajectory& gt, const std::vector<Posed>& rels);

/// Exact relatives P_{i-1}^-1 P_i of consecutive frames.
std::vector<Posed> relative_poses(const Trajectory& traj);

struct SynthOptions {
  double step_length = 1.0;     // mean translation per step
  double max_rotation = 0.02;   // radians per step
  double smoothness = 0.9;      // [0, 1): weight of the previous step's motion
  std::uint64_t seed = 0;
  LengthUnit unit = LengthUnit::Millimetre;
  int stride = kDefaultStride;
};

/// n poses (n >= 2) of a smooth random walk. Step lengths lie in
/// [0.5, 1.5] * step_length and per-step rotations do not exceed max_rotation.
Trajectory synth_trajectory(std::size_t n, const SynthOptions& opt = {});

struct NoiseSpec {
  double sigma_t = 0.0;  // per-axis translation std, trajectory units
  double sigma_r = 0.0;  // rotation angle std, radians
  Vector3<double> bias_t = Vector3<double>::Zero();
  std::uint64_t seed = 0;
};

/// Ground-truth relatives with additive translation noise N(bias, sigma_t^2)
/// and a right-composed rotation about a uniform random axis by |N(0, sigma_r^2)|.
std::vector<Posed> perturb_relatives(const Trajectory& gt, const NoiseSpec& noise);

}  // namespace endotrack
