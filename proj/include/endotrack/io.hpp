#pragma once

// File formats.
//
// Trajectory file (plain text):
//
//   # unit=mm stride=4
//   # index tx ty tz qx qy qz qw
//   0 0 0 0 0 0 0 1
//   4 1.0 0.1 0 0 0 0.0099998 0.99995
//
// '#' lines are comments; exactly one of them must declare unit= and stride=.
// The quaternion is stored scalar-last (qx qy qz qw) and converted to the
// internal scalar-first quaternion at this boundary.
//
// Config file: flat "key = value" lines, '#' comments. See RunConfig.
//
// Parameter file: JSON holding the pipeline and decoder weights.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "endotrack/feature_pipeline.hpp"
#include "endotrack/losses.hpp"
#include "endotrack/pose_decoder.hpp"
#include "endotrack/tracker.hpp"

namespace endotrack {

/// Parse errors name the source and line ("rels.txt:17: ..."). A quaternion
/// that is zero or deviates from unit norm by more than 1e-6 raises InvalidPose.
Trajectory parse_trajectory(std::istream& is, std::string_view source = "<stream>");
Trajectory read_trajectory(const std::filesystem::path& path);

std::string format_trajectory(const Trajectory& traj);
void write_trajectory(const std::filesystem::path& path, const Trajectory& traj);

/// Relatives are stored as a trajectory whose index is the target frame.
std::vector<Posed> read_relatives(const std::filesystem::path& path, Trajectory* header = nullptr);
void write_relatives(const std::filesystem::path& path, const std::vector<Posed>& rels, const Trajectory& like);

/// "tx ty tz qx qy qz qw".
Posed parse_pose(std::string_view text);

/// Writes to a sibling temporary and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

struct RunConfig {
  int stride = kDefaultStride;
  LossWeights<double> loss_weights;  // (0, -3)
  FlowLossOptions flow;
  std::uint64_t seed = 0;
  PipelineConfig pipeline;
  Index decoder_channels = 24;
  Index decoder_hidden = 24;

  DecoderShape decoder_shape() const { return {pipeline.fused_channels(), decoder_channels, decoder_hidden}; }
  void validate() const;
};

/// Throws ConfigError on unknown keys, malformed values or failed validation.
RunConfig parse_config(std::istream& is, std::string_view source = "<stream>");
RunConfig read_config(const std::filesystem::path& path);
std::string format_config(const RunConfig& config);

std::string serialize_params(const PipelineParams<double>& pipeline, const DecoderParams<double>& decoder);
void deserialize_params(std::string_view json, PipelineParams<double>& pipeline, DecoderParams<double>& decoder);

}  // namespace endotrack
