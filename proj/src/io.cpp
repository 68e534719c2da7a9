#include "endotrack/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>
#include <type_traits>
#include <vector>

#include <unistd.h>

#include "endotrack/format.hpp"

namespace endotrack {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view tok, T& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return res.ec == std::errc() && res.ptr == tok.data() + tok.size();
}

[[noreturn]] void parse_fail(std::string_view source, std::size_t line, const std::string& what) {
  throw Error(ErrorCode::ParseError, std::string(source) + ":" + std::to_string(line) + ": " + what);
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Builds a pose from file-order values; quaternion is (qx, qy, qz, qw).
Posed pose_from_values(const double* v, const std::string& where) {
  const Quaternion<double> q(v[6], v[3], v[4], v[5]);
  const double n = q.norm();
  if (!std::isfinite(n) || n <= Se3Tolerance<double>::zero_norm || std::abs(n - 1.0) > kUnitQuaternionTolerance) {
    throw Error(ErrorCode::InvalidPose, where + ": quaternion is not unit norm (|q| = " + format_double(n) + ")");
  }
  for (int i = 0; i < 3; ++i) {
    if (!std::isfinite(v[i])) throw Error(ErrorCode::InvalidPose, where + ": translation is not finite");
  }
  return Posed{quat_to_rotmat(quat_normalize(q)), Vector3<double>(v[0], v[1], v[2])};
}

}  // namespace

Posed parse_pose(std::string_view text) {
  const auto toks = split_ws(text);
  if (toks.size() != 7) throw Error(ErrorCode::ParseError, "pose needs 7 values: tx ty tz qx qy qz qw");
  double v[7];
  for (int i = 0; i < 7; ++i) {
    if (!parse_number(toks[i], v[i])) throw Error(ErrorCode::ParseError, "bad number '" + std::string(toks[i]) + "'");
  }
  return pose_from_values(v, "pose");
}

Trajectory parse_trajectory(std::istream& is, std::string_view source) {
  Trajectory traj;
  bool have_header = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string_view body = trim(line);
    if (body.empty()) continue;
    if (body.front() == '#') {
      const auto toks = split_ws(body.substr(1));
      bool unit_seen = false, stride_seen = false;
      for (auto tok : toks) {
        if (tok.starts_with("unit=")) {
          try {
            traj.unit = parse_length_unit(tok.substr(5));
          } catch (const Error& e) {
            parse_fail(source, lineno, e.what());
          }
          unit_seen = true;
        } else if (tok.starts_with("stride=")) {
          if (!parse_number(tok.substr(7), traj.stride) || traj.stride < 1) parse_fail(source, lineno, "bad stride");
          stride_seen = true;
        }
      }
      if (unit_seen != stride_seen) parse_fail(source, lineno, "header must declare both unit= and stride=");
      if (unit_seen) {
        if (have_header) parse_fail(source, lineno, "duplicate header");
        have_header = true;
      }
      continue;
    }
    if (!have_header) parse_fail(source, lineno, "missing '# unit=<mm|cm> stride=<k>' header before data");
    const auto toks = split_ws(body);
    if (toks.size() != 8) {
      parse_fail(source, lineno, "expected 8 fields (index tx ty tz qx qy qz qw), found " + std::to_string(toks.size()));
    }
    long index = 0;
    if (!parse_number(toks[0], index)) parse_fail(source, lineno, "bad frame index '" + std::string(toks[0]) + "'");
    double v[7];
    for (int i = 0; i < 7; ++i) {
      if (!parse_number(toks[i + 1], v[i])) parse_fail(source, lineno, "bad number '" + std::string(toks[i + 1]) + "'");
    }
    if (!traj.frames.empty() && index != traj.frames.back().index + traj.stride) {
      parse_fail(source, lineno, "frame index " + std::to_string(index) + " does not advance by stride " +
                                     std::to_string(traj.stride));
    }
    traj.frames.push_back({index, pose_from_values(v, std::string(source) + ":" + std::to_string(lineno))});
  }
  if (!have_header) parse_fail(source, lineno, "missing '# unit=<mm|cm> stride=<k>' header");
  return traj;
}

Trajectory read_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, path.string() + ": cannot open");
  return parse_trajectory(in, path.string());
}

std::string format_trajectory(const Trajectory& traj) {
  std::string out = "# unit=" + std::string(to_string(traj.unit)) + " stride=" + std::to_string(traj.stride) + "\n";
  out += "# index tx ty tz qx qy qz qw\n";
  for (const auto& f : traj.frames) {
    const Quaternion<double> q = rotmat_to_quat(f.pose.R);
    out += std::to_string(f.index);
    for (double v : {f.pose.t.x(), f.pose.t.y(), f.pose.t.z(), q.x(), q.y(), q.z(), q.w()}) {
      out += ' ';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::ParseError, tmp.string() + ": cannot open for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorCode::ParseError, tmp.string() + ": write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error(ErrorCode::ParseError, path.string() + ": " + ec.message());
  }
}

void write_trajectory(const std::filesystem::path& path, const Trajectory& traj) {
  write_file_atomic(path, format_trajectory(traj));
}

std::vector<Posed> read_relatives(const std::filesystem::path& path, Trajectory* header) {
  Trajectory t = read_trajectory(path);
  std::vector<Posed> rels;
  rels.reserve(t.size());
  for (const auto& f : t.frames) rels.push_back(f.pose);
  if (header) {
    *header = t;
  }
  return rels;
}

void write_relatives(const std::filesystem::path& path, const std::vector<Posed>& rels, const Trajectory& like) {
  Trajectory t;
  t.stride = like.stride;
  t.unit = like.unit;
  const long first = like.empty() ? 0 : like.frames.front().index;
  for (std::size_t i = 0; i < rels.size(); ++i) {
    t.frames.push_back({first + static_cast<long>(i + 1) * like.stride, rels[i]});
  }
  write_trajectory(path, t);
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

void RunConfig::validate() const {
  try {
    if (stride < 1) throw Error(ErrorCode::ConfigError, "stride must be >= 1");
    flow.validate();
    pipeline.validate();
    decoder_shape().validate();
    if (!std::isfinite(loss_weights.translation) || !std::isfinite(loss_weights.rotation)) {
      throw Error(ErrorCode::ConfigError, "loss weights must be finite");
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    throw Error(ErrorCode::ConfigError, e.what());
  }
}

namespace {

template <typename T>
T config_number(std::string_view value, std::string_view source, std::size_t line, std::string_view key) {
  T out{};
  if (!parse_number(value, out)) {
    throw Error(ErrorCode::ConfigError, std::string(source) + ":" + std::to_string(line) + ": bad value for " +
                                            std::string(key) + ": '" + std::string(value) + "'");
  }
  return out;
}

}  // namespace

RunConfig parse_config(std::istream& is, std::string_view source) {
  RunConfig c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string_view body = trim(line);
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = trim(body.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::ConfigError, std::string(source) + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key(trim(body.substr(0, eq)));
    const std::string_view value = trim(body.substr(eq + 1));
    const auto set = [&](auto& field) {
      field = config_number<std::remove_reference_t<decltype(field)>>(value, source, lineno, key);
    };

    if (key == "stride") set(c.stride);
    else if (key == "lambda_translation") set(c.loss_weights.translation);
    else if (key == "lambda_rotation") set(c.loss_weights.rotation);
    else if (key == "flow_epsilon") set(c.flow.epsilon);
    else if (key == "flow_penalty") set(c.flow.penalty);
    else if (key == "flow_level_weights") {
      std::string list(value);
      for (char& ch : list) if (ch == ',') ch = ' ';
      const auto toks = split_ws(list);
      if (toks.size() != static_cast<std::size_t>(kFlowLevels)) {
        throw Error(ErrorCode::ConfigError, std::string(source) + ":" + std::to_string(lineno) +
                                                ": flow_level_weights needs 5 values (levels 2..6)");
      }
      for (int i = 0; i < kFlowLevels; ++i) c.flow.level_weights[i] = config_number<double>(toks[i], source, lineno, key);
    }
    else if (key == "seed") set(c.seed);
    else if (key == "input_height") set(c.pipeline.height);
    else if (key == "input_width") set(c.pipeline.width);
    else if (key == "scene_stem_channels") set(c.pipeline.scene_stem_channels);
    else if (key == "scene_channels") set(c.pipeline.scene_channels);
    else if (key == "joint_stem_channels") set(c.pipeline.joint_stem_channels);
    else if (key == "joint_channels") set(c.pipeline.joint_channels);
    else if (key == "feature_norm") {
      if (value == "standardize") c.pipeline.norm = FeatureNorm::Standardize;
      else if (value == "none") c.pipeline.norm = FeatureNorm::None;
      else throw Error(ErrorCode::ConfigError, std::string(source) + ":" + std::to_string(lineno) + ": feature_norm must be standardize or none");
    }
    else if (key == "decoder_channels") set(c.decoder_channels);
    else if (key == "decoder_hidden") set(c.decoder_hidden);
    else {
      throw Error(ErrorCode::ConfigError, std::string(source) + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  c.pipeline.seed = c.seed;
  c.validate();
  return c;
}

RunConfig read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, path.string() + ": cannot open");
  return parse_config(in, path.string());
}

std::string format_config(const RunConfig& c) {
  std::ostringstream os;
  os << "stride = " << c.stride << "\n"
     << "lambda_translation = " << format_double(c.loss_weights.translation) << "\n"
     << "lambda_rotation = " << format_double(c.loss_weights.rotation) << "\n"
     << "flow_epsilon = " << format_double(c.flow.epsilon) << "\n"
     << "flow_penalty = " << format_double(c.flow.penalty) << "\n"
     << "flow_level_weights =";
  for (double w : c.flow.level_weights) os << ' ' << format_double(w);
  os << "\n"
     << "seed = " << c.seed << "\n"
     << "input_height = " << c.pipeline.height << "\n"
     << "input_width = " << c.pipeline.width << "\n"
     << "scene_stem_channels = " << c.pipeline.scene_stem_channels << "\n"
     << "scene_channels = " << c.pipeline.scene_channels << "\n"
     << "joint_stem_channels = " << c.pipeline.joint_stem_channels << "\n"
     << "joint_channels = " << c.pipeline.joint_channels << "\n"
     << "feature_norm = " << (c.pipeline.norm == FeatureNorm::Standardize ? "standardize" : "none") << "\n"
     << "decoder_channels = " << c.decoder_channels << "\n"
     << "decoder_hidden = " << c.decoder_hidden << "\n";
  return os.str();
}

}  // namespace endotrack
