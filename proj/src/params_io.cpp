#include <json.hpp>

#include "endotrack/io.hpp"

namespace endotrack {

namespace {

using nlohmann::json;

json tensor_json(const Tensor<double>& t) {
  return {{"shape", t.shape()}, {"data", std::vector<double>(t.ptr(), t.ptr() + t.size())}};
}

Tensor<double> tensor_from(const json& j) {
  const auto shape = j.at("shape").get<Shape>();
  const auto data = j.at("data").get<std::vector<double>>();
  VectorX<double> v = Eigen::Map<const VectorX<double>>(data.data(), static_cast<Index>(data.size()));
  return Tensor<double>(shape, v);
}

json vector_json(const VectorX<double>& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

VectorX<double> vector_from(const json& j) {
  const auto data = j.get<std::vector<double>>();
  return Eigen::Map<const VectorX<double>>(data.data(), static_cast<Index>(data.size()));
}

json conv_json(const ConvLayer<double>& c) {
  return {{"weight", tensor_json(c.weight)},
          {"bias", vector_json(c.bias)},
          {"stride", c.options.stride},
          {"pad_h", c.options.pad_h},
          {"pad_w", c.options.pad_w},
          {"groups", c.options.groups}};
}

ConvLayer<double> conv_from(const json& j) {
  ConvLayer<double> c{tensor_from(j.at("weight")), vector_from(j.at("bias")),
                      Conv2dOptions{j.at("stride").get<Index>(), j.at("pad_h").get<Index>(), j.at("pad_w").get<Index>(),
                                    j.at("groups").get<Index>()}};
  if (c.bias.size() != c.weight.dim(0)) throw Error(ErrorCode::ShapeMismatch, "conv bias length");
  return c;
}

json mud_json(const MudParams<double>& p) { return {{"packed", vector_json(p.pack())}}; }

MudParams<double> mud_from(const json& j) { return MudParams<double>::unpack(vector_from(j.at("packed"))); }

}  // namespace

std::string serialize_params(const PipelineParams<double>& pipeline, const DecoderParams<double>& decoder) {
  const PipelineConfig& c = pipeline.config;
  json j;
  j["format"] = "endotrack-params";
  j["version"] = 1;
  j["pipeline"] = {
      {"config",
       {{"height", c.height},
        {"width", c.width},
        {"scene_stem_channels", c.scene_stem_channels},
        {"scene_channels", c.scene_channels},
        {"joint_stem_channels", c.joint_stem_channels},
        {"joint_channels", c.joint_channels},
        {"feature_norm", c.norm == FeatureNorm::Standardize ? "standardize" : "none"},
        {"seed", c.seed}}},
      {"scene", {{"stage1", conv_json(pipeline.scene.stage1)}, {"stage2", conv_json(pipeline.scene.stage2)}}},
      {"joint",
       {{"conv1", conv_json(pipeline.joint.conv1)},
        {"mud1", mud_json(pipeline.joint.mud1)},
        {"conv2", conv_json(pipeline.joint.conv2)},
        {"mud2", mud_json(pipeline.joint.mud2)}}}};
  json blocks = json::array();
  for (const auto& b : decoder.blocks) {
    blocks.push_back({{"depthwise", conv_json(b.depthwise)},
                      {"pointwise1", conv_json(b.pointwise1)},
                      {"pointwise2", conv_json(b.pointwise2)},
                      {"gamma", b.gamma}});
  }
  j["decoder"] = {{"shape",
                   {{"in_channels", decoder.shape.in_channels},
                    {"channels", decoder.shape.channels},
                    {"hidden_channels", decoder.shape.hidden_channels}}},
                  {"squeeze", conv_json(decoder.squeeze)},
                  {"norm_gamma", vector_json(decoder.norm_gamma)},
                  {"norm_beta", vector_json(decoder.norm_beta)},
                  {"downsample", conv_json(decoder.downsample)},
                  {"blocks", blocks},
                  {"head_weight",
                   {{"rows", decoder.head_weight.rows()},
                    {"cols", decoder.head_weight.cols()},
                    {"data", std::vector<double>(decoder.head_weight.data(),
                                                 decoder.head_weight.data() + decoder.head_weight.size())}}},
                  {"head_bias", vector_json(decoder.head_bias)}};
  return j.dump(1) + "\n";
}

void deserialize_params(std::string_view text, PipelineParams<double>& pipeline, DecoderParams<double>& decoder) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != "endotrack-params" || j.at("version") != 1) {
      throw Error(ErrorCode::ParseError, "not an endotrack parameter file");
    }
    const json& pc = j.at("pipeline").at("config");
    PipelineParams<double> p;
    p.config.height = pc.at("height");
    p.config.width = pc.at("width");
    p.config.scene_stem_channels = pc.at("scene_stem_channels");
    p.config.scene_channels = pc.at("scene_channels");
    p.config.joint_stem_channels = pc.at("joint_stem_channels");
    p.config.joint_channels = pc.at("joint_channels");
    p.config.norm = pc.at("feature_norm") == "none" ? FeatureNorm::None : FeatureNorm::Standardize;
    p.config.seed = pc.at("seed");
    p.config.validate();
    const json& scene = j.at("pipeline").at("scene");
    p.scene.stage1 = conv_from(scene.at("stage1"));
    p.scene.stage2 = conv_from(scene.at("stage2"));
    const json& joint = j.at("pipeline").at("joint");
    p.joint.conv1 = conv_from(joint.at("conv1"));
    p.joint.mud1 = mud_from(joint.at("mud1"));
    p.joint.conv2 = conv_from(joint.at("conv2"));
    p.joint.mud2 = mud_from(joint.at("mud2"));

    const json& d = j.at("decoder");
    DecoderParams<double> q;
    q.shape = {d.at("shape").at("in_channels"), d.at("shape").at("channels"), d.at("shape").at("hidden_channels")};
    q.shape.validate();
    q.squeeze = conv_from(d.at("squeeze"));
    q.norm_gamma = vector_from(d.at("norm_gamma"));
    q.norm_beta = vector_from(d.at("norm_beta"));
    q.downsample = conv_from(d.at("downsample"));
    const json& blocks = d.at("blocks");
    if (blocks.size() != static_cast<std::size_t>(kDscBlocks)) throw Error(ErrorCode::ParseError, "decoder block count");
    for (int b = 0; b < kDscBlocks; ++b) {
      q.blocks[b].depthwise = conv_from(blocks[b].at("depthwise"));
      q.blocks[b].pointwise1 = conv_from(blocks[b].at("pointwise1"));
      q.blocks[b].pointwise2 = conv_from(blocks[b].at("pointwise2"));
      q.blocks[b].gamma = blocks[b].at("gamma");
    }
    const json& hw = d.at("head_weight");
    const auto data = hw.at("data").get<std::vector<double>>();
    const Index rows = hw.at("rows"), cols = hw.at("cols");
    if (static_cast<Index>(data.size()) != rows * cols) throw Error(ErrorCode::ShapeMismatch, "head weight length");
    q.head_weight = Eigen::Map<const MatrixX<double>>(data.data(), rows, cols);
    q.head_bias = vector_from(d.at("head_bias"));
    pipeline = std::move(p);
    decoder = std::move(q);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("parameter file: ") + e.what());
  }
}

}  // namespace endotrack
