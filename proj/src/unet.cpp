#include "dasphys/unet.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "dasphys/error.hpp"
#include "dasphys/rng.hpp"

namespace dasphys {

namespace {

constexpr const char* kArchitecture = "unet";

std::size_t stage_channels(const UNetConfig& cfg, std::size_t k) { return cfg.base_channels << k; }

std::size_t decoder_input(const UNetConfig& cfg, std::size_t k) {
  return k + 1 == cfg.depth ? stage_channels(cfg, cfg.depth) : 2 * stage_channels(cfg, k + 1);
}

ad::Tensor he_weights(Rng& rng, ad::Shape shape, std::size_t fan_in) {
  const double sigma = std::sqrt(2.0 / static_cast<double>(fan_in));
  std::vector<double> values(ad::numel(shape));
  for (double& v : values) v = rng.normal(0.0, sigma);
  return ad::Tensor::from(std::move(shape), std::move(values), true);
}

const char* output_name(OutputActivation a) {
  switch (a) {
    case OutputActivation::relu: return "relu";
    case OutputActivation::bounded_phase: return "bounded-phase";
    case OutputActivation::none: break;
  }
  return "none";
}

OutputActivation parse_output(const std::string& name) {
  for (auto a : {OutputActivation::none, OutputActivation::relu, OutputActivation::bounded_phase}) {
    if (name == output_name(a)) return a;
  }
  throw Error(ErrorKind::config, "unknown unet output activation '" + name + "'");
}

}  // namespace

void UNetConfig::validate() const {
  if (depth < 1) throw Error(ErrorKind::config, "unet depth must be >= 1");
  if (base_channels < 1 || in_channels < 1) throw Error(ErrorKind::config, "unet channel counts must be >= 1");
  if (depth > 16) throw Error(ErrorKind::config, "unet depth " + std::to_string(depth) + " is too large");
  const std::size_t unit = std::size_t{1} << depth;
  if (height == 0 || width == 0 || height % unit != 0 || width % unit != 0) {
    throw Error(ErrorKind::config, "unet input " + std::to_string(height) + "x" + std::to_string(width) +
                                       " is not divisible by 2^" + std::to_string(depth));
  }
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) throw Error(ErrorKind::config, "leaky slope must lie in [0, 1)");
}

nlohmann::json UNetConfig::to_json() const {
  return {{"height", height},
          {"width", width},
          {"in_channels", in_channels},
          {"depth", depth},
          {"base_channels", base_channels},
          {"leaky_slope", leaky_slope},
          {"output", output_name(output)}};
}

UNetConfig UNetConfig::from_json(const nlohmann::json& j) {
  try {
    UNetConfig cfg;
    cfg.height = j.at("height").get<std::size_t>();
    cfg.width = j.at("width").get<std::size_t>();
    cfg.in_channels = j.at("in_channels").get<std::size_t>();
    cfg.depth = j.at("depth").get<std::size_t>();
    cfg.base_channels = j.at("base_channels").get<std::size_t>();
    cfg.leaky_slope = j.at("leaky_slope").get<double>();
    cfg.output = parse_output(j.at("output").get<std::string>());
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::config, std::string("unet config: ") + e.what());
  }
}

std::size_t unet_parameter_count(const UNetConfig& cfg) {
  std::size_t n = 0;
  std::size_t in = cfg.in_channels;
  for (std::size_t k = 0; k <= cfg.depth; ++k) {
    const std::size_t out = stage_channels(cfg, k);
    n += in * out * 9 + out;
    in = out;
  }
  for (std::size_t k = 0; k < cfg.depth; ++k) {
    const std::size_t out = stage_channels(cfg, k);
    n += decoder_input(cfg, k) * out * 4 + out;
  }
  return n + 2 * cfg.base_channels + 1;
}

ModelBundle build_unet(const UNetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelBundle model{kArchitecture, cfg.to_json(), {}};
  Rng rng(derive_seed(seed, 0x756e6574));
  auto bias = [](std::size_t n) { return ad::Tensor::zeros({n}, true); };

  std::size_t in = cfg.in_channels;
  for (std::size_t k = 0; k <= cfg.depth; ++k) {
    const std::size_t out = stage_channels(cfg, k);
    const std::string tag = k == cfg.depth ? "bottleneck" : "enc" + std::to_string(k);
    model.parameters.push_back({tag + ".w", he_weights(rng, {out, in, 3, 3}, in * 9)});
    model.parameters.push_back({tag + ".b", bias(out)});
    in = out;
  }
  for (std::size_t k = cfg.depth; k-- > 0;) {
    const std::size_t out = stage_channels(cfg, k);
    const std::size_t cin = decoder_input(cfg, k);
    const std::string tag = "dec" + std::to_string(k);
    // Each output pixel of a stride-2 2x2 transpose conv sees one tap per input channel.
    model.parameters.push_back({tag + ".w", he_weights(rng, {cin, out, 2, 2}, cin)});
    model.parameters.push_back({tag + ".b", bias(out)});
  }
  model.parameters.push_back({"head.w", he_weights(rng, {1, 2 * cfg.base_channels, 1, 1}, 2 * cfg.base_channels)});
  model.parameters.push_back({"head.b", bias(1)});
  return model;
}

UNetConfig unet_config(const ModelBundle& model) {
  if (model.architecture != kArchitecture) {
    throw Error(ErrorKind::config, "expected a unet model, got '" + model.architecture + "'");
  }
  return UNetConfig::from_json(model.config);
}

ad::Tensor unet_forward(const ModelBundle& model, const ad::Tensor& input) {
  const UNetConfig cfg = unet_config(model);
  if (input.rank() != 4 || input.dim(1) != cfg.in_channels || input.dim(2) != cfg.height ||
      input.dim(3) != cfg.width) {
    throw Error(ErrorKind::dimension, "unet expects [N," + std::to_string(cfg.in_channels) + "," +
                                          std::to_string(cfg.height) + "," + std::to_string(cfg.width) +
                                          "] input, got " + ad::shape_string(input.shape()));
  }
  const double slope = cfg.leaky_slope;
  std::vector<ad::Tensor> skips;
  ad::Tensor x = input;
  for (std::size_t k = 0; k < cfg.depth; ++k) {
    const std::string tag = "enc" + std::to_string(k);
    x = ad::leaky_relu(ad::conv2d(x, model.parameter(tag + ".w"), model.parameter(tag + ".b"), 1, 1), slope);
    skips.push_back(x);
    x = ad::maxpool2d(x);
  }
  x = ad::leaky_relu(ad::conv2d(x, model.parameter("bottleneck.w"), model.parameter("bottleneck.b"), 1, 1), slope);
  for (std::size_t k = cfg.depth; k-- > 0;) {
    const std::string tag = "dec" + std::to_string(k);
    x = ad::leaky_relu(ad::conv_transpose2d(x, model.parameter(tag + ".w"), model.parameter(tag + ".b"), 2), slope);
    x = ad::concat({x, skips[k]}, 1);
  }
  x = ad::conv2d(x, model.parameter("head.w"), model.parameter("head.b"), 1, 0);
  switch (cfg.output) {
    case OutputActivation::relu: return ad::relu(x);
    case OutputActivation::bounded_phase: return ad::scale(ad::tanh(x), std::numbers::pi);
    case OutputActivation::none: break;
  }
  return x;
}

}  // namespace dasphys
