#pragma once

#include <cstddef>
#include <cstdint>

#include <json.hpp>

#include "dasphys/autodiff.hpp"
#include "dasphys/model.hpp"

namespace dasphys {

// bounded_phase maps onto (-pi, pi) through pi * tanh.
enum class OutputActivation { none, relu, bounded_phase };

struct UNetConfig {
  std::size_t height = 64;
  std::size_t width = 16;
  std::size_t in_channels = 1;
  std::size_t depth = 2;
  std::size_t base_channels = 8;
  double leaky_slope = 0.01;
  OutputActivation output = OutputActivation::none;

  void validate() const;
  nlohmann::json to_json() const;
  static UNetConfig from_json(const nlohmann::json& j);
  bool operator==(const UNetConfig& other) const = default;
};

// Closed-form parameter count of the layout built by build_unet.
std::size_t unet_parameter_count(const UNetConfig& cfg);

// Encoder stage k: 3x3 conv to base * 2^k channels + leaky ReLU (the skip), then
// 2x2 max pool. Bottleneck: 3x3 conv to base * 2^depth + leaky ReLU. Decoder
// stage k: 2x2 stride-2 transpose conv to base * 2^k + leaky ReLU, concatenated
// with skip k. A final 1x1 conv gives one output channel.
ModelBundle build_unet(const UNetConfig& cfg, std::uint64_t seed);
UNetConfig unet_config(const ModelBundle& model);

// input [N, in_channels, H, W] -> [N, 1, H, W].
ad::Tensor unet_forward(const ModelBundle& model, const ad::Tensor& input);

}  // namespace dasphys
