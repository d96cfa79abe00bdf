#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "dasphys/autodiff.hpp"

namespace dasphys {

struct NamedParameter {
  std::string name;
  ad::Tensor value;
};

// Trainable weights plus the architecture description they belong to.
struct ModelBundle {
  std::string architecture;
  nlohmann::json config;
  std::vector<NamedParameter> parameters;

  // FNV-1a over the architecture tag, canonical config text and parameter shapes.
  std::uint64_t fingerprint() const;
  std::size_t parameter_count() const;
  const ad::Tensor& parameter(const std::string& name) const;
  std::vector<ad::Tensor> tensors() const;
  // Deep copy with fresh leaves, so training the copy leaves this bundle untouched.
  ModelBundle clone() const;
  bool same_weights(const ModelBundle& other) const;
};

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t hash = 0xcbf29ce484222325ULL);

}  // namespace dasphys
