#include "dasphys/model.hpp"

#include <cstring>

#include "dasphys/error.hpp"

namespace dasphys {

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t hash) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::uint64_t ModelBundle::fingerprint() const {
  std::uint64_t h = fnv1a(architecture.data(), architecture.size());
  const std::string text = config.dump();
  h = fnv1a(text.data(), text.size(), h);
  for (const auto& p : parameters) {
    h = fnv1a(p.name.data(), p.name.size(), h);
    for (std::size_t d : p.value.shape()) {
      const auto extent = static_cast<std::uint64_t>(d);
      h = fnv1a(&extent, sizeof extent, h);
    }
  }
  return h;
}

std::size_t ModelBundle::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters) n += p.value.numel();
  return n;
}

const ad::Tensor& ModelBundle::parameter(const std::string& name) const {
  for (const auto& p : parameters) {
    if (p.name == name) return p.value;
  }
  throw Error(ErrorKind::config, "model " + architecture + " has no parameter '" + name + "'");
}

std::vector<ad::Tensor> ModelBundle::tensors() const {
  std::vector<ad::Tensor> out;
  out.reserve(parameters.size());
  for (const auto& p : parameters) out.push_back(p.value);
  return out;
}

ModelBundle ModelBundle::clone() const {
  ModelBundle copy{architecture, config, {}};
  copy.parameters.reserve(parameters.size());
  for (const auto& p : parameters) {
    copy.parameters.push_back(
        {p.name, ad::Tensor::from(p.value.shape(),
                                  std::vector<double>(p.value.data().begin(), p.value.data().end()),
                                  true)});
  }
  return copy;
}

bool ModelBundle::same_weights(const ModelBundle& other) const {
  if (parameters.size() != other.parameters.size()) return false;
  for (std::size_t i = 0; i < parameters.size(); ++i) {
    const auto& a = parameters[i].value;
    const auto& b = other.parameters[i].value;
    if (parameters[i].name != other.parameters[i].name || a.shape() != b.shape()) return false;
    if (std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(double)) != 0) return false;
  }
  return true;
}

}  // namespace dasphys
