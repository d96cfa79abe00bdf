#pragma once

#include <cstddef>
#include <vector>

#include "dasphys/autodiff.hpp"
#include "dasphys/error.hpp"
#include "dasphys/rng.hpp"
#include "dasphys/signal.hpp"

namespace test {

inline std::vector<double> normals(std::size_t n, std::uint64_t seed) {
  dasphys::Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

inline dasphys::DasFrame phase_frame(std::size_t T, std::size_t S, std::vector<double> v, double dt = 0.01) {
  return dasphys::DasFrame(T, S, std::move(v), dt, dasphys::ColumnAxis::space, 1.0, dasphys::Units::phase_rad);
}

inline dasphys::DasFrame energy_frame(std::size_t T, std::size_t S, std::vector<double> v, double dt = 0.2,
                                      double df = 2.5) {
  return dasphys::DasFrame(T, S, std::move(v), dt, dasphys::ColumnAxis::frequency, df, dasphys::Units::energy_db);
}

inline dasphys::ad::Tensor tensor(dasphys::ad::Shape shape, std::uint64_t seed, bool requires_grad = false) {
  const std::size_t n = dasphys::ad::numel(shape);
  return dasphys::ad::Tensor::from(std::move(shape), normals(n, seed), requires_grad);
}

template <typename F>
dasphys::ErrorKind error_kind(F&& f) {
  try {
    f();
  } catch (const dasphys::Error& e) {
    return e.kind();
  }
  FAIL("expected a dasphys::Error");
  return dasphys::ErrorKind::io;
}

}  // namespace test
