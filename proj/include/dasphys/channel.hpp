#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dasphys/signal.hpp"

namespace dasphys {

// Composite DAS noise: additive white + low-passed random (phase) noise, then
// multiplicative fading dips on random channel/time blocks.
struct NoiseSpec {
  double white_sigma = 0.0;
  double phase_noise_sigma = 0.0;
  double lowpass_cutoff_hz = 1.0;
  double fading_probability = 0.0;  // per channel
  double fading_depth_lo = 0.0;     // dip factor range, output multiplied by factor
  double fading_depth_hi = 0.0;
  double fading_duration_lo_s = 0.0;
  double fading_duration_hi_s = 0.0;

  void validate() const;
  bool is_zero() const;
  bool operator==(const NoiseSpec& other) const = default;
};

// `values` is laid out row-major time x channels; `dt` is the step along the
// noise axis (seconds for time, bin width for frequency curves).
std::vector<double> add_noise(std::span<const double> values, std::size_t time_samples,
                              std::size_t channels, double dt, const NoiseSpec& spec,
                              std::uint64_t seed);
DasFrame add_noise(const DasFrame& frame, const NoiseSpec& spec, std::uint64_t seed);
FeatureCurve add_noise(const FeatureCurve& curve, const NoiseSpec& spec, std::uint64_t seed);

// x - 2 pi floor((x + pi) / 2 pi), result in [-pi, pi).
double wrap_phase(double x);
std::vector<double> wrap_phase(std::span<const double> values);

std::vector<double> saturate(std::span<const double> values, double limit);

// Sum of Pearson coefficients over unordered channel pairs i < j.
double correlation_total(const DasFrame& frame);

}  // namespace dasphys
