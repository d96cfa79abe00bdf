#include "dasphys/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dasphys/error.hpp"
#include "dasphys/rng.hpp"

namespace dasphys {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

enum Stream : std::uint64_t { white_stream = 1, phase_stream = 2, fading_stream = 3 };

}  // namespace

void NoiseSpec::validate() const {
  if (white_sigma < 0.0 || phase_noise_sigma < 0.0) {
    throw Error(ErrorKind::config, "noise sigmas must be >= 0");
  }
  if (!(lowpass_cutoff_hz > 0.0)) throw Error(ErrorKind::config, "lowpass cutoff must be > 0");
  if (fading_probability < 0.0 || fading_probability > 1.0) {
    throw Error(ErrorKind::config, "fading probability must lie in [0, 1]");
  }
  if (fading_depth_lo < 0.0 || fading_depth_hi < fading_depth_lo) {
    throw Error(ErrorKind::config, "fading depth range must satisfy 0 <= lo <= hi");
  }
  if (fading_duration_lo_s < 0.0 || fading_duration_hi_s < fading_duration_lo_s) {
    throw Error(ErrorKind::config, "fading duration range must satisfy 0 <= lo <= hi");
  }
}

bool NoiseSpec::is_zero() const {
  return white_sigma == 0.0 && phase_noise_sigma == 0.0 && fading_probability == 0.0;
}

std::vector<double> add_noise(std::span<const double> values, std::size_t time_samples,
                              std::size_t channels, double dt, const NoiseSpec& spec,
                              std::uint64_t seed) {
  spec.validate();
  if (values.size() != time_samples * channels) {
    throw Error(ErrorKind::dimension, "noise input size does not match its shape");
  }
  std::vector<double> out(values.begin(), values.end());
  if (spec.is_zero()) return out;

  const Rng root(seed);
  if (spec.white_sigma > 0.0) {
    Rng rng = root.split(white_stream);
    for (double& v : out) v += spec.white_sigma * rng.normal();
  }

  if (spec.phase_noise_sigma > 0.0) {
    // Single-pole low-pass y[n] = a y[n-1] + (1 - a) w[n], driven so the
    // stationary std equals phase_noise_sigma.
    Rng rng = root.split(phase_stream);
    const double a = std::exp(-two_pi * spec.lowpass_cutoff_hz * dt);
    const double drive = spec.phase_noise_sigma * std::sqrt((1.0 + a) / (1.0 - a));
    for (std::size_t s = 0; s < channels; ++s) {
      double y = spec.phase_noise_sigma * rng.normal();
      for (std::size_t t = 0; t < time_samples; ++t) {
        if (t > 0) y = a * y + (1.0 - a) * drive * rng.normal();
        out[t * channels + s] += y;
      }
    }
  }

  if (spec.fading_probability > 0.0) {
    Rng rng = root.split(fading_stream);
    for (std::size_t s = 0; s < channels; ++s) {
      const bool fades = rng.uniform() < spec.fading_probability;
      const double duration = rng.uniform(spec.fading_duration_lo_s, spec.fading_duration_hi_s);
      const double factor = rng.uniform(spec.fading_depth_lo, spec.fading_depth_hi);
      const std::size_t start = rng.index(time_samples);
      if (!fades) continue;
      const auto len = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(duration / dt)));
      const std::size_t stop = std::min(time_samples, start + len);
      for (std::size_t t = start; t < stop; ++t) out[t * channels + s] *= factor;
    }
  }
  return out;
}

DasFrame add_noise(const DasFrame& frame, const NoiseSpec& spec, std::uint64_t seed) {
  return frame.with_data(add_noise(frame.data(), frame.time_samples(), frame.channels(),
                                   frame.dt(), spec, seed));
}

FeatureCurve add_noise(const FeatureCurve& curve, const NoiseSpec& spec, std::uint64_t seed) {
  FeatureCurve out = curve;
  out.values = add_noise(curve.values, curve.size(), 1, curve.spacing, spec, seed);
  return out;
}

double wrap_phase(double x) {
  if (x >= -std::numbers::pi && x < std::numbers::pi) return x;
  double r = x - two_pi * std::floor((x + std::numbers::pi) / two_pi);
  // Rounding in the quotient can land a hair outside the half-open range.
  if (r >= std::numbers::pi) r -= two_pi;
  if (r < -std::numbers::pi) r += two_pi;
  if (r >= std::numbers::pi) r = -std::numbers::pi;
  return r;
}

std::vector<double> wrap_phase(std::span<const double> values) {
  std::vector<double> out(values.size());
  std::transform(values.begin(), values.end(), out.begin(),
                 [](double v) { return wrap_phase(v); });
  return out;
}

std::vector<double> saturate(std::span<const double> values, double limit) {
  if (!(limit > 0.0)) throw Error(ErrorKind::config, "saturation limit must be > 0");
  std::vector<double> out(values.size());
  std::transform(values.begin(), values.end(), out.begin(),
                 [limit](double v) { return std::clamp(v, -limit, limit); });
  return out;
}

double correlation_total(const DasFrame& frame) {
  const std::size_t rows = frame.time_samples();
  const std::size_t cols = frame.channels();
  if (cols < 2) throw Error(ErrorKind::dimension, "correlation needs at least two channels");
  // Standardize each channel once, then pair dot products.
  std::vector<std::vector<double>> z(cols);
  for (std::size_t s = 0; s < cols; ++s) {
    std::vector<double> c = frame.column(s);
    double mean = 0.0;
    for (double v : c) mean += v;
    mean /= static_cast<double>(rows);
    double ss = 0.0;
    double scale = 0.0;
    for (double& v : c) {
      scale = std::max(scale, std::abs(v));
      v -= mean;
      ss += v * v;
    }
    if (!(ss > 1e-24 * std::max(1.0, scale * scale) * static_cast<double>(rows))) {
      throw Error(ErrorKind::degenerate_channel,
                  "channel " + std::to_string(s) + " has zero variance");
    }
    const double inv = 1.0 / std::sqrt(ss);
    for (double& v : c) v *= inv;
    z[s] = std::move(c);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < cols; ++i) {
    for (std::size_t j = i + 1; j < cols; ++j) {
      double dot = 0.0;
      for (std::size_t t = 0; t < rows; ++t) dot += z[i][t] * z[j][t];
      total += dot;
    }
  }
  return total;
}

}  // namespace dasphys
