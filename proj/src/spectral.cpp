#include "dasphys/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "dasphys/error.hpp"

namespace dasphys {

namespace {

constexpr double db_epsilon = 1e-10;

struct FftwPlanDeleter {
  void operator()(fftw_plan_s* plan) const { fftw_destroy_plan(plan); }
};

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

void check_params(std::size_t length, const StftParams& p) {
  if (p.window_len == 0 || p.window_len > p.nfft) {
    throw Error(ErrorKind::config, "stft needs 0 < window_len <= nfft");
  }
  if (p.hop == 0) throw Error(ErrorKind::config, "stft hop must be >= 1");
  if (length < p.window_len) {
    throw Error(ErrorKind::insufficient_data, "trace of " + std::to_string(length) +
                                                  " samples is shorter than the window");
  }
}

// |X| for every frame, row-major frames x bins.
std::vector<double> magnitudes(std::span<const double> trace, const StftParams& p,
                               std::size_t& frames, std::size_t& bins) {
  check_params(trace.size(), p);
  frames = (trace.size() - p.window_len) / p.hop + 1;
  bins = p.nfft / 2 + 1;

  std::vector<double> window(p.window_len);
  for (std::size_t i = 0; i < p.window_len; ++i) {
    // Periodic Hann.
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                     static_cast<double>(p.window_len));
  }

  std::unique_ptr<double, FftwFree> in(static_cast<double*>(fftw_malloc(sizeof(double) * p.nfft)));
  std::unique_ptr<fftw_complex, FftwFree> out(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins)));
  std::unique_ptr<fftw_plan_s, FftwPlanDeleter> plan(fftw_plan_dft_r2c_1d(
      static_cast<int>(p.nfft), in.get(), out.get(), FFTW_ESTIMATE));

  std::vector<double> mag(frames * bins);
  for (std::size_t f = 0; f < frames; ++f) {
    std::fill(in.get(), in.get() + p.nfft, 0.0);
    const std::size_t start = f * p.hop;
    for (std::size_t i = 0; i < p.window_len; ++i) in.get()[i] = window[i] * trace[start + i];
    fftw_execute(plan.get());
    for (std::size_t k = 0; k < bins; ++k) {
      mag[f * bins + k] = std::hypot(out.get()[k][0], out.get()[k][1]);
    }
  }
  return mag;
}

}  // namespace

DasFrame stft(std::span<const double> trace, double sample_dt, const StftParams& params) {
  if (!(sample_dt > 0.0)) throw Error(ErrorKind::config, "sample dt must be > 0");
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<double> db = magnitudes(trace, params, frames, bins);
  for (double& v : db) v = 20.0 * std::log10(v + db_epsilon);
  const double floor = *std::min_element(db.begin(), db.end());
  for (double& v : db) v -= floor;
  const double frame_dt = static_cast<double>(params.hop) * sample_dt;
  const double df = 1.0 / (static_cast<double>(params.nfft) * sample_dt);
  return DasFrame(frames, bins, std::move(db), frame_dt, ColumnAxis::frequency, df,
                  Units::energy_db);
}

DasFrame desk_spectrogram(std::span<const double> trace) {
  if (trace.size() != desk_trace_samples) {
    throw Error(ErrorKind::dimension, "desk spectrogram needs " + std::to_string(desk_trace_samples) +
                                          " samples, got " + std::to_string(trace.size()));
  }
  const FrameGeometry desk = FrameGeometry::time_frequency_desk();
  const DasFrame tf = stft(trace, 1.0 / desk_sample_rate_hz, StftParams{}).crop_columns(0, desk.channels);
  // Pin the metadata to the exact desk constants.
  return DasFrame::from_geometry(desk, std::vector<double>(tf.data().begin(), tf.data().end()));
}

double stft_linear_energy(std::span<const double> trace, const StftParams& params) {
  std::size_t frames = 0;
  std::size_t bins = 0;
  const std::vector<double> mag = magnitudes(trace, params, frames, bins);
  double total = 0.0;
  for (double m : mag) total += m * m;
  return total;
}

std::pair<FeatureCurve, FeatureCurve> tf_feature_curves(const DasFrame& tf) {
  return {project(tf, Axis::time), project(tf, tf.secondary_axis())};
}

}  // namespace dasphys
