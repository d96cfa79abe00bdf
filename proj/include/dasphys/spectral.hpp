#pragma once

#include <cstddef>
#include <span>
#include <utility>

#include "dasphys/signal.hpp"

namespace dasphys {

struct StftParams {
  std::size_t window_len = 256;
  std::size_t hop = 128;
  std::size_t nfft = 256;
};

// Magnitude spectrogram of one channel: Hann-windowed frames, one-sided
// nfft/2 + 1 bins, 20 log10(|X| + 1e-10), shifted so the frame minimum is 0.
// Rows are frames (dt = hop * sample_dt), columns are bins (spacing 1 / (nfft * sample_dt)).
DasFrame stft(std::span<const double> trace, double sample_dt, const StftParams& params);

// Trace length and sample step that yield the time-frequency desk geometry.
constexpr std::size_t desk_trace_samples = 63 * 128 + 256;
constexpr double desk_sample_rate_hz = 640.0;

// stft with the default parameters, cropped to the first 128 bins (Nyquist
// bin dropped) so the frame matches FrameGeometry::time_frequency_desk().
DasFrame desk_spectrogram(std::span<const double> trace);

// Linear-magnitude power sum across the spectrogram (before the dB map).
double stft_linear_energy(std::span<const double> trace, const StftParams& params);

// (time curve, frequency curve) of a time-frequency frame.
std::pair<FeatureCurve, FeatureCurve> tf_feature_curves(const DasFrame& tf);

}  // namespace dasphys
