#include "dasphys/signal.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "dasphys/error.hpp"

namespace dasphys {

std::string_view to_string(ColumnAxis axis) {
  return axis == ColumnAxis::space ? "space" : "frequency";
}

std::string_view to_string(Units units) {
  return units == Units::phase_rad ? "phase-rad" : "energy-dB";
}

std::string_view to_string(Axis axis) {
  switch (axis) {
    case Axis::time: return "time";
    case Axis::space: return "space";
    case Axis::frequency: return "frequency";
  }
  return "unknown";
}

DasFrame::DasFrame(std::size_t time_samples, std::size_t channels, std::vector<double> data,
                   double dt, ColumnAxis column_axis, double spacing, Units units)
    : rows_(time_samples),
      cols_(channels),
      data_(std::move(data)),
      dt_(dt),
      column_axis_(column_axis),
      spacing_(spacing),
      units_(units) {
  if (rows_ == 0 || cols_ == 0) {
    throw Error(ErrorKind::dimension, "frame needs at least one time sample and one channel");
  }
  if (data_.size() != rows_ * cols_) {
    throw Error(ErrorKind::dimension, "frame payload has " + std::to_string(data_.size()) +
                                          " values, expected " + std::to_string(rows_) + "x" +
                                          std::to_string(cols_));
  }
  if (!(dt_ > 0.0) || !std::isfinite(dt_)) {
    throw Error(ErrorKind::config, "frame dt must be positive");
  }
  if (!(spacing_ > 0.0) || !std::isfinite(spacing_)) {
    throw Error(ErrorKind::config, "frame channel spacing must be positive");
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw Error(ErrorKind::config, "frame contains a non-finite sample");
  }
}

FrameGeometry FrameGeometry::of(const DasFrame& frame) {
  return FrameGeometry{frame.time_samples(), frame.channels(), frame.dt(), frame.spacing(),
                       frame.column_axis(), frame.units()};
}

FrameGeometry FrameGeometry::spatiotemporal_desk() {
  return FrameGeometry{256, 16, 0.01, 1.0, ColumnAxis::space, Units::phase_rad};
}

FrameGeometry FrameGeometry::time_frequency_desk() {
  return FrameGeometry{64, 128, 0.2, 2.5, ColumnAxis::frequency, Units::energy_db};
}

std::vector<double> FrameGeometry::time_grid() const {
  std::vector<double> grid(time_samples);
  for (std::size_t i = 0; i < time_samples; ++i) grid[i] = static_cast<double>(i) * dt;
  return grid;
}

std::vector<double> FrameGeometry::column_grid() const {
  std::vector<double> grid(channels);
  for (std::size_t i = 0; i < channels; ++i) grid[i] = static_cast<double>(i) * spacing;
  return grid;
}

DasFrame DasFrame::from_geometry(const FrameGeometry& g, std::vector<double> data) {
  return DasFrame(g.time_samples, g.channels, std::move(data), g.dt, g.column_axis, g.spacing,
                  g.units);
}

DasFrame DasFrame::zeros(std::size_t time_samples, std::size_t channels, double dt,
                         ColumnAxis column_axis, double spacing, Units units) {
  return DasFrame(time_samples, channels, std::vector<double>(time_samples * channels, 0.0), dt,
                  column_axis, spacing, units);
}

std::vector<double> DasFrame::column(std::size_t s) const {
  std::vector<double> out(rows_);
  for (std::size_t t = 0; t < rows_; ++t) out[t] = data_[t * cols_ + s];
  return out;
}

DasFrame DasFrame::with_data(std::vector<double> data) const {
  return DasFrame(rows_, cols_, std::move(data), dt_, column_axis_, spacing_, units_);
}

DasFrame DasFrame::with_units(Units units) const {
  return DasFrame(rows_, cols_, data_, dt_, column_axis_, spacing_, units);
}

DasFrame DasFrame::crop_columns(std::size_t first, std::size_t count) const {
  if (count == 0 || first + count > cols_) {
    throw Error(ErrorKind::dimension, "column crop outside frame");
  }
  std::vector<double> out(rows_ * count);
  for (std::size_t t = 0; t < rows_; ++t) {
    for (std::size_t s = 0; s < count; ++s) out[t * count + s] = data_[t * cols_ + first + s];
  }
  return DasFrame(rows_, count, std::move(out), dt_, column_axis_, spacing_, units_);
}

DasFrame DasFrame::transposed() const {
  std::vector<double> out(rows_ * cols_);
  for (std::size_t t = 0; t < rows_; ++t) {
    for (std::size_t s = 0; s < cols_; ++s) out[s * rows_ + t] = data_[t * cols_ + s];
  }
  // The swapped frame keeps the metadata roles: rows step by the old spacing.
  return DasFrame(cols_, rows_, std::move(out), spacing_, column_axis_, dt_, units_);
}

NoiseWindow::NoiseWindow(double start_s, double end_s, double signal_time_s)
    : start_s_(start_s), end_s_(end_s), signal_time_s_(signal_time_s) {
  if (!(start_s_ < end_s_) || !(end_s_ <= signal_time_s_)) {
    throw Error(ErrorKind::config, "noise window requires start < end <= signal time");
  }
}

FeatureCurve project(const DasFrame& frame, Axis axis) {
  const std::size_t rows = frame.time_samples();
  const std::size_t cols = frame.channels();
  FeatureCurve curve;
  curve.axis = axis;
  if (axis == Axis::time) {
    curve.spacing = frame.dt();
    curve.values.resize(rows);
    for (std::size_t t = 0; t < rows; ++t) {
      const auto r = frame.row(t);
      curve.values[t] = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(cols);
    }
    return curve;
  }
  if (axis != frame.secondary_axis()) {
    throw Error(ErrorKind::invalid_axis, std::string("frame has no ") +
                                             std::string(to_string(axis)) + " axis");
  }
  curve.spacing = frame.spacing();
  curve.values.assign(cols, 0.0);
  for (std::size_t t = 0; t < rows; ++t) {
    const auto r = frame.row(t);
    for (std::size_t s = 0; s < cols; ++s) curve.values[s] += r[s];
  }
  for (double& v : curve.values) v /= static_cast<double>(rows);
  return curve;
}

double curve_l2(const FeatureCurve& a, const FeatureCurve& b) {
  if (a.axis != b.axis) throw Error(ErrorKind::dimension, "curves lie on different axes");
  if (a.size() != b.size()) {
    throw Error(ErrorKind::dimension, "curve lengths differ: " + std::to_string(a.size()) +
                                          " vs " + std::to_string(b.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    sum += d * d;
  }
  return sum;
}

std::size_t signal_index(std::size_t length, double dt, const NoiseWindow& window) {
  const double pos = window.signal_time_s() / dt;
  const auto idx = static_cast<std::size_t>(std::llround(pos));
  if (pos < 0.0 || idx >= length) {
    throw Error(ErrorKind::insufficient_data, "trace does not cover the signal instant");
  }
  return idx;
}

std::pair<std::size_t, std::size_t> window_indices(std::size_t length, double dt,
                                                   const NoiseWindow& window) {
  constexpr double slack = 1e-9;
  const auto first = static_cast<std::size_t>(std::ceil(window.start_s() / dt - slack));
  const auto last = static_cast<std::size_t>(std::floor(window.end_s() / dt + slack));
  if (window.start_s() < 0.0 || last >= length || first > last) {
    throw Error(ErrorKind::insufficient_data, "trace does not cover the noise window");
  }
  return {first, last};
}

double snr_db(std::span<const double> trace, double dt, const NoiseWindow& window) {
  const auto [first, last] = window_indices(trace.size(), dt, window);
  const std::size_t sig = signal_index(trace.size(), dt, window);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i = first; i <= last; ++i) {
    if (trace[i] < 0.0) throw Error(ErrorKind::undefined_snr, "negative intensity in window");
    sum += trace[i];
    sum_sq += trace[i] * trace[i];
  }
  const double n = static_cast<double>(last - first + 1);
  const double denominator = sum / n + 3.0 * std::sqrt(sum_sq / n);
  const double signal = trace[sig];
  if (!(denominator > 0.0)) throw Error(ErrorKind::undefined_snr, "noise window is all zero");
  if (!(signal > 0.0)) throw Error(ErrorKind::undefined_snr, "signal intensity is not positive");
  return 10.0 * std::log10(signal / denominator);
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) {
    throw Error(ErrorKind::dimension, "pearson needs two equal-length non-empty series");
  }
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) {
    throw Error(ErrorKind::degenerate_channel, "pearson of a constant series");
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace dasphys
