#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace dasphys {

// Column axis of a frame; rows are always time.
enum class ColumnAxis { space, frequency };
enum class Units { phase_rad, energy_db };
enum class Axis { time, space, frequency };

std::string_view to_string(ColumnAxis axis);
std::string_view to_string(Units units);
std::string_view to_string(Axis axis);

class DasFrame;

// Shape and sampling of a frame without its payload.
struct FrameGeometry {
  std::size_t time_samples = 1;
  std::size_t channels = 1;
  double dt = 1.0;
  double spacing = 1.0;
  ColumnAxis column_axis = ColumnAxis::space;
  Units units = Units::phase_rad;

  static FrameGeometry of(const DasFrame& frame);
  // 256 x 16 phase frame, 10 ms x 1 m.
  static FrameGeometry spatiotemporal_desk();
  // 64 frames x 128 bins energy frame, 0.2 s x 2.5 Hz (fs 640 Hz, nfft 256, hop 128).
  static FrameGeometry time_frequency_desk();

  std::vector<double> time_grid() const;
  std::vector<double> column_grid() const;
  Axis secondary_axis() const {
    return column_axis == ColumnAxis::space ? Axis::space : Axis::frequency;
  }
  bool operator==(const FrameGeometry& other) const = default;
};

// Time x channel matrix of phase or energy samples. Row t is sampled at t * dt
// seconds; column s sits at s * spacing (meters or Hz). Immutable once built.
class DasFrame {
 public:
  DasFrame(std::size_t time_samples, std::size_t channels, std::vector<double> data, double dt,
           ColumnAxis column_axis, double spacing, Units units);

  static DasFrame zeros(std::size_t time_samples, std::size_t channels, double dt,
                        ColumnAxis column_axis, double spacing, Units units);
  static DasFrame from_geometry(const FrameGeometry& geometry, std::vector<double> data);

  std::size_t time_samples() const { return rows_; }
  std::size_t channels() const { return cols_; }
  double dt() const { return dt_; }
  double spacing() const { return spacing_; }
  ColumnAxis column_axis() const { return column_axis_; }
  Units units() const { return units_; }
  Axis secondary_axis() const {
    return column_axis_ == ColumnAxis::space ? Axis::space : Axis::frequency;
  }

  double at(std::size_t t, std::size_t s) const { return data_[t * cols_ + s]; }
  std::span<const double> data() const { return data_; }
  std::span<const double> row(std::size_t t) const {
    return std::span<const double>(data_).subspan(t * cols_, cols_);
  }
  std::vector<double> column(std::size_t s) const;

  // Same metadata, new payload (must have identical size).
  DasFrame with_data(std::vector<double> data) const;
  DasFrame with_units(Units units) const;
  // Columns [first, first + count).
  DasFrame crop_columns(std::size_t first, std::size_t count) const;
  DasFrame transposed() const;

  bool operator==(const DasFrame& other) const = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
  double dt_;
  ColumnAxis column_axis_;
  double spacing_;
  Units units_;
};

struct FeatureCurve {
  Axis axis = Axis::time;
  std::vector<double> values;
  double spacing = 1.0;

  std::size_t size() const { return values.size(); }
  bool operator==(const FeatureCurve& other) const = default;
};

// Noise reference interval [start_s, end_s] preceding the event instant.
class NoiseWindow {
 public:
  NoiseWindow(double start_s, double end_s, double signal_time_s);

  double start_s() const { return start_s_; }
  double end_s() const { return end_s_; }
  double signal_time_s() const { return signal_time_s_; }

 private:
  double start_s_;
  double end_s_;
  double signal_time_s_;
};

// Mean across the orthogonal axis at each sample of `axis`.
FeatureCurve project(const DasFrame& frame, Axis axis);

// Sum of squared differences.
double curve_l2(const FeatureCurve& a, const FeatureCurve& b);

// 10 log10( x(signal) / (mean(window) + 3 rms(window)) ) on an intensity trace
// sampled at i * dt.
double snr_db(std::span<const double> trace, double dt, const NoiseWindow& window);

// Sample indices covered by the window, and the index of the signal instant.
std::pair<std::size_t, std::size_t> window_indices(std::size_t length, double dt,
                                                   const NoiseWindow& window);
std::size_t signal_index(std::size_t length, double dt, const NoiseWindow& window);

double pearson(std::span<const double> a, std::span<const double> b);

}  // namespace dasphys
