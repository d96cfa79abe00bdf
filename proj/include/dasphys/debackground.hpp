#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dasphys/config.hpp"
#include "dasphys/model.hpp"
#include "dasphys/physics.hpp"
#include "dasphys/pign.hpp"
#include "dasphys/signal.hpp"

namespace dasphys {

// Machinery-like background for one site: coloured broadband floor, a few
// stable harmonic lines and a slow amplitude modulation of the whole trace.
struct BackgroundSite {
  std::string name;
  double floor_sigma = 1.0;
  double floor_colour = 0.5;  // one-pole coefficient in [0, 1); 0 is white
  std::vector<double> line_hz;
  std::vector<double> line_amplitude;
  double line_jitter_hz = 0.5;       // per-frame uniform offset of every line
  double amplitude_jitter = 0.2;     // per-frame relative line amplitude spread
  double am_depth = 0.3;
  double am_rate_hz = 0.2;

  static BackgroundSite site_a();
  // Shifted spectral profile and stronger lines than site A.
  static BackgroundSite site_b();
  static BackgroundSite named(const std::string& name);
  void validate() const;
};

// One 64 x 128 energy-dB background frame.
DasFrame synthesize_background(const BackgroundSite& site, std::uint64_t seed);
std::vector<DasFrame> synthesize_backgrounds(const BackgroundSite& site, std::size_t count,
                                             std::uint64_t seed);

// Mixtures are additive in the dB-energy domain.
DasFrame mix(const DasFrame& background, const DasFrame& event);

// Fault frame T(t) F(f) / mean(T) built directly from an event's target curves,
// scaled by `gain`. Rows then average to gain * T and columns to gain * F.
DasFrame fault_frame(const EventSpec& spec, const FrameGeometry& geometry, double gain);

// Single weak fault burst: Gaussian in time around `burst_time_s` (sigma
// `burst_width_s`), frequency profile from the sparse peaks, peak value `peak_db`.
struct BenchmarkFault {
  DasFrame frame;
  std::vector<std::size_t> fault_bins;  // bins at >= half the profile maximum
};
BenchmarkFault benchmark_fault(const SparseFreqParams& peaks, const FrameGeometry& geometry,
                               double burst_time_s, double burst_width_s, double peak_db);

// Each event multiplied by its own gain drawn uniformly from [gain_lo, gain_hi].
std::vector<DasFrame> scale_events(const std::vector<DasFrame>& events, double gain_lo, double gain_hi,
                                   std::uint64_t seed);

struct TrainingPair {
  DasFrame input;
  DasFrame label;
};

// For every background: `events_per_background` randomly chosen events mixed
// in, plus one pure-background pair. Zero means events.size() / backgrounds.size().
std::vector<TrainingPair> make_training_pairs(const std::vector<DasFrame>& backgrounds,
                                              const std::vector<DasFrame>& events,
                                              std::uint64_t seed,
                                              std::size_t events_per_background = 0);

struct DebackgroundConfig {
  std::size_t depth = 3;
  std::size_t base_channels = 8;
  double leaky_slope = 0.01;
  std::size_t epochs = 100;
  double lr = 1e-3;

  static DebackgroundConfig from_config(const KeyValueConfig& config);
  static std::vector<std::string> config_keys();
};

struct DebackgroundResult {
  ModelBundle model;
  TrainingHistory history;  // mean per-pair MSE per epoch, before the epoch's updates
  double final_mse = 0.0;   // mean MSE over all pairs with the final weights
};

// Inputs are standardized with the training mean and spread, which are stored in
// the bundle. The predicted background is the input minus the U-Net output, and
// the loss is the MSE of that prediction against the label.
DebackgroundResult train_debackground(const std::vector<TrainingPair>& pairs,
                                      const DebackgroundConfig& cfg, std::uint64_t seed);
DasFrame predict_background(const ModelBundle& model, const DasFrame& frame);
// relu(frame - predicted background).
DasFrame apply_debackground(const ModelBundle& model, const DasFrame& frame);
double pair_mse(const ModelBundle& model, const std::vector<TrainingPair>& pairs);

// Mean over `bins` of each frame row.
std::vector<double> band_trace(const DasFrame& frame, const std::vector<std::size_t>& bins);

struct DebackgroundMetrics {
  double snr_before_db = 0.0;
  double snr_after_db = 0.0;
  double snr_gain_db = 0.0;
  double background_reduction_db = 0.0;  // mean(before - after) over the noise window
  double fault_enhancement_db = 0.0;     // change of fault-bin contrast on the frequency curve
};

// Intensities and denominators below this floor are clamped so the SNR stays finite.
constexpr double snr_floor = 1e-3;
double floored_snr_db(std::span<const double> trace, double dt, const NoiseWindow& window);

DebackgroundMetrics debackground_report(const DasFrame& before, const DasFrame& after,
                                        const NoiseWindow& window,
                                        const std::vector<std::size_t>& fault_bins);
void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const std::string& frame_name, const DebackgroundMetrics& m);

}  // namespace dasphys
