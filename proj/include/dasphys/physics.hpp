#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "dasphys/channel.hpp"
#include "dasphys/config.hpp"
#include "dasphys/signal.hpp"

namespace dasphys {

enum class EnvelopeKind { constant, piecewise_random, burst_train };

// Time-varying scaling factor M(t).
//  - constant: M = amp_hi everywhere
//  - piecewise_random: one uniform [amp_lo, amp_hi] level per segment_s
//  - burst_train: bursts of length duty * period_s starting at offset_s + k period_s,
//    each burst with its own uniform [amp_lo, amp_hi] level, zero in between
struct ScalingEnvelope {
  EnvelopeKind kind = EnvelopeKind::constant;
  double amp_lo = 1.0;
  double amp_hi = 1.0;
  double segment_s = 1.0;
  double period_s = 1.0;
  double duty = 1.0;
  double offset_s = 0.0;
  std::uint64_t seed = 0;

  static ScalingEnvelope constant(double amplitude);
  void validate() const;
  bool operator==(const ScalingEnvelope& other) const = default;
};

std::vector<double> evaluate_envelope(const ScalingEnvelope& envelope,
                                      std::span<const double> t_grid);

struct ShakeParams {
  double A1 = 0.0;      // free-vibration amplitude, rad
  double delta = 0.0;   // attenuation, 1/s
  double Omega = 1.0;   // free angular frequency, rad/s
  double psi = 0.0;     // free initial phase
  double B = 0.0;       // forced coefficient
  double F0 = 0.0;      // external force amplitude
  double omega = 1.0;   // forced angular frequency, rad/s
  double phi = 0.0;     // forced initial phase
  ScalingEnvelope envelope;
  NoiseSpec noise;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const ShakeParams& other) const = default;
};

struct WalkMode {
  double v_c = 1.0;  // speed-change amplitude, m/s
  double c = 1.0;    // angular velocity coefficient, s
  ScalingEnvelope envelope;
  bool operator==(const WalkMode& other) const = default;
};

struct WalkParams {
  WalkMode fast;
  WalkMode slow;
  NoiseSpec noise;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const WalkParams& other) const = default;
};

struct FaultTemporalParams {
  double P = 1.0;       // roller rotational period, s
  double varphi = 0.0;  // initial phase
  ScalingEnvelope envelope;
  NoiseSpec noise;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const FaultTemporalParams& other) const = default;
};

struct GaussianPeak {
  double amplitude = 1.0;
  double center_hz = 0.0;
  double sigma_hz = 1.0;
  bool operator==(const GaussianPeak& other) const = default;
};

struct SparseFreqParams {
  std::vector<GaussianPeak> peaks;
  NoiseSpec noise;
  std::uint64_t seed = 0;

  void validate(double nyquist_hz) const;
  bool operator==(const SparseFreqParams& other) const = default;
};

struct BroadbandParams {
  double A0 = 1.0;              // amplitude floor
  double rand_amplitude = 0.0;  // rand(f) ~ U[0, rand_amplitude]
  NoiseSpec noise;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const BroadbandParams& other) const = default;
};

// rand(s) ~ U[-rand_amplitude, rand_amplitude] plus N(s).
struct SpatialParams {
  double rand_amplitude = 0.0;
  NoiseSpec noise;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const SpatialParams& other) const = default;
};

FeatureCurve shake_temporal(const ShakeParams& p, std::span<const double> t_grid);
FeatureCurve walk_temporal(const WalkParams& p, std::span<const double> t_grid);
FeatureCurve fault_temporal(const FaultTemporalParams& p, std::span<const double> t_grid);
FeatureCurve sparse_frequency_curve(const SparseFreqParams& p, std::span<const double> f_grid);
FeatureCurve broadband_frequency_curve(const BroadbandParams& p, std::span<const double> f_grid);
FeatureCurve random_spatial_curve(std::span<const double> s_grid, const SpatialParams& p);

// Noiseless pieces of the shake model, exposed for superposition checks.
double shake_free_term(const ShakeParams& p, double t);
double shake_forced_term(const ShakeParams& p, double t);
double walk_acceleration(const WalkMode& mode, double t);

enum class EventClass { shake, walk, fault_sparse, fault_broadband };

std::string_view to_string(EventClass event_class);
EventClass parse_event_class(std::string_view name);
// Shake and walk are spatiotemporal phase events; faults are time-frequency energy events.
bool is_phase_event(EventClass event_class);

struct ShakeEvent {
  ShakeParams temporal;
  SpatialParams spatial;
  bool operator==(const ShakeEvent& other) const = default;
};
struct WalkEvent {
  WalkParams temporal;
  SpatialParams spatial;
  bool operator==(const WalkEvent& other) const = default;
};
struct SparseFaultEvent {
  FaultTemporalParams temporal;
  SparseFreqParams frequency;
  bool operator==(const SparseFaultEvent& other) const = default;
};
struct BroadbandFaultEvent {
  FaultTemporalParams temporal;
  BroadbandParams frequency;
  bool operator==(const BroadbandFaultEvent& other) const = default;
};

struct EventSpec {
  std::uint64_t seed = 0;
  std::variant<ShakeEvent, WalkEvent, SparseFaultEvent, BroadbandFaultEvent> event;

  EventClass event_class() const;
  void validate(const FrameGeometry& geometry) const;
  bool operator==(const EventSpec& other) const = default;
};

// Temporal and secondary-axis curves of an event on a geometry's grids.
std::pair<FeatureCurve, FeatureCurve> evaluate_event(const EventSpec& spec,
                                                     const FrameGeometry& geometry);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const Range& other) const = default;
};

// Sampling ranges for every event class. Defaults are plausible magnitudes;
// any field can be overridden from a key/value document.
struct PhysicsRanges {
  // shake
  Range shake_A1{0.5, 3.0};
  Range shake_delta{0.5, 3.0};
  Range shake_Omega_hz{2.0, 20.0};
  Range shake_omega_hz{1.0, 10.0};
  Range shake_BF0{0.5, 3.0};
  Range shake_envelope_amp{0.6, 1.2};
  double shake_envelope_segment_s = 0.5;
  // walk
  Range walk_v_c{0.5, 2.0};
  Range walk_c_fast{0.4, 0.7};
  Range walk_c_slow{0.9, 1.5};
  Range walk_envelope_amp{0.1, 0.4};
  double walk_envelope_segment_s = 0.5;
  // spatial
  double spatial_rand_amplitude = 0.5;
  // fault temporal
  Range fault_P{1.0, 3.0};
  Range fault_burst_period_s{3.0, 6.0};
  Range fault_burst_duty{0.4, 0.7};
  Range fault_sparse_amp{0.3, 1.0};
  Range fault_broadband_amp{2.0, 5.0};
  // sparse
  Range sparse_peaks{1.0, 4.0};
  Range sparse_mu_fraction{0.05, 0.45};  // of the sampling rate
  Range sparse_sigma_bins{1.0, 5.0};
  Range sparse_height{0.5, 1.5};         // peak height; A = height * sigma * sqrt(2 pi)
  // broadband
  double broadband_rand_amplitude = 0.3;
  double broadband_A0_sigma_factor = 3.0;
  // noise
  NoiseSpec phase_temporal_noise{0.05, 0.05, 0.5, 0.2, 0.2, 0.6, 0.05, 0.3};
  NoiseSpec spatial_noise{0.05, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  NoiseSpec fault_temporal_noise{0.02, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  NoiseSpec frequency_noise{0.02, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  NoiseSpec broadband_noise{0.1, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0};

  static PhysicsRanges from_config(const KeyValueConfig& config);
  KeyValueConfig to_config() const;
  static std::vector<std::string> config_keys();
  bool operator==(const PhysicsRanges& other) const = default;
};

EventSpec sample_event_spec(EventClass event_class, std::uint64_t seed,
                            const FrameGeometry& geometry,
                            const PhysicsRanges& ranges = {});

}  // namespace dasphys
