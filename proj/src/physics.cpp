#include "dasphys/physics.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <type_traits>

#include "dasphys/error.hpp"
#include "dasphys/rng.hpp"

namespace dasphys {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

enum Stream : std::uint64_t {
  noise_stream = 11,
  rand_stream = 12,
  envelope_stream = 13,
  fast_envelope_stream = 14,
  slow_envelope_stream = 15,
  spatial_stream = 16,
  temporal_stream = 17,
  frequency_stream = 18,
};

void require_grid(std::span<const double> grid) {
  if (grid.empty()) throw Error(ErrorKind::dimension, "feature function needs a non-empty grid");
}

double grid_spacing(std::span<const double> grid) {
  return grid.size() > 1 ? grid[1] - grid[0] : 1.0;
}

FeatureCurve finish(Axis axis, std::span<const double> grid, std::vector<double> values,
                    const NoiseSpec& noise, std::uint64_t seed) {
  FeatureCurve curve{axis, std::move(values), grid_spacing(grid)};
  if (!(curve.spacing > 0.0)) curve.spacing = 1.0;
  return add_noise(curve, noise, derive_seed(seed, noise_stream));
}

double draw(Rng& rng, const Range& r) { return rng.uniform(r.lo, r.hi); }

}  // namespace

ScalingEnvelope ScalingEnvelope::constant(double amplitude) {
  ScalingEnvelope env;
  env.kind = EnvelopeKind::constant;
  env.amp_lo = amplitude;
  env.amp_hi = amplitude;
  return env;
}

void ScalingEnvelope::validate() const {
  if (amp_lo < 0.0 || amp_hi < amp_lo) {
    throw Error(ErrorKind::config, "envelope amplitudes must satisfy 0 <= lo <= hi");
  }
  if (kind == EnvelopeKind::piecewise_random && !(segment_s > 0.0)) {
    throw Error(ErrorKind::config, "envelope segment length must be > 0");
  }
  if (kind == EnvelopeKind::burst_train) {
    if (!(period_s > 0.0)) throw Error(ErrorKind::config, "burst period must be > 0");
    if (!(duty > 0.0 && duty <= 1.0)) throw Error(ErrorKind::config, "burst duty must lie in (0, 1]");
  }
}

std::vector<double> evaluate_envelope(const ScalingEnvelope& env, std::span<const double> t_grid) {
  env.validate();
  std::vector<double> out(t_grid.size());
  auto level = [&env](std::int64_t k) {
    Rng rng(derive_seed(env.seed, static_cast<std::uint64_t>(k)));
    return rng.uniform(env.amp_lo, env.amp_hi);
  };
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    const double t = t_grid[i];
    switch (env.kind) {
      case EnvelopeKind::constant:
        out[i] = env.amp_hi;
        break;
      case EnvelopeKind::piecewise_random:
        out[i] = level(static_cast<std::int64_t>(std::floor(t / env.segment_s)));
        break;
      case EnvelopeKind::burst_train: {
        const double cycles = (t - env.offset_s) / env.period_s;
        const double k = std::floor(cycles);
        out[i] = (cycles - k) < env.duty ? level(static_cast<std::int64_t>(k)) : 0.0;
        break;
      }
    }
  }
  return out;
}

void ShakeParams::validate() const {
  if (A1 < 0.0 || delta < 0.0 || !(Omega > 0.0) || !(omega > 0.0) || B * F0 < 0.0) {
    throw Error(ErrorKind::config, "shake parameters violate A1>=0, delta>=0, Omega>0, omega>0, B*F0>=0");
  }
  envelope.validate();
  noise.validate();
}

void WalkParams::validate() const {
  for (const WalkMode* m : {&fast, &slow}) {
    if (!(m->v_c > 0.0) || !(m->c > 0.0)) throw Error(ErrorKind::config, "walk v_c and c must be > 0");
    m->envelope.validate();
  }
  if (!(fast.c < slow.c)) throw Error(ErrorKind::config, "fast walking needs a smaller c than slow");
  noise.validate();
}

void FaultTemporalParams::validate() const {
  if (!(P > 0.0)) throw Error(ErrorKind::config, "roller period must be > 0");
  envelope.validate();
  noise.validate();
}

void SparseFreqParams::validate(double nyquist_hz) const {
  if (peaks.empty() || peaks.size() > 8) throw Error(ErrorKind::config, "sparse fault needs 1..8 peaks");
  for (const auto& pk : peaks) {
    if (!(pk.amplitude > 0.0) || !(pk.sigma_hz > 0.0) || !(pk.center_hz > 0.0) ||
        !(pk.center_hz < nyquist_hz)) {
      throw Error(ErrorKind::config, "sparse peak violates A>0, sigma>0, 0<mu<nyquist");
    }
  }
  noise.validate();
}

void BroadbandParams::validate() const {
  if (!(A0 > 0.0)) throw Error(ErrorKind::config, "broadband floor A0 must be > 0");
  if (rand_amplitude < 0.0) throw Error(ErrorKind::config, "broadband rand amplitude must be >= 0");
  noise.validate();
}

void SpatialParams::validate() const {
  if (rand_amplitude < 0.0) throw Error(ErrorKind::config, "spatial rand amplitude must be >= 0");
  noise.validate();
}

double shake_free_term(const ShakeParams& p, double t) {
  return p.A1 * std::exp(-p.delta * t) * std::cos(p.Omega * t + p.psi);
}

double shake_forced_term(const ShakeParams& p, double t) {
  return p.B * p.F0 * std::sin(p.omega * t - p.phi);
}

double walk_acceleration(const WalkMode& mode, double t) {
  return std::numbers::pi * mode.v_c / mode.c * std::cos(std::numbers::pi * t / mode.c);
}

FeatureCurve shake_temporal(const ShakeParams& p, std::span<const double> t_grid) {
  require_grid(t_grid);
  const auto m = evaluate_envelope(p.envelope, t_grid);
  std::vector<double> v(t_grid.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = m[i] * (shake_free_term(p, t_grid[i]) + shake_forced_term(p, t_grid[i]));
  }
  return finish(Axis::time, t_grid, std::move(v), p.noise, p.seed);
}

FeatureCurve walk_temporal(const WalkParams& p, std::span<const double> t_grid) {
  require_grid(t_grid);
  const auto m_fast = evaluate_envelope(p.fast.envelope, t_grid);
  const auto m_slow = evaluate_envelope(p.slow.envelope, t_grid);
  std::vector<double> v(t_grid.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = m_fast[i] * walk_acceleration(p.fast, t_grid[i]) +
           m_slow[i] * walk_acceleration(p.slow, t_grid[i]);
  }
  return finish(Axis::time, t_grid, std::move(v), p.noise, p.seed);
}

FeatureCurve fault_temporal(const FaultTemporalParams& p, std::span<const double> t_grid) {
  require_grid(t_grid);
  const auto m = evaluate_envelope(p.envelope, t_grid);
  std::vector<double> v(t_grid.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = m[i] * std::sin(two_pi * t_grid[i] / p.P + p.varphi);
  }
  return finish(Axis::time, t_grid, std::move(v), p.noise, p.seed);
}

FeatureCurve sparse_frequency_curve(const SparseFreqParams& p, std::span<const double> f_grid) {
  require_grid(f_grid);
  std::vector<double> v(f_grid.size(), 0.0);
  for (const auto& pk : p.peaks) {
    const double norm = pk.amplitude / (pk.sigma_hz * std::sqrt(two_pi));
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double z = (f_grid[i] - pk.center_hz) / pk.sigma_hz;
      v[i] += norm * std::exp(-0.5 * z * z);
    }
  }
  return finish(Axis::frequency, f_grid, std::move(v), p.noise, p.seed);
}

FeatureCurve broadband_frequency_curve(const BroadbandParams& p, std::span<const double> f_grid) {
  require_grid(f_grid);
  Rng rng(derive_seed(p.seed, rand_stream));
  std::vector<double> v(f_grid.size());
  for (double& x : v) x = p.A0 + rng.uniform(0.0, p.rand_amplitude);
  return finish(Axis::frequency, f_grid, std::move(v), p.noise, p.seed);
}

FeatureCurve random_spatial_curve(std::span<const double> s_grid, const SpatialParams& p) {
  require_grid(s_grid);
  Rng rng(derive_seed(p.seed, rand_stream));
  std::vector<double> v(s_grid.size());
  for (double& x : v) x = rng.uniform(-p.rand_amplitude, p.rand_amplitude);
  return finish(Axis::space, s_grid, std::move(v), p.noise, p.seed);
}

std::string_view to_string(EventClass event_class) {
  switch (event_class) {
    case EventClass::shake: return "shake";
    case EventClass::walk: return "walk";
    case EventClass::fault_sparse: return "fault-sparse";
    case EventClass::fault_broadband: return "fault-broadband";
  }
  return "unknown";
}

EventClass parse_event_class(std::string_view name) {
  if (name == "shake") return EventClass::shake;
  if (name == "walk") return EventClass::walk;
  if (name == "fault-sparse") return EventClass::fault_sparse;
  if (name == "fault-broadband") return EventClass::fault_broadband;
  throw Error(ErrorKind::invalid_class, "unknown event class '" + std::string(name) + "'");
}

bool is_phase_event(EventClass event_class) {
  return event_class == EventClass::shake || event_class == EventClass::walk;
}

EventClass EventSpec::event_class() const {
  return static_cast<EventClass>(event.index());
}

void EventSpec::validate(const FrameGeometry& geometry) const {
  const bool phase = is_phase_event(event_class());
  if (phase != (geometry.column_axis == ColumnAxis::space)) {
    throw Error(ErrorKind::config, std::string(to_string(event_class())) +
                                       " events need a " + (phase ? "space" : "frequency") +
                                       " column axis");
  }
  const double nyquist = static_cast<double>(geometry.channels) * geometry.spacing;
  std::visit(
      [nyquist](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        e.temporal.validate();
        if constexpr (std::is_same_v<T, SparseFaultEvent>) {
          e.frequency.validate(nyquist);
        } else if constexpr (std::is_same_v<T, BroadbandFaultEvent>) {
          e.frequency.validate();
        } else {
          e.spatial.validate();
        }
      },
      event);
}

std::pair<FeatureCurve, FeatureCurve> evaluate_event(const EventSpec& spec,
                                                     const FrameGeometry& geometry) {
  const auto t_grid = geometry.time_grid();
  const auto c_grid = geometry.column_grid();
  return std::visit(
      [&](const auto& e) -> std::pair<FeatureCurve, FeatureCurve> {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, ShakeEvent>) {
          return {shake_temporal(e.temporal, t_grid), random_spatial_curve(c_grid, e.spatial)};
        } else if constexpr (std::is_same_v<T, WalkEvent>) {
          return {walk_temporal(e.temporal, t_grid), random_spatial_curve(c_grid, e.spatial)};
        } else if constexpr (std::is_same_v<T, SparseFaultEvent>) {
          return {fault_temporal(e.temporal, t_grid), sparse_frequency_curve(e.frequency, c_grid)};
        } else {
          return {fault_temporal(e.temporal, t_grid),
                  broadband_frequency_curve(e.frequency, c_grid)};
        }
      },
      spec.event);
}

EventSpec sample_event_spec(EventClass event_class, std::uint64_t seed,
                            const FrameGeometry& geometry, const PhysicsRanges& r) {
  Rng rng(seed);
  EventSpec spec;
  spec.seed = seed;
  const std::uint64_t temporal_seed = derive_seed(seed, temporal_stream);

  auto spatial = [&]() {
    SpatialParams sp;
    sp.rand_amplitude = r.spatial_rand_amplitude;
    sp.noise = r.spatial_noise;
    sp.seed = derive_seed(seed, spatial_stream);
    return sp;
  };
  auto piecewise = [&](Range amp, double segment, std::uint64_t stream) {
    ScalingEnvelope env;
    env.kind = EnvelopeKind::piecewise_random;
    env.amp_lo = amp.lo;
    env.amp_hi = amp.hi;
    env.segment_s = segment;
    env.seed = derive_seed(seed, stream);
    return env;
  };
  auto fault = [&](Range amp) {
    FaultTemporalParams ft;
    ft.P = draw(rng, r.fault_P);
    ft.varphi = rng.uniform(0.0, two_pi);
    ft.envelope.kind = EnvelopeKind::burst_train;
    ft.envelope.amp_lo = amp.lo;
    ft.envelope.amp_hi = amp.hi;
    ft.envelope.period_s = draw(rng, r.fault_burst_period_s);
    ft.envelope.duty = draw(rng, r.fault_burst_duty);
    ft.envelope.offset_s = rng.uniform(0.0, ft.envelope.period_s);
    ft.envelope.seed = derive_seed(seed, envelope_stream);
    ft.noise = r.fault_temporal_noise;
    ft.seed = temporal_seed;
    return ft;
  };

  switch (event_class) {
    case EventClass::shake: {
      ShakeEvent e;
      e.temporal.A1 = draw(rng, r.shake_A1);
      e.temporal.delta = draw(rng, r.shake_delta);
      e.temporal.Omega = two_pi * draw(rng, r.shake_Omega_hz);
      e.temporal.psi = rng.uniform(0.0, two_pi);
      e.temporal.B = 1.0;
      e.temporal.F0 = draw(rng, r.shake_BF0);
      e.temporal.omega = two_pi * draw(rng, r.shake_omega_hz);
      e.temporal.phi = rng.uniform(0.0, two_pi);
      e.temporal.envelope = piecewise(r.shake_envelope_amp, r.shake_envelope_segment_s, envelope_stream);
      e.temporal.noise = r.phase_temporal_noise;
      e.temporal.seed = temporal_seed;
      e.spatial = spatial();
      spec.event = e;
      break;
    }
    case EventClass::walk: {
      WalkEvent e;
      e.temporal.fast.v_c = draw(rng, r.walk_v_c);
      e.temporal.fast.c = draw(rng, r.walk_c_fast);
      e.temporal.slow.v_c = draw(rng, r.walk_v_c);
      e.temporal.slow.c = draw(rng, r.walk_c_slow);
      e.temporal.fast.envelope =
          piecewise(r.walk_envelope_amp, r.walk_envelope_segment_s, fast_envelope_stream);
      e.temporal.slow.envelope =
          piecewise(r.walk_envelope_amp, r.walk_envelope_segment_s, slow_envelope_stream);
      e.temporal.noise = r.phase_temporal_noise;
      e.temporal.seed = temporal_seed;
      e.spatial = spatial();
      spec.event = e;
      break;
    }
    case EventClass::fault_sparse: {
      SparseFaultEvent e;
      e.temporal = fault(r.fault_sparse_amp);
      const double fs = 2.0 * static_cast<double>(geometry.channels) * geometry.spacing;
      const auto lo = static_cast<std::size_t>(std::llround(r.sparse_peaks.lo));
      const auto hi = static_cast<std::size_t>(std::llround(r.sparse_peaks.hi));
      const std::size_t count = lo + rng.index(hi - lo + 1);
      for (std::size_t i = 0; i < count; ++i) {
        GaussianPeak pk;
        pk.center_hz = draw(rng, r.sparse_mu_fraction) * fs;
        pk.sigma_hz = draw(rng, r.sparse_sigma_bins) * geometry.spacing;
        pk.amplitude = draw(rng, r.sparse_height) * pk.sigma_hz * std::sqrt(two_pi);
        e.frequency.peaks.push_back(pk);
      }
      e.frequency.noise = r.frequency_noise;
      e.frequency.seed = derive_seed(seed, frequency_stream);
      spec.event = e;
      break;
    }
    case EventClass::fault_broadband: {
      BroadbandFaultEvent e;
      e.temporal = fault(r.fault_broadband_amp);
      e.frequency.A0 = r.broadband_A0_sigma_factor * r.broadband_noise.white_sigma;
      e.frequency.rand_amplitude = r.broadband_rand_amplitude;
      e.frequency.noise = r.broadband_noise;
      e.frequency.seed = derive_seed(seed, frequency_stream);
      spec.event = e;
      break;
    }
    default:
      throw Error(ErrorKind::invalid_class, "unknown event class");
  }
  spec.validate(geometry);
  return spec;
}

namespace {

struct RangeKey {
  const char* key;
  Range PhysicsRanges::*member;
};

struct ScalarKey {
  const char* key;
  double PhysicsRanges::*member;
};

struct NoiseKey {
  const char* key;
  NoiseSpec PhysicsRanges::*member;
};

constexpr RangeKey range_keys[] = {
    {"shake.A1", &PhysicsRanges::shake_A1},
    {"shake.delta", &PhysicsRanges::shake_delta},
    {"shake.Omega_hz", &PhysicsRanges::shake_Omega_hz},
    {"shake.omega_hz", &PhysicsRanges::shake_omega_hz},
    {"shake.BF0", &PhysicsRanges::shake_BF0},
    {"shake.envelope_amp", &PhysicsRanges::shake_envelope_amp},
    {"walk.v_c", &PhysicsRanges::walk_v_c},
    {"walk.c_fast", &PhysicsRanges::walk_c_fast},
    {"walk.c_slow", &PhysicsRanges::walk_c_slow},
    {"walk.envelope_amp", &PhysicsRanges::walk_envelope_amp},
    {"fault.P", &PhysicsRanges::fault_P},
    {"fault.burst_period_s", &PhysicsRanges::fault_burst_period_s},
    {"fault.burst_duty", &PhysicsRanges::fault_burst_duty},
    {"fault_sparse.envelope_amp", &PhysicsRanges::fault_sparse_amp},
    {"fault_broadband.envelope_amp", &PhysicsRanges::fault_broadband_amp},
    {"sparse.peaks", &PhysicsRanges::sparse_peaks},
    {"sparse.mu_fraction", &PhysicsRanges::sparse_mu_fraction},
    {"sparse.sigma_bins", &PhysicsRanges::sparse_sigma_bins},
    {"sparse.height", &PhysicsRanges::sparse_height},
};

constexpr ScalarKey scalar_keys[] = {
    {"shake.envelope_segment_s", &PhysicsRanges::shake_envelope_segment_s},
    {"walk.envelope_segment_s", &PhysicsRanges::walk_envelope_segment_s},
    {"spatial.rand_amplitude", &PhysicsRanges::spatial_rand_amplitude},
    {"broadband.rand_amplitude", &PhysicsRanges::broadband_rand_amplitude},
    {"broadband.A0_sigma_factor", &PhysicsRanges::broadband_A0_sigma_factor},
};

constexpr NoiseKey noise_keys[] = {
    {"noise.phase_temporal", &PhysicsRanges::phase_temporal_noise},
    {"noise.spatial", &PhysicsRanges::spatial_noise},
    {"noise.fault_temporal", &PhysicsRanges::fault_temporal_noise},
    {"noise.frequency", &PhysicsRanges::frequency_noise},
    {"noise.broadband", &PhysicsRanges::broadband_noise},
};

std::string format_number(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

std::vector<std::string> PhysicsRanges::config_keys() {
  std::vector<std::string> keys;
  for (const auto& k : range_keys) keys.emplace_back(k.key);
  for (const auto& k : scalar_keys) keys.emplace_back(k.key);
  for (const auto& k : noise_keys) keys.emplace_back(k.key);
  return keys;
}

PhysicsRanges PhysicsRanges::from_config(const KeyValueConfig& config) {
  PhysicsRanges r;
  for (const auto& k : range_keys) {
    Range& dst = r.*(k.member);
    const auto [lo, hi] = config.range(k.key, {dst.lo, dst.hi});
    dst = Range{lo, hi};
  }
  for (const auto& k : scalar_keys) r.*(k.member) = config.number(k.key, r.*(k.member));
  for (const auto& k : noise_keys) {
    if (!config.contains(k.key)) continue;
    const auto& t = config.tokens(k.key);
    if (t.size() != 8) {
      throw Error(ErrorKind::config, std::string("key '") + k.key +
                                         "' expects 8 numbers: white phase cutoff_hz p_fade "
                                         "depth_lo depth_hi dur_lo_s dur_hi_s");
    }
    double v[8];
    for (int i = 0; i < 8; ++i) v[i] = std::stod(t[i]);
    NoiseSpec n{v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]};
    n.validate();
    r.*(k.member) = n;
  }
  return r;
}

KeyValueConfig PhysicsRanges::to_config() const {
  KeyValueConfig cfg;
  for (const auto& k : range_keys) {
    const Range& v = this->*(k.member);
    cfg.set(k.key, {format_number(v.lo), format_number(v.hi)});
  }
  for (const auto& k : scalar_keys) cfg.set(k.key, {format_number(this->*(k.member))});
  for (const auto& k : noise_keys) {
    const NoiseSpec& n = this->*(k.member);
    cfg.set(k.key, {format_number(n.white_sigma), format_number(n.phase_noise_sigma),
                    format_number(n.lowpass_cutoff_hz), format_number(n.fading_probability),
                    format_number(n.fading_depth_lo), format_number(n.fading_depth_hi),
                    format_number(n.fading_duration_lo_s), format_number(n.fading_duration_hi_s)});
  }
  return cfg;
}

}  // namespace dasphys
