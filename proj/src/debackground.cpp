#include "dasphys/debackground.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>

#include "dasphys/error.hpp"
#include "dasphys/rng.hpp"
#include "dasphys/spectral.hpp"
#include "dasphys/unet.hpp"

namespace dasphys {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

enum Stream : std::uint64_t {
  floor_stream = 1,
  line_stream = 2,
  am_stream = 3,
  pairing_stream = 4,
  weights_stream = 5,
  order_stream = 6,
};

void require_same_layout(const DasFrame& a, const DasFrame& b, const char* what) {
  if (a.time_samples() != b.time_samples() || a.channels() != b.channels() ||
      a.units() != b.units() || a.column_axis() != b.column_axis()) {
    throw Error(ErrorKind::dimension, std::string(what) + ": frames differ in shape or units");
  }
}

struct Normalization {
  double offset = 0.0;
  double spread = 1.0;
};

Normalization normalization_of(const ModelBundle& model) {
  if (!model.config.contains("debackground")) {
    throw Error(ErrorKind::config, "model is not a debackground network");
  }
  const auto& meta = model.config.at("debackground");
  return {meta.at("offset").get<double>(), meta.at("spread").get<double>()};
}

ad::Tensor normalized_tensor(const DasFrame& frame, const Normalization& n) {
  std::vector<double> v(frame.data().begin(), frame.data().end());
  for (double& x : v) x = (x - n.offset) / n.spread;
  return ad::Tensor::from({1, 1, frame.time_samples(), frame.channels()}, std::move(v));
}

// Excess of the input over its label, in normalized units.
ad::Tensor residual_tensor(const TrainingPair& pair, const Normalization& n) {
  std::vector<double> v(pair.input.data().begin(), pair.input.data().end());
  const auto label = pair.label.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (v[i] - label[i]) / n.spread;
  return ad::Tensor::from({1, 1, pair.input.time_samples(), pair.input.channels()}, std::move(v));
}

}  // namespace

BackgroundSite BackgroundSite::site_a() {
  BackgroundSite s;
  s.name = "A";
  s.floor_sigma = 1.0;
  s.floor_colour = 0.5;
  s.line_hz = {50.0, 100.0, 150.0, 200.0};
  s.line_amplitude = {0.6, 0.35, 0.25, 0.15};
  s.am_depth = 0.3;
  s.am_rate_hz = 0.2;
  return s;
}

BackgroundSite BackgroundSite::site_b() {
  BackgroundSite s;
  s.name = "B";
  s.floor_sigma = 2.0;
  s.floor_colour = 0.7;
  s.line_hz = {60.0, 120.0, 180.0, 240.0, 300.0};
  s.line_amplitude = {1.6, 1.0, 0.7, 0.5, 0.35};
  s.am_depth = 0.4;
  s.am_rate_hz = 0.3;
  return s;
}

BackgroundSite BackgroundSite::named(const std::string& name) {
  if (name == "A") return site_a();
  if (name == "B") return site_b();
  throw Error(ErrorKind::usage, "unknown background site '" + name + "' (expected A or B)");
}

void BackgroundSite::validate() const {
  if (!(floor_sigma > 0.0)) throw Error(ErrorKind::config, "background floor sigma must be > 0");
  if (!(floor_colour >= 0.0 && floor_colour < 1.0)) throw Error(ErrorKind::config, "floor colour must lie in [0, 1)");
  if (line_hz.size() != line_amplitude.size()) throw Error(ErrorKind::config, "one amplitude per harmonic line");
  for (double a : line_amplitude) {
    if (a < 0.0) throw Error(ErrorKind::config, "line amplitudes must be >= 0");
  }
  if (line_jitter_hz < 0.0 || amplitude_jitter < 0.0 || amplitude_jitter >= 1.0) {
    throw Error(ErrorKind::config, "line jitters must be >= 0 (amplitude jitter < 1)");
  }
  if (!(am_depth >= 0.0 && am_depth < 1.0) || am_rate_hz < 0.0) {
    throw Error(ErrorKind::config, "modulation depth must lie in [0, 1), rate >= 0");
  }
}

DasFrame synthesize_background(const BackgroundSite& site, std::uint64_t seed) {
  site.validate();
  const std::size_t n = desk_trace_samples;
  const double dt = 1.0 / desk_sample_rate_hz;
  std::vector<double> trace(n);

  Rng floor_rng(derive_seed(seed, floor_stream));
  const double c = site.floor_colour;
  const double drive = site.floor_sigma * std::sqrt(1.0 - c * c);
  double state = floor_rng.normal(0.0, site.floor_sigma);
  for (std::size_t i = 0; i < n; ++i) {
    state = c * state + drive * floor_rng.normal();
    trace[i] = state;
  }

  Rng line_rng(derive_seed(seed, line_stream));
  for (std::size_t k = 0; k < site.line_hz.size(); ++k) {
    const double f = site.line_hz[k] + line_rng.uniform(-site.line_jitter_hz, site.line_jitter_hz);
    const double a = site.line_amplitude[k] *
                     (1.0 + line_rng.uniform(-site.amplitude_jitter, site.amplitude_jitter));
    const double phase = line_rng.uniform(0.0, two_pi);
    for (std::size_t i = 0; i < n; ++i) trace[i] += a * std::sin(two_pi * f * static_cast<double>(i) * dt + phase);
  }

  Rng am_rng(derive_seed(seed, am_stream));
  const double am_phase = am_rng.uniform(0.0, two_pi);
  for (std::size_t i = 0; i < n; ++i) {
    trace[i] *= 1.0 + site.am_depth * std::sin(two_pi * site.am_rate_hz * static_cast<double>(i) * dt + am_phase);
  }
  return desk_spectrogram(trace);
}

std::vector<DasFrame> synthesize_backgrounds(const BackgroundSite& site, std::size_t count,
                                             std::uint64_t seed) {
  std::vector<DasFrame> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(synthesize_background(site, derive_seed(seed, i)));
  return out;
}

DasFrame mix(const DasFrame& background, const DasFrame& event) {
  require_same_layout(background, event, "mix");
  std::vector<double> v(background.data().begin(), background.data().end());
  const auto e = event.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += e[i];
  return background.with_data(std::move(v));
}

DasFrame fault_frame(const EventSpec& spec, const FrameGeometry& geometry, double gain) {
  if (geometry.units != Units::energy_db) throw Error(ErrorKind::config, "fault frames live in energy-dB geometry");
  const TargetCurves targets = make_targets(spec, geometry, false);
  const auto& T = targets.temporal.values;
  const auto& F = targets.secondary.values;
  const double mt = std::accumulate(T.begin(), T.end(), 0.0) / static_cast<double>(T.size());
  std::vector<double> v(T.size() * F.size(), 0.0);
  if (mt > 0.0) {
    for (std::size_t t = 0; t < T.size(); ++t)
      for (std::size_t f = 0; f < F.size(); ++f) v[t * F.size() + f] = gain * T[t] * F[f] / mt;
  }
  return DasFrame::from_geometry(geometry, std::move(v));
}

BenchmarkFault benchmark_fault(const SparseFreqParams& peaks, const FrameGeometry& geometry,
                               double burst_time_s, double burst_width_s, double peak_db) {
  if (geometry.units != Units::energy_db) throw Error(ErrorKind::config, "fault frames live in energy-dB geometry");
  if (!(burst_width_s > 0.0) || peak_db < 0.0) throw Error(ErrorKind::config, "burst width must be > 0, peak >= 0");
  SparseFreqParams clean = peaks;
  clean.noise = NoiseSpec{};
  const auto f_grid = geometry.column_grid();
  const auto profile = sparse_frequency_curve(clean, f_grid).values;
  const double top = *std::max_element(profile.begin(), profile.end());
  if (!(top > 0.0)) throw Error(ErrorKind::config, "benchmark fault profile is empty");

  std::vector<double> v(geometry.time_samples * geometry.channels);
  const auto t_grid = geometry.time_grid();
  for (std::size_t t = 0; t < t_grid.size(); ++t) {
    const double z = (t_grid[t] - burst_time_s) / burst_width_s;
    const double b = std::exp(-0.5 * z * z);
    for (std::size_t f = 0; f < profile.size(); ++f) v[t * profile.size() + f] = peak_db * b * profile[f] / top;
  }
  BenchmarkFault out{DasFrame::from_geometry(geometry, std::move(v)), {}};
  for (std::size_t f = 0; f < profile.size(); ++f) {
    if (profile[f] >= 0.5 * top) out.fault_bins.push_back(f);
  }
  return out;
}

std::vector<DasFrame> scale_events(const std::vector<DasFrame>& events, double gain_lo, double gain_hi,
                                   std::uint64_t seed) {
  if (!(gain_lo > 0.0) || !(gain_hi >= gain_lo)) {
    throw Error(ErrorKind::config, "event gain range must satisfy 0 < lo <= hi");
  }
  Rng rng(seed);
  std::vector<DasFrame> out;
  out.reserve(events.size());
  for (const auto& e : events) {
    const double gain = rng.uniform(gain_lo, gain_hi);
    std::vector<double> v(e.data().begin(), e.data().end());
    for (double& x : v) x *= gain;
    out.push_back(e.with_data(std::move(v)));
  }
  return out;
}

std::vector<TrainingPair> make_training_pairs(const std::vector<DasFrame>& backgrounds,
                                              const std::vector<DasFrame>& events,
                                              std::uint64_t seed, std::size_t events_per_background) {
  if (backgrounds.empty()) return {};
  for (const auto& b : backgrounds) require_same_layout(backgrounds.front(), b, "training pairs");
  for (const auto& e : events) require_same_layout(backgrounds.front(), e, "training pairs");
  std::size_t k = events_per_background;
  if (k == 0) k = events.size() / backgrounds.size();
  if (k > 0 && events.empty()) throw Error(ErrorKind::insufficient_data, "no events to mix into backgrounds");

  Rng rng(derive_seed(seed, pairing_stream));
  std::vector<std::size_t> deck(events.size());
  std::iota(deck.begin(), deck.end(), 0);
  std::size_t cursor = deck.size();
  auto next_event = [&]() {
    if (cursor == deck.size()) {
      for (std::size_t i = deck.size(); i > 1; --i) std::swap(deck[i - 1], deck[rng.index(i)]);
      cursor = 0;
    }
    return deck[cursor++];
  };

  std::vector<TrainingPair> pairs;
  pairs.reserve(backgrounds.size() * (k + 1));
  for (const auto& bg : backgrounds) {
    pairs.push_back({bg, bg});
    for (std::size_t j = 0; j < k; ++j) pairs.push_back({mix(bg, events[next_event()]), bg});
  }
  return pairs;
}

DebackgroundConfig DebackgroundConfig::from_config(const KeyValueConfig& config) {
  DebackgroundConfig cfg;
  cfg.depth = config.count("debg.depth", cfg.depth);
  cfg.base_channels = config.count("debg.base_channels", cfg.base_channels);
  cfg.leaky_slope = config.number("debg.leaky_slope", cfg.leaky_slope);
  cfg.epochs = config.count("debg.epochs", cfg.epochs);
  cfg.lr = config.number("debg.lr", cfg.lr);
  if (!(cfg.lr > 0.0)) throw Error(ErrorKind::config, "debg.lr must be > 0");
  return cfg;
}

std::vector<std::string> DebackgroundConfig::config_keys() {
  return {"debg.depth", "debg.base_channels", "debg.leaky_slope", "debg.epochs", "debg.lr"};
}

DebackgroundResult train_debackground(const std::vector<TrainingPair>& pairs,
                                      const DebackgroundConfig& cfg, std::uint64_t seed) {
  if (pairs.empty()) throw Error(ErrorKind::insufficient_data, "debackground training needs pairs");
  const DasFrame& first = pairs.front().input;
  for (const auto& p : pairs) {
    require_same_layout(first, p.input, "debackground training");
    require_same_layout(first, p.label, "debackground training");
  }
  Normalization norm;
  double sum = 0.0, sum_sq = 0.0;
  for (const auto& p : pairs) {
    for (double x : p.input.data()) {
      sum += x;
      sum_sq += x * x;
    }
  }
  const double count = static_cast<double>(pairs.size() * first.data().size());
  norm.offset = sum / count;
  const double variance = sum_sq / count - norm.offset * norm.offset;
  if (variance > 1e-12) norm.spread = std::sqrt(variance);

  UNetConfig u;
  u.height = first.time_samples();
  u.width = first.channels();
  u.depth = cfg.depth;
  u.base_channels = cfg.base_channels;
  u.leaky_slope = cfg.leaky_slope;
  ModelBundle model = build_unet(u, derive_seed(seed, weights_stream));
  // The network starts out predicting no excess, i.e. background = input.
  ad::Tensor head = model.parameter("head.w");
  std::fill(head.mutable_data().begin(), head.mutable_data().end(), 0.0);
  model.config["debackground"] = {{"offset", norm.offset},
                                  {"spread", norm.spread},
                                  {"geometry_units", std::string(to_string(first.units()))}};

  std::vector<ad::Tensor> inputs, residuals;
  for (const auto& p : pairs) {
    inputs.push_back(normalized_tensor(p.input, norm));
    residuals.push_back(residual_tensor(p, norm));
  }
  auto params = model.tensors();
  ad::AdamState adam = ad::AdamState::for_parameters(params, {cfg.lr});
  Rng order_rng(derive_seed(seed, order_stream));
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);

  DebackgroundResult result{std::move(model), {}, 0.0};
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.index(i)]);
    double total = 0.0;
    for (std::size_t idx : order) {
      for (auto& p : params) p.zero_grad();
      // input - predicted background equals the network output, so the
      // background MSE is the MSE of the output against the true excess.
      const ad::Tensor loss = ad::mean(ad::square(ad::sub(unet_forward(result.model, inputs[idx]), residuals[idx])));
      if (!std::isfinite(loss.item())) {
        throw Error(ErrorKind::divergence, "debackground loss became non-finite at epoch " + std::to_string(epoch));
      }
      total += loss.item() * norm.spread * norm.spread;
      ad::backward(loss);
      ad::adam_step(params, adam);
    }
    result.history.losses.push_back(total / static_cast<double>(pairs.size()));
  }
  result.final_mse = pair_mse(result.model, pairs);
  return result;
}

DasFrame predict_background(const ModelBundle& model, const DasFrame& frame) {
  const Normalization norm = normalization_of(model);
  const ad::Tensor out = unet_forward(model, normalized_tensor(frame, norm));
  std::vector<double> v(frame.data().begin(), frame.data().end());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= out.data()[i] * norm.spread;
  return frame.with_data(std::move(v));
}

DasFrame apply_debackground(const ModelBundle& model, const DasFrame& frame) {
  const DasFrame bg = predict_background(model, frame);
  std::vector<double> v(frame.data().begin(), frame.data().end());
  const auto b = bg.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::max(v[i] - b[i], 0.0);
  return frame.with_data(std::move(v));
}

double pair_mse(const ModelBundle& model, const std::vector<TrainingPair>& pairs) {
  if (pairs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& p : pairs) {
    const DasFrame pred = predict_background(model, p.input);
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.data().size(); ++i) {
      const double d = pred.data()[i] - p.label.data()[i];
      acc += d * d;
    }
    total += acc / static_cast<double>(pred.data().size());
  }
  return total / static_cast<double>(pairs.size());
}

std::vector<double> band_trace(const DasFrame& frame, const std::vector<std::size_t>& bins) {
  if (bins.empty()) throw Error(ErrorKind::dimension, "band trace needs at least one bin");
  std::vector<double> trace(frame.time_samples(), 0.0);
  for (std::size_t t = 0; t < frame.time_samples(); ++t) {
    for (std::size_t b : bins) {
      if (b >= frame.channels()) throw Error(ErrorKind::dimension, "bin " + std::to_string(b) + " outside the frame");
      trace[t] += frame.at(t, b);
    }
    trace[t] /= static_cast<double>(bins.size());
  }
  return trace;
}

double floored_snr_db(std::span<const double> trace, double dt, const NoiseWindow& window) {
  const auto [first, last] = window_indices(trace.size(), dt, window);
  const std::size_t sig = signal_index(trace.size(), dt, window);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = first; i <= last; ++i) {
    const double x = std::max(trace[i], 0.0);
    sum += x;
    sum_sq += x * x;
  }
  const double n = static_cast<double>(last - first + 1);
  const double denominator = std::max(sum / n + 3.0 * std::sqrt(sum_sq / n), snr_floor);
  return 10.0 * std::log10(std::max(trace[sig], snr_floor) / denominator);
}

DebackgroundMetrics debackground_report(const DasFrame& before, const DasFrame& after,
                                        const NoiseWindow& window,
                                        const std::vector<std::size_t>& fault_bins) {
  require_same_layout(before, after, "debackground report");
  DebackgroundMetrics m;
  const double dt = before.dt();
  m.snr_before_db = floored_snr_db(band_trace(before, fault_bins), dt, window);
  m.snr_after_db = floored_snr_db(band_trace(after, fault_bins), dt, window);
  m.snr_gain_db = m.snr_after_db - m.snr_before_db;

  const auto [first, last] = window_indices(before.time_samples(), dt, window);
  double diff = 0.0;
  for (std::size_t t = first; t <= last; ++t)
    for (std::size_t s = 0; s < before.channels(); ++s) diff += before.at(t, s) - after.at(t, s);
  m.background_reduction_db = diff / static_cast<double>((last - first + 1) * before.channels());

  std::vector<bool> is_fault(before.channels(), false);
  for (std::size_t b : fault_bins) is_fault.at(b) = true;
  auto contrast = [&](const DasFrame& f) {
    const auto curve = project(f, Axis::frequency).values;
    double in = 0.0, out = 0.0;
    std::size_t n_in = 0, n_out = 0;
    for (std::size_t b = 0; b < curve.size(); ++b) {
      if (is_fault[b]) {
        in += curve[b];
        ++n_in;
      } else {
        out += curve[b];
        ++n_out;
      }
    }
    return in / static_cast<double>(n_in) - (n_out ? out / static_cast<double>(n_out) : 0.0);
  };
  m.fault_enhancement_db = contrast(after) - contrast(before);
  return m;
}

void write_metrics_header(std::ostream& out) {
  out << "frame,snr_before_db,snr_after_db,snr_gain_db,background_reduction_db,fault_enhancement_db\n";
}

void write_metrics_row(std::ostream& out, const std::string& frame_name, const DebackgroundMetrics& m) {
  const auto old = out.precision(10);
  out << frame_name << ',' << m.snr_before_db << ',' << m.snr_after_db << ',' << m.snr_gain_db << ','
      << m.background_reduction_db << ',' << m.fault_enhancement_db << '\n';
  out.precision(old);
}

}  // namespace dasphys
