#include "dasphys/pign.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

#include "dasphys/channel.hpp"
#include "dasphys/error.hpp"
#include "dasphys/rng.hpp"
#include "dasphys/serialize.hpp"
#include "dasphys/unet.hpp"

namespace dasphys {

namespace {

enum Stream : std::uint64_t {
  weights_stream = 1,
  input_stream = 2,
  order_stream = 3,
  step_noise_stream = 4,
};

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

ad::Tensor as_2d(const ad::Tensor& frame) {
  if (frame.rank() == 2) return frame;
  if (frame.rank() == 4 && frame.dim(0) == 1 && frame.dim(1) == 1) {
    return ad::reshape(frame, {frame.dim(2), frame.dim(3)});
  }
  throw Error(ErrorKind::dimension, "expected a [T, S] or [1, 1, T, S] frame, got " +
                                        ad::shape_string(frame.shape()));
}

// Generator input noise. Small amplitude keeps skip connections from leaking roughness into the output.
constexpr double kNoiseAmplitude = 0.01;

std::vector<double> noise_image(Rng rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = kNoiseAmplitude * rng.normal();
  return v;
}

void check_targets(const TargetCurves& targets, const FrameGeometry& g) {
  if (targets.temporal.size() != g.time_samples || targets.secondary.size() != g.channels) {
    throw Error(ErrorKind::dimension,
                "target curves of length " + std::to_string(targets.temporal.size()) + " and " +
                    std::to_string(targets.secondary.size()) + " do not fit a " +
                    std::to_string(g.time_samples) + "x" + std::to_string(g.channels) + " frame");
  }
}

ad::Tensor conditioned_input(const TargetCurves& targets, const FrameGeometry& g, Rng rng) {
  const std::size_t T = g.time_samples, S = g.channels;
  std::vector<double> v(3 * T * S);
  for (std::size_t i = 0; i < T * S; ++i) v[i] = kNoiseAmplitude * rng.normal();
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t s = 0; s < S; ++s) {
      v[T * S + t * S + s] = targets.temporal.values[t];
      v[2 * T * S + t * S + s] = targets.secondary.values[s];
    }
  return ad::Tensor::from({1, 3, T, S}, std::move(v));
}

UNetConfig network_config(const PignConfig& cfg, std::size_t in_channels) {
  UNetConfig u;
  u.height = cfg.geometry.time_samples;
  u.width = cfg.geometry.channels;
  u.in_channels = in_channels;
  u.depth = cfg.depth;
  u.base_channels = cfg.base_channels;
  u.leaky_slope = cfg.leaky_slope;
  u.output = cfg.geometry.units == Units::phase_rad ? OutputActivation::bounded_phase
                                                    : OutputActivation::relu;
  return u;
}

nlohmann::json weights_json(const PignLossWeights& w) {
  return {{"w_time", w.w_time}, {"w_secondary", w.w_secondary}, {"w_cont", w.w_cont},
          {"w_corr", w.w_corr}, {"C_T", w.C_T}};
}

void check_finite(double loss, std::size_t epoch) {
  if (!std::isfinite(loss)) {
    throw Error(ErrorKind::divergence, "loss became non-finite at epoch " + std::to_string(epoch));
  }
}

}  // namespace

void PignLossWeights::validate() const {
  for (double w : {w_time, w_secondary, w_cont, w_corr}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorKind::config, "loss weights must be finite and >= 0");
  }
  if (!(w_time > 0.0 || w_secondary > 0.0)) {
    throw Error(ErrorKind::config, "at least one projection weight must be > 0");
  }
  if (!std::isfinite(C_T)) throw Error(ErrorKind::config, "C_T must be finite");
}

TargetCurves make_targets(const EventSpec& spec, const FrameGeometry& geometry, bool wrap) {
  spec.validate(geometry);
  auto [temporal, secondary] = evaluate_event(spec, geometry);
  TargetCurves out;
  out.event_class = spec.event_class();
  const bool phase = geometry.units == Units::phase_rad;
  if (!phase) {
    for (auto* c : {&temporal, &secondary})
      for (double& v : c->values) v = std::max(v, 0.0);
  }
  if (phase && wrap) {
    temporal.values = wrap_phase(temporal.values);
    out.wrapped = true;
  }
  const double mt = mean_of(temporal.values);
  const double ms = mean_of(secondary.values);
  if (!phase && ms > 1e-12) {
    for (double& v : secondary.values) v *= mt / ms;
  } else {
    for (double& v : secondary.values) v += mt - ms;
  }
  if (out.wrapped) secondary.values = wrap_phase(secondary.values);
  out.temporal = std::move(temporal);
  out.secondary = std::move(secondary);
  return out;
}

ad::Tensor continuity_penalty(const ad::Tensor& frame) {
  const ad::Tensor x = as_2d(frame);
  const std::size_t T = x.dim(0);
  if (T < 2) throw Error(ErrorKind::dimension, "continuity penalty needs at least two time samples");
  return ad::mean(ad::square(ad::sub(ad::slice(x, 0, 1, T - 1), ad::slice(x, 0, 0, T - 1))));
}

ad::Tensor correlation_total_tensor(const ad::Tensor& frame) {
  const ad::Tensor x = as_2d(frame);
  const std::size_t T = x.dim(0), S = x.dim(1);
  if (S < 2) throw Error(ErrorKind::dimension, "correlation needs at least two channels");
  const ad::Tensor centered = ad::sub(x, ad::broadcast_to(ad::mean_axis(x, 0), x.shape()));
  const ad::Tensor norm =
      ad::sqrt(ad::add_scalar(ad::sum_axis(ad::square(centered), 0), 1e-8 * static_cast<double>(T)));
  const ad::Tensor z = ad::div(centered, ad::broadcast_to(norm, x.shape()));
  // sum_{i<j} <z_i, z_j> = ((sum_j z_j)^2 - sum_j z_j^2) / 2, summed over time
  const ad::Tensor row_sums = ad::sum_axis(z, 1);
  return ad::scale(ad::sub(ad::sum(ad::square(row_sums)), ad::sum(ad::square(z))), 0.5);
}

ad::Tensor correlation_penalty(const ad::Tensor& frame, double C_T) {
  return ad::square(ad::add_scalar(correlation_total_tensor(frame), -C_T));
}

ad::Tensor composite_loss(const ad::Tensor& output, const TargetCurves& targets,
                          const PignLossWeights& w, LossTerms* terms) {
  const ad::Tensor x = as_2d(output);
  const std::size_t T = x.dim(0), S = x.dim(1);
  if (targets.temporal.size() != T || targets.secondary.size() != S) {
    throw Error(ErrorKind::dimension, "targets of length " + std::to_string(targets.temporal.size()) +
                                          "/" + std::to_string(targets.secondary.size()) +
                                          " for an output of " + ad::shape_string(x.shape()));
  }
  const ad::Tensor t_target = ad::Tensor::from({T, 1}, targets.temporal.values);
  const ad::Tensor s_target = ad::Tensor::from({1, S}, targets.secondary.values);
  const ad::Tensor l_time = ad::sum(ad::square(ad::sub(ad::mean_axis(x, 1), t_target)));
  const ad::Tensor l_sec = ad::sum(ad::square(ad::sub(ad::mean_axis(x, 0), s_target)));

  ad::Tensor total = ad::add(ad::scale(l_time, w.w_time), ad::scale(l_sec, w.w_secondary));
  LossTerms local;
  local.time = l_time.item();
  local.secondary = l_sec.item();
  if (w.w_cont > 0.0) {
    const ad::Tensor c = continuity_penalty(x);
    local.continuity = c.item();
    total = ad::add(total, ad::scale(c, w.w_cont));
  }
  if (w.w_corr > 0.0) {
    const ad::Tensor c = correlation_penalty(x, w.C_T);
    local.correlation = c.item();
    total = ad::add(total, ad::scale(c, w.w_corr));
  }
  local.total = total.item();
  if (terms) *terms = local;
  return total;
}

double relative_projection_error(const DasFrame& frame, const TargetCurves& targets) {
  auto rel = [](const FeatureCurve& p, const FeatureCurve& t) {
    double norm = 0.0;
    for (double v : t.values) norm += v * v;
    FeatureCurve tt = t;
    tt.axis = p.axis;
    return std::sqrt(curve_l2(p, tt) / std::max(norm, 1e-300));
  };
  return std::max(rel(project(frame, Axis::time), targets.temporal),
                  rel(project(frame, frame.secondary_axis()), targets.secondary));
}

bool spatially_correlated(EventClass event_class) { return event_class == EventClass::shake; }

PignConfig PignConfig::for_geometry(const FrameGeometry& geometry) {
  PignConfig cfg;
  cfg.geometry = geometry;
  const double pairs = 0.5 * static_cast<double>(geometry.channels) *
                       static_cast<double>(geometry.channels - 1);
  cfg.weights.C_T = cfg.correlation_fraction * pairs;
  return cfg;
}

std::vector<std::string> PignConfig::config_keys() {
  return {"pign.depth",  "pign.base_channels", "pign.leaky_slope", "pign.epochs", "pign.lr",
          "pign.w_time", "pign.w_secondary",   "pign.w_cont",      "pign.w_corr", "pign.C_T",
          "pign.correlation_fraction"};
}

PignConfig PignConfig::from_config(const KeyValueConfig& config, const FrameGeometry& geometry) {
  PignConfig cfg = for_geometry(geometry);
  cfg.depth = config.count("pign.depth", cfg.depth);
  cfg.base_channels = config.count("pign.base_channels", cfg.base_channels);
  cfg.leaky_slope = config.number("pign.leaky_slope", cfg.leaky_slope);
  cfg.epochs = config.count("pign.epochs", cfg.epochs);
  cfg.lr = config.number("pign.lr", cfg.lr);
  cfg.weights.w_time = config.number("pign.w_time", cfg.weights.w_time);
  cfg.weights.w_secondary = config.number("pign.w_secondary", cfg.weights.w_secondary);
  cfg.weights.w_cont = config.number("pign.w_cont", cfg.weights.w_cont);
  cfg.weights.w_corr = config.number("pign.w_corr", cfg.weights.w_corr);
  cfg.correlation_fraction = config.number("pign.correlation_fraction", cfg.correlation_fraction);
  const double pairs = 0.5 * static_cast<double>(geometry.channels) *
                       static_cast<double>(geometry.channels - 1);
  cfg.weights.C_T = config.number("pign.C_T", cfg.correlation_fraction * pairs);
  cfg.validate();
  return cfg;
}

void PignConfig::validate() const {
  network_config(*this, 1).validate();
  weights.validate();
  if (!(lr > 0.0) || !std::isfinite(lr)) throw Error(ErrorKind::config, "pign learning rate must be > 0");
}

PignLossWeights PignConfig::weights_for(EventClass event_class) const {
  PignLossWeights w = weights;
  if (!spatially_correlated(event_class) || geometry.channels < 2) w.w_corr = 0.0;
  return w;
}

void TrainingHistory::write_csv(std::ostream& out) const {
  out << "epoch,loss\n";
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < losses.size(); ++i) out << i << ',' << losses[i] << '\n';
  out.precision(old);
}

ad::Tensor frame_tensor(const DasFrame& frame) {
  return ad::Tensor::from({1, 1, frame.time_samples(), frame.channels()},
                          std::vector<double>(frame.data().begin(), frame.data().end()));
}

DasFrame tensor_frame(const ad::Tensor& t, const FrameGeometry& geometry) {
  if (t.numel() != geometry.time_samples * geometry.channels) {
    throw Error(ErrorKind::dimension, "tensor " + ad::shape_string(t.shape()) + " does not fit the frame geometry");
  }
  return DasFrame::from_geometry(geometry, std::vector<double>(t.data().begin(), t.data().end()));
}

DasFrame physics_screen(const DasFrame& frame) {
  std::vector<double> v(frame.data().begin(), frame.data().end());
  if (frame.units() == Units::phase_rad) {
    v = wrap_phase(v);
  } else {
    for (double& x : v) x = std::max(x, 0.0);
  }
  return frame.with_data(std::move(v));
}

UntrainedResult train_untrained(const TargetCurves& targets, const PignConfig& cfg,
                                std::uint64_t seed) {
  cfg.validate();
  const FrameGeometry& g = cfg.geometry;
  check_targets(targets, g);
  const PignLossWeights w = cfg.weights_for(targets.event_class);

  ModelBundle model = build_unet(network_config(cfg, 1), derive_seed(seed, weights_stream));
  model.config["pign"] = {{"mode", "untrained"},
                          {"class", std::string(to_string(targets.event_class))},
                          {"geometry", to_json(g)},
                          {"weights", weights_json(w)}};
  const ad::Tensor input = ad::Tensor::from(
      {1, 1, g.time_samples, g.channels},
      noise_image(Rng(derive_seed(seed, input_stream)), g.time_samples * g.channels));

  auto params = model.tensors();
  ad::AdamState adam = ad::AdamState::for_parameters(params, {cfg.lr});
  TrainingHistory history;
  history.losses.reserve(cfg.epochs);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (auto& p : params) p.zero_grad();
    const ad::Tensor loss = composite_loss(unet_forward(model, input), targets, w);
    check_finite(loss.item(), epoch);
    history.losses.push_back(loss.item());
    ad::backward(loss);
    ad::adam_step(params, adam);
  }
  DasFrame frame = physics_screen(tensor_frame(unet_forward(model, input), g));
  return {std::move(frame), std::move(model), std::move(history)};
}

TrainedResult train_trained(const std::vector<TargetCurves>& dataset, const PignConfig& cfg,
                            std::uint64_t seed, const PhysicsRanges& ranges) {
  cfg.validate();
  if (dataset.empty()) throw Error(ErrorKind::insufficient_data, "trained mode needs at least one target");
  const FrameGeometry& g = cfg.geometry;
  const EventClass cls = dataset.front().event_class;
  for (const auto& t : dataset) {
    check_targets(t, g);
    if (t.event_class != cls) throw Error(ErrorKind::invalid_class, "trained-mode targets mix event classes");
  }
  const PignLossWeights w = cfg.weights_for(cls);

  ModelBundle model = build_unet(network_config(cfg, 3), derive_seed(seed, weights_stream));
  model.config["pign"] = {{"mode", "trained"},
                          {"class", std::string(to_string(cls))},
                          {"geometry", to_json(g)},
                          {"wrapped", dataset.front().wrapped},
                          {"weights", weights_json(w)},
                          {"ranges", ranges.to_config().serialize()}};

  auto params = model.tensors();
  ad::AdamState adam = ad::AdamState::for_parameters(params, {cfg.lr});
  Rng order_rng(derive_seed(seed, order_stream));
  const std::uint64_t noise_seed = derive_seed(seed, step_noise_stream);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  TrainingHistory history;
  std::uint64_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.index(i)]);
    double epoch_loss = 0.0;
    for (std::size_t idx : order) {
      for (auto& p : params) p.zero_grad();
      const ad::Tensor input = conditioned_input(dataset[idx], g, Rng(derive_seed(noise_seed, step++)));
      const ad::Tensor loss = composite_loss(unet_forward(model, input), dataset[idx], w);
      check_finite(loss.item(), epoch);
      epoch_loss += loss.item();
      ad::backward(loss);
      ad::adam_step(params, adam);
    }
    history.losses.push_back(epoch_loss / static_cast<double>(dataset.size()));
  }
  return {std::move(model), std::move(history)};
}

std::vector<GeneratedEvent> generate_events(const ModelBundle& model, std::size_t n,
                                            std::uint64_t seed) {
  if (!model.config.contains("pign") || model.config.at("pign").value("mode", "") != "trained") {
    throw Error(ErrorKind::config, "generation needs a trained-mode PIGN model");
  }
  const auto& meta = model.config.at("pign");
  const FrameGeometry g = geometry_from_json(meta.at("geometry"));
  const EventClass cls = parse_event_class(meta.at("class").get<std::string>());
  const bool wrapped = meta.at("wrapped").get<bool>();
  const PhysicsRanges ranges =
      PhysicsRanges::from_config(KeyValueConfig::parse(meta.at("ranges").get<std::string>()));

  std::vector<GeneratedEvent> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    EventSpec spec = sample_event_spec(cls, derive_seed(seed, 2 * i), g, ranges);
    TargetCurves targets = make_targets(spec, g, wrapped);
    const ad::Tensor input = conditioned_input(targets, g, Rng(derive_seed(seed, 2 * i + 1)));
    DasFrame frame = physics_screen(tensor_frame(unet_forward(model, input), g));
    out.push_back({std::move(spec), std::move(targets), std::move(frame)});
  }
  return out;
}

std::vector<DasFrame> generate(const ModelBundle& model, std::size_t n, std::uint64_t seed) {
  std::vector<DasFrame> frames;
  for (auto& e : generate_events(model, n, seed)) frames.push_back(std::move(e.frame));
  return frames;
}

}  // namespace dasphys
