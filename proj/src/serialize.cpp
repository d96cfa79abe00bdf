#include "dasphys/serialize.hpp"

#include <string>

#include "dasphys/error.hpp"

namespace dasphys {

NLOHMANN_JSON_SERIALIZE_ENUM(EnvelopeKind, {{EnvelopeKind::constant, "constant"},
                                            {EnvelopeKind::piecewise_random, "piecewise-random"},
                                            {EnvelopeKind::burst_train, "burst-train"}})

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(NoiseSpec, white_sigma, phase_noise_sigma, lowpass_cutoff_hz,
                                   fading_probability, fading_depth_lo, fading_depth_hi,
                                   fading_duration_lo_s, fading_duration_hi_s)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ScalingEnvelope, kind, amp_lo, amp_hi, segment_s, period_s, duty,
                                   offset_s, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ShakeParams, A1, delta, Omega, psi, B, F0, omega, phi, envelope,
                                   noise, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(WalkMode, v_c, c, envelope)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(WalkParams, fast, slow, noise, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(FaultTemporalParams, P, varphi, envelope, noise, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(GaussianPeak, amplitude, center_hz, sigma_hz)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SparseFreqParams, peaks, noise, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(BroadbandParams, A0, rand_amplitude, noise, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SpatialParams, rand_amplitude, noise, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ShakeEvent, temporal, spatial)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(WalkEvent, temporal, spatial)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SparseFaultEvent, temporal, frequency)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(BroadbandFaultEvent, temporal, frequency)

namespace {

template <class F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, std::string(what) + ": " + e.what());
  }
}

}  // namespace

Axis parse_axis(std::string_view name) {
  if (name == "time") return Axis::time;
  if (name == "space") return Axis::space;
  if (name == "frequency") return Axis::frequency;
  throw Error(ErrorKind::invalid_axis, "unknown axis '" + std::string(name) + "'");
}

ColumnAxis parse_column_axis(std::string_view name) {
  if (name == "space") return ColumnAxis::space;
  if (name == "frequency") return ColumnAxis::frequency;
  throw Error(ErrorKind::invalid_axis, "unknown column axis '" + std::string(name) + "'");
}

Units parse_units(std::string_view name) {
  if (name == to_string(Units::phase_rad)) return Units::phase_rad;
  if (name == to_string(Units::energy_db)) return Units::energy_db;
  throw Error(ErrorKind::format, "unknown units '" + std::string(name) + "'");
}

nlohmann::json to_json(const FrameGeometry& g) {
  return {{"time_samples", g.time_samples},
          {"channels", g.channels},
          {"dt", g.dt},
          {"spacing", g.spacing},
          {"column_axis", std::string(to_string(g.column_axis))},
          {"units", std::string(to_string(g.units))}};
}

FrameGeometry geometry_from_json(const nlohmann::json& j) {
  return guarded("geometry", [&] {
    FrameGeometry g;
    g.time_samples = j.at("time_samples").get<std::size_t>();
    g.channels = j.at("channels").get<std::size_t>();
    g.dt = j.at("dt").get<double>();
    g.spacing = j.at("spacing").get<double>();
    g.column_axis = parse_column_axis(j.at("column_axis").get<std::string>());
    g.units = parse_units(j.at("units").get<std::string>());
    return g;
  });
}

nlohmann::json to_json(const NoiseSpec& noise) { return nlohmann::json(noise); }

NoiseSpec noise_from_json(const nlohmann::json& j) {
  return guarded("noise spec", [&] { return j.get<NoiseSpec>(); });
}

nlohmann::json to_json(const EventSpec& spec) {
  nlohmann::json params;
  std::visit([&params](const auto& e) { params = e; }, spec.event);
  return {{"class", std::string(to_string(spec.event_class()))},
          {"seed", spec.seed},
          {"params", params}};
}

EventSpec event_spec_from_json(const nlohmann::json& j) {
  return guarded("event spec", [&] {
    EventSpec spec;
    spec.seed = j.at("seed").get<std::uint64_t>();
    const auto& p = j.at("params");
    switch (parse_event_class(j.at("class").get<std::string>())) {
      case EventClass::shake: spec.event = p.get<ShakeEvent>(); break;
      case EventClass::walk: spec.event = p.get<WalkEvent>(); break;
      case EventClass::fault_sparse: spec.event = p.get<SparseFaultEvent>(); break;
      case EventClass::fault_broadband: spec.event = p.get<BroadbandFaultEvent>(); break;
    }
    return spec;
  });
}

nlohmann::json to_json(const FeatureCurve& curve) {
  return {{"axis", std::string(to_string(curve.axis))}, {"spacing", curve.spacing}, {"values", curve.values}};
}

FeatureCurve curve_from_json(const nlohmann::json& j) {
  return guarded("feature curve", [&] {
    FeatureCurve c;
    c.axis = parse_axis(j.at("axis").get<std::string>());
    c.spacing = j.at("spacing").get<double>();
    c.values = j.at("values").get<std::vector<double>>();
    return c;
  });
}

}  // namespace dasphys
