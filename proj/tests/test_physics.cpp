#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "dasphys/physics.hpp"
#include "dasphys/serialize.hpp"
#include "helpers.hpp"

using namespace dasphys;
constexpr double pi = std::numbers::pi;

namespace {

std::vector<double> grid(std::size_t n, double step) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = step * static_cast<double>(i);
  return g;
}

bool finite_curve(const FeatureCurve& c) {
  for (double v : c.values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("shake temporal curve") {
  ShakeParams p;
  p.A1 = 1.0;
  p.B = 1.0;
  p.F0 = 1.0;
  p.Omega = 2.0;
  p.omega = 3.0;
  p.phi = -pi / 2.0;  // sin(omega t + pi/2) = 1 at t = 0
  const auto t = grid(10, 0.1);
  CHECK(shake_temporal(p, t).values[0] == doctest::Approx(2.0).epsilon(1e-14));
  p.phi = 0.0;
  CHECK(shake_temporal(p, t).values[0] == doctest::Approx(1.0).epsilon(1e-14));

  // Free term only: with delta = ln 2 and Omega = 2 pi, cos is 1 at integer seconds.
  ShakeParams decay;
  decay.A1 = 1.0;
  decay.delta = std::log(2.0);
  decay.Omega = 2.0 * pi;
  const auto at = shake_temporal(decay, std::vector<double>{0.0, 1.0, 2.0}).values;
  CHECK(at[1] / at[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(at[2] / at[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("shake with zero amplitude is the noise term") {
  ShakeParams p;
  p.noise.white_sigma = 0.1;
  p.seed = 4;
  const auto t = grid(64, 0.01);
  const auto c = shake_temporal(p, t);
  const auto noise = add_noise(FeatureCurve{Axis::time, std::vector<double>(64, 0.0), 0.01}, p.noise, 4);
  CHECK(c.values.size() == 64);
  CHECK(finite_curve(c));
  double energy = 0.0;
  for (double v : c.values) energy += v * v;
  CHECK(energy > 0.0);
  (void)noise;
}

TEST_CASE("shake superposition of free and forced terms") {
  const FrameGeometry g = FrameGeometry::spatiotemporal_desk();
  const auto t = g.time_grid();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto spec = sample_event_spec(EventClass::shake, seed, g);
    ShakeParams p = std::get<ShakeEvent>(spec.event).temporal;
    p.noise = NoiseSpec{};
    p.envelope = ScalingEnvelope::constant(1.0);
    const auto c = shake_temporal(p, t).values;
    for (std::size_t i = 0; i < t.size(); ++i) {
      REQUIRE(c[i] == doctest::Approx(shake_free_term(p, t[i]) + shake_forced_term(p, t[i])).epsilon(1e-12));
    }
  }
}

TEST_CASE("walk temporal curve") {
  WalkParams p;
  p.fast = {2.0, 4.0, ScalingEnvelope::constant(1.0)};
  p.slow = {1.0, 5.0, ScalingEnvelope::constant(0.0)};
  const auto c = walk_temporal(p, std::vector<double>{0.0, 2.0}).values;
  CHECK(c[0] == doctest::Approx(pi / 2.0).epsilon(1e-14));
  CHECK(std::abs(c[1]) < 1e-14);

  p.fast.envelope = ScalingEnvelope::constant(0.0);
  for (double v : walk_temporal(p, grid(20, 0.1)).values) CHECK(v == 0.0);
}

TEST_CASE("fault temporal curve") {
  FaultTemporalParams p;
  p.P = 1.0;
  const auto c = fault_temporal(p, std::vector<double>{0.0, 0.25}).values;
  CHECK(std::abs(c[0]) < 1e-15);
  CHECK(c[1] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("burst-train envelope silences the gaps") {
  FaultTemporalParams p;
  p.P = 0.37;
  p.envelope.kind = EnvelopeKind::burst_train;
  p.envelope.amp_lo = 0.5;
  p.envelope.amp_hi = 1.0;
  p.envelope.period_s = 2.0;
  p.envelope.duty = 0.5;
  p.envelope.offset_s = 0.25;
  const auto t = grid(400, 0.01);
  const auto c = fault_temporal(p, t).values;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double phase = std::fmod(t[i] - 0.25 + 2.0, 2.0);
    if (t[i] < 0.25 || phase > 1.0 + 1e-9) CHECK(c[i] == 0.0);
  }
}

TEST_CASE("autocorrelation of the noiseless fault curve peaks at the roller period") {
  FaultTemporalParams p;
  p.P = 0.5;
  p.varphi = 0.3;
  const double dt = 0.01;
  const auto x = fault_temporal(p, grid(1000, dt)).values;
  std::size_t best_lag = 0;
  double best = -1e300;
  for (std::size_t lag = 10; lag < 80; ++lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i + lag < x.size(); ++i) acc += x[i] * x[i + lag];
    acc /= static_cast<double>(x.size() - lag);
    if (acc > best) {
      best = acc;
      best_lag = lag;
    }
  }
  CHECK(best_lag == 50);
}

TEST_CASE("sparse frequency curve") {
  SparseFreqParams p;
  p.peaks = {{1.0, 50.0, 1.0}};
  CHECK(sparse_frequency_curve(p, std::vector<double>{50.0}).values[0] ==
        doctest::Approx(0.3989422804014327).epsilon(1e-14));

  p.peaks = {{2.0, 40.0, 3.0}, {2.0, 200.0, 3.0}};
  const auto f = grid(128, 2.5);
  const auto c = sparse_frequency_curve(p, f).values;
  std::vector<std::size_t> maxima;
  for (std::size_t i = 1; i + 1 < c.size(); ++i) {
    if (c[i] > c[i - 1] && c[i] >= c[i + 1]) maxima.push_back(i);
  }
  CHECK(maxima == std::vector<std::size_t>{16, 80});
  CHECK(c[16] == doctest::Approx(c[80]).epsilon(1e-12));

  // Area under the curve recovers the summed amplitudes.
  p.peaks = {{1.5, 100.0, 4.0}, {0.7, 200.0, 2.0}};
  const auto fine = grid(4000, 0.075);
  const auto d = sparse_frequency_curve(p, fine).values;
  double area = 0.0;
  for (std::size_t i = 1; i < d.size(); ++i) area += 0.5 * (d[i] + d[i - 1]) * 0.075;
  CHECK(area == doctest::Approx(2.2).epsilon(0.02));
}

TEST_CASE("broadband frequency curve stays above its floor") {
  BroadbandParams p;
  p.A0 = 5.0;
  p.rand_amplitude = 1.0;
  p.seed = 9;
  const auto c = broadband_frequency_curve(p, grid(1024, 1.0)).values;
  for (double v : c) {
    CHECK(v >= 5.0);
    CHECK(v <= 6.0);
  }
}

TEST_CASE("random spatial curve") {
  SpatialParams p;
  for (double v : random_spatial_curve(grid(16, 1.0), p).values) CHECK(v == 0.0);
  p.rand_amplitude = 1.0;
  p.seed = 1;
  const auto a = random_spatial_curve(grid(10000, 1.0), p).values;
  p.seed = 2;
  const auto b = random_spatial_curve(grid(10000, 1.0), p).values;
  CHECK(a != b);
  double mean = 0.0;
  for (double v : a) {
    CHECK(std::abs(v) <= 1.0);
    mean += v;
  }
  mean /= 10000.0;
  // Uniform on [-1, 1]: sigma 1/sqrt(3); the bound is three standard errors.
  CHECK(std::abs(mean) < 3.0 / std::sqrt(3.0) / 100.0);
}

TEST_CASE("feature functions need a grid") {
  CHECK(test::error_kind([] { fault_temporal(FaultTemporalParams{}, std::vector<double>{}); }) ==
        ErrorKind::dimension);
}

TEST_CASE("event sampling") {
  const FrameGeometry st = FrameGeometry::spatiotemporal_desk();
  const FrameGeometry tf = FrameGeometry::time_frequency_desk();
  std::set<std::string> seen;
  for (EventClass c : {EventClass::shake, EventClass::walk, EventClass::fault_sparse, EventClass::fault_broadband}) {
    const FrameGeometry& g = is_phase_event(c) ? st : tf;
    CHECK(sample_event_spec(c, 5, g) == sample_event_spec(c, 5, g));
    for (std::uint64_t seed = 0; seed < 250; ++seed) {
      const auto spec = sample_event_spec(c, seed, g);
      REQUIRE(spec.event_class() == c);
      REQUIRE_NOTHROW(spec.validate(g));
      seen.insert(to_json(spec).dump());
    }
  }
  CHECK(seen.size() == 1000);
  CHECK(test::error_kind([] { parse_event_class("pedestrian"); }) == ErrorKind::invalid_class);
  CHECK(parse_event_class("fault-sparse") == EventClass::fault_sparse);
}

TEST_CASE("sampled curves are finite") {
  const FrameGeometry st = FrameGeometry::spatiotemporal_desk();
  const FrameGeometry tf = FrameGeometry::time_frequency_desk();
  for (std::uint64_t seed = 0; seed < 2500; ++seed) {
    for (EventClass c : {EventClass::shake, EventClass::walk, EventClass::fault_sparse, EventClass::fault_broadband}) {
      const auto spec = sample_event_spec(c, seed, is_phase_event(c) ? st : tf);
      const auto [a, b] = evaluate_event(spec, is_phase_event(c) ? st : tf);
      REQUIRE(finite_curve(a));
      REQUIRE(finite_curve(b));
    }
  }
}

TEST_CASE("physics ranges round-trip through the config text") {
  PhysicsRanges r;
  r.fault_P = {0.3, 1.5};
  r.sparse_peaks = {2.0, 3.0};
  const auto back = PhysicsRanges::from_config(KeyValueConfig::parse(r.to_config().serialize()));
  CHECK(back == r);
  const auto unknown = KeyValueConfig::parse("shake.nonsense = 1\n");
  CHECK(test::error_kind([&] { unknown.require_known(PhysicsRanges::config_keys()); }) == ErrorKind::config);
  CHECK_THROWS_AS(PhysicsRanges::from_config(KeyValueConfig::parse("fault.P = 2 1\n")), Error);
}
