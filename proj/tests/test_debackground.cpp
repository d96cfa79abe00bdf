#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dasphys/debackground.hpp"
#include "dasphys/unet.hpp"
#include "helpers.hpp"

using namespace dasphys;

namespace {

// Integer-valued frames keep mixtures and differences exact.
DasFrame integer_frame(std::size_t T, std::size_t S, std::uint64_t seed, int hi) {
  Rng rng(seed);
  std::vector<double> v(T * S);
  for (double& x : v) x = static_cast<double>(rng.index(static_cast<std::size_t>(hi) + 1));
  return test::energy_frame(T, S, std::move(v));
}

// Smooth background with a fixed line plus small random texture.
DasFrame toy_background(std::size_t T, std::size_t S, std::uint64_t seed) {
  Rng rng(seed);
  const double level = rng.uniform(4.0, 6.0);
  std::vector<double> v(T * S);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t s = 0; s < S; ++s) v[t * S + s] = level + (s == 3 ? 4.0 : 0.0) + 0.3 * rng.normal();
  return test::energy_frame(T, S, std::move(v));
}

// Compact bump at a random position.
DasFrame toy_event(std::size_t T, std::size_t S, std::uint64_t seed) {
  Rng rng(seed);
  const double t0 = rng.uniform(3.0, T - 4.0), s0 = rng.uniform(3.0, S - 4.0), a = rng.uniform(4.0, 8.0);
  std::vector<double> v(T * S);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t s = 0; s < S; ++s) {
      const double dt = (t - t0) / 1.5, ds = (s - s0) / 1.5;
      v[t * S + s] = a * std::exp(-0.5 * (dt * dt + ds * ds));
    }
  return test::energy_frame(T, S, std::move(v));
}

std::vector<TrainingPair> toy_pairs(std::size_t n_bg, std::uint64_t seed) {
  std::vector<DasFrame> bgs, events;
  for (std::size_t i = 0; i < n_bg; ++i) {
    bgs.push_back(toy_background(16, 16, derive_seed(seed, 2 * i)));
    events.push_back(toy_event(16, 16, derive_seed(seed, 2 * i + 1)));
  }
  return make_training_pairs(bgs, events, seed, 2);
}

DebackgroundConfig toy_config(std::size_t epochs) {
  DebackgroundConfig cfg;
  cfg.depth = 2;
  cfg.base_channels = 4;
  cfg.epochs = epochs;
  cfg.lr = 3e-3;
  return cfg;
}

const DebackgroundResult& toy_model() {
  static const DebackgroundResult r = train_debackground(toy_pairs(24, 31), toy_config(40), 7);
  return r;
}

double mean_of(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

}  // namespace

TEST_CASE("training pairs count and pure-background pairs") {
  std::vector<DasFrame> bgs, events;
  for (std::uint64_t i = 0; i < 3; ++i) bgs.push_back(integer_frame(4, 4, i, 9));
  for (std::uint64_t i = 0; i < 5; ++i) events.push_back(integer_frame(4, 4, 100 + i, 9));
  const auto pairs = make_training_pairs(bgs, events, 1, 4);
  REQUIRE(pairs.size() == 3 * (4 + 1));
  std::size_t identity_pairs = 0;
  for (const auto& p : pairs)
    if (p.input == p.label) ++identity_pairs;
  CHECK(identity_pairs == 3);
  CHECK(make_training_pairs(bgs, events, 1).size() == 3 * (5 / 3 + 1));
  CHECK(make_training_pairs({}, events, 1).empty());
  CHECK(test::error_kind([&] { make_training_pairs(bgs, {}, 1, 2); }) == ErrorKind::insufficient_data);
}

TEST_CASE("inputs minus labels reproduce the mixed-in events") {
  std::vector<DasFrame> bgs, events;
  for (std::uint64_t i = 0; i < 4; ++i) bgs.push_back(integer_frame(6, 4, i, 20));
  for (std::uint64_t i = 0; i < 6; ++i) events.push_back(integer_frame(6, 4, 50 + i, 20));
  const auto pairs = make_training_pairs(bgs, events, 9, 3);
  std::vector<std::size_t> uses(events.size(), 0);
  for (const auto& p : pairs) {
    if (p.input == p.label) continue;
    std::vector<double> d(p.input.data().size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = p.input.data()[i] - p.label.data()[i];
    const DasFrame diff = p.input.with_data(std::move(d));
    const auto it = std::find(events.begin(), events.end(), diff);
    REQUIRE(it != events.end());
    ++uses[static_cast<std::size_t>(it - events.begin())];
  }
  // Twelve draws from a reshuffled deck of six use every event twice.
  for (std::size_t u : uses) CHECK(u == 2);
}

TEST_CASE("pairing depends on the seed only") {
  std::vector<DasFrame> bgs, events;
  for (std::uint64_t i = 0; i < 2; ++i) bgs.push_back(integer_frame(4, 4, i, 9));
  for (std::uint64_t i = 0; i < 8; ++i) events.push_back(integer_frame(4, 4, 10 + i, 9));
  const auto a = make_training_pairs(bgs, events, 3, 4), b = make_training_pairs(bgs, events, 3, 4);
  const auto c = make_training_pairs(bgs, events, 4, 4);
  bool same = true, differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    same = same && a[i].input == b[i].input;
    differs = differs || !(a[i].input == c[i].input);
  }
  CHECK(same);
  CHECK(differs);
}

TEST_CASE("mix adds frames and rejects layout mismatches") {
  const DasFrame a = integer_frame(3, 2, 1, 5), b = integer_frame(3, 2, 2, 5);
  const DasFrame m = mix(a, b);
  for (std::size_t i = 0; i < 6; ++i) CHECK(m.data()[i] == a.data()[i] + b.data()[i]);
  CHECK(test::error_kind([&] { mix(a, integer_frame(2, 3, 1, 5)); }) == ErrorKind::dimension);
  const DasFrame phase = test::phase_frame(3, 2, std::vector<double>(6, 0.0));
  CHECK(test::error_kind([&] { mix(a, phase); }) == ErrorKind::dimension);
}

TEST_CASE("scale_events draws one gain per event inside the range") {
  std::vector<DasFrame> events;
  for (std::uint64_t i = 0; i < 10; ++i) events.push_back(integer_frame(4, 4, i, 9).with_data(std::vector<double>(16, 2.0)));
  const auto scaled = scale_events(events, 3.0, 5.0, 8);
  REQUIRE(scaled.size() == events.size());
  for (const auto& f : scaled) {
    const double g = f.data()[0] / 2.0;
    CHECK(g >= 3.0);
    CHECK(g <= 5.0);
    for (double x : f.data()) CHECK(x == f.data()[0]);
  }
  for (const auto& f : scale_events(events, 2.0, 2.0, 8)) CHECK(f.data()[5] == 4.0);
  CHECK(test::error_kind([&] { scale_events(events, 0.0, 1.0, 1); }) == ErrorKind::config);
  CHECK(test::error_kind([&] { scale_events(events, 2.0, 1.0, 1); }) == ErrorKind::config);
}

TEST_CASE("backgrounds are nonnegative desk frames and differ per seed") {
  const auto site = BackgroundSite::site_a();
  const DasFrame a = synthesize_background(site, 1), b = synthesize_background(site, 2);
  CHECK(a.time_samples() == 64);
  CHECK(a.channels() == 128);
  CHECK(a.units() == Units::energy_db);
  CHECK(a == synthesize_background(site, 1));
  CHECK_FALSE(a == b);
  for (double x : a.data()) CHECK(x >= 0.0);
  CHECK(BackgroundSite::named("B").name == BackgroundSite::site_b().name);
  CHECK(test::error_kind([] { BackgroundSite::named("C"); }) == ErrorKind::usage);
  BackgroundSite bad = site;
  bad.floor_colour = 1.0;
  CHECK(test::error_kind([&] { bad.validate(); }) == ErrorKind::config);
}

TEST_CASE("fault frames average back to their target curves") {
  const FrameGeometry g = FrameGeometry::time_frequency_desk();
  const EventSpec spec = sample_event_spec(EventClass::fault_sparse, 12, g);
  const TargetCurves targets = make_targets(spec, g, false);
  const DasFrame f = fault_frame(spec, g, 2.0);
  const auto rows = project(f, Axis::time).values, cols = project(f, Axis::frequency).values;
  for (std::size_t t = 0; t < rows.size(); ++t) CHECK(rows[t] == doctest::Approx(2.0 * targets.temporal.values[t]));
  for (std::size_t k = 0; k < cols.size(); ++k) CHECK(cols[k] == doctest::Approx(2.0 * targets.secondary.values[k]));
}

TEST_CASE("benchmark fault peaks at the burst time within the marked bins") {
  const FrameGeometry g = FrameGeometry::time_frequency_desk();
  SparseFreqParams p;
  p.peaks = {{1.0, 100.0, 6.0}};
  const auto b = benchmark_fault(p, g, 9.0, 0.5, 15.0);
  REQUIRE_FALSE(b.fault_bins.empty());
  CHECK(std::find(b.fault_bins.begin(), b.fault_bins.end(), 40) != b.fault_bins.end());
  CHECK(*std::max_element(b.frame.data().begin(), b.frame.data().end()) == doctest::Approx(15.0));
  CHECK(b.frame.at(45, 40) == doctest::Approx(15.0));
  CHECK(b.frame.at(0, 40) < 1e-6);
  CHECK(test::error_kind([&] { benchmark_fault(p, g, 9.0, 0.0, 15.0); }) == ErrorKind::config);
  CHECK(test::error_kind([&] { benchmark_fault(p, FrameGeometry::spatiotemporal_desk(), 9.0, 0.5, 15.0); }) == ErrorKind::config);
}

TEST_CASE("an untrained debackground model predicts the input as background") {
  const auto pairs = toy_pairs(2, 5);
  const auto r = train_debackground(pairs, toy_config(0), 1);
  CHECK(r.history.losses.empty());
  const DasFrame x = pairs[1].input;
  const DasFrame bg = predict_background(r.model, x);
  for (std::size_t i = 0; i < x.data().size(); ++i) CHECK(bg.data()[i] == doctest::Approx(x.data()[i]).epsilon(1e-12));
  for (double v : apply_debackground(r.model, x).data()) CHECK(v == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("pure-background pairs train to zero error") {
  std::vector<TrainingPair> pairs;
  for (std::uint64_t i = 0; i < 4; ++i) {
    const DasFrame b = toy_background(16, 16, i);
    pairs.push_back({b, b});
  }
  const auto r = train_debackground(pairs, toy_config(5), 2);
  CHECK(r.final_mse < 1e-12);
  for (double l : r.history.losses) CHECK(l < 1e-12);
}

TEST_CASE("debackground training is deterministic per seed") {
  const auto pairs = toy_pairs(2, 5);
  const auto a = train_debackground(pairs, toy_config(3), 11), b = train_debackground(pairs, toy_config(3), 11);
  const auto c = train_debackground(pairs, toy_config(3), 12);
  CHECK(a.model.same_weights(b.model));
  CHECK(a.history.losses == b.history.losses);
  CHECK_FALSE(a.model.same_weights(c.model));
}

TEST_CASE("debackground training cuts the error tenfold") {
  const auto& r = toy_model();
  REQUIRE(r.history.losses.size() == 40);
  CHECK(r.final_mse < r.history.losses.front() / 10.0);
}

TEST_CASE("held-out pair error stays within three times the training error") {
  const auto held_out = toy_pairs(4, 77);
  CHECK(pair_mse(toy_model().model, held_out) <= 3.0 * toy_model().final_mse);
}

TEST_CASE("apply_debackground output is nonnegative and deterministic") {
  const auto& m = toy_model().model;
  for (std::uint64_t s = 0; s < 20; ++s) {
    std::vector<double> v = test::normals(256, 900 + s);
    for (double& x : v) x *= 10.0;
    const DasFrame f = test::energy_frame(16, 16, std::move(v));
    const DasFrame out = apply_debackground(m, f);
    for (double x : out.data()) CHECK(x >= 0.0);
    CHECK(out == apply_debackground(m, f));
  }
  CHECK(test::error_kind([] { apply_debackground(build_unet(UNetConfig{16, 16}, 1), integer_frame(16, 16, 1, 3)); }) ==
        ErrorKind::config);
}

TEST_CASE("trained debackground suppresses toy backgrounds and keeps events") {
  const auto& m = toy_model().model;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const DasFrame bg = toy_background(16, 16, derive_seed(500, s));
    const DasFrame ev = toy_event(16, 16, derive_seed(600, s));
    CHECK(mean_of(apply_debackground(m, bg).data()) <= 0.3 * mean_of(bg.data()));
    // Excess over background in the bins where the event is strong.
    const DasFrame out = apply_debackground(m, mix(bg, ev));
    double before = 0.0, after = 0.0;
    for (std::size_t i = 0; i < ev.data().size(); ++i) {
      if (ev.data()[i] < 2.0) continue;
      before += ev.data()[i];
      after += out.data()[i];
    }
    CHECK(after >= 0.5 * before);
  }
}

TEST_CASE("debackground report deltas") {
  const DasFrame before = integer_frame(64, 8, 3, 10);
  const NoiseWindow w{1.0, 4.0, 9.0};
  const std::vector<std::size_t> bins{2, 3};
  const auto same = debackground_report(before, before, w, bins);
  CHECK(same.snr_gain_db == 0.0);
  CHECK(same.background_reduction_db == 0.0);
  CHECK(same.fault_enhancement_db == 0.0);

  // Subtract 2 dB over the window rows only.
  std::vector<double> v(before.data().begin(), before.data().end());
  for (std::size_t t = 5; t <= 20; ++t)
    for (std::size_t s = 0; s < 8; ++s) v[t * 8 + s] -= 2.0;
  const auto shifted = debackground_report(before, before.with_data(v), w, bins);
  CHECK(shifted.background_reduction_db == doctest::Approx(2.0));

  const DasFrame zeros = before.with_data(std::vector<double>(v.size(), 0.0));
  const auto z = debackground_report(zeros, zeros, w, bins);
  CHECK(std::isfinite(z.snr_before_db));
  CHECK(std::isfinite(z.snr_after_db));
  CHECK(std::isfinite(z.fault_enhancement_db));
  CHECK(test::error_kind([&] { debackground_report(before, before, w, {8}); }) == ErrorKind::dimension);
}

TEST_CASE("floored SNR of a clean spike against a quiet window") {
  std::vector<double> trace(64, 0.5);
  trace[45] = 20.0;
  // Window mean 0.5 and RMS 0.5 give a denominator of 2.
  CHECK(floored_snr_db(trace, 0.2, NoiseWindow{1.0, 4.0, 9.0}) == doctest::Approx(10.0 * std::log10(10.0)));
  std::vector<double> zeros(64, 0.0);
  CHECK(floored_snr_db(zeros, 0.2, NoiseWindow{1.0, 4.0, 9.0}) == doctest::Approx(0.0));
}

TEST_CASE("metrics rows are CSV") {
  std::ostringstream s;
  write_metrics_header(s);
  write_metrics_row(s, "frame_00000.dasf", DebackgroundMetrics{1.0, 4.5, 3.5, 2.0, 1.25});
  CHECK(s.str() ==
        "frame,snr_before_db,snr_after_db,snr_gain_db,background_reduction_db,fault_enhancement_db\n"
        "frame_00000.dasf,1,4.5,3.5,2,1.25\n");
}
