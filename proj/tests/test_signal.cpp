#include <doctest.h>

#include <cmath>

#include "dasphys/signal.hpp"
#include "helpers.hpp"

using namespace dasphys;

TEST_CASE("project averages across the orthogonal axis") {
  const auto f = test::phase_frame(2, 2, {1, 3, 5, 7});
  CHECK(project(f, Axis::time).values == std::vector<double>{2, 6});
  CHECK(project(f, Axis::space).values == std::vector<double>{3, 5});
  CHECK(project(f, Axis::time).spacing == doctest::Approx(0.01));
  CHECK(project(f, Axis::space).axis == Axis::space);
}

TEST_CASE("project of a constant frame is constant") {
  const auto f = test::energy_frame(4, 3, std::vector<double>(12, 2.5));
  for (Axis a : {Axis::time, Axis::frequency}) {
    for (double v : project(f, a).values) CHECK(v == 2.5);
  }
}

TEST_CASE("project of a single hot entry") {
  std::vector<double> v(5 * 4, 0.0);
  v[2 * 4 + 1] = 8.0;
  const auto c = project(test::phase_frame(5, 4, v), Axis::time).values;
  for (std::size_t t = 0; t < 5; ++t) CHECK(c[t] == (t == 2 ? 2.0 : 0.0));
}

TEST_CASE("project rejects an axis the frame does not have") {
  const auto f = test::phase_frame(2, 2, {1, 2, 3, 4});
  CHECK(test::error_kind([&] { project(f, Axis::frequency); }) == ErrorKind::invalid_axis);
}

TEST_CASE("project commutes with a constant shift") {
  const auto v = test::normals(12 * 5, 3);
  std::vector<double> shifted(v);
  for (double& x : shifted) x += 1.75;
  for (Axis a : {Axis::time, Axis::space}) {
    const auto p = project(test::phase_frame(12, 5, v), a).values;
    const auto q = project(test::phase_frame(12, 5, shifted), a).values;
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(q[i] == doctest::Approx(p[i] + 1.75).epsilon(1e-12));
  }
}

TEST_CASE("curve_l2") {
  const FeatureCurve a{Axis::time, {1, 0}, 1.0}, b{Axis::time, {0, 1}, 1.0};
  CHECK(curve_l2(a, b) == 2.0);
  CHECK(curve_l2(a, a) == 0.0);

  const auto x = test::normals(64, 5), y = test::normals(64, 6);
  double oracle = 0.0;
  for (std::size_t i = 0; i < 64; ++i) oracle += (x[i] - y[i]) * (x[i] - y[i]);
  const FeatureCurve cx{Axis::time, x, 1.0}, cy{Axis::time, y, 1.0};
  CHECK(curve_l2(cx, cy) == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(curve_l2(cx, cy) == curve_l2(cy, cx));
  CHECK(curve_l2(cx, cy) > 0.0);

  const FeatureCurve shorter{Axis::time, {1.0}, 1.0};
  CHECK(test::error_kind([&] { curve_l2(a, shorter); }) == ErrorKind::dimension);
}

TEST_CASE("snr_db") {
  // Window [0, 2] s at dt 1: samples 0..2 are the noise reference, the event sits at 3 s.
  const NoiseWindow w(0.0, 2.0, 3.0);
  CHECK(snr_db(std::vector<double>{1, 1, 1, 10}, 1.0, w) == doctest::Approx(3.979400086720376).epsilon(1e-12));
  CHECK(snr_db(std::vector<double>{1, 1, 1, 4}, 1.0, w) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(test::error_kind([&] { snr_db(std::vector<double>{0, 0, 0, 4}, 1.0, w); }) == ErrorKind::undefined_snr);
  CHECK(test::error_kind([&] { snr_db(std::vector<double>{1, 1, 1, 0}, 1.0, w); }) == ErrorKind::undefined_snr);
}

TEST_CASE("snr_db is strictly increasing in the signal value") {
  const NoiseWindow w(0.0, 2.0, 3.0);
  double previous = -1e300;
  for (double x = 0.5; x < 50.0; x *= 1.3) {
    const double s = snr_db(std::vector<double>{0.5, 1.5, 1.0, x}, 1.0, w);
    CHECK(s > previous);
    previous = s;
  }
}

TEST_CASE("noise window ordering") {
  CHECK(test::error_kind([] { NoiseWindow(3.0, 2.0, 4.0); }) == ErrorKind::config);
  CHECK(test::error_kind([] { NoiseWindow(1.0, 5.0, 4.0); }) == ErrorKind::config);
  CHECK_NOTHROW(NoiseWindow(1.0, 4.0, 4.0));
}

TEST_CASE("frame construction checks") {
  CHECK(test::error_kind([] { test::phase_frame(2, 2, {1, 2, 3}); }) == ErrorKind::dimension);
  CHECK_THROWS_AS(test::phase_frame(1, 1, {std::nan("")}), Error);
  CHECK_THROWS_AS(test::phase_frame(0, 1, {}), Error);
  CHECK_THROWS_AS(test::phase_frame(1, 1, {0.0}, -1.0), Error);
}

TEST_CASE("desk geometries") {
  const auto st = FrameGeometry::spatiotemporal_desk();
  CHECK(st.time_samples == 256);
  CHECK(st.channels == 16);
  CHECK(st.units == Units::phase_rad);
  const auto tf = FrameGeometry::time_frequency_desk();
  CHECK(tf.time_samples == 64);
  CHECK(tf.channels == 128);
  CHECK(tf.dt == 0.2);
  CHECK(tf.spacing == 2.5);
  CHECK(tf.column_axis == ColumnAxis::frequency);
}

TEST_CASE("pearson") {
  const auto a = test::normals(100, 9);
  std::vector<double> b(a);
  for (double& x : b) x = 2.0 * x - 3.0;
  CHECK(pearson(a, b) == doctest::Approx(1.0).epsilon(1e-12));
  for (double& x : b) x = -x;
  CHECK(pearson(a, b) == doctest::Approx(-1.0).epsilon(1e-12));
}
