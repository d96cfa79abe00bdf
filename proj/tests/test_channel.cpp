#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dasphys/channel.hpp"
#include "helpers.hpp"

using namespace dasphys;
constexpr double pi = std::numbers::pi;

TEST_CASE("zero noise spec leaves the input unchanged") {
  const auto v = test::normals(64 * 4, 1);
  const auto out = add_noise(v, 64, 4, 0.01, NoiseSpec{}, 7);
  CHECK(out == v);
}

TEST_CASE("white noise has the configured spread") {
  NoiseSpec spec;
  spec.white_sigma = 1.0;
  const std::size_t n = 1000000;
  const auto out = add_noise(std::vector<double>(n, 0.0), n, 1, 1.0, spec, 11);
  double mean = 0.0, ss = 0.0;
  for (double x : out) mean += x;
  mean /= static_cast<double>(n);
  for (double x : out) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  CHECK(sd >= 0.997);
  CHECK(sd <= 1.003);
}

TEST_CASE("full fading zeroes the affected blocks") {
  NoiseSpec spec;
  spec.fading_probability = 1.0;
  spec.fading_duration_lo_s = 0.2;
  spec.fading_duration_hi_s = 0.4;
  const std::size_t T = 100, S = 6;
  const std::vector<double> ones(T * S, 1.0);
  const auto out = add_noise(ones, T, S, 0.01, spec, 3);
  std::size_t zeros = 0;
  for (double x : out) {
    CHECK((x == 0.0 || x == 1.0));
    zeros += x == 0.0 ? 1 : 0;
  }
  CHECK(zeros >= S * 20);
}

TEST_CASE("add_noise is deterministic per seed") {
  NoiseSpec spec{0.3, 0.2, 2.0, 0.5, 0.2, 0.8, 0.05, 0.1};
  const auto v = test::normals(50 * 3, 2);
  CHECK(add_noise(v, 50, 3, 0.01, spec, 5) == add_noise(v, 50, 3, 0.01, spec, 5));
  CHECK(add_noise(v, 50, 3, 0.01, spec, 5) != add_noise(v, 50, 3, 0.01, spec, 6));
}

TEST_CASE("invalid noise specs are rejected") {
  NoiseSpec spec;
  spec.white_sigma = -1.0;
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = NoiseSpec{};
  spec.fading_probability = 1.5;
  CHECK_THROWS_AS(spec.validate(), Error);
}

TEST_CASE("wrap_phase values") {
  CHECK(wrap_phase(0.0) == 0.0);
  CHECK(wrap_phase(pi) == -pi);
  CHECK(wrap_phase(7.5) == doctest::Approx(1.2168146928204138).epsilon(1e-14));
  CHECK(wrap_phase(-pi) == -pi);
}

TEST_CASE("wrap_phase fuzz over +-1e6 rad") {
  Rng rng(17);
  for (int i = 0; i < 20000; ++i) {
    const double x = rng.uniform(-1e6, 1e6);
    const double w = wrap_phase(x);
    REQUIRE(w >= -pi);
    REQUIRE(w < pi);
    REQUIRE(wrap_phase(w) == w);
    const double k = static_cast<double>(static_cast<int>(rng.index(11)) - 5);
    double d = std::abs(wrap_phase(x + 2.0 * pi * k) - w);
    d = std::min(d, 2.0 * pi - d);
    REQUIRE(d < 1e-8);
  }
}

TEST_CASE("saturate") {
  CHECK(saturate(std::vector<double>{0.5}, 1.0)[0] == 0.5);
  CHECK(saturate(std::vector<double>{3.0}, 1.0)[0] == 1.0);
  CHECK(saturate(std::vector<double>{-3.0}, 1.0)[0] == -1.0);
  CHECK_THROWS_AS(saturate(std::vector<double>{1.0}, 0.0), Error);

  auto v = test::normals(1000, 4);
  for (double& x : v) x *= 5.0;
  const auto out = saturate(v, 2.0);
  CHECK(saturate(out, 2.0) == out);
  std::vector<double> sorted(v);
  std::sort(sorted.begin(), sorted.end());
  const auto mono = saturate(sorted, 2.0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    CHECK(std::abs(out[i]) <= 2.0);
    CHECK(std::signbit(out[i]) == std::signbit(v[i]));
    if (i > 0) CHECK(mono[i] >= mono[i - 1]);
  }
}

TEST_CASE("correlation_total analytic cases") {
  const std::size_t T = 500;
  const auto a = test::normals(T, 8);
  std::vector<double> same(2 * T), neg(2 * T);
  for (std::size_t t = 0; t < T; ++t) {
    same[2 * t] = same[2 * t + 1] = a[t];
    neg[2 * t] = a[t];
    neg[2 * t + 1] = -a[t];
  }
  CHECK(correlation_total(test::phase_frame(T, 2, same)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(correlation_total(test::phase_frame(T, 2, neg)) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("independent channels are nearly uncorrelated") {
  const std::size_t T = 10000, S = 6;
  const double total = correlation_total(test::phase_frame(T, S, test::normals(T * S, 21)));
  CHECK(std::abs(total) < 0.05 * S * (S - 1) / 2.0);
}

TEST_CASE("correlation_total is invariant under positive affine channel maps") {
  const std::size_t T = 200, S = 4;
  auto v = test::normals(T * S, 30);
  for (std::size_t t = 0; t < T; ++t) v[t * S + 1] += v[t * S];
  const double base = correlation_total(test::phase_frame(T, S, v));
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t s = 0; s < S; ++s) v[t * S + s] = (1.0 + s) * v[t * S + s] + 3.0 - s;
  }
  CHECK(correlation_total(test::phase_frame(T, S, v)) == doctest::Approx(base).epsilon(1e-10));
}

TEST_CASE("correlation_total errors") {
  CHECK(test::error_kind([] { correlation_total(test::phase_frame(3, 2, {1, 1, 2, 1, 3, 1})); }) ==
        ErrorKind::degenerate_channel);
  CHECK(test::error_kind([] { correlation_total(test::phase_frame(3, 1, {1, 2, 3})); }) == ErrorKind::dimension);
}
