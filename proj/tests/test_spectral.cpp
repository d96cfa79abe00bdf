#include <doctest.h>

#include <cmath>
#include <numbers>

#include "dasphys/spectral.hpp"
#include "helpers.hpp"

using namespace dasphys;

namespace {

std::vector<double> tone(std::size_t n, double f0, double fs, double amplitude = 1.0, double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = amplitude * std::sin(2.0 * std::numbers::pi * f0 * static_cast<double>(i) / fs + phase);
  }
  return x;
}

std::vector<std::size_t> row_argmax(const DasFrame& f) {
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < f.time_samples(); ++t) {
    const auto r = f.row(t);
    out.push_back(static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin()));
  }
  return out;
}

}  // namespace

TEST_CASE("stft shape and metadata") {
  const StftParams p{64, 16, 128};
  const auto f = stft(test::normals(1000, 1), 1.0 / 500.0, p);
  CHECK(f.time_samples() == (1000 - 64) / 16 + 1);
  CHECK(f.channels() == 65);
  CHECK(f.dt() == doctest::Approx(16.0 / 500.0));
  CHECK(f.spacing() == doctest::Approx(500.0 / 128.0));
  CHECK(f.units() == Units::energy_db);
  CHECK(f.column_axis() == ColumnAxis::frequency);
  for (double v : f.data()) CHECK(v >= 0.0);
  CHECK(*std::min_element(f.data().begin(), f.data().end()) == 0.0);
}

TEST_CASE("stft of a zero trace is all zeros") {
  const auto f = stft(std::vector<double>(512, 0.0), 0.01, StftParams{});
  for (double v : f.data()) CHECK(v == 0.0);
}

TEST_CASE("pure tone lands in its bin in every frame") {
  const double fs = 640.0;
  const StftParams p{256, 128, 256};
  for (double f0 : {50.0, 101.0, 200.0}) {
    const auto f = stft(tone(4096, f0, fs), 1.0 / fs, p);
    const auto expected = static_cast<std::size_t>(std::lround(f0 * 256.0 / fs));
    for (std::size_t k : row_argmax(f)) CHECK(k == expected);
  }
}

TEST_CASE("tone argmax ignores hop and phase") {
  const double fs = 640.0, f0 = 77.0;
  const auto expected = static_cast<long>(std::lround(f0 * 256.0 / fs));
  for (std::size_t hop : {32u, 100u, 128u}) {
    for (double phase : {0.0, 1.0, 2.5}) {
      const auto f = stft(tone(3000, f0, fs, 1.0, phase), 1.0 / fs, StftParams{256, hop, 256});
      for (std::size_t k : row_argmax(f)) CHECK(std::abs(static_cast<long>(k) - expected) <= 1);
    }
  }
}

TEST_CASE("stft is deterministic and its linear energy grows with amplitude") {
  const auto x = test::normals(2048, 5);
  const StftParams p{};
  CHECK(stft(x, 0.001, p) == stft(x, 0.001, p));
  double previous = 0.0;
  for (double gain : {0.5, 1.0, 2.0, 4.0}) {
    std::vector<double> y(x);
    for (double& v : y) v *= gain;
    const double e = stft_linear_energy(y, p);
    CHECK(e > previous);
    previous = e;
  }
}

TEST_CASE("stft argument errors") {
  CHECK(test::error_kind([] { stft(std::vector<double>(10, 1.0), 0.01, StftParams{}); }) ==
        ErrorKind::insufficient_data);
  CHECK(test::error_kind([] { stft(std::vector<double>(512, 1.0), 0.01, StftParams{300, 128, 256}); }) ==
        ErrorKind::config);
  CHECK(test::error_kind([] { stft(std::vector<double>(512, 1.0), 0.01, StftParams{256, 0, 256}); }) ==
        ErrorKind::config);
}

TEST_CASE("desk spectrogram matches the desk geometry") {
  const auto f = desk_spectrogram(tone(desk_trace_samples, 100.0, desk_sample_rate_hz));
  CHECK(FrameGeometry::of(f) == FrameGeometry::time_frequency_desk());
  CHECK_THROWS_AS(desk_spectrogram(std::vector<double>(100, 0.0)), Error);
}

TEST_CASE("time-frequency feature curves") {
  const auto c = tf_feature_curves(test::energy_frame(3, 4, std::vector<double>(12, 1.5)));
  for (double v : c.first.values) CHECK(v == 1.5);
  for (double v : c.second.values) CHECK(v == 1.5);

  std::vector<double> hot(12, 0.0);
  hot[1 * 4 + 2] = 6.0;
  const auto h = tf_feature_curves(test::energy_frame(3, 4, hot));
  CHECK(h.first.values == std::vector<double>{0.0, 1.5, 0.0});
  CHECK(h.second.values == std::vector<double>{0.0, 0.0, 2.0, 0.0});

  const auto frame = test::energy_frame(5, 7, test::normals(35, 2));
  const auto a = tf_feature_curves(frame);
  const auto b = tf_feature_curves(frame.transposed());
  CHECK(a.first.values == b.second.values);
  CHECK(a.second.values == b.first.values);
}
