#include <doctest.h>

#include <sstream>
#include <string>

#include "dasphys/config.hpp"
#include "dasphys/report.hpp"
#include "helpers.hpp"

using namespace dasphys;

namespace {

std::size_t occurrences(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("key/value config parsing") {
  const auto c = KeyValueConfig::parse(
      "# ranges\n"
      "shake.A1 = 0.5 3   # rad\n"
      "\n"
      "  pign.epochs=200\n"
      "name = site-A\n");
  CHECK(c.range("shake.A1", {0, 0}) == std::pair<double, double>{0.5, 3.0});
  CHECK(c.count("pign.epochs", 1) == 200);
  CHECK(c.number("pign.lr", 1e-3) == 1e-3);
  CHECK(c.text("name", "") == "site-A");
  CHECK(c.tokens("shake.A1") == std::vector<std::string>{"0.5", "3"});
  CHECK(KeyValueConfig::parse(c.serialize()).entries() == c.entries());
}

TEST_CASE("key/value config errors") {
  CHECK(test::error_kind([] { KeyValueConfig::parse("no equals sign"); }) == ErrorKind::config);
  CHECK(test::error_kind([] { KeyValueConfig::parse(" = 3"); }) == ErrorKind::config);
  CHECK(test::error_kind([] { KeyValueConfig::parse("a ="); }) == ErrorKind::config);
  const auto c = KeyValueConfig::parse("a = x\nb = 1 2\nr = 3 1\nn = -1\n");
  CHECK(test::error_kind([&] { c.number("a", 0); }) == ErrorKind::config);
  CHECK(test::error_kind([&] { c.number("b", 0); }) == ErrorKind::config);
  CHECK(test::error_kind([&] { c.range("r", {0, 1}); }) == ErrorKind::config);
  CHECK(test::error_kind([&] { c.count("n", 0); }) == ErrorKind::config);
  CHECK(test::error_kind([&] { c.tokens("missing"); }) == ErrorKind::config);
  CHECK(test::error_kind([] { KeyValueConfig::load("/nonexistent/dasphys.cfg"); }) == ErrorKind::io);

  const auto known = KeyValueConfig::parse("pign.epochs = 3\nshake.A1 = 1 2\n");
  known.require_known({"pign.epochs", "shake."});
  CHECK(test::error_kind([&] { known.require_known({"pign.epochs"}); }) == ErrorKind::config);
}

TEST_CASE("curve charts draw one polyline per curve") {
  const std::vector<NamedCurve> curves{{"before", {Axis::frequency, {0.0, 1.0, 4.0, 2.0}, 2.5}},
                                       {"after", {Axis::frequency, {0.0, 0.5, 3.0, 0.5}, 2.5}}};
  const std::string svg = curves_svg(curves, "fault <bins> & energy");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(occurrences(svg, "<polyline") == 2);
  CHECK(svg.find("fault &lt;bins&gt; &amp; energy") != std::string::npos);
  CHECK(svg.find("frequency (Hz)") != std::string::npos);
  CHECK(svg.find(">before<") != std::string::npos);
  CHECK(svg.find(">after<") != std::string::npos);
  // The first point of each line sits at the left edge of the plot.
  CHECK(svg.find("points=\"60.000,") != std::string::npos);
  CHECK(curves_svg({}, "empty").find("</svg>") != std::string::npos);
}

TEST_CASE("curve CSV has one column per curve") {
  const std::vector<NamedCurve> curves{{"a", {Axis::time, {1.0, 2.0, 3.0}, 0.5}},
                                       {"b", {Axis::time, {0.25, 0.0, -1.0}, 0.5}}};
  std::ostringstream s;
  write_curves_csv(s, curves);
  CHECK(s.str() == "coordinate,a,b\n0,1,0.25\n0.5,2,0\n1,3,-1\n");
  const std::vector<NamedCurve> ragged{{"a", {Axis::time, {1.0, 2.0}, 0.5}}, {"b", {Axis::time, {1.0}, 0.5}}};
  std::ostringstream t;
  CHECK(test::error_kind([&] { write_curves_csv(t, ragged); }) == ErrorKind::dimension);
}

TEST_CASE("frame curves are the row and column means") {
  const DasFrame f = test::energy_frame(2, 3, {1.0, 2.0, 3.0, 3.0, 4.0, 5.0}, 0.2, 2.5);
  const auto curves = frame_curves(f);
  REQUIRE(curves.size() == 2);
  CHECK(curves[0].name == "time");
  CHECK(curves[0].curve.values == std::vector<double>{2.0, 4.0});
  CHECK(curves[1].name == "frequency");
  CHECK(curves[1].curve.values == std::vector<double>{2.0, 3.0, 4.0});

  std::ostringstream s;
  write_frame_curves_csv(s, f);
  CHECK(s.str() ==
        "axis,coordinate,value\n"
        "time,0,2\ntime,0.20000000000000001,4\n"
        "frequency,0,2\nfrequency,2.5,3\nfrequency,5,4\n");
  const std::string svg = frame_curves_svg(f);
  CHECK(occurrences(svg, "<polyline") == 2);
  CHECK(svg.find("time feature curve") != std::string::npos);
  CHECK(svg.find("frequency feature curve") != std::string::npos);
}

TEST_CASE("confusion matrix chart shows every count") {
  const auto r = EvalReport::from_predictions({0, 0, 1, 1, 1, 2}, {0, 1, 1, 1, 2, 2}, 3);
  const std::string svg = confusion_svg(r, {"background", "sparse", "broadband"}, "site B");
  CHECK(occurrences(svg, "<rect") == 1 + 9);
  CHECK(svg.find(">2</text>") != std::string::npos);
  CHECK(svg.find(">broadband<") != std::string::npos);
  CHECK(svg.find("site B (acc 0.667)") != std::string::npos);
}
