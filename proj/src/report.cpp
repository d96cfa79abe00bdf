#include "dasphys/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "dasphys/error.hpp"

namespace dasphys {

namespace {

constexpr double kWidth = 640.0, kHeight = 360.0;
constexpr double kLeft = 60.0, kRight = 20.0, kTop = 30.0, kBottom = 40.0;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

const char* axis_label(Axis a) {
  switch (a) {
    case Axis::time: return "time (s)";
    case Axis::space: return "position (m)";
    case Axis::frequency: return "frequency (Hz)";
  }
  return "";
}

}  // namespace

std::vector<NamedCurve> frame_curves(const DasFrame& frame) {
  return {{"time", project(frame, Axis::time)},
          {std::string(to_string(frame.secondary_axis())), project(frame, frame.secondary_axis())}};
}

std::string curves_svg(const std::vector<NamedCurve>& curves, const std::string& title) {
  double x_max = 0.0, y_min = 0.0, y_max = 0.0;
  bool first = true;
  for (const auto& c : curves) {
    if (c.curve.values.empty()) continue;
    x_max = std::max(x_max, static_cast<double>(c.curve.size() - 1) * c.curve.spacing);
    for (double v : c.curve.values) {
      if (!std::isfinite(v)) continue;
      y_min = first ? v : std::min(y_min, v);
      y_max = first ? v : std::max(y_max, v);
      first = false;
    }
  }
  if (y_max <= y_min) y_max = y_min + 1.0;
  if (x_max <= 0.0) x_max = 1.0;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + pw * x / x_max; };
  auto py = [&](double y) { return kTop + ph * (1.0 - (y - y_min) / (y_max - y_min)); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
    << "</text>\n";
  s << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  s << "<text x=\"" << kLeft << "\" y=\"" << kHeight - 10 << "\" font-size=\"11\">0</text>\n";
  s << "<text x=\"" << kLeft + pw << "\" y=\"" << kHeight - 10 << "\" font-size=\"11\" text-anchor=\"end\">"
    << num(x_max) << "</text>\n";
  s << "<text x=\"" << kLeft - 4 << "\" y=\"" << kTop + 4 << "\" font-size=\"11\" text-anchor=\"end\">"
    << num(y_max) << "</text>\n";
  s << "<text x=\"" << kLeft - 4 << "\" y=\"" << kTop + ph << "\" font-size=\"11\" text-anchor=\"end\">"
    << num(y_min) << "</text>\n";
  if (!curves.empty()) {
    s << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 10 << "\" font-size=\"11\" text-anchor=\"middle\">"
      << axis_label(curves.front().curve.axis) << "</text>\n";
  }
  for (std::size_t k = 0; k < curves.size(); ++k) {
    const auto& c = curves[k].curve;
    const char* colour = kPalette[k % std::size(kPalette)];
    s << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (!std::isfinite(c.values[i])) continue;
      s << num(px(static_cast<double>(i) * c.spacing)) << ',' << num(py(c.values[i])) << ' ';
    }
    s << "\"/>\n";
    s << "<text x=\"" << kLeft + pw - 4 << "\" y=\"" << kTop + 14 + 14 * static_cast<double>(k)
      << "\" font-size=\"11\" text-anchor=\"end\" fill=\"" << colour << "\">" << escape(curves[k].name) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

void write_curves_csv(std::ostream& out, const std::vector<NamedCurve>& curves) {
  if (curves.empty()) return;
  const auto& ref = curves.front().curve;
  for (const auto& c : curves) {
    if (c.curve.size() != ref.size() || c.curve.spacing != ref.spacing) {
      throw Error(ErrorKind::dimension, "curves written to one CSV must share length and spacing");
    }
  }
  out << "coordinate";
  for (const auto& c : curves) out << ',' << c.name;
  out << '\n';
  char buf[40];
  for (std::size_t i = 0; i < ref.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", static_cast<double>(i) * ref.spacing);
    out << buf;
    for (const auto& c : curves) {
      std::snprintf(buf, sizeof buf, "%.17g", c.curve.values[i]);
      out << ',' << buf;
    }
    out << '\n';
  }
}

std::string frame_curves_svg(const DasFrame& frame) {
  const auto curves = frame_curves(frame);
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << 2 * kHeight
    << "\" viewBox=\"0 0 " << kWidth << ' ' << 2 * kHeight << "\">\n";
  for (std::size_t k = 0; k < curves.size(); ++k) {
    std::string panel = curves_svg({curves[k]}, curves[k].name + " feature curve");
    // Nested svg elements position each chart.
    panel.insert(4, " y=\"" + num(kHeight * static_cast<double>(k)) + "\"");
    s << panel;
  }
  s << "</svg>\n";
  return s.str();
}

void write_frame_curves_csv(std::ostream& out, const DasFrame& frame) {
  out << "axis,coordinate,value\n";
  char buf[64];
  for (const auto& c : frame_curves(frame)) {
    for (std::size_t i = 0; i < c.curve.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g", static_cast<double>(i) * c.curve.spacing, c.curve.values[i]);
      out << c.name << ',' << buf << '\n';
    }
  }
}

std::string confusion_svg(const EvalReport& report, const std::vector<std::string>& class_names,
                          const std::string& title) {
  const std::size_t n = report.confusion.size();
  const double cell = 60.0, left = 120.0, top = 60.0;
  const double w = left + cell * static_cast<double>(n) + 20.0, h = top + cell * static_cast<double>(n) + 50.0;
  auto name = [&](std::size_t c) { return c < class_names.size() ? class_names[c] : std::to_string(c); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 "
    << w << ' ' << h << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << w / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title) << " (acc "
    << num(report.accuracy) << ")</text>\n";
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t total = 0;
    for (std::size_t k : report.confusion[r]) total += k;
    for (std::size_t c = 0; c < n; ++c) {
      const double frac = total ? static_cast<double>(report.confusion[r][c]) / static_cast<double>(total) : 0.0;
      const int shade = static_cast<int>(std::lround(255.0 * (1.0 - frac)));
      const double x = left + cell * static_cast<double>(c), y = top + cell * static_cast<double>(r);
      s << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\"rgb("
        << shade << ',' << shade << ",255)\" stroke=\"black\"/>\n";
      s << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 5 << "\" text-anchor=\"middle\" font-size=\"13\">"
        << report.confusion[r][c] << "</text>\n";
    }
    s << "<text x=\"" << left - 6 << "\" y=\"" << top + cell * (static_cast<double>(r) + 0.5) + 4
      << "\" text-anchor=\"end\" font-size=\"11\">" << escape(name(r)) << "</text>\n";
  }
  for (std::size_t c = 0; c < n; ++c) {
    s << "<text x=\"" << left + cell * (static_cast<double>(c) + 0.5) << "\" y=\"" << top - 8
      << "\" text-anchor=\"middle\" font-size=\"11\">" << escape(name(c)) << "</text>\n";
  }
  s << "<text x=\"" << left + cell * static_cast<double>(n) / 2 << "\" y=\"" << h - 15
    << "\" text-anchor=\"middle\" font-size=\"11\">predicted (rows: true class)</text>\n";
  s << "</svg>\n";
  return s.str();
}

}  // namespace dasphys
