#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dasphys/classifier.hpp"
#include "dasphys/signal.hpp"

namespace dasphys {

struct NamedCurve {
  std::string name;
  FeatureCurve curve;
};

// Polyline chart, one line per curve, shared axes.
std::string curves_svg(const std::vector<NamedCurve>& curves, const std::string& title);
// Columns: coordinate, then one column per curve (curves must share length and spacing).
void write_curves_csv(std::ostream& out, const std::vector<NamedCurve>& curves);

std::string confusion_svg(const EvalReport& report, const std::vector<std::string>& class_names,
                          const std::string& title);

// Time and secondary-axis feature curves of a frame.
std::vector<NamedCurve> frame_curves(const DasFrame& frame);
// Both curves of a frame as two stacked charts.
std::string frame_curves_svg(const DasFrame& frame);
// Long format: axis,coordinate,value.
void write_frame_curves_csv(std::ostream& out, const DasFrame& frame);

}  // namespace dasphys
