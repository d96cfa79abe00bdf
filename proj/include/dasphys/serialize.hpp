#pragma once

#include <json.hpp>

#include "dasphys/channel.hpp"
#include "dasphys/physics.hpp"
#include "dasphys/signal.hpp"

namespace dasphys {

// JSON forms used by manifests and model configs. Doubles are written with
// round-trip precision, so from_json(to_json(x)) == x.
nlohmann::json to_json(const FrameGeometry& geometry);
FrameGeometry geometry_from_json(const nlohmann::json& j);

nlohmann::json to_json(const NoiseSpec& noise);
NoiseSpec noise_from_json(const nlohmann::json& j);

nlohmann::json to_json(const EventSpec& spec);
EventSpec event_spec_from_json(const nlohmann::json& j);

nlohmann::json to_json(const FeatureCurve& curve);
FeatureCurve curve_from_json(const nlohmann::json& j);

Axis parse_axis(std::string_view name);
ColumnAxis parse_column_axis(std::string_view name);
Units parse_units(std::string_view name);

}  // namespace dasphys
