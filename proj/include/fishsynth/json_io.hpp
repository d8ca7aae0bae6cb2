#pragma once

// JSON forms of the lens and view descriptions.
//
// Lens:  {"model": "equidistant", "c": 163.0, "principal_point": [256, 256],
//         "radial": [A1, A2, A3], "decentering": [B1, B2], "affine": [C1, C2],
//         "image_size": [512, 512], "phi_max_deg": 92.5}
// View:  {"offset_distance": 40, "offset_azimuth_deg": 30,
//         "source_hfov_deg": 50, "output_size": 512}
//
// Omitted distortion arrays are zero; angles are degrees on the wire.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "fishsynth/errors.hpp"
#include "fishsynth/projection.hpp"
#include "fishsynth/warp.hpp"

namespace fishsynth {

using Json = nlohmann::ordered_json;

/// A projection model together with its intrinsics.
struct Lens {
  ProjectionModel model = ProjectionModel::Equidistant;
  Intrinsics intrinsics;

  friend bool operator==(const Lens&, const Lens&) = default;
};

namespace detail {

template <std::size_t N>
std::array<double, N> read_array(const Json& j, const char* key, std::array<double, N> fallback = {}) {
  if (!j.contains(key)) return fallback;
  const Json& a = j.at(key);
  if (!a.is_array() || a.size() != N) {
    throw ConfigError(std::string("'") + key + "' must be an array of " + std::to_string(N) + " numbers");
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    if (!a[i].is_number()) throw ConfigError(std::string("'") + key + "' must contain numbers");
    out[i] = a[i].get<double>();
  }
  return out;
}

inline double read_number(const Json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw ConfigError(std::string("'") + key + "' must be a number");
  return j.at(key).get<double>();
}

}  // namespace detail

inline Json to_json(const Lens& lens) {
  const Intrinsics& in = lens.intrinsics;
  Json j;
  j["model"] = std::string(to_string(lens.model));
  j["c"] = in.c;
  j["principal_point"] = {in.principal_point.x, in.principal_point.y};
  j["radial"] = in.radial;
  j["decentering"] = in.decentering;
  j["affine"] = in.affine;
  j["image_size"] = in.image_size;
  j["phi_max_deg"] = rad_to_deg(in.phi_max);
  return j;
}

/// Parses and validates a lens. `model`, `c` and `principal_point` are required.
inline Lens lens_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("lens description must be a JSON object");
  for (const char* key : {"model", "c", "principal_point"}) {
    if (!j.contains(key)) throw ConfigError(std::string("lens description lacks '") + key + "'");
  }
  if (!j.at("model").is_string()) throw ConfigError("'model' must be a string");
  Lens lens;
  lens.model = projection_model_from_string(j.at("model").get<std::string>());
  Intrinsics& in = lens.intrinsics;
  in.c = detail::read_number(j, "c", 0.0);
  const auto pp = detail::read_array<2>(j, "principal_point");
  in.principal_point = {pp[0], pp[1]};
  in.radial = detail::read_array<3>(j, "radial");
  in.decentering = detail::read_array<2>(j, "decentering");
  in.affine = detail::read_array<2>(j, "affine");
  const auto size = detail::read_array<2>(j, "image_size");
  in.image_size = {static_cast<int>(size[0]), static_cast<int>(size[1])};
  // Default: the 185-degree lens, or 180 degrees for orthographic.
  const double default_phi_max = std::min(kDefaultPhiMax, max_incidence(lens.model));
  in.phi_max = deg_to_rad(detail::read_number(j, "phi_max_deg", rad_to_deg(default_phi_max)));
  validate(lens.model, in);
  return lens;
}

inline Json to_json(const ViewParams& view) {
  Json j;
  j["offset_distance"] = view.offset_distance;
  j["offset_azimuth_deg"] = rad_to_deg(view.offset_azimuth);
  j["source_hfov_deg"] = rad_to_deg(view.source_hfov);
  j["output_size"] = view.output_size;
  return j;
}

/// Missing keys take their defaults from `base`.
inline ViewParams view_from_json(const Json& j, const ViewParams& base = {}) {
  if (!j.is_object()) throw ConfigError("view description must be a JSON object");
  ViewParams view = base;
  view.offset_distance = detail::read_number(j, "offset_distance", base.offset_distance);
  view.offset_azimuth = deg_to_rad(detail::read_number(j, "offset_azimuth_deg", rad_to_deg(base.offset_azimuth)));
  view.source_hfov = deg_to_rad(detail::read_number(j, "source_hfov_deg", rad_to_deg(base.source_hfov)));
  view.output_size = static_cast<int>(detail::read_number(j, "output_size", base.output_size));
  validate(view);
  return view;
}

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace fishsynth
