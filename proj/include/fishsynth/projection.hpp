#pragma once

// Fisheye projection geometry.
//
// A ray with incidence angle phi (angle to the optical axis) and azimuth theta
// lands at radius r(phi) from the principal point, where r follows one of four
// radius laws:
//
//   equidistant      r = c * phi
//   stereographic    r = 2c * tan(phi / 2)
//   equisolid angle  r = 2c * sin(phi / 2)
//   orthographic     r = c * sin(phi)
//
// The undistorted offset (r cos theta, r sin theta) is then perturbed by a
// radial / decentering / affine correction evaluated at that undistorted
// offset. Image coordinates are continuous with pixel (i, j) centered at
// (i + 0.5, j + 0.5).

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "fishsynth/errors.hpp"

namespace fishsynth {

enum class ProjectionModel { Equidistant, Stereographic, EquisolidAngle, Orthographic };

inline constexpr std::array<ProjectionModel, 4> kAllModels = {
    ProjectionModel::Equidistant, ProjectionModel::Stereographic,
    ProjectionModel::EquisolidAngle, ProjectionModel::Orthographic};

constexpr std::string_view to_string(ProjectionModel model) {
  switch (model) {
    case ProjectionModel::Equidistant: return "equidistant";
    case ProjectionModel::Stereographic: return "stereographic";
    case ProjectionModel::EquisolidAngle: return "equisolid";
    case ProjectionModel::Orthographic: return "orthographic";
  }
  return "unknown";
}

inline std::optional<ProjectionModel> parse_projection_model(std::string_view name) {
  for (auto m : kAllModels) {
    if (name == to_string(m)) return m;
  }
  if (name == "equisolid_angle" || name == "equisolid-angle") return ProjectionModel::EquisolidAngle;
  return std::nullopt;
}

inline ProjectionModel projection_model_from_string(std::string_view name) {
  if (auto m = parse_projection_model(name)) return *m;
  throw ConfigError("unknown projection model '" + std::string(name) + "'");
}

/// Largest incidence angle the radius law accepts. Stereographic excludes its
/// bound (tan(pi/2) diverges), the others include it.
constexpr double max_incidence(ProjectionModel model) {
  return model == ProjectionModel::Orthographic ? std::numbers::pi / 2 : std::numbers::pi;
}

constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

struct PixelPoint {
  double x = 0.0;
  double y = 0.0;

  friend constexpr PixelPoint operator+(PixelPoint a, PixelPoint b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr PixelPoint operator-(PixelPoint a, PixelPoint b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr bool operator==(PixelPoint, PixelPoint) = default;
};

inline double norm(PixelPoint p) { return std::hypot(p.x, p.y); }

/// Camera-frame point, optical axis along +z.
struct CameraPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 1.0;
};

/// Direction of a ray: incidence angle to the optical axis and azimuth in the
/// image plane, both radians.
struct Ray {
  double phi = 0.0;
  double theta = 0.0;
};

struct Intrinsics {
  double c = 1.0;                          // principal distance, px
  PixelPoint principal_point{};            // px
  std::array<double, 3> radial{};          // A1 [px^-2], A2 [px^-4], A3 [px^-6]
  std::array<double, 2> decentering{};     // B1, B2 [px^-1]
  std::array<double, 2> affine{};          // C1 horizontal scale, C2 shear
  std::array<int, 2> image_size{0, 0};     // width, height; (0, 0) = unspecified
  double phi_max = std::numbers::pi / 2;   // rad

  bool has_distortion() const {
    for (double v : radial) if (v != 0.0) return true;
    for (double v : decentering) if (v != 0.0) return true;
    for (double v : affine) if (v != 0.0) return true;
    return false;
  }

  friend bool operator==(const Intrinsics&, const Intrinsics&) = default;
};

/// Throws ConfigError when the intrinsics cannot describe a lens of the given model.
inline void validate(ProjectionModel model, const Intrinsics& intr) {
  if (!(intr.c > 0.0) || !std::isfinite(intr.c)) throw ConfigError("principal distance c must be positive");
  if (!(intr.phi_max > 0.0) || intr.phi_max > std::numbers::pi) {
    throw ConfigError("phi_max must lie in (0, 180] degrees");
  }
  if (model == ProjectionModel::Orthographic && intr.phi_max > std::numbers::pi / 2) {
    throw ConfigError("orthographic model requires phi_max <= 90 degrees");
  }
  if (model == ProjectionModel::Stereographic && intr.phi_max >= std::numbers::pi) {
    throw ConfigError("stereographic model requires phi_max < 180 degrees");
  }
  auto [w, h] = intr.image_size;
  if (w < 0 || h < 0) throw ConfigError("image_size must be non-negative");
  if (w > 0 && h > 0) {
    const auto& pp = intr.principal_point;
    if (!(pp.x >= 0.0 && pp.x <= w && pp.y >= 0.0 && pp.y <= h)) {
      throw ConfigError("principal point lies outside the image");
    }
  }
}

/// Image radius of a ray with incidence angle phi under the given radius law.
inline double radius_from_incidence(ProjectionModel model, double c, double phi) {
  if (!(phi >= 0.0)) throw DomainError("incidence angle must be non-negative");
  switch (model) {
    case ProjectionModel::Equidistant:
      if (phi > std::numbers::pi) throw DomainError("equidistant: incidence angle exceeds pi");
      return c * phi;
    case ProjectionModel::Stereographic:
      if (phi >= std::numbers::pi) throw DomainError("stereographic: incidence angle must be below pi");
      return 2.0 * c * std::tan(phi / 2.0);
    case ProjectionModel::EquisolidAngle:
      if (phi > std::numbers::pi) throw DomainError("equisolid: incidence angle exceeds pi");
      return 2.0 * c * std::sin(phi / 2.0);
    case ProjectionModel::Orthographic:
      if (phi > std::numbers::pi / 2) throw DomainError("orthographic: incidence angle exceeds pi/2");
      return c * std::sin(phi);
  }
  throw DomainError("unknown projection model");
}

namespace detail {

// Non-throwing inverse radius law; nullopt outside the invertible range.
inline std::optional<double> incidence_from_radius(ProjectionModel model, double c, double r) {
  if (!(r >= 0.0)) return std::nullopt;
  switch (model) {
    case ProjectionModel::Equidistant: {
      double phi = r / c;
      if (phi > std::numbers::pi) return std::nullopt;
      return phi;
    }
    case ProjectionModel::Stereographic:
      if (!std::isfinite(r)) return std::nullopt;
      return 2.0 * std::atan(r / (2.0 * c));
    case ProjectionModel::EquisolidAngle: {
      double s = r / (2.0 * c);
      if (s > 1.0) return std::nullopt;
      return 2.0 * std::asin(s);
    }
    case ProjectionModel::Orthographic: {
      double s = r / c;
      if (s > 1.0) return std::nullopt;
      return std::asin(s);
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// Exact analytic inverse of radius_from_incidence.
inline double incidence_from_radius(ProjectionModel model, double c, double r) {
  if (auto phi = detail::incidence_from_radius(model, c, r)) return *phi;
  throw DomainError("radius " + std::to_string(r) + " outside the invertible range of the " +
                    std::string(to_string(model)) + " model");
}

/// Correction (dx', dy') for an offset p measured from the principal point.
///
///   dx' = x'(A1 r'^2 + A2 r'^4 + A3 r'^6) + B1 (r'^2 + 2x'^2) + 2 B2 x'y' + C1 x' + C2 y'
///   dy' = y'(A1 r'^2 + A2 r'^4 + A3 r'^6) + 2 B1 x'y' + B2 (r'^2 + 2y'^2)
inline PixelPoint distortion_delta(const Intrinsics& intr, PixelPoint p) {
  const double x = p.x;
  const double y = p.y;
  const double r2 = x * x + y * y;
  const double r4 = r2 * r2;
  const double r6 = r4 * r2;
  const auto [a1, a2, a3] = intr.radial;
  const auto [b1, b2] = intr.decentering;
  const auto [c1, c2] = intr.affine;
  const double radial = a1 * r2 + a2 * r4 + a3 * r6;
  return {x * radial + b1 * (r2 + 2.0 * x * x) + 2.0 * b2 * x * y + c1 * x + c2 * y,
          y * radial + 2.0 * b1 * x * y + b2 * (r2 + 2.0 * y * y)};
}

/// Incidence angle of a camera-frame point, in [0, pi].
inline double incidence_angle(const CameraPoint& p) { return std::atan2(std::hypot(p.x, p.y), p.z); }

/// Non-throwing projection; nullopt for the origin, rays beyond phi_max or an
/// invalid principal distance.
inline std::optional<PixelPoint> try_project_point(ProjectionModel model, const Intrinsics& intr,
                                                   const CameraPoint& p) {
  if (!(intr.c > 0.0)) return std::nullopt;
  const double rho = std::hypot(p.x, p.y);
  if (rho == 0.0 && p.z == 0.0) return std::nullopt;
  const double phi = std::atan2(rho, p.z);
  if (phi > intr.phi_max || phi > max_incidence(model) ||
      (model == ProjectionModel::Stereographic && phi >= std::numbers::pi)) {
    return std::nullopt;
  }
  if (rho == 0.0) return intr.principal_point;
  const double r = radius_from_incidence(model, intr.c, phi);
  const PixelPoint offset{r * (p.x / rho), r * (p.y / rho)};
  return intr.principal_point + offset + distortion_delta(intr, offset);
}

/// Projects a camera-frame point to fisheye pixel coordinates.
///
/// Throws DomainError for the zero vector and OutOfFovError when the ray is
/// steeper than intr.phi_max. Points behind the sensor plane (z <= 0) are valid
/// as long as they stay within phi_max.
inline PixelPoint project_point(ProjectionModel model, const Intrinsics& intr, const CameraPoint& p) {
  if (p.x == 0.0 && p.y == 0.0 && p.z == 0.0) throw DomainError("camera point is the origin");
  const double rho = std::hypot(p.x, p.y);
  const double phi = std::atan2(rho, p.z);
  if (phi > intr.phi_max) throw OutOfFovError("ray incidence exceeds phi_max");
  if (rho == 0.0) return intr.principal_point;
  const double r = radius_from_incidence(model, intr.c, phi);
  const PixelPoint offset{r * (p.x / rho), r * (p.y / rho)};
  return intr.principal_point + offset + distortion_delta(intr, offset);
}

inline constexpr double kUndistortTolerance = 1e-10;  // px
inline constexpr int kUndistortMaxIterations = 20;

enum class UnprojectStatus {
  Ok,
  NotConverged,       // fixed-point distortion removal did not reach tolerance
  OutsideModelRange,  // undistorted radius not invertible under the radius law
  OutsideImageCircle, // invertible, but incidence exceeds phi_max
};

struct UnprojectResult {
  UnprojectStatus status = UnprojectStatus::Ok;
  Ray ray{};
  PixelPoint undistorted_offset{};
  int iterations = 0;

  bool ok() const { return status == UnprojectStatus::Ok; }
};

/// Removes distortion from q - principal_point by fixed-point iteration.
/// Returns the undistorted offset and the iteration count, or nullopt if the
/// update step never fell below kUndistortTolerance.
inline std::optional<std::pair<PixelPoint, int>> remove_distortion(const Intrinsics& intr, PixelPoint distorted) {
  if (!intr.has_distortion()) return std::pair{distorted, 0};
  PixelPoint offset = distorted;
  for (int k = 1; k <= kUndistortMaxIterations; ++k) {
    const PixelPoint next = distorted - distortion_delta(intr, offset);
    const double step = norm(next - offset);
    offset = next;
    if (step < kUndistortTolerance) return std::pair{offset, k};
    if (!std::isfinite(step)) break;
  }
  return std::nullopt;
}

/// Non-throwing unprojection, used by the per-pixel warp loop.
inline UnprojectResult try_unproject_pixel(ProjectionModel model, const Intrinsics& intr, PixelPoint q) {
  UnprojectResult out;
  auto undistorted = remove_distortion(intr, q - intr.principal_point);
  if (!undistorted) {
    out.status = UnprojectStatus::NotConverged;
    out.iterations = kUndistortMaxIterations;
    return out;
  }
  out.undistorted_offset = undistorted->first;
  out.iterations = undistorted->second;
  const double r = norm(out.undistorted_offset);
  auto phi = detail::incidence_from_radius(model, intr.c, r);
  if (!phi) {
    out.status = UnprojectStatus::OutsideModelRange;
    return out;
  }
  if (*phi > intr.phi_max) {
    out.status = UnprojectStatus::OutsideImageCircle;
    return out;
  }
  out.ray.phi = *phi;
  out.ray.theta = r == 0.0 ? 0.0 : std::atan2(out.undistorted_offset.y, out.undistorted_offset.x);
  return out;
}

/// Inverse of project_point: the ray (phi, theta) that lands on pixel q.
/// On the principal point theta is 0 by convention.
inline Ray unproject_pixel(ProjectionModel model, const Intrinsics& intr, PixelPoint q) {
  const auto res = try_unproject_pixel(model, intr, q);
  switch (res.status) {
    case UnprojectStatus::Ok:
      return res.ray;
    case UnprojectStatus::NotConverged:
      throw ConvergenceError("distortion removal did not converge within 20 iterations");
    case UnprojectStatus::OutsideModelRange:
      throw DomainError("pixel lies beyond the invertible range of the " + std::string(to_string(model)) + " model");
    case UnprojectStatus::OutsideImageCircle:
      throw OutOfFovError("pixel lies outside the image circle");
  }
  return res.ray;
}

/// Unit-length camera-frame direction of a ray.
inline CameraPoint ray_direction(const Ray& ray) {
  const double s = std::sin(ray.phi);
  return {s * std::cos(ray.theta), s * std::sin(ray.theta), std::cos(ray.phi)};
}

/// Principal distance that makes the image circle (radius at phi_max) equal to `radius` px.
inline double principal_distance_for_circle(ProjectionModel model, double phi_max, double radius) {
  return radius / radius_from_incidence(model, 1.0, phi_max);
}

/// Radius of the image circle in pixels.
inline double image_circle_radius(ProjectionModel model, const Intrinsics& intr) {
  return radius_from_incidence(model, intr.c, intr.phi_max);
}

}  // namespace fishsynth
