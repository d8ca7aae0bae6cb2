#pragma once

// Inverse-mapping synthesis of fisheye images from perspective sources.
//
// The letterboxed source is treated as the image plane of a virtual pinhole
// camera looking down the fisheye optical axis. Every output pixel is
// unprojected to a ray, the ray is intersected with the pinhole plane and the
// source is sampled bilinearly there. Pixels outside the image circle, rays at
// or beyond 90 degrees and rays missing the source plane come out black.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include "fishsynth/errors.hpp"
#include "fishsynth/projection.hpp"
#include "fishsynth/raster.hpp"

namespace fishsynth {

inline constexpr int kDefaultOutputSize = 512;
inline constexpr double kDefaultSourceHfov = deg_to_rad(50.0);
inline constexpr double kDefaultPhiMax = deg_to_rad(92.5);

/// Per-variant synthesis parameters.
struct ViewParams {
  double offset_distance = 0.0;  // px, principal-point displacement
  double offset_azimuth = 0.0;   // rad, direction of the displacement
  double source_hfov = kDefaultSourceHfov;
  int output_size = kDefaultOutputSize;

  friend bool operator==(const ViewParams&, const ViewParams&) = default;
};

inline void validate(const ViewParams& view) {
  if (view.output_size <= 0) throw ConfigError("output_size must be positive");
  if (!(view.offset_distance >= 0.0) || view.offset_distance > view.output_size / 6.0) {
    throw ConfigError("offset_distance must lie in [0, output_size / 6]");
  }
  if (!(view.source_hfov > 0.0 && view.source_hfov < std::numbers::pi)) {
    throw ConfigError("source_hfov must lie in (0, 180) degrees");
  }
  if (!std::isfinite(view.offset_azimuth)) throw ConfigError("offset_azimuth must be finite");
}

/// Image center displaced by the view's offset.
inline PixelPoint effective_principal_point(const ViewParams& view) {
  const double half = view.output_size / 2.0;
  return {half + view.offset_distance * std::cos(view.offset_azimuth),
          half + view.offset_distance * std::sin(view.offset_azimuth)};
}

/// Default lens for a square output: principal point at the center and the
/// image circle inscribed in the frame. Orthographic lenses are capped at 90 degrees.
inline Intrinsics inscribed_intrinsics(ProjectionModel model, int output_size = kDefaultOutputSize,
                                       double phi_max = kDefaultPhiMax) {
  Intrinsics intr;
  intr.phi_max = std::min(phi_max, model == ProjectionModel::Stereographic ? std::nextafter(std::numbers::pi, 0.0)
                                                                           : max_incidence(model));
  intr.c = principal_distance_for_circle(model, intr.phi_max, output_size / 2.0);
  intr.principal_point = {output_size / 2.0, output_size / 2.0};
  intr.image_size = {output_size, output_size};
  return intr;
}

/// The per-pixel inverse map of one synthesis configuration.
class FisheyeWarp {
 public:
  /// `source_width` x `source_height` is the size of the (letterboxed) source.
  FisheyeWarp(ProjectionModel model, const Intrinsics& intr, const ViewParams& view, int source_width,
              int source_height)
      : model_(model), intr_(intr), view_(view), source_width_(source_width), source_height_(source_height) {
    validate(view);
    if (intr.image_size[0] != view.output_size || intr.image_size[1] != view.output_size) {
      throw ConfigError("intrinsics image_size does not match the view's output_size");
    }
    intr_.principal_point = effective_principal_point(view);
    validate(model, intr_);
    focal_ = (source_width / 2.0) / std::tan(view.source_hfov / 2.0);
  }

  ProjectionModel model() const { return model_; }
  /// Intrinsics with the principal point moved to the effective one.
  const Intrinsics& intrinsics() const { return intr_; }
  const ViewParams& view() const { return view_; }
  /// Focal length of the virtual pinhole source camera, source px.
  double source_focal() const { return focal_; }

  /// Source-plane coordinates seen by output position q, or nullopt when the
  /// position must be black.
  std::optional<PixelPoint> source_at(PixelPoint q) const {
    const auto res = try_unproject_pixel(model_, intr_, q);
    if (!res.ok()) return std::nullopt;
    const double phi = res.ray.phi;
    if (phi >= std::numbers::pi / 2) return std::nullopt;
    const double r = norm(res.undistorted_offset);
    PixelPoint uv{source_width_ / 2.0, source_height_ / 2.0};
    if (r > 0.0) {
      const double t = focal_ * std::tan(phi) / r;
      uv.x += t * res.undistorted_offset.x;
      uv.y += t * res.undistorted_offset.y;
    }
    if (!(uv.x >= 0.0 && uv.x <= source_width_ && uv.y >= 0.0 && uv.y <= source_height_)) return std::nullopt;
    return uv;
  }

  /// Renders the output for a source of the size given at construction.
  Raster apply(const Raster& source) const {
    if (source.width() != source_width_ || source.height() != source_height_) {
      throw ConfigError("source raster size differs from the warp's configured source size");
    }
    const int n = view_.output_size;
    Raster out(n, n);
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        if (auto uv = source_at({i + 0.5, j + 0.5})) out.set(i, j, to_rgb(sample_bilinear(source, uv->x, uv->y)));
      }
    }
    return out;
  }

 private:
  ProjectionModel model_;
  Intrinsics intr_;
  ViewParams view_;
  int source_width_;
  int source_height_;
  double focal_ = 1.0;
};

/// Letterboxes src to the view's output size (a no-op when already square at
/// that size) and synthesizes the fisheye image. Bit-deterministic.
inline Raster synthesize_fisheye(const Raster& src, ProjectionModel model, const Intrinsics& intr,
                                 const ViewParams& view) {
  validate(view);
  const Raster normalized = letterbox_normalize(src, view.output_size);
  const FisheyeWarp warp(model, intr, view, normalized.width(), normalized.height());
  return warp.apply(normalized);
}

/// White grid on black: a 2-px cross through the center and 1-px lines every
/// `spacing` px on either side, mirror-symmetric about both center lines.
inline Raster make_grid_raster(int size, int spacing) {
  if (spacing <= 0) throw ConfigError("grid spacing must be positive");
  Raster grid(size, size);
  const int half = size / 2;
  auto on_line = [&](int k) {
    const int d = k >= half ? k - half : half - 1 - k;
    return d % spacing == 0;
  };
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      if (on_line(x) || on_line(y)) grid.set(x, y, {255, 255, 255});
    }
  }
  return grid;
}

/// Fisheye rendering of a regular grid, for eyeballing a lens configuration.
inline Raster render_distortion_grid(ProjectionModel model, const Intrinsics& intr, int spacing,
                                     const ViewParams& view = {}) {
  const Raster grid = make_grid_raster(view.output_size, spacing);
  return synthesize_fisheye(grid, model, intr, view);
}

}  // namespace fishsynth
