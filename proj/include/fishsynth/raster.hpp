#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "fishsynth/errors.hpp"

namespace fishsynth {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend constexpr bool operator==(Rgb, Rgb) = default;
};

inline constexpr Rgb kBlack{0, 0, 0};

/// Row-major 8-bit RGB image.
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, Rgb fill = kBlack) : width_(width), height_(height) {
    if (width < 0 || height < 0) throw ConfigError("raster dimensions must be non-negative");
    data_.resize(static_cast<std::size_t>(width) * height * 3);
    if (fill != kBlack) {
      for (std::size_t i = 0; i < data_.size(); i += 3) {
        data_[i] = fill.r;
        data_[i + 1] = fill.g;
        data_[i + 2] = fill.b;
      }
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return width_ == 0 || height_ == 0; }

  Rgb at(int x, int y) const {
    const auto* p = &data_[index(x, y)];
    return {p[0], p[1], p[2]};
  }
  void set(int x, int y, Rgb c) {
    auto* p = &data_[index(x, y)];
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }

  std::span<const std::uint8_t> bytes() const { return data_; }
  std::span<std::uint8_t> bytes() { return data_; }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  std::size_t index(int x, int y) const { return (static_cast<std::size_t>(y) * width_ + x) * 3; }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Bilinear sample at continuous coordinates (pixel (i, j) is centered at
/// (i + 0.5, j + 0.5)). Coordinates past the outermost pixel centers clamp to
/// the edge; bounds checks against the raster are the caller's job.
inline std::array<double, 3> sample_bilinear(const Raster& src, double u, double v) {
  const double fx = std::clamp(u - 0.5, 0.0, static_cast<double>(src.width() - 1));
  const double fy = std::clamp(v - 0.5, 0.0, static_cast<double>(src.height() - 1));
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const int x1 = std::min(x0 + 1, src.width() - 1);
  const int y1 = std::min(y0 + 1, src.height() - 1);
  const double tx = fx - x0;
  const double ty = fy - y0;
  const Rgb p00 = src.at(x0, y0), p10 = src.at(x1, y0), p01 = src.at(x0, y1), p11 = src.at(x1, y1);
  auto lerp2 = [&](std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d) {
    const double top = a + (b - a) * tx;
    const double bottom = c + (d - c) * tx;
    return top + (bottom - top) * ty;
  };
  return {lerp2(p00.r, p10.r, p01.r, p11.r), lerp2(p00.g, p10.g, p01.g, p11.g),
          lerp2(p00.b, p10.b, p01.b, p11.b)};
}

inline Rgb to_rgb(const std::array<double, 3>& v) {
  auto q = [](double x) { return static_cast<std::uint8_t>(std::clamp(std::floor(x + 0.5), 0.0, 255.0)); };
  return {q(v[0]), q(v[1]), q(v[2])};
}

/// Where letterbox_normalize places the scaled source inside the square canvas.
struct ContentRegion {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  friend constexpr bool operator==(ContentRegion, ContentRegion) = default;
};

inline ContentRegion letterbox_region(int width, int height, int target) {
  const double scale = static_cast<double>(target) / std::max(width, height);
  ContentRegion region;
  region.width = width >= height ? target : std::max(1, static_cast<int>(std::lround(width * scale)));
  region.height = height >= width ? target : std::max(1, static_cast<int>(std::lround(height * scale)));
  region.x = (target - region.width) / 2;
  region.y = (target - region.height) / 2;
  return region;
}

/// Scales src so its longer side equals target (bilinear, aspect preserved),
/// centers it on a target x target canvas and fills the rest with black.
/// Sources smaller than target are upscaled.
inline Raster letterbox_normalize(const Raster& src, int target = 512) {
  if (src.empty()) throw ConfigError("cannot letterbox an empty raster");
  if (target <= 0) throw ConfigError("letterbox target must be positive");
  if (src.width() == target && src.height() == target) return src;

  const ContentRegion region = letterbox_region(src.width(), src.height(), target);
  const double sx = static_cast<double>(src.width()) / region.width;
  const double sy = static_cast<double>(src.height()) / region.height;
  Raster out(target, target);
  for (int j = 0; j < region.height; ++j) {
    const double v = (j + 0.5) * sy;
    for (int i = 0; i < region.width; ++i) {
      const double u = (i + 0.5) * sx;
      out.set(region.x + i, region.y + j, to_rgb(sample_bilinear(src, u, v)));
    }
  }
  return out;
}

}  // namespace fishsynth
