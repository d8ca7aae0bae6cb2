#pragma once

// PNG / JPEG codecs backed by OpenCV's imgcodecs.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "fishsynth/errors.hpp"
#include "fishsynth/raster.hpp"

namespace fishsynth {

namespace detail {

inline Raster raster_from_mat(const cv::Mat& decoded) {
  cv::Mat bgr;
  if (decoded.depth() != CV_8U) {
    decoded.convertTo(bgr, CV_8U, decoded.depth() == CV_16U ? 1.0 / 257.0 : 1.0);
  } else {
    bgr = decoded;
  }
  Raster out(bgr.cols, bgr.rows);
  const int channels = bgr.channels();
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<std::uint8_t>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      const auto* p = row + static_cast<std::ptrdiff_t>(x) * channels;
      out.set(x, y, channels >= 3 ? Rgb{p[2], p[1], p[0]} : Rgb{p[0], p[0], p[0]});
    }
  }
  return out;
}

inline cv::Mat mat_from_raster(const Raster& raster) {
  cv::Mat bgr(raster.height(), raster.width(), CV_8UC3);
  for (int y = 0; y < raster.height(); ++y) {
    auto* row = bgr.ptr<std::uint8_t>(y);
    for (int x = 0; x < raster.width(); ++x) {
      const Rgb c = raster.at(x, y);
      row[3 * x] = c.b;
      row[3 * x + 1] = c.g;
      row[3 * x + 2] = c.r;
    }
  }
  return bgr;
}

}  // namespace detail

/// File extensions treated as images when walking a corpus.
inline bool has_image_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" || ext == ".ppm" || ext == ".tif" ||
         ext == ".tiff" || ext == ".webp";
}

inline Raster decode_image(const std::vector<std::uint8_t>& bytes) {
  if (bytes.empty()) throw IoError("empty image buffer");
  const cv::Mat decoded = cv::imdecode(bytes, cv::IMREAD_COLOR);
  if (decoded.empty()) throw IoError("undecodable image data");
  return detail::raster_from_mat(decoded);
}

inline Raster read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_image(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

inline std::vector<std::uint8_t> encode_png(const Raster& raster) {
  if (raster.empty()) throw IoError("cannot encode an empty raster");
  std::vector<std::uint8_t> bytes;
  const std::vector<int> params{cv::IMWRITE_PNG_COMPRESSION, 3};
  if (!cv::imencode(".png", detail::mat_from_raster(raster), bytes, params)) throw IoError("PNG encoding failed");
  return bytes;
}

inline std::vector<std::uint8_t> encode_jpeg(const Raster& raster, int quality = 95) {
  if (raster.empty()) throw IoError("cannot encode an empty raster");
  std::vector<std::uint8_t> bytes;
  const std::vector<int> params{cv::IMWRITE_JPEG_QUALITY, quality};
  if (!cv::imencode(".jpg", detail::mat_from_raster(raster), bytes, params)) throw IoError("JPEG encoding failed");
  return bytes;
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

/// Writes PNG, or JPEG when the extension says so.
inline void write_image(const std::filesystem::path& path, const Raster& raster) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  write_bytes(path, ext == ".jpg" || ext == ".jpeg" ? encode_jpeg(raster) : encode_png(raster));
}

}  // namespace fishsynth
