#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "radon_roi/error.hpp"

namespace radon_roi {

/**
 * Row-major 2-D raster. Pixel (x, y) lives at index y * width + x, with x the
 * column in [0, width) and y the row in [0, height).
 */
template <typename T>
class Raster {
 public:
  using value_type = T;

  Raster() = default;

  Raster(int width, int height, T fill = T{}) : width_(width), height_(height) {
    if (width < 1 || height < 1) {
      throw InvalidArgument("raster dimensions must be positive");
    }
    pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  Raster(int width, int height, std::vector<T> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width < 1 || height < 1) {
      throw InvalidArgument("raster dimensions must be positive");
    }
    if (pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw InvalidArgument("pixel count does not match raster dimensions");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }
  std::size_t size() const { return pixels_.size(); }

  T& at(int x, int y) { return pixels_[index(x, y)]; }
  const T& at(int x, int y) const { return pixels_[index(x, y)]; }

  std::span<T> pixels() { return pixels_; }
  std::span<const T> pixels() const { return pixels_; }

  bool operator==(const Raster&) const = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> pixels_;
};

/// 8-bit grayscale image, gray levels g in [0, 255].
using GrayImage = Raster<std::uint8_t>;
/// Real-valued intensities, used between processing stages.
using RealImage = Raster<double>;

struct RgbPixel {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const RgbPixel&) const = default;
};
using RgbImage = Raster<RgbPixel>;

inline constexpr int kGrayLevels = 256;

/// Nearest integer (ties away from zero), clamped to [0, 255].
std::uint8_t to_gray_level(double value);

// --- I/O ---------------------------------------------------------------

/// Reads a PNG or binary PGM (P5). Colour input is reduced to luminance
/// 0.299r + 0.587g + 0.114b, rounded. Throws IoError when the file cannot be
/// read and FormatError when its content is not a decodable PNG/PGM.
GrayImage load_grayscale(const std::filesystem::path& path);

/// Same as load_grayscale, on an in-memory encoded file.
GrayImage decode_grayscale(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_png(const GrayImage& img);
std::vector<std::uint8_t> encode_png(const RgbImage& img);
void save_png(const GrayImage& img, const std::filesystem::path& path);
void save_png(const RgbImage& img, const std::filesystem::path& path);
void save_pgm(const GrayImage& img, const std::filesystem::path& path);

// --- geometry ------------------------------------------------------------

RealImage to_real(const GrayImage& img);

/// Bilinear resampling on pixel centres (source coordinate (x + 0.5) * in / out - 0.5,
/// clamped at the borders). Identity when the target size equals the source size.
GrayImage resize(const GrayImage& img, int width, int height);
RealImage resize(const RealImage& img, int width, int height);

/// Copies the inclusive rectangle [x0, x1] x [y0, y1].
GrayImage crop(const GrayImage& img, int x0, int y0, int x1, int y1);

// --- enhancement ---------------------------------------------------------

/**
 * Fuzzy hyperbolization:
 *   g' = (L-1) / (e^-1 - 1) * (e^(-mu(g)^beta) - 1),  mu(g) = (g - g_min) / (g_max - g_min).
 * g_min maps to 0 and g_max to 255; beta > 1 darkens. A constant image has no
 * defined membership and is returned unchanged.
 */
GrayImage hyperbolize(const GrayImage& img, double beta);

/// The 2n-2 centred stick orientations of length n, each as n (dx, dy) offsets.
std::vector<std::vector<std::pair<int, int>>> stick_offsets(int stick_length);

/**
 * Sticks speckle filter: every output pixel is the maximum, over all 2n-2 stick
 * orientations, of the mean intensity along a length-n stick centred on it.
 * Near the border a stick averages only its in-bounds samples.
 * Requires n odd, 3 <= n <= min(width, height).
 */
GrayImage sticks_filter(const GrayImage& img, int stick_length);

struct PreprocessOptions {
  bool enhance = true;
  double beta = 1.5;
  int stick_length = 5;
};

/// Hyperbolization followed by sticks filtering; identity when enhance is false.
GrayImage preprocess(const GrayImage& img, const PreprocessOptions& options);

}  // namespace radon_roi
