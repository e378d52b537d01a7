#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "radon_roi/image.hpp"

namespace radon_roi {

/// A x B table of projection values R(rho, theta_k); row k holds angle
/// theta_k = k * 180deg / A.
class ProjectionMatrix {
 public:
  ProjectionMatrix(int num_angles, int bins);

  int num_angles() const { return num_angles_; }
  int bins() const { return bins_; }

  std::span<double> row(int angle) {
    return {values_.data() + static_cast<std::size_t>(angle) * bins_, static_cast<std::size_t>(bins_)};
  }
  std::span<const double> row(int angle) const {
    return {values_.data() + static_cast<std::size_t>(angle) * bins_, static_cast<std::size_t>(bins_)};
  }
  std::span<const double> values() const { return values_; }

 private:
  int num_angles_;
  int bins_;
  std::vector<double> values_;
};

/// theta_k in radians on the half-open grid [0, pi).
double projection_angle(int angle_index, int num_angles);

/**
 * Number of unit-width detector bins used before resampling: the image
 * diagonal rounded up, then bumped by one if needed so it has the parity of
 * the width (at theta = 0 every pixel column then falls on a bin centre).
 */
int native_bin_count(int width, int height);

/// Detector coordinate of pixel (x, y) relative to the image centre,
/// snapped to a 2^-20 grid so bin membership has no floating-point ties.
double detector_offset(int x, int y, int width, int height, double cos_t, double sin_t);

/**
 * Discrete Radon transform by pixel-driven accumulation: pixel (x, y) adds its
 * intensity to the bin nearest rho = (x - cx) cos(theta) + (y - cy) sin(theta).
 * The result has native_bin_count() bins and every row sums to the image mass.
 */
ProjectionMatrix native_projections(const RealImage& img, int num_angles);

/// Linear resampling of a projection onto `bins` evenly spaced points spanning
/// its first and last sample.
std::vector<double> resample_projection(std::span<const double> row, int bins);

/// native_projections() with every row resampled to exactly `bins` values.
ProjectionMatrix radon_projections(const RealImage& img, int num_angles, int bins);

/// Median of the strictly positive entries (mean of the two middle values for
/// an even count). Returns 0 when no entry is positive.
double positive_median(std::span<const double> row);

/// bit_j = row_j >= median of positive entries; an all-zero row gives all zeros.
std::vector<bool> threshold_projection(std::span<const double> row);

/**
 * Concatenation of thresholded projections, angle-major: fragment for theta_0
 * occupies bits [0, B), theta_1 bits [B, 2B), ... Bits are packed into 64-bit
 * words, bit i in word i / 64 at position i % 64.
 */
class RadonBarcode {
 public:
  RadonBarcode() = default;
  RadonBarcode(int num_angles, int bins);

  int num_angles() const { return num_angles_; }
  int bins() const { return bins_; }
  std::size_t size() const { return static_cast<std::size_t>(num_angles_) * static_cast<std::size_t>(bins_); }

  bool bit(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1U; }
  void set(std::size_t i, bool value);
  std::size_t count() const;

  std::span<const std::uint64_t> words() const { return words_; }

  /// '0'/'1' text, angle-major.
  std::string to_string() const;
  /// Inverse of to_string(); the text length must equal num_angles * bins.
  static RadonBarcode from_string(std::string_view text, int num_angles, int bins);

  bool operator==(const RadonBarcode&) const = default;

 private:
  int num_angles_ = 0;
  int bins_ = 0;
  std::vector<std::uint64_t> words_;
};

/**
 * Radon barcode of an image: intensities are normalised by the image maximum,
 * the image is resized to side x side, projected at num_angles angles into
 * side bins, and each projection thresholded at its positive median.
 */
RadonBarcode generate_barcode(const RealImage& img, int side, int num_angles);
RadonBarcode generate_barcode(const GrayImage& img, int side, int num_angles);

/// Population count of a XOR b. Throws InvalidArgument on shape mismatch.
std::size_t hamming(const RadonBarcode& a, const RadonBarcode& b);

}  // namespace radon_roi
