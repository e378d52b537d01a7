#include "radon_roi/radon.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

namespace radon_roi {

namespace {

constexpr double kOffsetGrid = 1048576.0;     // 2^20
constexpr double kIntensityGrid = 16777216.0;  // 2^24

// Max-normalised intensities on a 2^-24 grid. Scaling the input by c > 0
// leaves the result unchanged, so everything downstream is bit-identical.
RealImage normalize_intensity(const RealImage& img) {
  const double peak = *std::ranges::max_element(img.pixels());
  RealImage out = img;
  if (!(peak > 0.0)) {
    std::ranges::fill(out.pixels(), 0.0);
    return out;
  }
  for (auto& v : out.pixels()) {
    v = std::round(std::max(v, 0.0) / peak * kIntensityGrid) / kIntensityGrid;
  }
  return out;
}

}  // namespace

ProjectionMatrix::ProjectionMatrix(int num_angles, int bins) : num_angles_(num_angles), bins_(bins) {
  if (num_angles < 1 || bins < 1) {
    throw InvalidArgument("projection matrix needs at least one angle and one bin");
  }
  values_.assign(static_cast<std::size_t>(num_angles) * static_cast<std::size_t>(bins), 0.0);
}

double projection_angle(int angle_index, int num_angles) {
  return std::numbers::pi * angle_index / num_angles;
}

int native_bin_count(int width, int height) {
  int bins = static_cast<int>(std::ceil(std::hypot(double(width), double(height))));
  if ((bins - width) % 2 != 0) ++bins;
  return bins;
}

double detector_offset(int x, int y, int width, int height, double cos_t, double sin_t) {
  const double dx = x - (width - 1) / 2.0;
  const double dy = y - (height - 1) / 2.0;
  return std::round((dx * cos_t + dy * sin_t) * kOffsetGrid) / kOffsetGrid;
}

ProjectionMatrix native_projections(const RealImage& img, int num_angles) {
  if (num_angles < 1) throw InvalidArgument("need at least one projection angle");
  const int w = img.width();
  const int h = img.height();
  const int bins = native_bin_count(w, h);
  const double half = bins / 2.0;
  ProjectionMatrix out(num_angles, bins);
  for (int k = 0; k < num_angles; ++k) {
    const double theta = projection_angle(k, num_angles);
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    auto row = out.row(k);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double rho = detector_offset(x, y, w, h, c, s);
        const int bin = std::clamp(static_cast<int>(std::floor(rho + half)), 0, bins - 1);
        row[static_cast<std::size_t>(bin)] += img.at(x, y);
      }
    }
  }
  return out;
}

std::vector<double> resample_projection(std::span<const double> row, int bins) {
  if (bins < 1) throw InvalidArgument("resampled projection needs at least one bin");
  if (row.empty()) throw InvalidArgument("cannot resample an empty projection");
  const auto n = row.size();
  std::vector<double> out(static_cast<std::size_t>(bins));
  if (n == static_cast<std::size_t>(bins)) {
    std::ranges::copy(row, out.begin());
    return out;
  }
  const double last = static_cast<double>(n - 1);
  for (int j = 0; j < bins; ++j) {
    const double t = bins == 1 ? last / 2.0 : last * j / (bins - 1);
    const auto i0 = std::min(static_cast<std::size_t>(std::floor(t)), n - 1);
    const auto i1 = std::min(i0 + 1, n - 1);
    const double f = t - static_cast<double>(i0);
    out[static_cast<std::size_t>(j)] = row[i0] + f * (row[i1] - row[i0]);
  }
  return out;
}

ProjectionMatrix radon_projections(const RealImage& img, int num_angles, int bins) {
  if (bins < 1) throw InvalidArgument("need at least one projection bin");
  const ProjectionMatrix native = native_projections(img, num_angles);
  ProjectionMatrix out(num_angles, bins);
  for (int k = 0; k < num_angles; ++k) {
    const auto resampled = resample_projection(native.row(k), bins);
    std::ranges::copy(resampled, out.row(k).begin());
  }
  return out;
}

double positive_median(std::span<const double> row) {
  std::vector<double> positive;
  positive.reserve(row.size());
  for (double v : row) {
    if (v > 0.0) positive.push_back(v);
  }
  if (positive.empty()) return 0.0;
  std::ranges::sort(positive);
  const auto m = positive.size() / 2;
  return positive.size() % 2 == 1 ? positive[m] : (positive[m - 1] + positive[m]) / 2.0;
}

std::vector<bool> threshold_projection(std::span<const double> row) {
  std::vector<bool> bits(row.size(), false);
  const double t = positive_median(row);
  if (!(t > 0.0)) return bits;
  for (std::size_t j = 0; j < row.size(); ++j) bits[j] = row[j] >= t;
  return bits;
}

RadonBarcode::RadonBarcode(int num_angles, int bins) : num_angles_(num_angles), bins_(bins) {
  if (num_angles < 1 || bins < 1) {
    throw InvalidArgument("barcode needs at least one angle and one bin");
  }
  words_.assign((size() + 63) / 64, 0);
}

void RadonBarcode::set(std::size_t i, bool value) {
  const std::uint64_t mask = std::uint64_t{1} << (i % 64);
  if (value) {
    words_[i / 64] |= mask;
  } else {
    words_[i / 64] &= ~mask;
  }
}

std::size_t RadonBarcode::count() const {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

std::string RadonBarcode::to_string() const {
  std::string text(size(), '0');
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (bit(i)) text[i] = '1';
  }
  return text;
}

RadonBarcode RadonBarcode::from_string(std::string_view text, int num_angles, int bins) {
  RadonBarcode code(num_angles, bins);
  if (text.size() != code.size()) {
    throw FormatError("barcode has " + std::to_string(text.size()) + " bits, expected " +
                      std::to_string(code.size()));
  }
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '1') {
      code.set(i, true);
    } else if (text[i] != '0') {
      throw FormatError("barcode text contains a character other than '0'/'1'");
    }
  }
  return code;
}

RadonBarcode generate_barcode(const RealImage& img, int side, int num_angles) {
  if (side < 2) throw InvalidArgument("barcode side must be >= 2");
  if (num_angles < 1) throw InvalidArgument("barcode needs at least one angle");
  const RealImage resized = resize(normalize_intensity(img), side, side);
  const ProjectionMatrix proj = radon_projections(resized, num_angles, side);
  RadonBarcode code(num_angles, side);
  std::size_t offset = 0;
  for (int k = 0; k < num_angles; ++k) {
    const auto bits = threshold_projection(proj.row(k));
    for (bool b : bits) code.set(offset++, b);
  }
  return code;
}

RadonBarcode generate_barcode(const GrayImage& img, int side, int num_angles) {
  return generate_barcode(to_real(img), side, num_angles);
}

std::size_t hamming(const RadonBarcode& a, const RadonBarcode& b) {
  if (a.num_angles() != b.num_angles() || a.bins() != b.bins()) {
    throw InvalidArgument("hamming distance between barcodes of different shape");
  }
  const auto wa = a.words();
  const auto wb = b.words();
  std::size_t d = 0;
  for (std::size_t i = 0; i < wa.size(); ++i) d += static_cast<std::size_t>(std::popcount(wa[i] ^ wb[i]));
  return d;
}

}  // namespace radon_roi
