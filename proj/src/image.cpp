#include "radon_roi/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>

namespace radon_roi {

std::uint8_t to_gray_level(double value) {
  const double r = std::round(value);
  if (!(r > 0.0)) return 0;
  if (r > 255.0) return 255;
  return static_cast<std::uint8_t>(r);
}

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw IoError("no such image file: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open image file: " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot write file: " + path.string());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw IoError("short write: " + path.string());
  }
}

std::uint8_t luminance(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  if (r == g && g == b) return r;
  return to_gray_level(0.299 * r + 0.587 * g + 0.114 * b);
}

bool is_png(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

GrayImage decode_png(std::span<const std::uint8_t> bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw FormatError(std::string("undecodable PNG: ") + image.message);
  }
  image.format = PNG_FORMAT_RGBA;
  std::vector<std::uint8_t> rgba(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, rgba.data(), 0, nullptr)) {
    png_image_free(&image);
    throw FormatError(std::string("undecodable PNG: ") + image.message);
  }
  const int w = static_cast<int>(image.width);
  const int h = static_cast<int>(image.height);
  GrayImage out(w, h);
  auto px = out.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    px[i] = luminance(rgba[4 * i], rgba[4 * i + 1], rgba[4 * i + 2]);
  }
  return out;
}

// Binary PGM: "P5" <ws> width <ws> height <ws> maxval <single ws> raster.
// '#' comments may appear between header tokens.
GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 2;
  auto next_token = [&]() -> long {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    long value = 0;
    std::size_t digits = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      value = value * 10 + (bytes[pos] - '0');
      if (value > 1'000'000) throw FormatError("PGM header value out of range");
      ++pos;
      ++digits;
    }
    if (digits == 0) throw FormatError("malformed PGM header");
    return value;
  };
  const long w = next_token();
  const long h = next_token();
  const long maxval = next_token();
  if (w < 1 || h < 1 || maxval < 1 || maxval > 65535) {
    throw FormatError("invalid PGM dimensions or maxval");
  }
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw FormatError("malformed PGM header");
  }
  ++pos;
  const std::size_t count = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  const std::size_t sample = maxval < 256 ? 1 : 2;
  if (bytes.size() - pos < count * sample) {
    throw FormatError("truncated PGM raster");
  }
  GrayImage out(static_cast<int>(w), static_cast<int>(h));
  auto px = out.pixels();
  for (std::size_t i = 0; i < count; ++i) {
    unsigned v = sample == 1 ? bytes[pos + i]
                             : (static_cast<unsigned>(bytes[pos + 2 * i]) << 8) | bytes[pos + 2 * i + 1];
    v = std::min<unsigned>(v, static_cast<unsigned>(maxval));
    px[i] = maxval == 255 ? static_cast<std::uint8_t>(v) : to_gray_level(255.0 * v / static_cast<double>(maxval));
  }
  return out;
}

std::vector<std::uint8_t> encode_png_raw(const void* data, int width, int height, png_uint_32 format) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, data, 0, nullptr)) {
    throw FormatError(std::string("PNG encoding failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, data, 0, nullptr)) {
    throw FormatError(std::string("PNG encoding failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

template <typename T>
Raster<T> resize_impl(const Raster<T>& img, int width, int height, auto&& store) {
  if (width < 1 || height < 1) {
    throw InvalidArgument("resize target dimensions must be positive");
  }
  if (img.empty()) {
    throw InvalidArgument("cannot resize an empty image");
  }
  const int in_w = img.width();
  const int in_h = img.height();
  struct Tap {
    int i0, i1;
    double f;
  };
  auto taps = [](int in, int out) {
    std::vector<Tap> t(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
      double s = (o + 0.5) * scale - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(in - 1));
      const int i0 = static_cast<int>(std::floor(s));
      const int i1 = std::min(i0 + 1, in - 1);
      t[static_cast<std::size_t>(o)] = {i0, i1, s - i0};
    }
    return t;
  };
  const auto tx = taps(in_w, width);
  const auto ty = taps(in_h, height);
  Raster<T> out(width, height);
  for (int y = 0; y < height; ++y) {
    const Tap& vy = ty[static_cast<std::size_t>(y)];
    for (int x = 0; x < width; ++x) {
      const Tap& vx = tx[static_cast<std::size_t>(x)];
      const double a = img.at(vx.i0, vy.i0);
      const double b = img.at(vx.i1, vy.i0);
      const double c = img.at(vx.i0, vy.i1);
      const double d = img.at(vx.i1, vy.i1);
      const double top = a + vx.f * (b - a);
      const double bottom = c + vx.f * (d - c);
      out.at(x, y) = store(top + vy.f * (bottom - top));
    }
  }
  return out;
}

double round_half_away(double v) { return std::round(v); }

}  // namespace

GrayImage decode_grayscale(std::span<const std::uint8_t> bytes) {
  if (is_png(bytes)) return decode_png(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return decode_pgm(bytes);
  throw FormatError("unsupported image format (expected PNG or binary PGM)");
}

GrayImage load_grayscale(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_grayscale(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_png(const GrayImage& img) {
  return encode_png_raw(img.pixels().data(), img.width(), img.height(), PNG_FORMAT_GRAY);
}

std::vector<std::uint8_t> encode_png(const RgbImage& img) {
  static_assert(sizeof(RgbPixel) == 3);
  return encode_png_raw(img.pixels().data(), img.width(), img.height(), PNG_FORMAT_RGB);
}

void save_png(const GrayImage& img, const std::filesystem::path& path) { write_file(path, encode_png(img)); }

void save_png(const RgbImage& img, const std::filesystem::path& path) { write_file(path, encode_png(img)); }

void save_pgm(const GrayImage& img, const std::filesystem::path& path) {
  const std::string header =
      "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), img.pixels().begin(), img.pixels().end());
  write_file(path, bytes);
}

RealImage to_real(const GrayImage& img) {
  RealImage out(img.width(), img.height());
  std::ranges::transform(img.pixels(), out.pixels().begin(), [](std::uint8_t v) { return double(v); });
  return out;
}

GrayImage resize(const GrayImage& img, int width, int height) {
  if (img.width() == width && img.height() == height) return img;
  return resize_impl(img, width, height, [](double v) { return to_gray_level(v); });
}

RealImage resize(const RealImage& img, int width, int height) {
  if (img.width() == width && img.height() == height) return img;
  return resize_impl(img, width, height, [](double v) { return v; });
}

GrayImage crop(const GrayImage& img, int x0, int y0, int x1, int y1) {
  if (x0 < 0 || y0 < 0 || x1 >= img.width() || y1 >= img.height() || x0 > x1 || y0 > y1) {
    throw InvalidArgument("crop rectangle outside image");
  }
  GrayImage out(x1 - x0 + 1, y1 - y0 + 1);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) out.at(x - x0, y - y0) = img.at(x, y);
  }
  return out;
}

GrayImage hyperbolize(const GrayImage& img, double beta) {
  if (!(beta > 0.0)) {
    throw InvalidArgument("hyperbolization beta must be positive");
  }
  const auto [lo_it, hi_it] = std::ranges::minmax_element(img.pixels());
  const int g_min = *lo_it;
  const int g_max = *hi_it;
  if (g_min == g_max) return img;

  const double scale = (kGrayLevels - 1) / (std::exp(-1.0) - 1.0);
  std::uint8_t lut[kGrayLevels] = {};
  for (int g = g_min; g <= g_max; ++g) {
    const double mu = static_cast<double>(g - g_min) / (g_max - g_min);
    lut[g] = to_gray_level(scale * (std::exp(-std::pow(mu, beta)) - 1.0));
  }
  // Pin the endpoints; the formula gives them exactly in real arithmetic.
  lut[g_min] = 0;
  lut[g_max] = kGrayLevels - 1;

  GrayImage out = img;
  for (auto& v : out.pixels()) v = lut[v];
  return out;
}

std::vector<std::vector<std::pair<int, int>>> stick_offsets(int stick_length) {
  if (stick_length < 3 || stick_length % 2 == 0) {
    throw InvalidArgument("stick length must be odd and >= 3");
  }
  const int half = (stick_length - 1) / 2;
  // One boundary point per antipodal pair of the n x n square: the top edge
  // (n points) and the right edge without its corners (n - 2 points).
  std::vector<std::pair<int, int>> ends;
  for (int dx = -half; dx <= half; ++dx) ends.emplace_back(dx, -half);
  for (int dy = -half + 1; dy <= half - 1; ++dy) ends.emplace_back(half, dy);

  std::vector<std::vector<std::pair<int, int>>> sticks;
  sticks.reserve(ends.size());
  for (const auto& [ex, ey] : ends) {
    std::vector<std::pair<int, int>> stick;
    stick.reserve(static_cast<std::size_t>(stick_length));
    for (int k = -half; k <= half; ++k) {
      const double t = static_cast<double>(k) / half;
      stick.emplace_back(static_cast<int>(round_half_away(t * ex)), static_cast<int>(round_half_away(t * ey)));
    }
    sticks.push_back(std::move(stick));
  }
  return sticks;
}

GrayImage sticks_filter(const GrayImage& img, int stick_length) {
  const auto sticks = stick_offsets(stick_length);
  if (stick_length > std::min(img.width(), img.height())) {
    throw InvalidArgument("stick length exceeds image dimensions");
  }
  const int w = img.width();
  const int h = img.height();
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double best = 0.0;
      for (const auto& stick : sticks) {
        int sum = 0;
        int count = 0;
        for (const auto& [dx, dy] : stick) {
          const int sx = x + dx;
          const int sy = y + dy;
          if (sx < 0 || sy < 0 || sx >= w || sy >= h) continue;
          sum += img.at(sx, sy);
          ++count;
        }
        // The centre sample is always in bounds, so count >= 1.
        best = std::max(best, static_cast<double>(sum) / count);
      }
      out.at(x, y) = to_gray_level(best);
    }
  }
  return out;
}

GrayImage preprocess(const GrayImage& img, const PreprocessOptions& options) {
  if (!options.enhance) return img;
  return sticks_filter(hyperbolize(img, options.beta), options.stick_length);
}

}  // namespace radon_roi
