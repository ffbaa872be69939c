#include "activessf/raster.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace activessf {

namespace {

void check_dims(int width, int height) {
  if (width < 1 || height < 1)
    throw std::invalid_argument("image dimensions must be at least 1x1, got " + std::to_string(width) + "x" +
                                std::to_string(height));
}

std::uint8_t to_byte(double v) noexcept {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

RasterImage::RasterImage(int width, int height, Rgb fill) : width_(width), height_(height) {
  check_dims(width, height);
  data_.resize(pixel_count() * 3);
  for (std::size_t i = 0; i < data_.size(); i += 3) {
    data_[i] = fill.r;
    data_[i + 1] = fill.g;
    data_[i + 2] = fill.b;
  }
}

RasterImage::RasterImage(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
  check_dims(width, height);
  if (data_.size() != pixel_count() * 3)
    throw std::invalid_argument("pixel buffer holds " + std::to_string(data_.size()) + " bytes, expected " +
                                std::to_string(pixel_count() * 3));
}

RasterImage RasterImage::crop(const Box& box) const {
  if (box.w < 1 || box.h < 1 || box.x < 0 || box.y < 0 || box.x + box.w > width_ || box.y + box.h > height_)
    throw std::out_of_range("crop box outside image");
  RasterImage out(box.w, box.h);
  for (int y = 0; y < box.h; ++y) {
    const auto src = data_.begin() + static_cast<std::ptrdiff_t>(index(box.x, box.y + y));
    std::copy(src, src + box.w * 3, out.data_.begin() + static_cast<std::ptrdiff_t>(out.index(0, y)));
  }
  return out;
}

Plane extract_plane(const RasterImage& img, int channel) {
  Plane p{img.width(), img.height(), std::vector<double>(img.pixel_count())};
  const auto data = img.data();
  for (std::size_t i = 0; i < p.values.size(); ++i) p.values[i] = data[i * 3 + channel];
  return p;
}

RasterImage normalize_image(const RasterImage& img) {
  RasterImage out = img;
  auto data = out.data();
  for (int c = 0; c < 3; ++c) {
    std::uint8_t lo = 255;
    std::uint8_t hi = 0;
    for (std::size_t i = c; i < data.size(); i += 3) {
      lo = std::min(lo, data[i]);
      hi = std::max(hi, data[i]);
    }
    if (lo == hi) continue;
    const double scale = 255.0 / (hi - lo);
    for (std::size_t i = c; i < data.size(); i += 3) data[i] = to_byte((data[i] - lo) * scale);
  }
  return out;
}

GaussianKernel build_gaussian_kernel(const GaussianKernelSpec& spec) {
  if (spec.size < 1 || spec.size % 2 == 0)
    throw std::invalid_argument("kernel size must be odd and positive, got " + std::to_string(spec.size));
  if (!(spec.sigma > 0.0) || !std::isfinite(spec.sigma))
    throw std::invalid_argument("kernel sigma must be positive and finite");

  GaussianKernel k;
  k.size = spec.size;
  k.weights.resize(static_cast<std::size_t>(spec.size) * spec.size);
  const int r = spec.size / 2;
  const double denom = 2.0 * spec.sigma * spec.sigma;
  double sum = 0.0;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      const double w = std::exp(-(dx * dx + dy * dy) / denom);
      k.weights[static_cast<std::size_t>(dy + r) * spec.size + (dx + r)] = w;
      sum += w;
    }
  for (double& w : k.weights) w /= sum;
  return k;
}

Plane convolve(const Plane& plane, const GaussianKernel& kernel) {
  const int w = plane.width;
  const int h = plane.height;
  const int r = kernel.size / 2;
  Plane out{w, h, std::vector<double>(plane.values.size())};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int dy = -r; dy <= r; ++dy) {
        const int sy = std::clamp(y + dy, 0, h - 1);
        for (int dx = -r; dx <= r; ++dx) {
          const int sx = std::clamp(x + dx, 0, w - 1);
          acc += kernel.at(dx, dy) * plane.at(sx, sy);
        }
      }
      out.values[static_cast<std::size_t>(y) * w + x] = acc;
    }
  return out;
}

RasterImage gaussian_filter(const RasterImage& img, const GaussianKernelSpec& spec) {
  const GaussianKernel kernel = build_gaussian_kernel(spec);
  if (kernel.size == 1) return img;
  RasterImage out(img.width(), img.height());
  auto data = out.data();
  for (int c = 0; c < 3; ++c) {
    const Plane filtered = convolve(extract_plane(img, c), kernel);
    for (std::size_t i = 0; i < filtered.values.size(); ++i) data[i * 3 + c] = to_byte(filtered.values[i]);
  }
  return out;
}

HsvPixel rgb_to_hsv(Rgb c) noexcept {
  const double r = c.r;
  const double g = c.g;
  const double b = c.b;
  const double hi = std::max({r, g, b});
  const double lo = std::min({r, g, b});
  const double span = hi - lo;

  HsvPixel p;
  p.v = hi;
  p.s = hi > 0.0 ? span * 255.0 / hi : 0.0;
  if (span > 0.0) {
    double deg;
    if (hi == r)
      deg = 60.0 * (g - b) / span;
    else if (hi == g)
      deg = 120.0 + 60.0 * (b - r) / span;
    else
      deg = 240.0 + 60.0 * (r - g) / span;
    if (deg < 0.0) deg += 360.0;
    p.h = deg / 2.0;
    if (p.h >= 180.0) p.h -= 180.0;
  }
  return p;
}

Rgb hsv_to_rgb(const HsvPixel& p) noexcept {
  const double v = p.v;
  const double chroma = v * p.s / 255.0;
  const double lo = v - chroma;
  const double sector = p.h / 30.0;  // 60 degrees per sector
  const int i = static_cast<int>(std::floor(sector)) % 6;
  const double f = sector - std::floor(sector);
  const double rising = lo + chroma * f;
  const double falling = v - chroma * f;
  double r, g, b;
  switch (i) {
    case 0: r = v, g = rising, b = lo; break;
    case 1: r = falling, g = v, b = lo; break;
    case 2: r = lo, g = v, b = rising; break;
    case 3: r = lo, g = falling, b = v; break;
    case 4: r = rising, g = lo, b = v; break;
    default: r = v, g = lo, b = falling; break;
  }
  return {to_byte(r), to_byte(g), to_byte(b)};
}

HsvImage rgb_to_hsv(const RasterImage& img) {
  HsvImage out{img.width(), img.height(), std::vector<HsvPixel>(img.pixel_count())};
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      out.pixels[static_cast<std::size_t>(y) * img.width() + x] = rgb_to_hsv(img.pixel(x, y));
  return out;
}

}  // namespace activessf
