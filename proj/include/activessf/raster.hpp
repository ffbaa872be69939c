#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace activessf {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Axis-aligned pixel rectangle.
struct Box {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  friend bool operator==(const Box&, const Box&) = default;
};

// Interleaved 8-bit RGB image, row-major. Always at least 1x1.
class RasterImage {
 public:
  RasterImage(int width, int height, Rgb fill = {});
  RasterImage(int width, int height, std::vector<std::uint8_t> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }

  Rgb pixel(int x, int y) const noexcept {
    const std::size_t i = index(x, y);
    return {data_[i], data_[i + 1], data_[i + 2]};
  }
  void set_pixel(int x, int y, Rgb c) noexcept {
    const std::size_t i = index(x, y);
    data_[i] = c.r;
    data_[i + 1] = c.g;
    data_[i + 2] = c.b;
  }
  std::uint8_t channel(int x, int y, int c) const noexcept { return data_[index(x, y) + c]; }

  std::span<const std::uint8_t> data() const noexcept { return data_; }
  std::span<std::uint8_t> data() noexcept { return data_; }

  // Throws std::out_of_range when the box leaves the image.
  RasterImage crop(const Box& box) const;

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * 3;
  }

  int width_;
  int height_;
  std::vector<std::uint8_t> data_;
};

// Single-channel real-valued plane, used for filtering before 8-bit write-back.
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  double at(int x, int y) const noexcept { return values[static_cast<std::size_t>(y) * width + x]; }
};

Plane extract_plane(const RasterImage& img, int channel);

struct GaussianKernelSpec {
  int size = 3;
  double sigma = 1.5;
};

// Normalized square kernel, row-major, size x size.
struct GaussianKernel {
  int size = 1;
  std::vector<double> weights;

  double at(int dx, int dy) const noexcept {
    const int r = size / 2;
    return weights[static_cast<std::size_t>(dy + r) * size + (dx + r)];
  }
};

// Per-channel min-max stretch to [0, 255]. Constant channels are left as-is.
RasterImage normalize_image(const RasterImage& img);

// Samples exp(-(x^2 + y^2) / (2 sigma^2)) at integer offsets and normalizes to
// unit sum. The 1/(2 pi sigma^2) prefactor cancels in normalization.
// Throws std::invalid_argument for an even/non-positive size or sigma <= 0.
GaussianKernel build_gaussian_kernel(const GaussianKernelSpec& spec);

// 2-D convolution with edge-replicate borders. Each output pixel sums its
// neighbourhood in fixed row-major kernel order.
Plane convolve(const Plane& plane, const GaussianKernel& kernel);

// Channel-wise convolve(), rounded to nearest and clamped on write-back.
RasterImage gaussian_filter(const RasterImage& img, const GaussianKernelSpec& spec);

// Hue on the half-degree scale [0, 180); saturation and value on [0, 255].
// Components are kept real-valued so the conversion is invertible.
struct HsvPixel {
  double h = 0.0;
  double s = 0.0;
  double v = 0.0;
};

struct HsvImage {
  int width = 0;
  int height = 0;
  std::vector<HsvPixel> pixels;

  const HsvPixel& at(int x, int y) const noexcept { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

HsvPixel rgb_to_hsv(Rgb c) noexcept;
Rgb hsv_to_rgb(const HsvPixel& p) noexcept;
HsvImage rgb_to_hsv(const RasterImage& img);

}  // namespace activessf
