#include "activessf/color_quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

#include "activessf/kmeans.hpp"

namespace activessf {

namespace {

Matrix pixel_matrix(const RasterImage& img, std::size_t stride = 1) {
  const std::size_t n = (img.pixel_count() + stride - 1) / stride;
  Matrix m(n, 3);
  const auto data = img.data();
  for (std::size_t i = 0, p = 0; i < n; ++i, p += stride) {
    m(i, 0) = data[p * 3];
    m(i, 1) = data[p * 3 + 1];
    m(i, 2) = data[p * 3 + 2];
  }
  return m;
}

std::vector<ColorCenter> to_centers(const Matrix& m) {
  std::vector<ColorCenter> out(m.rows());
  for (std::size_t c = 0; c < m.rows(); ++c) out[c] = {m(c, 0), m(c, 1), m(c, 2)};
  return out;
}

double color_distance2(const ColorCenter& a, const ColorCenter& b) {
  double d = 0.0;
  for (int j = 0; j < 3; ++j) d += (a[j] - b[j]) * (a[j] - b[j]);
  return d;
}

}  // namespace

PixelClusterModel kmeans_pixels(const RasterImage& img, std::size_t k, std::uint64_t seed, std::size_t max_iters) {
  const Matrix points = pixel_matrix(img);
  KMeansResult fit = lloyd_kmeans(points, {.k = k, .seed = seed, .max_iters = max_iters, .tol = 1e-4});
  return {to_centers(fit.centers), std::move(fit.assignment), std::move(fit.sizes), fit.objective,
          std::move(fit.objective_trace)};
}

PixelClusterModel merge_clusters(const PixelClusterModel& model, std::size_t target_k) {
  if (target_k == 0) throw std::invalid_argument("merge target must be at least 1");
  if (target_k > model.k()) throw std::invalid_argument("merge target exceeds current cluster count");

  std::vector<ColorCenter> centers = model.centers;
  std::vector<std::size_t> sizes = model.cluster_sizes;
  // remap[original] -> current index
  std::vector<std::uint32_t> remap(model.k());
  for (std::size_t c = 0; c < remap.size(); ++c) remap[c] = static_cast<std::uint32_t>(c);

  while (centers.size() > target_k) {
    std::size_t bi = 0, bj = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < centers.size(); ++i)
      for (std::size_t j = i + 1; j < centers.size(); ++j) {
        const double d = color_distance2(centers[i], centers[j]);
        if (d < best) {
          best = d;
          bi = i;
          bj = j;
        }
      }
    const std::size_t total = sizes[bi] + sizes[bj];
    if (total > 0) {
      for (int ch = 0; ch < 3; ++ch)
        centers[bi][ch] = (centers[bi][ch] * static_cast<double>(sizes[bi]) +
                           centers[bj][ch] * static_cast<double>(sizes[bj])) /
                          static_cast<double>(total);
    }
    sizes[bi] = total;
    centers.erase(centers.begin() + static_cast<std::ptrdiff_t>(bj));
    sizes.erase(sizes.begin() + static_cast<std::ptrdiff_t>(bj));
    for (auto& r : remap) {
      if (r == bj)
        r = static_cast<std::uint32_t>(bi);
      else if (r > bj)
        --r;
    }
  }

  PixelClusterModel out;
  out.centers = std::move(centers);
  out.cluster_sizes = std::move(sizes);
  out.assignments.resize(model.assignments.size());
  for (std::size_t i = 0; i < model.assignments.size(); ++i) out.assignments[i] = remap[model.assignments[i]];
  return out;
}

std::size_t count_distinct_colors(const RasterImage& img) {
  std::unordered_set<std::uint32_t> seen;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const Rgb c = img.pixel(x, y);
      seen.insert((std::uint32_t{c.r} << 16) | (std::uint32_t{c.g} << 8) | c.b);
    }
  return seen.size();
}

RasterImage quantize_image(const RasterImage& img, const QuantizeOptions& options) {
  if (options.first_stage_k == 0 || options.merged_k == 0)
    throw std::invalid_argument("quantization cluster counts must be positive");
  if (options.merged_k > options.first_stage_k)
    throw std::invalid_argument("merged cluster count exceeds first-stage count");

  const std::size_t distinct = count_distinct_colors(img);
  const std::size_t k1 = std::min(options.first_stage_k, distinct);
  const std::size_t k2 = std::min(options.merged_k, k1);

  PixelClusterModel model;
  const bool subsample = options.fit_stride > 1 && img.width() * static_cast<std::size_t>(img.height()) > 512u * 512u;
  if (subsample) {
    const Matrix sample = pixel_matrix(img, options.fit_stride);
    const std::size_t k = std::min(k1, sample.rows());
    KMeansResult fit = lloyd_kmeans(sample, {.k = k, .seed = options.seed, .max_iters = options.max_iters, .tol = 1e-4});
    model.centers = to_centers(fit.centers);
    model.assignments = assign_to_centers(pixel_matrix(img), fit.centers);
    model.cluster_sizes.assign(k, 0);
    for (auto a : model.assignments) ++model.cluster_sizes[a];
  } else {
    model = kmeans_pixels(img, k1, options.seed, options.max_iters);
  }
  model = merge_clusters(model, std::min(k2, model.k()));

  std::vector<Rgb> palette(model.k());
  for (std::size_t c = 0; c < palette.size(); ++c) {
    auto round_channel = [&](int ch) {
      return static_cast<std::uint8_t>(std::clamp(std::lround(model.centers[c][ch]), 0L, 255L));
    };
    palette[c] = {round_channel(0), round_channel(1), round_channel(2)};
  }

  RasterImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      out.set_pixel(x, y, palette[model.assignments[static_cast<std::size_t>(y) * img.width() + x]]);
  return out;
}

RasterImage quantize_image(const RasterImage& img, std::uint64_t seed) {
  return quantize_image(img, QuantizeOptions{.seed = seed});
}

}  // namespace activessf
