#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "activessf/raster.hpp"

namespace activessf {

using ColorCenter = std::array<double, 3>;

struct PixelClusterModel {
  std::vector<ColorCenter> centers;
  std::vector<std::uint32_t> assignments;  // one per pixel, row-major
  std::vector<std::size_t> cluster_sizes;
  double objective = 0.0;
  std::vector<double> objective_trace;

  std::size_t k() const noexcept { return centers.size(); }
};

struct QuantizeOptions {
  std::size_t first_stage_k = 20;
  std::size_t merged_k = 10;
  std::uint64_t seed = 0;
  std::size_t max_iters = 100;
  // When non-zero and the image exceeds 512x512, the Lloyd fit runs on every
  // n-th pixel and all pixels are assigned to the fitted centers afterwards.
  std::size_t fit_stride = 0;
};

// Lloyd k-means over RGB pixel values (tolerance 1e-4 on center movement).
// Throws std::invalid_argument when k == 0 or k exceeds the pixel count.
PixelClusterModel kmeans_pixels(const RasterImage& img, std::size_t k, std::uint64_t seed,
                                std::size_t max_iters = 100);

// Closest-pair agglomeration: the two nearest centers are fused into their
// size-weighted mean until target_k remain. Ties go to the lexicographically
// smallest (i, j). The survivor keeps index i; later indices shift down.
// The result carries no objective (the pixel values are not part of the model).
PixelClusterModel merge_clusters(const PixelClusterModel& model, std::size_t target_k);

std::size_t count_distinct_colors(const RasterImage& img);

// Two-stage quantization: k-means at first_stage_k, merge down to merged_k,
// then each pixel takes its rounded cluster color. Images with fewer distinct
// colors than first_stage_k cluster at their distinct-color count.
RasterImage quantize_image(const RasterImage& img, const QuantizeOptions& options = {});
RasterImage quantize_image(const RasterImage& img, std::uint64_t seed);

}  // namespace activessf
