#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "activessf/dense.hpp"
#include "activessf/features.hpp"

namespace activessf {

// Member-to-own-center distance range of one cluster. Zero for singletons and
// empty clusters.
struct DistanceBounds {
  double lower = 0.0;
  double upper = 0.0;

  friend bool operator==(const DistanceBounds&, const DistanceBounds&) = default;
};

struct PrototypeModel {
  Matrix centers;  // k x dim
  std::vector<std::vector<std::string>> members;
  std::vector<std::size_t> sizes;
  std::vector<DistanceBounds> bounds;
  std::size_t n_max = 0;
  double objective = 0.0;
  std::uint64_t seed = 0;
  // Objective at the seeds and after each iteration (diagnostic; not serialized).
  std::vector<double> objective_trace;
  // Majority-label share per cluster over labeled members; 0 for clusters
  // without labeled members (diagnostic).
  std::vector<double> label_purity;

  std::size_t k() const noexcept { return centers.rows(); }
  std::size_t dim() const noexcept { return centers.cols(); }
};

struct PrototypeOptions {
  std::size_t k = 11;
  std::uint64_t seed = 0;
  std::size_t max_iters = 300;
  double tol = 1e-6;
};

// Lloyd k-means over the feature vectors, followed by per-cluster LB/UB.
// Throws std::invalid_argument for an empty set or k outside [1, size].
PrototypeModel fit_prototypes(const FeatureSet& labeled, const PrototypeOptions& options = {});

struct Assignment {
  std::size_t cluster = 0;
  double distance = 0.0;  // Euclidean

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

// Nearest prototype, ties to the lowest index. Throws std::invalid_argument on
// a dimension mismatch.
Assignment assign_nearest(std::span<const double> x, const PrototypeModel& model);

// Fills sizes, n_max, bounds, objective and purity from centers plus a
// membership assignment over `features`.
void summarize_clusters(PrototypeModel& model, const FeatureSet& features,
                        const std::vector<std::uint32_t>& assignment);

// "APM1" | u32 version | u32 k | u32 dim | u64 seed | f64 objective | u64 n_max
// k x { u64 size | f64 lb | f64 ub | dim x f64 center | size x (u32 len, id) }
// k x f64 purity | u32 crc32
std::vector<std::uint8_t> encode_model(const PrototypeModel& model);
PrototypeModel decode_model(std::span<const std::uint8_t> bytes);
void write_model(const PrototypeModel& model, const std::filesystem::path& path);
PrototypeModel read_model(const std::filesystem::path& path);

}  // namespace activessf
