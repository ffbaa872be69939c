#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "activessf/dense.hpp"

namespace activessf {

struct KMeansOptions {
  std::size_t k = 1;
  std::uint64_t seed = 0;
  std::size_t max_iters = 100;
  // Stop once no center moves farther than this (Euclidean).
  double tol = 1e-4;
};

struct KMeansResult {
  Matrix centers;                        // k x dim
  std::vector<std::uint32_t> assignment;  // per point
  std::vector<std::size_t> sizes;         // per cluster
  double objective = 0.0;                 // sum of squared distances to assigned centers
  // Objective at the seeds, then after every completed iteration. Non-increasing.
  std::vector<double> objective_trace;
  std::size_t iterations = 0;
  bool converged = false;
};

// Lloyd's algorithm with k-means++ seeding.
//
// Assignment picks the nearest center by squared Euclidean distance, ties to
// the lowest index. Centers are the arithmetic mean of their members. A cluster
// that empties is re-seeded at the point lying farthest from its current
// center (taken from a cluster with at least two members); if every point sits
// exactly on its center the empty cluster is left in place with size 0.
//
// Deterministic for a fixed seed. Throws std::invalid_argument when k == 0 or
// k exceeds the number of points.
KMeansResult lloyd_kmeans(const Matrix& points, const KMeansOptions& options);

// Nearest-center index per point (ties to the lowest index).
std::vector<std::uint32_t> assign_to_centers(const Matrix& points, const Matrix& centers);

double kmeans_objective(const Matrix& points, const Matrix& centers, const std::vector<std::uint32_t>& assignment);

// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw; fixed across
// standard library implementations.
template <typename Engine>
double unit_uniform(Engine& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace activessf
