#include "activessf/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include "activessf/parallel.hpp"

namespace activessf {

namespace {

constexpr std::size_t kParallelChunk = 4096;

struct Nearest {
  std::uint32_t index = 0;
  double dist2 = 0.0;
};

Nearest nearest_center(std::span<const double> p, const Matrix& centers) {
  Nearest best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t c = 0; c < centers.rows(); ++c) {
    const double d = squared_distance(p, centers.row(c));
    if (d < best.dist2) best = {static_cast<std::uint32_t>(c), d};
  }
  return best;
}

Matrix seed_plus_plus(const Matrix& points, std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = points.rows();
  Matrix centers(k, points.cols());
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());

  std::size_t pick = static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(n));
  pick = std::min(pick, n - 1);
  for (std::size_t c = 0; c < k; ++c) {
    if (c > 0) {
      double total = 0.0;
      for (double v : d2) total += v;
      if (total > 0.0) {
        const double target = unit_uniform(rng) * total;
        double acc = 0.0;
        pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          acc += d2[i];
          if (acc > target && d2[i] > 0.0) {
            pick = i;
            break;
          }
        }
        // Guard against landing on a zero-weight tail through rounding.
        while (d2[pick] == 0.0 && pick > 0) --pick;
      } else {
        // Every point coincides with a chosen center; duplicates are unavoidable.
        pick = static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(n));
        pick = std::min(pick, n - 1);
      }
    }
    std::ranges::copy(points.row(pick), centers.row(c).begin());
    const auto chosen = centers.row(c);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(points.row(i), chosen));
  }
  return centers;
}

// Reassigns every point; returns true when any assignment changed.
bool assign_step(const Matrix& points, const Matrix& centers, std::vector<std::uint32_t>& assignment,
                 std::vector<double>& dist2) {
  const std::size_t n = points.rows();
  std::vector<std::uint8_t> changed(n, 0);
  parallel_for(n, kParallelChunk, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Nearest best = nearest_center(points.row(i), centers);
      changed[i] = best.index != assignment[i];
      assignment[i] = best.index;
      dist2[i] = best.dist2;
    }
  });
  return std::ranges::any_of(changed, [](std::uint8_t c) { return c != 0; });
}

// Means in point order, so the reduction is independent of threading.
void update_step(const Matrix& points, const std::vector<std::uint32_t>& assignment, Matrix& centers,
                 std::vector<std::size_t>& sizes) {
  const std::size_t k = centers.rows();
  const std::size_t dim = points.cols();
  Matrix sums(k, dim);
  std::ranges::fill(sizes, 0);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const auto c = assignment[i];
    ++sizes[c];
    auto dst = sums.row(c);
    const auto src = points.row(i);
    for (std::size_t j = 0; j < dim; ++j) dst[j] += src[j];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (sizes[c] == 0) continue;
    auto dst = centers.row(c);
    const auto src = sums.row(c);
    const double inv = static_cast<double>(sizes[c]);
    for (std::size_t j = 0; j < dim; ++j) dst[j] = src[j] / inv;
  }
}

// Returns true when at least one empty cluster was re-seeded.
bool reseed_empty(const Matrix& points, std::vector<std::uint32_t>& assignment, Matrix& centers,
                  std::vector<std::size_t>& sizes) {
  bool reseeded = false;
  for (std::size_t c = 0; c < centers.rows(); ++c) {
    if (sizes[c] != 0) continue;
    std::size_t far = points.rows();
    double far_d2 = 0.0;
    for (std::size_t i = 0; i < points.rows(); ++i) {
      if (sizes[assignment[i]] < 2) continue;
      const double d = squared_distance(points.row(i), centers.row(assignment[i]));
      if (d > far_d2) {
        far_d2 = d;
        far = i;
      }
    }
    if (far == points.rows()) continue;
    --sizes[assignment[far]];
    assignment[far] = static_cast<std::uint32_t>(c);
    sizes[c] = 1;
    std::ranges::copy(points.row(far), centers.row(c).begin());
    reseeded = true;
  }
  return reseeded;
}

}  // namespace

std::vector<std::uint32_t> assign_to_centers(const Matrix& points, const Matrix& centers) {
  std::vector<std::uint32_t> out(points.rows());
  parallel_for(points.rows(), kParallelChunk, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) out[i] = nearest_center(points.row(i), centers).index;
  });
  return out;
}

double kmeans_objective(const Matrix& points, const Matrix& centers, const std::vector<std::uint32_t>& assignment) {
  double total = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) total += squared_distance(points.row(i), centers.row(assignment[i]));
  return total;
}

KMeansResult lloyd_kmeans(const Matrix& points, const KMeansOptions& options) {
  const std::size_t n = points.rows();
  if (options.k == 0) throw std::invalid_argument("k-means requires k >= 1");
  if (options.k > n)
    throw std::invalid_argument("k-means requires k <= point count (k=" + std::to_string(options.k) +
                                ", points=" + std::to_string(n) + ")");

  std::mt19937_64 rng(options.seed);
  KMeansResult res;
  res.centers = seed_plus_plus(points, options.k, rng);
  res.assignment.assign(n, 0);
  res.sizes.assign(options.k, 0);
  std::vector<double> dist2(n, 0.0);

  // Initial assignment against the seeds; the trace starts here.
  assign_step(points, res.centers, res.assignment, dist2);
  res.objective_trace.push_back(kmeans_objective(points, res.centers, res.assignment));

  Matrix previous = res.centers;
  for (std::size_t iter = 0; iter < options.max_iters; ++iter) {
    if (iter > 0) {
      const bool changed = assign_step(points, res.centers, res.assignment, dist2);
      if (!changed) {
        res.converged = true;
        break;
      }
    }
    previous = res.centers;
    update_step(points, res.assignment, res.centers, res.sizes);
    const bool reseeded = reseed_empty(points, res.assignment, res.centers, res.sizes);
    res.objective_trace.push_back(kmeans_objective(points, res.centers, res.assignment));
    res.iterations = iter + 1;

    double max_move = 0.0;
    for (std::size_t c = 0; c < options.k; ++c)
      max_move = std::max(max_move, std::sqrt(squared_distance(previous.row(c), res.centers.row(c))));
    if (!reseeded && max_move < options.tol) {
      res.converged = true;
      break;
    }
  }

  std::ranges::fill(res.sizes, 0);
  for (auto a : res.assignment) ++res.sizes[a];
  res.objective = res.objective_trace.back();
  return res;
}

}  // namespace activessf
