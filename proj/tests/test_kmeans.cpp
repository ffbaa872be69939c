#include <doctest.h>

#include <algorithm>
#include <random>
#include <stdexcept>

#include "activessf/kmeans.hpp"
#include "oracles.hpp"

using namespace activessf;

namespace {

Matrix points_1d(std::initializer_list<double> xs) {
  Matrix m(xs.size(), 1);
  std::size_t i = 0;
  for (double x : xs) m(i++, 0) = x;
  return m;
}

}  // namespace

TEST_CASE("two obvious groups on a line") {
  const KMeansResult r = lloyd_kmeans(points_1d({0, 1, 10, 11}), {.k = 2, .seed = 3});
  std::vector<double> c{r.centers(0, 0), r.centers(1, 0)};
  std::ranges::sort(c);
  CHECK(c[0] == 0.5);
  CHECK(c[1] == 10.5);
  CHECK(r.objective == 1.0);
  CHECK(r.converged);
  CHECK(r.assignment[0] == r.assignment[1]);
  CHECK(r.assignment[2] == r.assignment[3]);
  CHECK(r.assignment[0] != r.assignment[2]);
}

TEST_CASE("objective never beats the exhaustive optimum") {
  std::mt19937 pick(11);
  for (std::size_t n = 1; n <= 9; ++n)
    for (std::size_t k = 1; k <= std::min<std::size_t>(3, n); ++k)
      for (std::uint32_t trial = 0; trial < 4; ++trial) {
        const Matrix pts = oracle::random_points(n, 1 + trial % 3, pick());
        const double best = oracle::brute_force_kmeans(pts, k);
        const KMeansResult r = lloyd_kmeans(pts, {.k = k, .seed = trial});
        CHECK(r.objective >= best - 1e-9);
      }
}

TEST_CASE("objective trace is non-increasing") {
  for (std::uint32_t s = 0; s < 30; ++s) {
    const Matrix pts = oracle::random_points(60 + s, 3, 100 + s);
    const KMeansResult r = lloyd_kmeans(pts, {.k = 2 + s % 6, .seed = s});
    REQUIRE(r.objective_trace.size() == r.iterations + 1);
    for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
      CHECK(r.objective_trace[i] <= r.objective_trace[i - 1] * (1 + 1e-12) + 1e-12);
    CHECK(std::abs(r.objective - kmeans_objective(pts, r.centers, r.assignment)) < 1e-9 * (1 + r.objective));
  }
}

TEST_CASE("same seed gives the same fit") {
  const Matrix pts = oracle::random_points(200, 4, 5);
  const KMeansResult a = lloyd_kmeans(pts, {.k = 6, .seed = 42});
  const KMeansResult b = lloyd_kmeans(pts, {.k = 6, .seed = 42});
  CHECK(a.centers == b.centers);
  CHECK(a.assignment == b.assignment);
  CHECK(a.objective_trace == b.objective_trace);
}

TEST_CASE("sizes agree with the assignment") {
  const Matrix pts = oracle::random_points(150, 2, 9);
  const KMeansResult r = lloyd_kmeans(pts, {.k = 5, .seed = 1});
  std::vector<std::size_t> count(5, 0);
  for (auto a : r.assignment) ++count[a];
  CHECK(count == r.sizes);
  for (auto s : r.sizes) CHECK(s > 0);
  CHECK(assign_to_centers(pts, r.centers) == r.assignment);
}

TEST_CASE("duplicate points keep every cluster non-empty") {
  Matrix pts(6, 2);
  for (std::size_t i = 0; i < 6; ++i) {
    pts(i, 0) = i < 5 ? 1.0 : 4.0;
    pts(i, 1) = 0.0;
  }
  const KMeansResult r = lloyd_kmeans(pts, {.k = 2, .seed = 0});
  CHECK(r.sizes[0] + r.sizes[1] == 6);
  CHECK(r.objective == 0.0);
}

TEST_CASE("k equal to n puts every point on its own center") {
  const Matrix pts = points_1d({3, -2, 8, 0.5});
  const KMeansResult r = lloyd_kmeans(pts, {.k = 4, .seed = 2});
  CHECK(r.objective == 0.0);
  for (auto s : r.sizes) CHECK(s == 1);
}

TEST_CASE("ties go to the lower center index") {
  Matrix centers(2, 1);
  centers(0, 0) = 0.0;
  centers(1, 0) = 2.0;
  CHECK(assign_to_centers(points_1d({1.0}), centers)[0] == 0);
}

TEST_CASE("invalid k") {
  const Matrix pts = points_1d({1, 2, 3});
  CHECK_THROWS_AS(lloyd_kmeans(pts, {.k = 0}), std::invalid_argument);
  CHECK_THROWS_AS(lloyd_kmeans(pts, {.k = 4}), std::invalid_argument);
}

TEST_CASE("unit uniform stays in [0, 1)") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = unit_uniform(rng);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}
