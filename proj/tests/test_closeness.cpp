#include <cmath>
#include <random>

#include "autoscale/error.hpp"
#include "autoscale/closeness.hpp"
#include "doctest.h"

using namespace autoscale;

namespace {

// Every pair, no pruning.
std::vector<double> pairwise_oracle(const PointSet& p) {
  std::vector<double> d(p.size(), INFINITY);
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < p.size(); ++j)
      if (i != j) d[i] = std::min(d[i], std::hypot(p[i].x - p[j].x, p[i].y - p[j].y));
  return d;
}

PointSet random_points(std::uint32_t w, std::uint32_t h, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(0.0, w), uy(0.0, h);
  std::vector<Point> pts;
  for (std::size_t i = 0; i < n; ++i) pts.push_back({ux(rng), uy(rng)});
  return PointSet(w, h, std::move(pts));
}

}  // namespace

TEST_CASE("nn_distances") {
  CHECK(nn_distances(PointSet(10, 10, {{1, 1}, {4, 5}})) == std::vector<double>{5, 5});
  CHECK(nn_distances(PointSet(10, 1, {{0, 0}, {1, 0}, {3, 0}})) == std::vector<double>{1, 1, 2});

  const auto dup = closeness_stats(PointSet(10, 10, {{2, 2}, {2, 2}, {7, 7}}));
  CHECK(dup.has_duplicates);
  CHECK(dup.nn_distances[0] == 0.0);

  CHECK_THROWS_AS(nn_distances(PointSet(5, 5, {{1, 1}})), ValidationError);
  CHECK_THROWS_AS(closeness_level(PointSet(5, 5)), ValidationError);
}

TEST_CASE("closeness_level") {
  CHECK(closeness_level(PointSet(10, 10, {{1, 1}, {4, 5}})) == 5.0);
  CHECK(closeness_level(PointSet(10, 1, {{0, 0}, {1, 0}, {3, 0}})) == doctest::Approx(4.0 / 3.0));

  std::vector<Point> grid;
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) grid.push_back({1.0 + 3.5 * x, 1.0 + 3.5 * y});
  CHECK(closeness_level(PointSet(30, 30, grid)) == doctest::Approx(3.5));
}

TEST_CASE("closeness is invariant to rigid motion and linear in scale") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto p = random_points(100, 100, 25, seed);
    const double s = closeness_level(p);

    const double theta = 0.3 * seed;
    std::vector<Point> moved;
    for (const auto& q : p.points()) {
      const double x = q.x - 50, y = q.y - 50;
      moved.push_back({std::cos(theta) * x - std::sin(theta) * y + 120.0,
                       std::sin(theta) * x + std::cos(theta) * y + 120.0});
    }
    CHECK(std::abs(closeness_level(PointSet(300, 300, moved)) - s) <= 1e-9);

    const double r = 0.5 + 0.1 * seed;
    const auto scaled = scale_points(p, r);
    if (scaled.dropped() == 0) CHECK(std::abs(closeness_level(scaled) - r * s) <= 1e-9);
  }
}

TEST_CASE("grid-accelerated search equals brute force") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto p = random_points(400, 300, 2500 + 100 * seed, seed);
    const auto d = nn_distances(p);
    CHECK(d == reference::nn_distances(p));
    const auto o = pairwise_oracle(p);
    double worst = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) worst = std::max(worst, std::abs(d[i] - o[i]));
    CHECK(worst <= 1e-12);
  }
  // Clustered with duplicates.
  std::vector<Point> pts;
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int i = 0; i < 2100; ++i) {
    const double x = std::clamp(50 + n(rng) + (i % 3) * 30, 0.0, 199.0);
    pts.push_back({x, std::clamp(60 + n(rng), 0.0, 199.0)});
    if (i % 100 == 0) pts.push_back(pts.back());
  }
  const PointSet c(200, 200, pts);
  CHECK(nn_distances(c) == reference::nn_distances(c));
}
