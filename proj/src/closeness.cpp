#include "autoscale/closeness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace autoscale {

namespace {

constexpr std::size_t kGridThreshold = 2000;

void require_pairs(const PointSet& points) {
  if (points.size() < 2)
    throw ValidationError("nearest-neighbor distance needs at least 2 points");
}

double squared(const Point& a, const Point& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

// Uniform bucket grid; rings are searched until the ring's inner distance
// exceeds the best candidate, so the minimum is exact.
std::vector<double> grid_nn(const PointSet& points) {
  const auto pts = points.points();
  const std::size_t n = pts.size();
  const double area = double(points.width()) * points.height();
  const double cell = std::max(1.0, std::sqrt(area / double(n)) * 1.5);
  const auto gw = static_cast<std::int64_t>(std::ceil(points.width() / cell));
  const auto gh = static_cast<std::int64_t>(std::ceil(points.height() / cell));
  std::vector<std::vector<std::size_t>> buckets(static_cast<std::size_t>(gw * gh));
  auto cell_of = [&](const Point& p) {
    const auto cx = std::min<std::int64_t>(gw - 1, static_cast<std::int64_t>(p.x / cell));
    const auto cy = std::min<std::int64_t>(gh - 1, static_cast<std::int64_t>(p.y / cell));
    return std::pair{cx, cy};
  };
  for (std::size_t i = 0; i < n; ++i) {
    const auto [cx, cy] = cell_of(pts[i]);
    buckets[static_cast<std::size_t>(cy * gw + cx)].push_back(i);
  }

  std::vector<double> out(n);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t ii = 0; ii < static_cast<std::int64_t>(n); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const auto [cx, cy] = cell_of(pts[i]);
    double best = std::numeric_limits<double>::infinity();
    for (std::int64_t ring = 0;; ++ring) {
      // Any point in ring k is at least (k - 1) * cell away.
      const double inner = (ring - 1) * cell;
      if (ring > 0 && inner > 0 && inner * inner > best) break;
      if (ring > std::max(gw, gh)) break;
      for (std::int64_t y = cy - ring; y <= cy + ring; ++y) {
        if (y < 0 || y >= gh) continue;
        const bool edge_row = (y == cy - ring || y == cy + ring);
        for (std::int64_t x = cx - ring; x <= cx + ring; x += edge_row ? 1 : 2 * ring) {
          if (x >= 0 && x < gw) {
            for (std::size_t j : buckets[static_cast<std::size_t>(y * gw + x)])
              if (j != i) best = std::min(best, squared(pts[i], pts[j]));
          }
          if (ring == 0) break;
        }
      }
    }
    out[i] = std::sqrt(best);
  }
  return out;
}

}  // namespace

namespace reference {

std::vector<double> nn_distances(const PointSet& points) {
  require_pairs(points);
  const auto pts = points.points();
  std::vector<double> out(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < pts.size(); ++j)
      if (j != i) best = std::min(best, squared(pts[i], pts[j]));
    out[i] = std::sqrt(best);
  }
  return out;
}

}  // namespace reference

std::vector<double> nn_distances(const PointSet& points) {
  require_pairs(points);
  if (points.size() <= kGridThreshold) return reference::nn_distances(points);
  return grid_nn(points);
}

double closeness_level(const PointSet& points) {
  const auto d = nn_distances(points);
  return std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
}

ClosenessStats closeness_stats(const PointSet& points) {
  ClosenessStats s;
  s.nn_distances = nn_distances(points);
  s.count = static_cast<std::uint32_t>(s.nn_distances.size());
  s.level = std::accumulate(s.nn_distances.begin(), s.nn_distances.end(), 0.0) / s.count;
  s.has_duplicates = std::any_of(s.nn_distances.begin(), s.nn_distances.end(),
                                 [](double d) { return d == 0.0; });
  return s;
}

}  // namespace autoscale
