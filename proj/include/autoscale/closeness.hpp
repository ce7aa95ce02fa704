#pragma once

#include <cstdint>
#include <vector>

#include "autoscale/core.hpp"

namespace autoscale {

struct ClosenessStats {
  double level = 0.0;  // mean nearest-neighbor distance S
  std::vector<double> nn_distances;
  std::uint32_t count = 0;
  bool has_duplicates = false;
};

/// Distance from each point to its nearest other point, same order as the
/// input. Uses a uniform grid above 2000 points; results equal brute force.
std::vector<double> nn_distances(const PointSet& points);

/// Mean of nn_distances: the closeness level of a region.
double closeness_level(const PointSet& points);

ClosenessStats closeness_stats(const PointSet& points);

namespace reference {
std::vector<double> nn_distances(const PointSet& points);
}

}  // namespace autoscale
