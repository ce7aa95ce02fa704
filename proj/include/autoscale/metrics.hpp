#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "autoscale/core.hpp"

namespace autoscale {

struct CountErrors {
  double mae = 0.0;
  double mse = 0.0;  // root of the mean squared error
};

CountErrors count_errors(std::span<const double> preds, std::span<const double> gts);

enum class MatchStrategy { Greedy, Optimal };

/// Either a single threshold or one threshold per ground-truth point. A pair
/// is feasible iff its distance is <= the threshold of its ground-truth end.
struct MatchConfig {
  double sigma = 4.0;
  std::vector<double> per_gt_sigma;
  MatchStrategy strategy = MatchStrategy::Greedy;

  double sigma_for(std::size_t gt_index) const {
    return per_gt_sigma.empty() ? sigma : per_gt_sigma[gt_index];
  }
};

struct MatchPair {
  std::size_t pred = 0;
  std::size_t gt = 0;
  double distance = 0.0;
};

struct MatchResult {
  std::vector<MatchPair> pairs;
  std::uint32_t tp = 0;
  std::uint32_t fp = 0;
  std::uint32_t fn = 0;
};

/// Greedy: feasible pairs in ascending distance (ties by pred, then gt
/// index), each accepted iff both ends are free. Optimal: maximum
/// cardinality, then minimum total distance, via Hungarian assignment on
/// each connected component of the feasibility graph.
MatchResult match_points(const PointSet& pred, const PointSet& gt, const MatchConfig& cfg);

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

/// 0/0 is taken as 0 for every ratio.
PRF prf(const MatchResult& m);

/// Per-ground-truth-point threshold: distance to the nearest other point.
std::vector<double> knn_sigma(const PointSet& gt);

/// Boundaries of an even split of extent into parts cells:
/// b_k = floor(k * extent / parts). Splits at level n+1 refine level n.
std::vector<std::uint32_t> grid_edges(std::uint32_t extent, std::uint32_t parts);

/// Per-image GAME(n): sum over a 2^n x 2^n grid of |predicted mass - points|
/// per cell. Points go to the cell containing their pixel. The result is the
/// exact value rounded once to double.
double game(const Raster<float>& pred_map, const PointSet& gt, std::uint8_t n);

/// |sum(pred_map) - |gt||, exactly rounded; identical to game(pred_map, gt, 0).
double count_error(const Raster<float>& pred_map, const PointSet& gt);

namespace reference {
/// Largest one-to-one feasible matching size by exhaustive search; intended
/// for at most ~8 points per side.
std::uint32_t max_matching_size(const PointSet& pred, const PointSet& gt, const MatchConfig& cfg);
}  // namespace reference

}  // namespace autoscale
