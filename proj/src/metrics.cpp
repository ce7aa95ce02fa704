#include "autoscale/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "autoscale/closeness.hpp"

namespace autoscale {

CountErrors count_errors(std::span<const double> preds, std::span<const double> gts) {
  if (preds.size() != gts.size())
    throw ValidationError("prediction and ground-truth count lists differ in length");
  if (preds.empty()) throw ValidationError("count lists are empty");
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double e = std::abs(preds[i] - gts[i]);
    abs_sum += e;
    sq_sum += e * e;
  }
  const double n = static_cast<double>(preds.size());
  return {abs_sum / n, std::sqrt(sq_sum / n)};
}

namespace {

struct Edge {
  std::size_t pred;
  std::size_t gt;
  double distance;
};

std::vector<Edge> feasible_edges(const PointSet& pred, const PointSet& gt, const MatchConfig& cfg) {
  if (!cfg.per_gt_sigma.empty() && cfg.per_gt_sigma.size() != gt.size())
    throw ValidationError("adaptive sigma list has " + std::to_string(cfg.per_gt_sigma.size()) +
                          " entries for " + std::to_string(gt.size()) + " ground-truth points");
  for (std::size_t j = 0; j < (cfg.per_gt_sigma.empty() ? 1 : gt.size()); ++j)
    if (!(cfg.sigma_for(j) > 0.0)) throw ValidationError("matching threshold must be positive");

  std::vector<std::vector<Edge>> per_pred(pred.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t ii = 0; ii < static_cast<std::int64_t>(pred.size()); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    for (std::size_t j = 0; j < gt.size(); ++j) {
      const double d = distance(pred[i], gt[j]);
      if (d <= cfg.sigma_for(j)) per_pred[i].push_back({i, j, d});
    }
  }
  std::vector<Edge> edges;
  for (auto& e : per_pred) edges.insert(edges.end(), e.begin(), e.end());
  return edges;
}

MatchResult finish(std::vector<MatchPair> pairs, std::size_t n_pred, std::size_t n_gt) {
  std::sort(pairs.begin(), pairs.end(),
            [](const MatchPair& a, const MatchPair& b) { return a.pred < b.pred; });
  MatchResult r;
  r.tp = static_cast<std::uint32_t>(pairs.size());
  r.fp = static_cast<std::uint32_t>(n_pred - pairs.size());
  r.fn = static_cast<std::uint32_t>(n_gt - pairs.size());
  r.pairs = std::move(pairs);
  return r;
}

MatchResult greedy(std::vector<Edge> edges, std::size_t n_pred, std::size_t n_gt) {
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.pred != b.pred) return a.pred < b.pred;
    return a.gt < b.gt;
  });
  std::vector<bool> pred_used(n_pred), gt_used(n_gt);
  std::vector<MatchPair> pairs;
  for (const auto& e : edges) {
    if (pred_used[e.pred] || gt_used[e.gt]) continue;
    pred_used[e.pred] = gt_used[e.gt] = true;
    pairs.push_back({e.pred, e.gt, e.distance});
  }
  return finish(std::move(pairs), n_pred, n_gt);
}

// Min-cost assignment on a square cost matrix (rows <= cols handled by
// padding). Returns row -> column.
std::vector<std::size_t> hungarian(const std::vector<double>& cost, std::size_t n) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<bool> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

MatchResult optimal(const std::vector<Edge>& edges, std::size_t n_pred, std::size_t n_gt) {
  // Connected components of the bipartite feasibility graph; pred nodes are
  // [0, n_pred), gt nodes [n_pred, n_pred + n_gt).
  std::vector<std::size_t> parent(n_pred + n_gt);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (const auto& e : edges) parent[find(e.pred)] = find(n_pred + e.gt);

  std::vector<std::vector<const Edge*>> groups(n_pred + n_gt);
  for (const auto& e : edges) groups[find(e.pred)].push_back(&e);

  std::vector<MatchPair> pairs;
  for (const auto& group : groups) {
    if (group.empty()) continue;
    std::vector<std::size_t> preds, gts;
    double max_d = 0.0;
    for (const Edge* e : group) {
      preds.push_back(e->pred);
      gts.push_back(e->gt);
      max_d = std::max(max_d, e->distance);
    }
    std::sort(preds.begin(), preds.end());
    preds.erase(std::unique(preds.begin(), preds.end()), preds.end());
    std::sort(gts.begin(), gts.end());
    gts.erase(std::unique(gts.begin(), gts.end()), gts.end());

    const std::size_t n = std::max(preds.size(), gts.size());
    // An unmatched slot costs more than any full set of real pairs, so the
    // minimum-cost assignment first maximizes the number of real pairs.
    const double miss = (static_cast<double>(n) + 1.0) * (max_d + 1.0);
    std::vector<double> cost(n * n, miss);
    for (const Edge* e : group) {
      const auto r = static_cast<std::size_t>(
          std::lower_bound(preds.begin(), preds.end(), e->pred) - preds.begin());
      const auto c = static_cast<std::size_t>(
          std::lower_bound(gts.begin(), gts.end(), e->gt) - gts.begin());
      cost[r * n + c] = e->distance;
    }
    const auto assignment = hungarian(cost, n);
    for (std::size_t r = 0; r < preds.size(); ++r) {
      const std::size_t c = assignment[r];
      if (c < gts.size() && cost[r * n + c] < miss)
        pairs.push_back({preds[r], gts[c], cost[r * n + c]});
    }
  }
  return finish(std::move(pairs), n_pred, n_gt);
}

}  // namespace

MatchResult match_points(const PointSet& pred, const PointSet& gt, const MatchConfig& cfg) {
  auto edges = feasible_edges(pred, gt, cfg);
  if (cfg.strategy == MatchStrategy::Greedy) return greedy(std::move(edges), pred.size(), gt.size());
  return optimal(edges, pred.size(), gt.size());
}

PRF prf(const MatchResult& m) {
  auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
  PRF out;
  out.precision = ratio(m.tp, double(m.tp) + m.fp);
  out.recall = ratio(m.tp, double(m.tp) + m.fn);
  out.f = ratio(2.0 * out.precision * out.recall, out.precision + out.recall);
  return out;
}

std::vector<double> knn_sigma(const PointSet& gt) { return nn_distances(gt); }

std::vector<std::uint32_t> grid_edges(std::uint32_t extent, std::uint32_t parts) {
  std::vector<std::uint32_t> edges(parts + 1);
  for (std::uint32_t k = 0; k <= parts; ++k)
    edges[k] = static_cast<std::uint32_t>(std::uint64_t{k} * extent / parts);
  return edges;
}

namespace {

// Exactly rounded running sum of doubles (Shewchuk's non-overlapping
// expansions, as in Python's math.fsum).
class ExactSum {
 public:
  void add(double x) {
    std::size_t i = 0;
    for (std::size_t j = 0; j < partials_.size(); ++j) {
      double y = partials_[j];
      if (std::abs(x) < std::abs(y)) std::swap(x, y);
      const double hi = x + y;
      const double lo = y - (hi - x);
      if (lo != 0.0) partials_[i++] = lo;
      x = hi;
    }
    partials_.resize(i);
    partials_.push_back(x);
  }

  // Adds |other| exactly.
  void add_abs(const ExactSum& other) {
    const double sign = other.value() < 0.0 ? -1.0 : 1.0;
    for (double p : other.partials_) add(sign * p);
  }

  double value() const {
    std::size_t n = partials_.size();
    if (n == 0) return 0.0;
    double hi = partials_[--n];
    double lo = 0.0;
    while (n > 0) {
      const double x = hi;
      const double y = partials_[--n];
      hi = x + y;
      lo = y - (hi - x);
      if (lo != 0.0) break;
    }
    // Round half-even across the remaining partials.
    if (n > 0 && ((lo < 0.0 && partials_[n - 1] < 0.0) || (lo > 0.0 && partials_[n - 1] > 0.0))) {
      const double y = lo * 2.0;
      const double x = hi + y;
      if (y == x - hi) hi = x;
    }
    return hi;
  }

 private:
  std::vector<double> partials_;
};

}  // namespace

double game(const Raster<float>& pred_map, const PointSet& gt, std::uint8_t n) {
  if (n > 5) throw ValidationError("GAME level must be at most 5");
  if (pred_map.width() != gt.width() || pred_map.height() != gt.height())
    throw ValidationError("prediction map and annotation frame differ in size");
  const std::uint32_t parts = 1u << n;
  if (parts > pred_map.width() || parts > pred_map.height())
    throw ValidationError("GAME grid is finer than the image: cells would be empty");

  const auto xe = grid_edges(pred_map.width(), parts);
  const auto ye = grid_edges(pred_map.height(), parts);
  auto cell_of = [](const std::vector<std::uint32_t>& e, std::uint32_t v) {
    return static_cast<std::uint32_t>(std::upper_bound(e.begin() + 1, e.end() - 1, v) -
                                      (e.begin() + 1));
  };

  // Cell errors and their absolute sum are exact until the final rounding,
  // so GAME(n + 1) >= GAME(n) holds in floating point, not just on paper.
  std::vector<ExactSum> diff(std::size_t{parts} * parts);
  for (std::uint32_t cy = 0; cy < parts; ++cy)
    for (std::uint32_t y = ye[cy]; y < ye[cy + 1]; ++y) {
      auto row = pred_map.row(y);
      for (std::uint32_t cx = 0; cx < parts; ++cx) {
        auto& cell = diff[std::size_t{cy} * parts + cx];
        for (std::uint32_t x = xe[cx]; x < xe[cx + 1]; ++x) cell.add(row[x]);
      }
    }
  for (const auto& p : gt.points()) {
    const auto px = static_cast<std::uint32_t>(p.x);
    const auto py = static_cast<std::uint32_t>(p.y);
    diff[std::size_t{cell_of(ye, py)} * parts + cell_of(xe, px)].add(-1.0);
  }
  ExactSum total;
  for (const auto& d : diff) total.add_abs(d);
  return total.value();
}

double count_error(const Raster<float>& pred_map, const PointSet& gt) {
  return game(pred_map, gt, 0);
}

namespace reference {

std::uint32_t max_matching_size(const PointSet& pred, const PointSet& gt, const MatchConfig& cfg) {
  // Exhaustive: for each pred in turn, either leave it unmatched or pair it
  // with any free feasible gt.
  std::vector<bool> gt_used(gt.size());
  std::uint32_t best = 0;
  auto recurse = [&](auto&& self, std::size_t i, std::uint32_t matched) -> void {
    if (i == pred.size()) {
      best = std::max(best, matched);
      return;
    }
    self(self, i + 1, matched);
    for (std::size_t j = 0; j < gt.size(); ++j) {
      if (gt_used[j] || distance(pred[i], gt[j]) > cfg.sigma_for(j)) continue;
      gt_used[j] = true;
      self(self, i + 1, matched + 1);
      gt_used[j] = false;
    }
  };
  recurse(recurse, 0, 0);
  return best;
}

}  // namespace reference

}  // namespace autoscale
