#include <cmath>
#include <random>

#include "autoscale/error.hpp"
#include "autoscale/mapgen.hpp"
#include "autoscale/metrics.hpp"
#include "doctest.h"

using namespace autoscale;

namespace {

PointSet random_points(std::uint32_t w, std::uint32_t h, std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ux(0.0, w), uy(0.0, h);
  std::vector<Point> pts;
  for (std::size_t i = 0; i < n; ++i) pts.push_back({ux(rng), uy(rng)});
  return PointSet(w, h, std::move(pts));
}

void check_result_invariants(const MatchResult& m, const PointSet& pred, const PointSet& gt,
                             const MatchConfig& cfg) {
  std::vector<bool> pu(pred.size()), gu(gt.size());
  for (const auto& pr : m.pairs) {
    CHECK_FALSE(pu[pr.pred]);
    CHECK_FALSE(gu[pr.gt]);
    pu[pr.pred] = gu[pr.gt] = true;
    CHECK(pr.distance <= cfg.sigma_for(pr.gt));
  }
  CHECK(m.tp == m.pairs.size());
  CHECK(m.fp == pred.size() - m.tp);
  CHECK(m.fn == gt.size() - m.tp);
}

}  // namespace

TEST_CASE("count_errors") {
  const std::vector<double> a{1, 2, 3};
  auto e = count_errors(a, a);
  CHECK(e.mae == 0.0);
  CHECK(e.mse == 0.0);

  e = count_errors(std::vector<double>{3}, std::vector<double>{1});
  CHECK(e.mae == 2.0);
  CHECK(e.mse == 2.0);

  e = count_errors(std::vector<double>{1, 4}, std::vector<double>{2, 2});
  CHECK(e.mae == 1.5);
  CHECK(e.mse == doctest::Approx(std::sqrt(2.5)));
  CHECK(e.mse == doctest::Approx(1.5811).epsilon(1e-4));

  CHECK_THROWS_AS(count_errors(std::vector<double>{1}, std::vector<double>{}), ValidationError);
  CHECK_THROWS_AS(count_errors(std::vector<double>{}, std::vector<double>{}), ValidationError);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 100);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> p(1 + t % 7), g(p.size());
    for (auto& v : p) v = u(rng);
    for (auto& v : g) v = u(rng);
    const auto r = count_errors(p, g);
    CHECK(r.mse >= r.mae - 1e-12);
  }
}

TEST_CASE("match_points basics") {
  MatchConfig cfg;
  cfg.sigma = 1.0;
  const PointSet gt(10, 10, {{1, 1}, {5, 5}, {8, 2}, {3, 7}, {6, 9}});

  for (auto strategy : {MatchStrategy::Greedy, MatchStrategy::Optimal}) {
    cfg.strategy = strategy;
    const auto self = match_points(gt, gt, cfg);
    CHECK(self.tp == 5);
    CHECK(self.fp == 0);
    CHECK(self.fn == 0);

    const auto none = match_points(PointSet(10, 10), gt, cfg);
    CHECK(none.tp == 0);
    CHECK(none.fp == 0);
    CHECK(none.fn == 5);
  }
}

TEST_CASE("crossing configuration: optimal beats greedy") {
  // The closest pair blocks both others under greedy.
  const PointSet pred(10, 10, {{2, 1}, {4, 1}});
  const PointSet gt(10, 10, {{2.9, 1}, {0.8, 1}});
  MatchConfig cfg;
  cfg.sigma = 1.25;
  cfg.strategy = MatchStrategy::Greedy;
  CHECK(match_points(pred, gt, cfg).tp == 1);
  cfg.strategy = MatchStrategy::Optimal;
  CHECK(match_points(pred, gt, cfg).tp == 2);
  CHECK(reference::max_matching_size(pred, gt, cfg) == 2);

  // The spec's own crossing layout, shifted into the frame.
  const PointSet pred2(10, 10, {{1, 1}, {3, 1}});
  const PointSet gt2(10, 10, {{2.1, 1}, {0.5, 1}});
  cfg.sigma = 1.3;
  CHECK(match_points(pred2, gt2, cfg).tp == 2);
  CHECK(reference::max_matching_size(pred2, gt2, cfg) == 2);
}

TEST_CASE("optimal matching equals exhaustive search; greedy never exceeds it") {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 500; ++t) {
    const auto pred = random_points(12, 12, rng() % 7, rng);
    const auto gt = random_points(12, 12, rng() % 7, rng);
    MatchConfig cfg;
    cfg.sigma = 1.0 + (rng() % 40) / 10.0;
    if (t % 3 == 0 && gt.size() > 0) {
      for (std::size_t j = 0; j < gt.size(); ++j) cfg.per_gt_sigma.push_back(0.5 + (rng() % 40) / 10.0);
    }
    cfg.strategy = MatchStrategy::Optimal;
    const auto opt = match_points(pred, gt, cfg);
    check_result_invariants(opt, pred, gt, cfg);
    CHECK(opt.tp == reference::max_matching_size(pred, gt, cfg));
    cfg.strategy = MatchStrategy::Greedy;
    const auto gr = match_points(pred, gt, cfg);
    check_result_invariants(gr, pred, gt, cfg);
    CHECK(gr.tp <= opt.tp);
  }
}

TEST_CASE("optimal prefers the smaller total distance among maximum matchings") {
  const PointSet pred(10, 10, {{1, 1}, {2, 1}});
  const PointSet gt(10, 10, {{1.1, 1}, {2.1, 1}});
  MatchConfig cfg;
  cfg.sigma = 2.0;
  cfg.strategy = MatchStrategy::Optimal;
  const auto m = match_points(pred, gt, cfg);
  REQUIRE(m.tp == 2);
  double total = 0;
  for (const auto& p : m.pairs) total += p.distance;
  CHECK(total == doctest::Approx(0.2));
}

TEST_CASE("adaptive sigma length must match") {
  MatchConfig cfg;
  cfg.per_gt_sigma = {1.0};
  CHECK_THROWS_AS(match_points(PointSet(5, 5), PointSet(5, 5, {{1, 1}, {2, 2}}), cfg),
                  ValidationError);
}

TEST_CASE("prf") {
  MatchResult perfect;
  perfect.tp = 4;
  auto r = prf(perfect);
  CHECK(r.precision == 1.0);
  CHECK(r.recall == 1.0);
  CHECK(r.f == 1.0);

  MatchResult zero;
  zero.fp = 3;
  zero.fn = 2;
  r = prf(zero);
  CHECK(r.precision == 0.0);
  CHECK(r.recall == 0.0);
  CHECK(r.f == 0.0);

  MatchResult some;
  some.tp = 3;
  some.fp = 1;
  some.fn = 3;
  r = prf(some);
  CHECK(r.precision == 0.75);
  CHECK(r.recall == 0.5);
  CHECK(r.f == doctest::Approx(0.6));

  CHECK(prf(MatchResult{}).f == 0.0);
}

TEST_CASE("swapping pred and gt under optimal matching swaps P and R") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 100; ++t) {
    const auto a = random_points(20, 20, 1 + rng() % 15, rng);
    const auto b = random_points(20, 20, 1 + rng() % 15, rng);
    MatchConfig cfg;
    cfg.sigma = 3.0;
    cfg.strategy = MatchStrategy::Optimal;
    const auto ab = prf(match_points(a, b, cfg));
    const auto ba = prf(match_points(b, a, cfg));
    CHECK(ab.precision == ba.recall);
    CHECK(ab.recall == ba.precision);
    CHECK(ab.f == doctest::Approx(ba.f));
    CHECK((ab.f >= 0.0 && ab.f <= 1.0));
  }
}

TEST_CASE("knn_sigma") {
  CHECK(knn_sigma(PointSet(10, 10, {{1, 1}, {4, 5}})) == std::vector<double>{5, 5});
  CHECK(knn_sigma(PointSet(10, 1, {{0, 0}, {1, 0}, {3, 0}})) == std::vector<double>{1, 1, 2});
  std::vector<Point> grid;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) grid.push_back({1.0 + 2 * x, 1.0 + 2 * y});
  for (double s : knn_sigma(PointSet(10, 10, grid))) CHECK(s == 2.0);
  CHECK_THROWS_AS(knn_sigma(PointSet(10, 10, {{1, 1}})), ValidationError);
}

TEST_CASE("grid_edges nest across levels") {
  for (std::uint32_t extent : {7u, 32u, 33u, 100u, 511u}) {
    for (std::uint32_t n = 0; n < 5; ++n) {
      const auto coarse = grid_edges(extent, 1u << n);
      const auto fine = grid_edges(extent, 1u << (n + 1));
      for (std::size_t k = 0; k < coarse.size(); ++k) CHECK(coarse[k] == fine[2 * k]);
      CHECK(coarse.back() == extent);
    }
  }
}

TEST_CASE("game") {
  const PointSet gt(64, 48, {{5.5, 5.5}, {40.2, 30.1}, {60.0, 2.0}});

  SUBCASE("level 0 is the absolute count error") {
    Raster<float> pred(64, 48, 0.001f);
    CHECK(game(pred, gt, 0) == doctest::Approx(std::abs(sum(pred) - 3.0)));
  }

  SUBCASE("exact density map: zero at n=0, bounded by border leakage above") {
    const auto d = density_map(gt, DensityConfig{2.0});
    CHECK(game(d, gt, 0) == doctest::Approx(0.0).epsilon(1e-6));
    for (std::uint8_t n = 1; n <= 3; ++n) {
      // Leakage: mass of each blob outside its own cell.
      const auto xe = grid_edges(64, 1u << n), ye = grid_edges(48, 1u << n);
      double leak = 0.0;
      for (const auto& p : gt.points()) {
        const auto cx = std::upper_bound(xe.begin() + 1, xe.end() - 1, std::uint32_t(p.x)) - (xe.begin() + 1);
        const auto cy = std::upper_bound(ye.begin() + 1, ye.end() - 1, std::uint32_t(p.y)) - (ye.begin() + 1);
        const BBox cell{xe[cx], ye[cy], xe[cx + 1], ye[cy + 1]};
        leak += 1.0 - sum(crop(density_map(PointSet(64, 48, {p}), DensityConfig{2.0}), cell));
      }
      CHECK(game(d, gt, n) <= 2.0 * leak + 1e-5);
    }
  }

  SUBCASE("monotone in n") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<float> u(0.0f, 0.01f);
    for (int t = 0; t < 50; ++t) {
      Raster<float> pred(37 + t, 29 + t);
      for (auto& v : pred.values()) v = u(rng);
      std::uniform_real_distribution<double> ux(0, pred.width()), uy(0, pred.height());
      std::vector<Point> pts;
      for (int i = 0; i < 20; ++i) pts.push_back({ux(rng), uy(rng)});
      const PointSet g(pred.width(), pred.height(), pts);
      for (std::uint8_t n = 0; n < 4; ++n) CHECK(game(pred, g, n + 1) >= game(pred, g, n));
    }
  }

  SUBCASE("monotone without slack when every cell errs the same way") {
    // Uniform over-prediction: all levels agree in exact arithmetic, so any
    // rounding drift in the wrong direction would show up here.
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<float> u(0.1f, 0.3f);
    for (int t = 0; t < 200; ++t) {
      Raster<float> pred(33 + t % 17, 40 + t % 13);
      for (auto& v : pred.values()) v = u(rng);
      const PointSet none(pred.width(), pred.height());
      for (std::uint8_t n = 0; n < 4; ++n) CHECK(game(pred, none, n + 1) >= game(pred, none, n));
    }
  }

  SUBCASE("count_error is the exactly rounded absolute error") {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (int t = 0; t < 50; ++t) {
      Raster<float> pred(20, 10);
      for (auto& v : pred.values()) v = u(rng) * (t % 2 ? 1e-3f : 1e3f);
      const PointSet g(20, 10, {{1, 1}, {5, 5}, {19.5, 9.5}});
      long double oracle = 0.0L;
      for (float v : pred.values()) oracle += v;
      oracle = std::abs(oracle - 3.0L);
      CHECK(count_error(pred, g) == game(pred, g, 0));
      CHECK(std::abs(double(oracle) - count_error(pred, g)) <= 1e-12 * std::max(1.0, double(oracle)));
    }
  }

  SUBCASE("an error isolated in one cell is the same at every finer level") {
    Raster<float> pred(64, 64);
    const PointSet none(64, 64);
    pred.at(3, 3) = 2.5f;
    for (std::uint8_t n = 0; n <= 4; ++n) CHECK(game(pred, none, n) == doctest::Approx(2.5));
  }

  SUBCASE("invalid levels") {
    Raster<float> small(8, 8);
    CHECK_THROWS_AS(game(small, PointSet(8, 8), 4), ValidationError);
    CHECK_THROWS_AS(game(Raster<float>(64, 64), PointSet(64, 64), 6), ValidationError);
    CHECK_THROWS_AS(game(small, PointSet(9, 8), 0), ValidationError);
  }
}
