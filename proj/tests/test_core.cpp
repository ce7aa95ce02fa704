#include <algorithm>
#include <random>

#include "autoscale/error.hpp"
#include "autoscale/core.hpp"
#include "doctest.h"

using namespace autoscale;

namespace {

Raster<float> random_raster(std::uint32_t w, std::uint32_t h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-5.0f, 5.0f);
  Raster<float> r(w, h);
  for (auto& v : r.values()) v = u(rng);
  return r;
}

}  // namespace

TEST_CASE("crop") {
  const auto r = random_raster(7, 5, 1);

  SUBCASE("full frame is identity") { CHECK(crop(r, r.frame()) == r); }

  SUBCASE("single pixel") {
    const auto c = crop(r, {2, 3, 3, 4});
    REQUIRE(c.width() == 1);
    REQUIRE(c.height() == 1);
    CHECK(c.at(0, 0) == r.at(2, 3));
  }

  SUBCASE("four-cell partition sums to the whole") {
    const BBox parts[] = {{0, 0, 3, 2}, {3, 0, 7, 2}, {0, 2, 3, 5}, {3, 2, 7, 5}};
    double total = 0.0;
    for (const auto& b : parts) total += sum(crop(r, b));
    double direct = 0.0;
    for (float v : r.values()) direct += v;
    CHECK(total == doctest::Approx(direct).epsilon(1e-12));
  }

  SUBCASE("crop of crop composes") {
    const BBox outer{1, 1, 6, 5};
    const BBox inner_rel{1, 2, 4, 4};
    const BBox inner_abs{2, 3, 5, 5};
    CHECK(crop(crop(r, outer), inner_rel) == crop(r, inner_abs));
  }

  SUBCASE("out of bounds") {
    CHECK_THROWS_AS(crop(r, {0, 0, 8, 5}), ValidationError);
    CHECK_THROWS_AS(crop(r, {3, 3, 3, 4}), ValidationError);
  }
}

TEST_CASE("bilinear_resize") {
  SUBCASE("factor 1 is identity") {
    const auto r = random_raster(9, 4, 2);
    const auto out = bilinear_resize(r, 1.0);
    REQUIRE(out.width() == 9);
    for (std::size_t i = 0; i < r.size(); ++i)
      CHECK(std::abs(out.values()[i] - r.values()[i]) <= 1e-6);
  }

  SUBCASE("constant raster stays constant") {
    Raster<float> r(5, 3, 2.5f);
    for (double f : {0.5, 1.3, 2.0, 3.0}) {
      const auto out = bilinear_resize(r, f);
      for (float v : out.values()) CHECK(v == doctest::Approx(2.5f));
    }
  }

  SUBCASE("2x2 checker, hand-evaluated samples") {
    Raster<float> r(2, 2, std::vector<float>{0, 1, 1, 0});
    const auto up2 = bilinear_resize(r, 2.0);
    REQUIRE(up2.width() == 4);
    // Inner samples sit at source (0.25, 0.25), (0.75, 0.25), ...
    CHECK(up2.at(1, 1) == doctest::Approx(0.375));
    CHECK(up2.at(2, 1) == doctest::Approx(0.625));
    CHECK(up2.at(1, 2) == doctest::Approx(0.625));
    CHECK(up2.at(2, 2) == doctest::Approx(0.375));
    const double center_mean = (up2.at(1, 1) + up2.at(2, 1) + up2.at(1, 2) + up2.at(2, 2)) / 4.0;
    CHECK(center_mean == doctest::Approx(0.5));
    // At factor 1.5 the middle sample lands exactly on the source center.
    const auto up15 = bilinear_resize(r, 1.5);
    REQUIRE(up15.width() == 3);
    CHECK(up15.at(1, 1) == doctest::Approx(0.5));
    CHECK(up15.at(0, 1) == doctest::Approx(0.5));
  }

  SUBCASE("anisotropic rounding matches a half-pixel resampler") {
    std::vector<float> v(12);
    for (int i = 0; i < 12; ++i) v[i] = static_cast<float>(i);
    const auto out = bilinear_resize(Raster<float>(4, 3, v), 1.5);
    REQUIRE(out.width() == 6);
    REQUIRE(out.height() == 5);  // 4.5 rounds half up
    // Reference values from an independent half-pixel implementation.
    CHECK(out.at(2, 1) == doctest::Approx(2.7666667));
    CHECK(out.at(3, 3) == doctest::Approx(8.233334));
    CHECK(out.at(5, 4) == doctest::Approx(11.0));
  }

  SUBCASE("output stays within input bounds") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto r = random_raster(3 + seed % 7, 2 + seed % 5, seed);
      const auto [mn, mx] = std::minmax_element(r.values().begin(), r.values().end());
      const auto out = bilinear_resize(r, 0.5 + 0.37 * seed);
      for (float v : out.values()) {
        CHECK(v >= *mn - 1e-5f);
        CHECK(v <= *mx + 1e-5f);
      }
    }
  }

  SUBCASE("invalid factors") {
    Raster<float> r(4, 4);
    CHECK_THROWS_AS(bilinear_resize(r, 0.0), ValidationError);
    CHECK_THROWS_AS(bilinear_resize(r, -1.0), ValidationError);
    CHECK_THROWS_AS(bilinear_resize(r, std::nan("")), ValidationError);
    CHECK_THROWS_AS(bilinear_resize(r, 0.1), ValidationError);  // rounds to 0
  }
}

namespace {

// Labels every true pixel by repeated relaxation until no label changes.
std::size_t count_components_relaxation(const Mask& m, bool eight) {
  const std::uint32_t w = m.width(), h = m.height();
  std::vector<std::size_t> label(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) label[i] = i;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::uint32_t y = 0; y < h; ++y)
      for (std::uint32_t x = 0; x < w; ++x) {
        if (!m.at(x, y)) continue;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if (!eight && dx && dy) continue;
            const int nx = int(x) + dx, ny = int(y) + dy;
            if (nx < 0 || ny < 0 || nx >= int(w) || ny >= int(h) || !m.at(nx, ny)) continue;
            auto& a = label[y * w + x];
            const auto b = label[ny * w + nx];
            if (b < a) {
              a = b;
              changed = true;
            }
          }
      }
  }
  std::size_t n = 0;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m.values()[i] && label[i] == i) ++n;
  return n;
}

}  // namespace

TEST_CASE("connected_components") {
  SUBCASE("empty mask") { CHECK(connected_components(Mask(5, 5), Connectivity::Eight).empty()); }

  SUBCASE("single pixel") {
    Mask m(5, 5);
    m.at(2, 3) = 1;
    const auto cs = connected_components(m, Connectivity::Four);
    REQUIRE(cs.size() == 1);
    CHECK(cs[0].pixels == 1);
    CHECK(cs[0].bbox == BBox{2, 3, 3, 4});
  }

  SUBCASE("diagonal pair") {
    Mask m(3, 3);
    m.at(0, 0) = 1;
    m.at(1, 1) = 1;
    CHECK(connected_components(m, Connectivity::Four).size() == 2);
    CHECK(connected_components(m, Connectivity::Eight).size() == 1);
  }

  SUBCASE("random masks agree with relaxation labeling; pixel counts sum to popcount") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
      Mask m(1 + rng() % 12, 1 + rng() % 12);
      for (auto& v : m.values()) v = (rng() % 100) < 45;
      const auto pop = std::count(m.values().begin(), m.values().end(), 1);
      for (auto conn : {Connectivity::Four, Connectivity::Eight}) {
        const auto cs = connected_components(m, conn);
        CHECK(cs.size() == count_components_relaxation(m, conn == Connectivity::Eight));
        std::size_t total = 0;
        for (const auto& c : cs) total += c.pixels;
        CHECK(total == static_cast<std::size_t>(pop));
      }
    }
  }
}

TEST_CASE("scale_points") {
  const PointSet p(10, 8, {{2, 3}, {9.5, 7.9}, {0, 0}});

  SUBCASE("identity") {
    const auto q = scale_points(p, 1.0);
    CHECK(q.width() == 10);
    CHECK(std::equal(q.points().begin(), q.points().end(), p.points().begin()));
  }

  SUBCASE("doubling") {
    const auto q = scale_points(PointSet(10, 8, {{2, 3}}), 2.0);
    CHECK(q.width() == 20);
    CHECK(q.height() == 16);
    CHECK(q[0] == Point{4, 6});
  }

  SUBCASE("r then 1/r recovers coordinates") {
    for (double r : {0.5, 1.7, 2.3, 3.0}) {
      const auto there = scale_points(p, r);
      const auto back = scale_points(there, 1.0 / r);
      REQUIRE(back.size() + back.dropped() + there.dropped() == p.size());
      if (there.dropped() != 0) continue;
      for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].x == doctest::Approx(p[i].x).epsilon(1e-9));
        CHECK(back[i].y == doctest::Approx(p[i].y).epsilon(1e-9));
      }
    }
  }

  SUBCASE("composition is linear") {
    const auto ab = scale_points(scale_points(p, 1.5), 2.0);
    const auto direct = scale_points(p, 3.0);
    REQUIRE(ab.size() == direct.size());
    for (std::size_t i = 0; i < ab.size(); ++i) {
      CHECK(std::abs(ab[i].x - direct[i].x) <= 1e-9);
      CHECK(std::abs(ab[i].y - direct[i].y) <= 1e-9);
    }
  }

  SUBCASE("points pushed outside are dropped and counted") {
    const auto q = scale_points(p, 1.0, {1.0, 1.0});
    CHECK(q.size() == 2);
    CHECK(q.dropped() == 1);
  }

  SUBCASE("bad factor") { CHECK_THROWS_AS(scale_points(p, 0.0), ValidationError); }
}

TEST_CASE("PointSet rejects points outside the frame") {
  CHECK_THROWS_AS(PointSet(4, 4, {{4.0, 1.0}}), ValidationError);
  CHECK_THROWS_AS(PointSet(0, 4), ValidationError);
  CHECK_NOTHROW(PointSet(4, 4, {{3.999, 0.0}}));
}

TEST_CASE("restrict_to") {
  const PointSet p(10, 10, {{1, 1}, {5, 5}, {7.99, 7.99}, {8, 2}});
  const auto r = restrict_to(p, {4, 4, 8, 8});
  CHECK(r.width() == 4);
  REQUIRE(r.size() == 2);
  CHECK(r[0] == Point{1, 1});
}
