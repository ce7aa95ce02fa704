#include <cmath>
#include <random>

#include "autoscale/error.hpp"
#include "autoscale/l2s.hpp"
#include "doctest.h"

using namespace autoscale;

TEST_CASE("center_loss") {
  CHECK(center_loss(std::vector<double>{2, 8}, std::vector<double>{2, 1}, 8) == 0.0);
  CHECK(center_loss(std::vector<double>{1}, std::vector<double>{2}, 0) == 8.0);
  CHECK(center_loss(std::vector<double>{1, 4}, std::vector<double>{1, 1}, 2) == 2.5);
  CHECK_THROWS_AS(center_loss(std::vector<double>{1, 2}, std::vector<double>{1}, 1),
                  ValidationError);
}

TEST_CASE("grad_r") {
  CHECK(grad_r(1, 1, 1) == 0.0);
  CHECK(grad_r(2, 1, 0) == 8.0);

  SUBCASE("matches central finite differences") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> us(0.5, 10.0), ur(0.5, 3.0), uc(0.1, 20.0);
    const double h = 1e-6;
    for (int k = 0; k < 1000; ++k) {
      const double s = us(rng), r = ur(rng), c = uc(rng);
      const double s1[] = {s};
      const double rp[] = {r + h}, rm[] = {r - h};
      const double fd = (center_loss(s1, rp, c) - center_loss(s1, rm, c)) / (2 * h);
      const double g = grad_r(s, r, c);
      CHECK(std::abs(fd - g) <= 1e-6 * std::max(1.0, std::abs(g)));
    }
  }
}

TEST_CASE("update_center") {
  CHECK(update_center(std::vector<double>{2, 8}, std::vector<double>{2, 1}, 8, 0.1) == 8.0);
  CHECK(update_center(std::vector<double>{1}, std::vector<double>{0}, 2, 1.0) == 1.0);
  CHECK(update_center(std::vector<double>{1, 3}, std::vector<double>{1, 1}, 2, 0.5) == 2.0);
}

TEST_CASE("fit") {
  L2SConfig cfg;

  SUBCASE("feasible single region") {
    L2SState init;
    init.r = {1.0};
    init.center = 4.0;
    const double s[] = {4.0};
    const auto st = fit(s, cfg, init);
    CHECK(st.loss_trace.back() <= cfg.tol);
    CHECK(std::abs(4.0 * st.r[0] * st.r[0] - st.center) <= 1e-4);
  }

  SUBCASE("two regions cluster") {
    const double s[] = {1.0, 4.0};
    const auto st = fit(s, cfg);
    CHECK(std::abs(s[0] * st.r[0] * st.r[0] - s[1] * st.r[1] * st.r[1]) <= 1e-3);
  }

  SUBCASE("infeasible spread pins a bound") {
    const double s[] = {1.0, 1000.0};
    const auto st = fit(s, cfg);
    const bool pinned = st.r[0] == cfg.r_max || st.r[1] == cfg.r_min;
    CHECK(pinned);
    CHECK(st.loss_trace.back() > 0.0);
    for (double r : st.r) CHECK((r >= cfg.r_min && r <= cfg.r_max));
  }

  SUBCASE("frozen center converges to the analytic minimizer") {
    for (double s0 : {0.3, 1.0, 2.5, 7.0, 40.0}) {
      L2SConfig frozen = cfg;
      frozen.freeze_center = true;
      frozen.max_iters = 200000;
      frozen.tol = 0.0;
      L2SState init;
      init.r = {1.0};
      init.center = 3.0;
      const double s[] = {s0};
      const auto st = fit(s, frozen, init);
      const double expected = std::clamp(std::sqrt(3.0 / s0), cfg.r_min, cfg.r_max);
      CHECK(st.r[0] == doctest::Approx(expected).epsilon(1e-4));
      CHECK(st.center == 3.0);
    }
  }

  SUBCASE("loss trace is non-increasing in the stable regime") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> us(0.2, 10.0);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> s(2 + trial % 9);
      for (auto& v : s) v = us(rng);
      const auto st = fit(s, cfg);
      for (std::size_t k = 1; k < st.loss_trace.size(); ++k)
        CHECK(st.loss_trace[k] <= st.loss_trace[k - 1]);
      for (double r : st.r) CHECK((r >= cfg.r_min && r <= cfg.r_max));
    }
  }

  SUBCASE("invalid input") {
    CHECK_THROWS_AS(fit(std::vector<double>{1.0, NAN}, cfg), ValidationError);
    CHECK_THROWS_AS(fit(std::vector<double>{}, cfg), ValidationError);
    L2SConfig bad = cfg;
    bad.r_min = 4.0;
    CHECK_THROWS_AS(fit(std::vector<double>{1.0}, bad), ValidationError);
  }
}
