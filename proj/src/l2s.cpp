#include "autoscale/l2s.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "autoscale/error.hpp"

namespace autoscale {

void L2SConfig::validate() const {
  if (!(r_min > 0.0 && r_min < r_max && std::isfinite(r_max)))
    throw ValidationError("scale clamp requires 0 < r_min < r_max");
  if (!(alpha > 0.0) || !(eta > 0.0)) throw ValidationError("alpha and eta must be positive");
  if (!(tol >= 0.0)) throw ValidationError("tol must be non-negative");
}

namespace {

void check_lengths(std::span<const double> s, std::span<const double> r) {
  if (s.size() != r.size())
    throw ValidationError("closeness and scale vectors differ in length");
  if (s.empty()) throw ValidationError("at least one region is required");
}

}  // namespace

double center_loss(std::span<const double> closeness, std::span<const double> r, double center) {
  check_lengths(closeness, r);
  double loss = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double e = closeness[i] * r[i] * r[i] - center;
    loss += e * e;
  }
  return 0.5 * loss;
}

double grad_r(double closeness, double r, double center) {
  return 2.0 * closeness * (closeness * r * r * r - center * r);
}

double update_center(std::span<const double> closeness, std::span<const double> r, double center,
                     double alpha) {
  check_lengths(closeness, r);
  double delta = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) delta += center - closeness[i] * r[i] * r[i];
  delta /= 1.0 + static_cast<double>(r.size());
  return center - alpha * delta;
}

double clamp_scale(double r, const L2SConfig& cfg) { return std::clamp(r, cfg.r_min, cfg.r_max); }

L2SState fit(std::span<const double> closeness, const L2SConfig& cfg, std::optional<L2SState> init) {
  cfg.validate();
  if (closeness.empty()) throw ValidationError("at least one region is required");
  for (double s : closeness)
    if (!std::isfinite(s) || s <= 0.0)
      throw ValidationError("closeness levels must be finite and positive");

  L2SState state;
  if (init) {
    state = std::move(*init);
    if (state.r.size() != closeness.size())
      throw ValidationError("initial state has the wrong number of scale factors");
  } else {
    state.r.assign(closeness.size(), 1.0);
    state.center = std::accumulate(closeness.begin(), closeness.end(), 0.0) / closeness.size();
  }
  for (auto& r : state.r) r = clamp_scale(r, cfg);

  const std::size_t m = closeness.size();
  std::vector<double> trial(m);
  double loss = center_loss(closeness, state.r, state.center);

  for (std::uint32_t k = 0; k < cfg.max_iters; ++k) {
    const double before = loss;

    double step = cfg.eta;
    bool accepted = false;
    for (int attempt = 0; attempt < 40; ++attempt, step *= 0.5) {
      for (std::size_t i = 0; i < m; ++i)
        trial[i] = clamp_scale(state.r[i] - step * grad_r(closeness[i], state.r[i], state.center),
                               cfg);
      const double trial_loss = center_loss(closeness, trial, state.center);
      if (trial_loss <= loss) {
        state.r.swap(trial);
        loss = trial_loss;
        accepted = true;
        break;
      }
    }

    if (!cfg.freeze_center && cfg.update_interval > 0 && (k + 1) % cfg.update_interval == 0) {
      const double next = update_center(closeness, state.r, state.center, cfg.alpha);
      const double next_loss = center_loss(closeness, state.r, next);
      // In exact arithmetic the update never raises the loss; rounding near
      // convergence can, and such a step is not taken.
      if (next_loss <= loss) {
        state.center = next;
        loss = next_loss;
      }
    }

    ++state.iter;
    state.loss_trace.push_back(loss);
    state.center_trace.push_back(state.center);
    if (std::abs(before - loss) < cfg.tol || !accepted) {
      state.converged = true;
      break;
    }
  }
  return state;
}

}  // namespace autoscale
