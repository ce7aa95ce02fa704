#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace autoscale {

struct L2SConfig {
  double r_min = 0.5;
  double r_max = 3.0;
  double alpha = 1e-3;  // center learning rate
  double eta = 1e-3;    // scale-factor step size
  std::uint32_t update_interval = 1;  // iterations between center updates
  std::uint32_t max_iters = 10000;
  double tol = 1e-9;  // stop once |loss change| drops below this
  bool freeze_center = false;

  void validate() const;
};

struct L2SState {
  std::vector<double> r;
  double center = 0.0;
  std::uint32_t iter = 0;
  std::vector<double> loss_trace;
  /// Trace entries paired with loss_trace (center after each iteration).
  std::vector<double> center_trace;
  bool converged = false;
};

/// 1/2 sum_i (S_i r_i^2 - center)^2, in double.
double center_loss(std::span<const double> closeness, std::span<const double> r, double center);

/// d center_loss / d r_i = 2 S_i (S_i r_i^3 - center r_i).
double grad_r(double closeness, double r, double center);

/// One center step: delta = sum_i (center - S_i r_i^2) / (1 + M);
/// returns center - alpha * delta.
double update_center(std::span<const double> closeness, std::span<const double> r, double center,
                     double alpha);

double clamp_scale(double r, const L2SConfig& cfg);

/// Projected gradient descent on every r_i, with a center update every
/// update_interval iterations. A gradient step that would raise the loss is
/// retried at half the step size (up to 40 halvings); if none helps, the
/// solver has stalled and stops. With no init, r = 1 and center = mean(S).
L2SState fit(std::span<const double> closeness, const L2SConfig& cfg,
             std::optional<L2SState> init = std::nullopt);

}  // namespace autoscale
