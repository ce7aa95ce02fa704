#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "autoscale/core.hpp"
#include "autoscale/mapgen.hpp"

namespace autoscale {

/// Per-pixel class probabilities, one f32 plane per class.
class ProbabilityVolume {
 public:
  ProbabilityVolume() = default;
  ProbabilityVolume(std::uint32_t width, std::uint32_t height, std::uint8_t n_classes);
  explicit ProbabilityVolume(std::vector<Raster<float>> planes);

  std::uint32_t width() const { return width_; }
  std::uint32_t height() const { return height_; }
  std::uint8_t n_classes() const { return static_cast<std::uint8_t>(planes_.size()); }

  Raster<float>& plane(std::size_t k) { return planes_[k]; }
  const Raster<float>& plane(std::size_t k) const { return planes_[k]; }

  /// Throws unless every pixel is a distribution (entries >= 0, sum 1 +- tol).
  void validate(double tol = 1e-4) const;

  /// One-hot volume of a label map.
  static ProbabilityVolume one_hot(const LabelRaster& labels, std::uint8_t n_classes);

 private:
  std::uint32_t width_ = 0;
  std::uint32_t height_ = 0;
  std::vector<Raster<float>> planes_;
};

/// Most probable class per pixel; ties go to the lower class.
LabelRaster argmax(const ProbabilityVolume& pr);

struct LossConfig {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double prob_floor = 1e-12;

  void validate() const;
};

/// Squared L2 distance between two density maps. With mean = true the sum is
/// divided by the pixel count.
double mse_loss(const Raster<float>& pred, const Raster<float>& gt, bool mean = false);

/// Dynamic cross-entropy of one pixel:
///   -(sum_i (|gt - i| + 1) * probs[i]) * ln(max(probs[gt], floor)).
double dce_pixel(std::span<const double> probs, std::uint8_t gt, double prob_floor);

/// d dce_pixel / d probs[i], probabilities treated as free variables. The
/// weight term is differentiated too (no stop-gradient). Below the floor
/// the log term is constant in probs[gt].
void dce_pixel_grad(std::span<const double> probs, std::uint8_t gt, double prob_floor,
                    std::span<double> grad);

/// Sum of dce_pixel over the frame, accumulated in double.
double dce_loss(const ProbabilityVolume& pr, const DistanceLabelMap& gt, const LossConfig& cfg);

/// Gradient of dce_loss with the same layout as pr.
ProbabilityVolume dce_grad(const ProbabilityVolume& pr, const DistanceLabelMap& gt,
                           const LossConfig& cfg);

/// L_m(initial) + L_m(dense) + lambda1 * L_s.
double combined_regression(double l_m_init, double l_m_dense, double l_s, const LossConfig& cfg);

/// L_ce(initial) + L_ce(dense) + lambda2 * L_s.
double combined_localization(double l_ce_init, double l_ce_dense, double l_s,
                             const LossConfig& cfg);

}  // namespace autoscale
