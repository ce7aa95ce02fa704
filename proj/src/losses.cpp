#include "autoscale/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

namespace autoscale {

ProbabilityVolume::ProbabilityVolume(std::uint32_t width, std::uint32_t height,
                                     std::uint8_t n_classes)
    : width_(width), height_(height) {
  if (n_classes < 2) throw ValidationError("a probability volume needs at least 2 classes");
  planes_.assign(n_classes, Raster<float>(width, height));
}

ProbabilityVolume::ProbabilityVolume(std::vector<Raster<float>> planes) : planes_(std::move(planes)) {
  if (planes_.size() < 2 || planes_.size() > 255)
    throw ValidationError("a probability volume needs 2..255 class planes");
  width_ = planes_[0].width();
  height_ = planes_[0].height();
  for (const auto& p : planes_)
    if (p.width() != width_ || p.height() != height_)
      throw ValidationError("probability planes differ in size");
}

void ProbabilityVolume::validate(double tol) const {
  for (std::size_t i = 0; i < std::size_t{width_} * height_; ++i) {
    double total = 0.0;
    for (const auto& p : planes_) {
      const float v = p.values()[i];
      if (!(v >= 0.0f)) throw ValidationError("negative or NaN class probability");
      total += v;
    }
    if (std::abs(total - 1.0) > tol)
      throw ValidationError("class probabilities at pixel " + std::to_string(i) + " sum to " +
                            std::to_string(total));
  }
}

ProbabilityVolume ProbabilityVolume::one_hot(const LabelRaster& labels, std::uint8_t n_classes) {
  ProbabilityVolume pr(labels.width(), labels.height(), n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::uint8_t c = labels.values()[i];
    if (c >= n_classes) throw ValidationError("label exceeds class count");
    pr.planes_[c].values()[i] = 1.0f;
  }
  return pr;
}

LabelRaster argmax(const ProbabilityVolume& pr) {
  LabelRaster out(pr.width(), pr.height());
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint8_t best = 0;
    for (std::uint8_t k = 1; k < pr.n_classes(); ++k)
      if (pr.plane(k).values()[i] > pr.plane(best).values()[i]) best = k;
    out.values()[i] = best;
  }
  return out;
}

void LossConfig::validate() const {
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw ValidationError("loss weights must be >= 0");
  if (!(prob_floor > 0.0 && prob_floor < 1e-3))
    throw ValidationError("prob_floor must lie in (0, 1e-3)");
}

double mse_loss(const Raster<float>& pred, const Raster<float>& gt, bool mean) {
  if (pred.width() != gt.width() || pred.height() != gt.height())
    throw ValidationError("prediction and ground truth differ in size");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = double(pred.values()[i]) - double(gt.values()[i]);
    total += d * d;
  }
  return mean ? total / static_cast<double>(pred.size()) : total;
}

namespace {

double class_weight(std::uint8_t gt, std::size_t i) {
  return std::abs(static_cast<double>(gt) - static_cast<double>(i)) + 1.0;
}

void check_pair(const ProbabilityVolume& pr, const DistanceLabelMap& gt) {
  if (pr.width() != gt.labels.width() || pr.height() != gt.labels.height())
    throw ValidationError("probability volume and label map differ in size");
  if (pr.n_classes() != gt.config.n_classes())
    throw ValidationError("probability volume has " + std::to_string(pr.n_classes()) +
                          " classes, label map has " + std::to_string(gt.config.n_classes()));
}

}  // namespace

double dce_pixel(std::span<const double> probs, std::uint8_t gt, double prob_floor) {
  if (gt >= probs.size()) throw ValidationError("ground-truth class out of range");
  double weight = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) weight += class_weight(gt, i) * probs[i];
  return -weight * std::log(std::max(probs[gt], prob_floor)) + 0.0;  // + 0.0 turns -0 into 0
}

void dce_pixel_grad(std::span<const double> probs, std::uint8_t gt, double prob_floor,
                    std::span<double> grad) {
  if (gt >= probs.size()) throw ValidationError("ground-truth class out of range");
  if (grad.size() != probs.size()) throw ValidationError("gradient buffer has the wrong size");
  double weight = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) weight += class_weight(gt, i) * probs[i];
  const bool floored = probs[gt] < prob_floor;
  const double log_p = std::log(floored ? prob_floor : probs[gt]);
  for (std::size_t i = 0; i < probs.size(); ++i) grad[i] = -class_weight(gt, i) * log_p;
  if (!floored) grad[gt] -= weight / probs[gt];
}

double dce_loss(const ProbabilityVolume& pr, const DistanceLabelMap& gt, const LossConfig& cfg) {
  cfg.validate();
  check_pair(pr, gt);
  const std::uint32_t w = pr.width();
  const std::uint32_t h = pr.height();
  // Row partials summed in row order keep the result independent of threads.
  std::vector<double> rows(h, 0.0);
#pragma omp parallel
  {
    std::vector<double> probs(pr.n_classes());
#pragma omp for schedule(static)
    for (std::int64_t yy = 0; yy < h; ++yy) {
      double row = 0.0;
      for (std::uint32_t x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(yy) * w + x;
        for (std::size_t k = 0; k < probs.size(); ++k) probs[k] = pr.plane(k).values()[i];
        row += dce_pixel(probs, gt.labels.values()[i], cfg.prob_floor);
      }
      rows[static_cast<std::size_t>(yy)] = row;
    }
  }
  double total = 0.0;
  for (double r : rows) total += r;
  return total;
}

ProbabilityVolume dce_grad(const ProbabilityVolume& pr, const DistanceLabelMap& gt,
                           const LossConfig& cfg) {
  cfg.validate();
  check_pair(pr, gt);
  ProbabilityVolume out(pr.width(), pr.height(), pr.n_classes());
  const std::size_t n = gt.labels.size();
#pragma omp parallel
  {
    std::vector<double> probs(pr.n_classes()), grad(pr.n_classes());
#pragma omp for schedule(static)
    for (std::int64_t ii = 0; ii < static_cast<std::int64_t>(n); ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      for (std::size_t k = 0; k < probs.size(); ++k) probs[k] = pr.plane(k).values()[i];
      dce_pixel_grad(probs, gt.labels.values()[i], cfg.prob_floor, grad);
      for (std::size_t k = 0; k < grad.size(); ++k)
        out.plane(k).values()[i] = static_cast<float>(grad[k]);
    }
  }
  return out;
}

double combined_regression(double l_m_init, double l_m_dense, double l_s, const LossConfig& cfg) {
  return l_m_init + l_m_dense + cfg.lambda1 * l_s;
}

double combined_localization(double l_ce_init, double l_ce_dense, double l_s,
                             const LossConfig& cfg) {
  return l_ce_init + l_ce_dense + cfg.lambda2 * l_s;
}

}  // namespace autoscale
