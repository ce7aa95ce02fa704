#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "autoscale/core.hpp"
#include "autoscale/l2s.hpp"
#include "autoscale/losses.hpp"
#include "autoscale/mapgen.hpp"

namespace autoscale {

enum class Mode { Regression, Localization };

/// How the Gaussian width follows the region scale when regenerating
/// density ground truth: kept (Fixed), sigma * r (Multiplied), sigma / r
/// (Divided).
enum class KernelMode { Fixed, Multiplied, Divided };

DensityConfig scaled_kernel(const DensityConfig& cfg, double r, KernelMode mode);

struct Region {
  BBox bbox;
  double scale = 1.0;
  Mode source = Mode::Regression;
};

struct PipelineConfig {
  double j_r = 0.1;
  double j_l = 0.02;
  std::uint8_t c_thresh = 8;
  double target_center = 0.0;
  DensityConfig density;
  LabelConfig labels;
  L2SConfig l2s;
  KernelMode kernel = KernelMode::Fixed;
  std::uint32_t top_k = 1;
  /// Replaces the analytic scale with a constant (clamped) factor.
  std::optional<double> fixed_scale;
  /// Regression only: also build stitch_raster's visualization map.
  bool keep_stitched_map = false;

  void validate() const;
};

/// One prediction request: the region of the full frame to predict and the
/// factor it is resampled by. The output extent is scaled_extent(bbox, scale).
struct PredictQuery {
  std::uint32_t frame_width = 0;
  std::uint32_t frame_height = 0;
  BBox bbox;
  double scale = 1.0;

  std::uint32_t out_width() const { return scaled_extent(bbox.width(), scale); }
  std::uint32_t out_height() const { return scaled_extent(bbox.height(), scale); }
  bool full_frame() const {
    return scale == 1.0 && bbox == BBox{0, 0, frame_width, frame_height};
  }
};

/// Stand-in for the counting network. Implementations must be safe for
/// concurrent const use.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual Raster<float> predict_density(const PredictQuery& q, const DensityConfig& density,
                                        KernelMode kernel) const = 0;
  virtual ProbabilityVolume predict_probabilities(const PredictQuery& q,
                                                  const LabelConfig& labels) const = 0;
};

/// Ground truth as prediction. The full frame gets density_map / the
/// one-hot label map of the annotation. A region gets its regenerated label
/// map, or a density in which every blob carries exactly the mass it places
/// inside the region in the full-frame map, so region counts agree with the
/// initial map to rounding.
class OracleExact : public Predictor {
 public:
  explicit OracleExact(PointSet annotation) : annotation_(std::move(annotation)) {}
  Raster<float> predict_density(const PredictQuery& q, const DensityConfig& density,
                                KernelMode kernel) const override;
  ProbabilityVolume predict_probabilities(const PredictQuery& q,
                                          const LabelConfig& labels) const override;
  const PointSet& annotation() const { return annotation_; }

 private:
  PointSet annotation_;
};

struct NoiseModel {
  double jitter_sigma = 0.0;    // px, Gaussian per coordinate
  double drop_probability = 0.0;
  double spurious_rate = 0.0;   // expected extra points per frame
  std::uint64_t seed = 0;
};

/// OracleExact on a perturbed copy of the annotation (drawn once, seeded).
class OracleNoisy : public Predictor {
 public:
  OracleNoisy(const PointSet& annotation, const NoiseModel& noise);
  Raster<float> predict_density(const PredictQuery& q, const DensityConfig& density,
                                KernelMode kernel) const override {
    return inner_.predict_density(q, density, kernel);
  }
  ProbabilityVolume predict_probabilities(const PredictQuery& q,
                                          const LabelConfig& labels) const override {
    return inner_.predict_probabilities(q, labels);
  }
  const PointSet& perturbed() const { return inner_.annotation(); }

 private:
  OracleExact inner_;
};

/// Serves a precomputed full-frame map. Regions are cropped and resampled:
/// densities bilinearly with the cropped mass preserved, label maps by
/// nearest neighbor, probability stacks bilinearly then renormalized.
class FilePredictor : public Predictor {
 public:
  using Content = std::variant<Raster<float>, LabelRaster, ProbabilityVolume>;
  explicit FilePredictor(Content content) : content_(std::move(content)) {}
  Raster<float> predict_density(const PredictQuery& q, const DensityConfig& density,
                                KernelMode kernel) const override;
  ProbabilityVolume predict_probabilities(const PredictQuery& q,
                                          const LabelConfig& labels) const override;

 private:
  Content content_;
};

/// Bounding boxes of the largest 8-connected components of mask (by pixel
/// count, ties by scan order) whose bbox covers at least min_area_ratio of
/// the frame. At most top_k boxes; a box overlapping an earlier pick is
/// skipped.
std::vector<BBox> select_regions(const Mask& mask, double min_area_ratio, std::uint32_t top_k);

/// Pixels strictly above twice the mean density.
std::optional<BBox> select_dense_region_regression(const Raster<float>& density, double j_r);
/// Pixels whose label is below c_thresh.
std::optional<BBox> select_dense_region_localization(const DistanceLabelMap& labels,
                                                     std::uint8_t c_thresh, double j_l);

Mask regression_mask(const Raster<float>& density);
Mask localization_mask(const DistanceLabelMap& labels, std::uint8_t c_thresh);

struct ScaleChoice {
  double r = 1.0;
  /// Set when the region held fewer than 2 points and r defaulted to 1.
  bool too_few_points = false;
  double closeness = 0.0;
};

/// Closed-form minimizer of the single-region center loss:
/// clamp(sqrt(target / S), r_min, r_max).
ScaleChoice analytic_scale(const PointSet& points_in_region, double target_center,
                           const L2SConfig& cfg);

/// Ground truth of box rescaled by r: the points inside box, scaled about
/// its origin, rendered with the (possibly rescaled) kernel.
Raster<float> regenerate_density(const PointSet& points, const BBox& box, double r,
                                 const DensityConfig& cfg, KernelMode kernel = KernelMode::Fixed);
DistanceLabelMap regenerate_labels(const PointSet& points, const BBox& box, double r,
                                   const LabelConfig& cfg);

inline Raster<float> regenerate_gt(const PointSet& points, const BBox& box, double r,
                                   const DensityConfig& cfg) {
  return regenerate_density(points, box, r, cfg);
}
inline DistanceLabelMap regenerate_gt(const PointSet& points, const BBox& box, double r,
                                      const LabelConfig& cfg) {
  return regenerate_labels(points, box, r, cfg);
}

/// sum(initial) - sum over boxes of sum(crop(initial, box)) + sum(refined).
double stitch_count(const Raster<float>& initial, std::span<const BBox> boxes,
                    std::span<const Raster<float>> refined, std::span<const double> scales);
double stitch_count(const Raster<float>& initial, const std::optional<BBox>& box,
                    const std::optional<Raster<float>>& refined, double scale = 1.0);

/// For display: initial with each box overwritten by its refined map
/// resampled back to the box extent and rescaled to the refined mass. Counts
/// come from stitch_count, not from summing this map.
Raster<float> stitch_raster(const Raster<float>& initial, std::span<const BBox> boxes,
                            std::span<const Raster<float>> refined);

/// Initial points outside every box, plus refined points mapped back by
/// p / r + box origin.
PointSet stitch_points(const PointSet& initial, std::span<const BBox> boxes,
                       std::span<const PointSet> refined, std::span<const double> scales);
PointSet stitch_points(const PointSet& initial, const std::optional<BBox>& box,
                       const std::optional<PointSet>& refined, double r);

struct AutoScaleResult {
  double final_count = 0.0;
  double sparse_count = 0.0;
  double initial_count = 0.0;
  std::vector<Region> regions;
  std::optional<PointSet> points;
  double r_used = 1.0;
  bool scale_defaulted = false;
  std::optional<Raster<float>> stitched_map;
};

AutoScaleResult run_autoscale(const PointSet& annotation, const Predictor& predictor, Mode mode,
                              const PipelineConfig& cfg);

}  // namespace autoscale
