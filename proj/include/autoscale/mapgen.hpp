#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "autoscale/core.hpp"

namespace autoscale {

/// Fixed isotropic Gaussian used to render density maps.
struct DensityConfig {
  double sigma = 4.0;

  /// ceil(3 sigma) pixels on each side of the center pixel.
  std::uint32_t kernel_radius() const;
  void validate() const;
};

/// Distance thresholds splitting [0, inf) into n_classes ordered bins;
/// class k covers [edges[k-1], edges[k]).
struct LabelConfig {
  std::vector<double> edges{1, 2, 3, 4, 6, 8, 12, 16, 24, 32};

  std::uint8_t n_classes() const { return static_cast<std::uint8_t>(edges.size() + 1); }
  std::uint8_t background() const { return static_cast<std::uint8_t>(edges.size()); }
  void validate() const;
};

struct DistanceLabelMap {
  LabelRaster labels;
  LabelConfig config;
};

/// Sum of one unit-mass Gaussian per point. Each blob is truncated to its
/// kernel window and to the frame, then renormalized to mass 1.
/// Parallel over rows; bit-identical for any thread count.
Raster<float> density_map(const PointSet& points, const DensityConfig& cfg);

/// Renders blobs of prescribed mass into a width x height frame. Centers may
/// lie outside the frame: a blob is truncated to the frame and renormalized
/// to its mass, and a blob whose window misses the frame entirely is
/// centered on the nearest in-frame position instead.
Raster<float> render_density(std::uint32_t width, std::uint32_t height,
                             std::span<const Point> centers, std::span<const double> masses,
                             const DensityConfig& cfg);

/// Mass each point's blob in density_map(points, cfg) places inside box.
std::vector<double> blob_masses(const PointSet& points, const DensityConfig& cfg, const BBox& box);

struct Histogram {
  std::vector<double> edges;  // bins + 1 entries
  std::vector<std::uint64_t> counts;
  std::uint64_t positive_pixels = 0;
  /// P99 / median of the positive pixels; empty when there are none.
  std::optional<double> tail_ratio;
};

/// Histogram of the strictly positive pixels over [min, max] of those pixels.
/// Percentiles interpolate linearly between order statistics.
Histogram value_histogram(const Raster<float>& map, std::uint32_t bins);

/// Linear-interpolation percentile (q in [0, 1]) of an unsorted sample.
double percentile(std::vector<double> values, double q);

/// Exact Euclidean distance from every pixel center to the nearest point.
/// Parallel over rows.
Raster<float> distance_map(const PointSet& points);

DistanceLabelMap quantize_labels(const Raster<float>& dist, const LabelConfig& cfg);

/// distance_map followed by quantize_labels; an empty set yields an
/// all-background map.
DistanceLabelMap label_map(const PointSet& points, const LabelConfig& cfg);

/// Centroids (pixel-center coordinates) of 8-connected equal-label plateaus
/// that are strictly lower than every 8-neighbor outside the plateau and are
/// not background.
PointSet local_minima(const DistanceLabelMap& map);

namespace reference {

/// Direct per-point 2-D accumulation in double, one blob at a time.
Raster<float> density_map(const PointSet& points, const DensityConfig& cfg);

/// O(pixels x points) minimum.
Raster<float> distance_map(const PointSet& points);

}  // namespace reference

}  // namespace autoscale
