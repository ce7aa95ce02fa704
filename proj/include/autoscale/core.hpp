#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "autoscale/error.hpp"

namespace autoscale {

/// Continuous image-plane position in pixels. Origin is the top-left corner
/// of the top-left pixel, so the center of pixel (i, j) is (i + 0.5, j + 0.5).
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

double distance(const Point& a, const Point& b);

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct BBox {
  std::uint32_t x0 = 0;
  std::uint32_t y0 = 0;
  std::uint32_t x1 = 0;
  std::uint32_t y1 = 0;

  std::uint32_t width() const { return x1 - x0; }
  std::uint32_t height() const { return y1 - y0; }
  std::uint64_t area() const { return std::uint64_t{width()} * height(); }
  bool contains(const Point& p) const {
    return p.x >= x0 && p.x < x1 && p.y >= y0 && p.y < y1;
  }
  bool overlaps(const BBox& o) const {
    return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1;
  }

  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Annotated head positions inside a width x height frame.
class PointSet {
 public:
  PointSet(std::uint32_t width, std::uint32_t height, std::vector<Point> points = {});

  std::uint32_t width() const { return width_; }
  std::uint32_t height() const { return height_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  std::span<const Point> points() const { return points_; }
  const Point& operator[](std::size_t i) const { return points_[i]; }

  /// Number of points removed by the operation that produced this set
  /// (points pushed outside the frame by scaling).
  std::size_t dropped() const { return dropped_; }
  void set_dropped(std::size_t n) { dropped_ = n; }

  bool in_frame(const Point& p) const {
    return p.x >= 0.0 && p.x < width_ && p.y >= 0.0 && p.y < height_;
  }

 private:
  std::uint32_t width_;
  std::uint32_t height_;
  std::vector<Point> points_;
  std::size_t dropped_ = 0;
};

/// Dense row-major grid.
template <class V>
class Raster {
 public:
  using value_type = V;

  Raster() = default;
  Raster(std::uint32_t width, std::uint32_t height, V fill = V{})
      : width_(width), height_(height), values_(std::size_t{width} * height, fill) {}
  Raster(std::uint32_t width, std::uint32_t height, std::vector<V> values)
      : width_(width), height_(height), values_(std::move(values)) {
    if (values_.size() != std::size_t{width} * height)
      throw ValidationError("raster payload size does not match dimensions");
  }

  std::uint32_t width() const { return width_; }
  std::uint32_t height() const { return height_; }
  std::size_t size() const { return values_.size(); }
  BBox frame() const { return {0, 0, width_, height_}; }

  V& at(std::uint32_t x, std::uint32_t y) { return values_[std::size_t{y} * width_ + x]; }
  const V& at(std::uint32_t x, std::uint32_t y) const {
    return values_[std::size_t{y} * width_ + x];
  }

  std::span<V> row(std::uint32_t y) { return {values_.data() + std::size_t{y} * width_, width_}; }
  std::span<const V> row(std::uint32_t y) const {
    return {values_.data() + std::size_t{y} * width_, width_};
  }

  std::span<V> values() { return values_; }
  std::span<const V> values() const { return values_; }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  std::uint32_t width_ = 0;
  std::uint32_t height_ = 0;
  std::vector<V> values_;
};

using DensityMap = Raster<float>;
using LabelRaster = Raster<std::uint8_t>;
/// Nonzero entries are "true".
using Mask = Raster<std::uint8_t>;

/// Sum of all values, accumulated in double.
double sum(const Raster<float>& r);

/// round-half-up(extent * factor), the output extent of every rescale.
std::uint32_t scaled_extent(std::uint32_t extent, double factor);

void check_bbox(const BBox& box, std::uint32_t width, std::uint32_t height);

template <class V>
Raster<V> crop(const Raster<V>& raster, const BBox& box) {
  check_bbox(box, raster.width(), raster.height());
  Raster<V> out(box.width(), box.height());
  for (std::uint32_t y = 0; y < box.height(); ++y) {
    auto src = raster.row(box.y0 + y).subspan(box.x0, box.width());
    std::copy(src.begin(), src.end(), out.row(y).begin());
  }
  return out;
}

/// Bilinear resampling with half-pixel-center alignment; output extents are
/// scaled_extent(extent, factor). Samples outside the source are clamped to
/// the border.
Raster<float> bilinear_resize(const Raster<float>& raster, double factor);
/// Same resampling to an explicit output extent.
Raster<float> bilinear_resize_to(const Raster<float>& raster, std::uint32_t out_w,
                                 std::uint32_t out_h);

struct Component {
  std::size_t pixels = 0;
  BBox bbox;
};

enum class Connectivity { Four = 4, Eight = 8 };

/// Components in raster scan order of their first pixel.
std::vector<Component> connected_components(const Mask& mask, Connectivity connectivity);

/// p' = (p - origin) * factor in a frame of scaled_extent(dims, factor).
/// Points landing outside the new frame are dropped and counted in dropped().
PointSet scale_points(const PointSet& points, double factor, const Point& origin = {});

/// Points inside box, translated to the box's own frame.
PointSet restrict_to(const PointSet& points, const BBox& box);

}  // namespace autoscale
