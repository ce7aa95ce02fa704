#include "autoscale/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace autoscale {

double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

PointSet::PointSet(std::uint32_t width, std::uint32_t height, std::vector<Point> points)
    : width_(width), height_(height), points_(std::move(points)) {
  if (width_ == 0 || height_ == 0) throw ValidationError("point frame must be at least 1x1");
  for (const auto& p : points_) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw ValidationError("point coordinates must be finite");
    if (!in_frame(p))
      throw ValidationError("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                            ") lies outside the " + std::to_string(width_) + "x" +
                            std::to_string(height_) + " frame");
  }
}

double sum(const Raster<float>& r) {
  double s = 0.0;
  for (float v : r.values()) s += v;
  return s;
}

std::uint32_t scaled_extent(std::uint32_t extent, double factor) {
  if (!std::isfinite(factor) || factor <= 0.0)
    throw ValidationError("scale factor must be finite and positive");
  const double scaled = std::floor(extent * factor + 0.5);
  if (scaled < 1.0) throw ValidationError("scaled extent rounds to zero");
  if (scaled > 1u << 30) throw ValidationError("scaled extent too large");
  return static_cast<std::uint32_t>(scaled);
}

void check_bbox(const BBox& box, std::uint32_t width, std::uint32_t height) {
  if (box.x0 >= box.x1 || box.y0 >= box.y1 || box.x1 > width || box.y1 > height)
    throw ValidationError("bbox [" + std::to_string(box.x0) + "," + std::to_string(box.y0) + "," +
                          std::to_string(box.x1) + "," + std::to_string(box.y1) +
                          ") is empty or exceeds the " + std::to_string(width) + "x" +
                          std::to_string(height) + " frame");
}

namespace {

struct Taps {
  std::uint32_t lo;
  std::uint32_t hi;
  double frac;
};

// Source taps for each output coordinate: src = (o + 0.5) / scale - 0.5.
std::vector<Taps> resample_taps(std::uint32_t in, std::uint32_t out) {
  std::vector<Taps> taps(out);
  const double scale = static_cast<double>(out) / in;
  for (std::uint32_t o = 0; o < out; ++o) {
    double src = (o + 0.5) / scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto lo = static_cast<std::uint32_t>(std::floor(src));
    const std::uint32_t hi = std::min(lo + 1, in - 1);
    taps[o] = {lo, hi, src - lo};
  }
  return taps;
}

}  // namespace

Raster<float> bilinear_resize(const Raster<float>& raster, double factor) {
  return bilinear_resize_to(raster, scaled_extent(raster.width(), factor),
                            scaled_extent(raster.height(), factor));
}

Raster<float> bilinear_resize_to(const Raster<float>& raster, std::uint32_t out_w,
                                 std::uint32_t out_h) {
  if (out_w == 0 || out_h == 0) throw ValidationError("resize target must be at least 1x1");
  const auto tx = resample_taps(raster.width(), out_w);
  const auto ty = resample_taps(raster.height(), out_h);
  Raster<float> out(out_w, out_h);
#pragma omp parallel for schedule(static)
  for (std::int64_t oy = 0; oy < out_h; ++oy) {
    const auto& t = ty[oy];
    auto top = raster.row(t.lo);
    auto bottom = raster.row(t.hi);
    auto dst = out.row(static_cast<std::uint32_t>(oy));
    for (std::uint32_t ox = 0; ox < out_w; ++ox) {
      const auto& s = tx[ox];
      const double a = top[s.lo] + s.frac * (top[s.hi] - top[s.lo]);
      const double b = bottom[s.lo] + s.frac * (bottom[s.hi] - bottom[s.lo]);
      dst[ox] = static_cast<float>(a + t.frac * (b - a));
    }
  }
  return out;
}

std::vector<Component> connected_components(const Mask& mask, Connectivity connectivity) {
  const std::uint32_t w = mask.width();
  const std::uint32_t h = mask.height();
  std::vector<std::uint8_t> seen(mask.size(), 0);
  std::vector<Component> components;
  std::vector<std::size_t> stack;
  const bool eight = connectivity == Connectivity::Eight;

  for (std::uint32_t y0 = 0; y0 < h; ++y0) {
    for (std::uint32_t x0 = 0; x0 < w; ++x0) {
      const std::size_t start = std::size_t{y0} * w + x0;
      if (!mask.values()[start] || seen[start]) continue;
      Component c{0, {x0, y0, x0 + 1, y0 + 1}};
      seen[start] = 1;
      stack.push_back(start);
      while (!stack.empty()) {
        const std::size_t idx = stack.back();
        stack.pop_back();
        const auto x = static_cast<std::uint32_t>(idx % w);
        const auto y = static_cast<std::uint32_t>(idx / w);
        ++c.pixels;
        c.bbox.x0 = std::min(c.bbox.x0, x);
        c.bbox.y0 = std::min(c.bbox.y0, y);
        c.bbox.x1 = std::max(c.bbox.x1, x + 1);
        c.bbox.y1 = std::max(c.bbox.y1, y + 1);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if ((dx == 0 && dy == 0) || (!eight && dx != 0 && dy != 0)) continue;
            const std::int64_t nx = std::int64_t{x} + dx;
            const std::int64_t ny = std::int64_t{y} + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const std::size_t n = static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx);
            if (mask.values()[n] && !seen[n]) {
              seen[n] = 1;
              stack.push_back(n);
            }
          }
        }
      }
      components.push_back(c);
    }
  }
  return components;
}

PointSet scale_points(const PointSet& points, double factor, const Point& origin) {
  const std::uint32_t w = scaled_extent(points.width(), factor);
  const std::uint32_t h = scaled_extent(points.height(), factor);
  std::vector<Point> kept;
  kept.reserve(points.size());
  std::size_t dropped = 0;
  for (const auto& p : points.points()) {
    const Point q{(p.x - origin.x) * factor, (p.y - origin.y) * factor};
    if (q.x >= 0.0 && q.x < w && q.y >= 0.0 && q.y < h)
      kept.push_back(q);
    else
      ++dropped;
  }
  PointSet out(w, h, std::move(kept));
  out.set_dropped(dropped);
  return out;
}

PointSet restrict_to(const PointSet& points, const BBox& box) {
  check_bbox(box, points.width(), points.height());
  std::vector<Point> inside;
  for (const auto& p : points.points()) {
    if (!box.contains(p)) continue;
    // Subtraction can round up onto the far edge for points a few ulps inside it.
    const double x = std::min(p.x - box.x0, std::nextafter(double(box.width()), 0.0));
    const double y = std::min(p.y - box.y0, std::nextafter(double(box.height()), 0.0));
    inside.push_back({x, y});
  }
  return PointSet(box.width(), box.height(), std::move(inside));
}

}  // namespace autoscale
