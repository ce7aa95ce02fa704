#include "autoscale/mapgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace autoscale {

std::uint32_t DensityConfig::kernel_radius() const {
  return static_cast<std::uint32_t>(std::ceil(3.0 * sigma));
}

void DensityConfig::validate() const {
  if (!std::isfinite(sigma) || sigma <= 0.0) throw ValidationError("sigma must be positive");
  if (sigma > 1e4) throw ValidationError("sigma unreasonably large");
}

void LabelConfig::validate() const {
  if (edges.empty()) throw ValidationError("label config needs at least one edge");
  if (edges.size() > 254) throw ValidationError("at most 255 distance classes are supported");
  for (std::size_t k = 0; k < edges.size(); ++k) {
    if (!std::isfinite(edges[k]) || edges[k] <= 0.0)
      throw ValidationError("label edges must be positive");
    if (k > 0 && edges[k] <= edges[k - 1])
      throw ValidationError("label edges must be strictly increasing");
  }
}

namespace {

// Gaussian weights of one axis over the blob window, normalized to sum 1.
struct AxisKernel {
  std::uint32_t lo = 0;
  std::vector<double> w;
};

AxisKernel axis_kernel(double center, std::uint32_t extent, std::uint32_t radius, double sigma) {
  auto c = static_cast<std::int64_t>(std::floor(center));
  // A window that misses the frame is re-centered on the nearest edge pixel.
  if (c + std::int64_t{radius} < 0 || c - std::int64_t{radius} > std::int64_t{extent} - 1) {
    c = std::clamp<std::int64_t>(c, 0, std::int64_t{extent} - 1);
    center = c + 0.5;
  }
  const std::int64_t lo = std::max<std::int64_t>(0, c - radius);
  const std::int64_t hi = std::min<std::int64_t>(extent - 1, c + radius);
  AxisKernel k;
  k.lo = static_cast<std::uint32_t>(lo);
  k.w.resize(static_cast<std::size_t>(hi - lo + 1));
  const double inv = 1.0 / (2.0 * sigma * sigma);
  double total = 0.0;
  for (std::int64_t i = lo; i <= hi; ++i) {
    const double d = (i + 0.5) - center;
    total += k.w[static_cast<std::size_t>(i - lo)] = std::exp(-d * d * inv);
  }
  for (auto& v : k.w) v /= total;
  return k;
}

double mass_between(const AxisKernel& k, std::uint32_t lo, std::uint32_t hi) {
  double m = 0.0;
  for (std::size_t i = 0; i < k.w.size(); ++i) {
    const std::size_t pos = k.lo + i;
    if (pos >= lo && pos < hi) m += k.w[i];
  }
  return m;
}

}  // namespace

Raster<float> render_density(std::uint32_t width, std::uint32_t height,
                             std::span<const Point> centers, std::span<const double> masses,
                             const DensityConfig& cfg) {
  cfg.validate();
  if (width == 0 || height == 0) throw ValidationError("density frame must be at least 1x1");
  if (masses.size() != centers.size()) throw ValidationError("one mass per blob is required");
  const std::uint32_t radius = cfg.kernel_radius();
  const std::size_t n = centers.size();

  std::vector<AxisKernel> kx(n), ky(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(centers[i].x) || !std::isfinite(centers[i].y))
      throw ValidationError("blob centers must be finite");
    kx[i] = axis_kernel(centers[i].x, width, radius, cfg.sigma);
    ky[i] = axis_kernel(centers[i].y, height, radius, cfg.sigma);
  }

  // Row -> blobs touching it, in blob order (CSR).
  std::vector<std::size_t> row_start(std::size_t{height} + 1, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t r = 0; r < ky[i].w.size(); ++r) ++row_start[ky[i].lo + r + 1];
  std::partial_sum(row_start.begin(), row_start.end(), row_start.begin());
  std::vector<std::size_t> row_blobs(row_start.back());
  {
    auto cursor = row_start;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t r = 0; r < ky[i].w.size(); ++r) row_blobs[cursor[ky[i].lo + r]++] = i;
  }

  Raster<float> out(width, height);
#pragma omp parallel
  {
    std::vector<double> acc(width);
#pragma omp for schedule(dynamic, 8)
    for (std::int64_t yy = 0; yy < height; ++yy) {
      const auto y = static_cast<std::uint32_t>(yy);
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t b = row_start[y]; b < row_start[y + 1]; ++b) {
        const std::size_t i = row_blobs[b];
        const double wy = masses[i] * ky[i].w[y - ky[i].lo];
        const auto& wx = kx[i].w;
        double* dst = acc.data() + kx[i].lo;
        for (std::size_t x = 0; x < wx.size(); ++x) dst[x] += wy * wx[x];
      }
      auto row = out.row(y);
      for (std::uint32_t x = 0; x < width; ++x) row[x] = static_cast<float>(acc[x]);
    }
  }
  return out;
}

Raster<float> density_map(const PointSet& points, const DensityConfig& cfg) {
  const std::vector<double> unit(points.size(), 1.0);
  return render_density(points.width(), points.height(), points.points(), unit, cfg);
}

std::vector<double> blob_masses(const PointSet& points, const DensityConfig& cfg, const BBox& box) {
  cfg.validate();
  check_bbox(box, points.width(), points.height());
  const std::uint32_t radius = cfg.kernel_radius();
  std::vector<double> masses(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto kx = axis_kernel(points[i].x, points.width(), radius, cfg.sigma);
    const auto ky = axis_kernel(points[i].y, points.height(), radius, cfg.sigma);
    masses[i] = mass_between(kx, box.x0, box.x1) * mass_between(ky, box.y0, box.y1);
  }
  return masses;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw ValidationError("percentile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("percentile q must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Histogram value_histogram(const Raster<float>& map, std::uint32_t bins) {
  if (bins < 2) throw ValidationError("histogram needs at least 2 bins");
  std::vector<double> positive;
  for (float v : map.values())
    if (v > 0.0f) positive.push_back(v);

  Histogram hist;
  hist.counts.assign(bins, 0);
  hist.positive_pixels = positive.size();
  if (positive.empty()) {
    hist.edges.assign(bins + 1, 0.0);
    return hist;
  }
  const auto [mn, mx] = std::minmax_element(positive.begin(), positive.end());
  const double lo = *mn;
  const double hi = *mx;
  const double width = (hi - lo) / bins;
  hist.edges.resize(bins + 1);
  for (std::uint32_t k = 0; k <= bins; ++k) hist.edges[k] = lo + width * k;
  hist.edges.back() = hi;
  for (double v : positive) {
    std::uint32_t k = 0;
    if (width > 0.0) k = std::min(bins - 1, static_cast<std::uint32_t>((v - lo) / width));
    ++hist.counts[k];
  }
  const double median = percentile(positive, 0.5);
  hist.tail_ratio = percentile(std::move(positive), 0.99) / median;
  return hist;
}

Raster<float> distance_map(const PointSet& points) {
  if (points.empty()) throw ValidationError("distance map of an empty point set is undefined");
  const std::uint32_t w = points.width();
  const std::uint32_t h = points.height();
  std::vector<Point> sorted(points.points().begin(), points.points().end());
  std::sort(sorted.begin(), sorted.end(), [](const Point& a, const Point& b) { return a.x < b.x; });
  std::vector<double> xs(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) xs[i] = sorted[i].x;

  Raster<float> out(w, h);
#pragma omp parallel
  {
    std::vector<double> dy2(sorted.size());
#pragma omp for schedule(static)
    for (std::int64_t yy = 0; yy < h; ++yy) {
      const auto y = static_cast<std::uint32_t>(yy);
      const double yc = y + 0.5;
      for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double dy = yc - sorted[i].y;
        dy2[i] = dy * dy;
      }
      auto row = out.row(y);
      std::size_t start = 0;
      for (std::uint32_t x = 0; x < w; ++x) {
        const double xc = x + 0.5;
        while (start < xs.size() && xs[start] < xc) ++start;
        double best = std::numeric_limits<double>::infinity();
        // Walk outward in x; stop once the horizontal gap alone exceeds best.
        for (std::size_t i = start; i < xs.size(); ++i) {
          const double dx = xc - xs[i];
          const double dx2 = dx * dx;
          if (dx2 >= best) break;
          best = std::min(best, dx2 + dy2[i]);
        }
        for (std::size_t i = start; i-- > 0;) {
          const double dx = xc - xs[i];
          const double dx2 = dx * dx;
          if (dx2 >= best) break;
          best = std::min(best, dx2 + dy2[i]);
        }
        row[x] = static_cast<float>(std::sqrt(best));
      }
    }
  }
  return out;
}

DistanceLabelMap quantize_labels(const Raster<float>& dist, const LabelConfig& cfg) {
  cfg.validate();
  LabelRaster labels(dist.width(), dist.height());
  auto src = dist.values();
  auto dst = labels.values();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(src.size()); ++i) {
    const double d = src[static_cast<std::size_t>(i)];
    dst[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(
        std::upper_bound(cfg.edges.begin(), cfg.edges.end(), d) - cfg.edges.begin());
  }
  return {std::move(labels), cfg};
}

DistanceLabelMap label_map(const PointSet& points, const LabelConfig& cfg) {
  cfg.validate();
  if (points.empty())
    return {LabelRaster(points.width(), points.height(), cfg.background()), cfg};
  return quantize_labels(distance_map(points), cfg);
}

PointSet local_minima(const DistanceLabelMap& map) {
  const auto& labels = map.labels;
  const std::uint32_t w = labels.width();
  const std::uint32_t h = labels.height();
  const std::uint8_t background = map.config.background();
  std::vector<std::uint8_t> seen(labels.size(), 0);
  std::vector<std::size_t> stack;
  std::vector<Point> detections;

  for (std::size_t start = 0; start < labels.size(); ++start) {
    if (seen[start]) continue;
    const std::uint8_t level = labels.values()[start];
    bool minimum = level < background;
    double sx = 0.0, sy = 0.0;
    std::size_t count = 0;
    seen[start] = 1;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t idx = stack.back();
      stack.pop_back();
      const auto x = static_cast<std::uint32_t>(idx % w);
      const auto y = static_cast<std::uint32_t>(idx / w);
      sx += x + 0.5;
      sy += y + 0.5;
      ++count;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const std::int64_t nx = std::int64_t{x} + dx;
          const std::int64_t ny = std::int64_t{y} + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const std::size_t n = static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx);
          const std::uint8_t v = labels.values()[n];
          if (v < level) minimum = false;
          if (v == level && !seen[n]) {
            seen[n] = 1;
            stack.push_back(n);
          }
        }
      }
    }
    if (minimum) detections.push_back({sx / count, sy / count});
  }
  return PointSet(w, h, std::move(detections));
}

namespace reference {

Raster<float> density_map(const PointSet& points, const DensityConfig& cfg) {
  cfg.validate();
  const std::uint32_t w = points.width();
  const std::uint32_t h = points.height();
  const std::int64_t radius = cfg.kernel_radius();
  std::vector<double> acc(std::size_t{w} * h, 0.0);
  std::vector<double> blob;
  for (const auto& p : points.points()) {
    const auto cx = static_cast<std::int64_t>(std::floor(p.x));
    const auto cy = static_cast<std::int64_t>(std::floor(p.y));
    const std::int64_t x0 = std::max<std::int64_t>(0, cx - radius);
    const std::int64_t x1 = std::min<std::int64_t>(w - 1, cx + radius);
    const std::int64_t y0 = std::max<std::int64_t>(0, cy - radius);
    const std::int64_t y1 = std::min<std::int64_t>(h - 1, cy + radius);
    blob.clear();
    double total = 0.0;
    for (std::int64_t y = y0; y <= y1; ++y) {
      for (std::int64_t x = x0; x <= x1; ++x) {
        const double dx = (x + 0.5) - p.x;
        const double dy = (y + 0.5) - p.y;
        blob.push_back(std::exp(-(dx * dx + dy * dy) / (2.0 * cfg.sigma * cfg.sigma)));
        total += blob.back();
      }
    }
    std::size_t k = 0;
    for (std::int64_t y = y0; y <= y1; ++y)
      for (std::int64_t x = x0; x <= x1; ++x)
        acc[static_cast<std::size_t>(y * w + x)] += blob[k++] / total;
  }
  Raster<float> out(w, h);
  for (std::size_t i = 0; i < acc.size(); ++i) out.values()[i] = static_cast<float>(acc[i]);
  return out;
}

Raster<float> distance_map(const PointSet& points) {
  if (points.empty()) throw ValidationError("distance map of an empty point set is undefined");
  Raster<float> out(points.width(), points.height());
  for (std::uint32_t y = 0; y < points.height(); ++y) {
    for (std::uint32_t x = 0; x < points.width(); ++x) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& p : points.points()) {
        const double dx = (x + 0.5) - p.x;
        const double dy = (y + 0.5) - p.y;
        best = std::min(best, dx * dx + dy * dy);
      }
      out.at(x, y) = static_cast<float>(std::sqrt(best));
    }
  }
  return out;
}

}  // namespace reference

}  // namespace autoscale
