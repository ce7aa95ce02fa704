#include "autoscale/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "autoscale/closeness.hpp"
#include "autoscale/synth.hpp"

namespace autoscale {

DensityConfig scaled_kernel(const DensityConfig& cfg, double r, KernelMode mode) {
  switch (mode) {
    case KernelMode::Multiplied: return {cfg.sigma * r};
    case KernelMode::Divided: return {cfg.sigma / r};
    case KernelMode::Fixed: break;
  }
  return cfg;
}

void PipelineConfig::validate() const {
  if (!(j_r > 0.0 && j_r <= 1.0) || !(j_l > 0.0 && j_l <= 1.0))
    throw ValidationError("area-ratio thresholds must lie in (0, 1]");
  density.validate();
  labels.validate();
  l2s.validate();
  if (c_thresh >= labels.n_classes())
    throw ValidationError("c_thresh must be below the number of classes");
  if (top_k < 1) throw ValidationError("top_k must be at least 1");
  if (!fixed_scale && !(target_center > 0.0 && std::isfinite(target_center)))
    throw ValidationError("target_center must be positive (or give a fixed scale)");
  if (fixed_scale && !(*fixed_scale > 0.0 && std::isfinite(*fixed_scale)))
    throw ValidationError("fixed scale must be positive");
}

namespace {

void check_query(const PredictQuery& q) {
  check_bbox(q.bbox, q.frame_width, q.frame_height);
  (void)scaled_extent(q.bbox.width(), q.scale);
}

// Points inside box, mapped into the rescaled box frame. Dim rounding can
// shrink the frame by under half a pixel; points caught there are pulled
// onto the last pixel rather than lost.
std::vector<Point> scaled_centers(const PointSet& points, const BBox& box, double r,
                                  std::uint32_t out_w, std::uint32_t out_h) {
  std::vector<Point> out;
  const double max_x = std::nextafter(double(out_w), 0.0);
  const double max_y = std::nextafter(double(out_h), 0.0);
  for (const auto& p : points.points()) {
    if (!box.contains(p)) continue;
    out.push_back({std::min((p.x - box.x0) * r, max_x), std::min((p.y - box.y0) * r, max_y)});
  }
  return out;
}

void check_output(std::uint32_t w, std::uint32_t h, const PredictQuery& q, const char* what) {
  if (w != q.out_width() || h != q.out_height())
    throw ValidationError(std::string("predictor returned a ") + std::to_string(w) + "x" +
                          std::to_string(h) + " " + what + ", expected " +
                          std::to_string(q.out_width()) + "x" + std::to_string(q.out_height()));
}

}  // namespace

Raster<float> OracleExact::predict_density(const PredictQuery& q, const DensityConfig& density,
                                           KernelMode kernel) const {
  check_query(q);
  if (q.frame_width != annotation_.width() || q.frame_height != annotation_.height())
    throw ValidationError("query frame differs from the annotation frame");
  if (q.full_frame()) return density_map(annotation_, density);

  const auto masses = blob_masses(annotation_, density, q.bbox);
  std::vector<Point> centers;
  std::vector<double> kept;
  for (std::size_t i = 0; i < annotation_.size(); ++i) {
    if (masses[i] <= 0.0) continue;
    const auto& p = annotation_[i];
    centers.push_back({(p.x - q.bbox.x0) * q.scale, (p.y - q.bbox.y0) * q.scale});
    kept.push_back(masses[i]);
  }
  return render_density(q.out_width(), q.out_height(), centers, kept,
                        scaled_kernel(density, q.scale, kernel));
}

ProbabilityVolume OracleExact::predict_probabilities(const PredictQuery& q,
                                                     const LabelConfig& labels) const {
  check_query(q);
  if (q.frame_width != annotation_.width() || q.frame_height != annotation_.height())
    throw ValidationError("query frame differs from the annotation frame");
  const auto map = q.full_frame() ? label_map(annotation_, labels)
                                  : regenerate_labels(annotation_, q.bbox, q.scale, labels);
  return ProbabilityVolume::one_hot(map.labels, labels.n_classes());
}

namespace {

PointSet perturb(const PointSet& annotation, const NoiseModel& noise) {
  if (!(noise.jitter_sigma >= 0.0) || !(noise.spurious_rate >= 0.0) ||
      !(noise.drop_probability >= 0.0 && noise.drop_probability <= 1.0))
    throw ValidationError("noise parameters out of range");
  SceneRng rng(noise.seed);
  std::vector<Point> out;
  for (const auto& p : annotation.points()) {
    const bool drop = rng.uniform() < noise.drop_probability;
    const Point q{p.x + noise.jitter_sigma * rng.normal(), p.y + noise.jitter_sigma * rng.normal()};
    if (!drop && annotation.in_frame(q)) out.push_back(q);
  }
  const std::uint64_t extra = rng.poisson(noise.spurious_rate);
  for (std::uint64_t k = 0; k < extra; ++k) {
    const double x = rng.uniform() * annotation.width();
    const double y = rng.uniform() * annotation.height();
    const Point q{x, y};
    if (annotation.in_frame(q)) out.push_back(q);
  }
  return PointSet(annotation.width(), annotation.height(), std::move(out));
}

LabelRaster nearest_resample(const LabelRaster& src, double scale) {
  const std::uint32_t w = scaled_extent(src.width(), scale);
  const std::uint32_t h = scaled_extent(src.height(), scale);
  LabelRaster out(w, h);
  const double sx = double(w) / src.width();
  const double sy = double(h) / src.height();
  for (std::uint32_t y = 0; y < h; ++y) {
    const auto yy = std::min<std::uint32_t>(src.height() - 1, static_cast<std::uint32_t>((y + 0.5) / sy));
    for (std::uint32_t x = 0; x < w; ++x) {
      const auto xx = std::min<std::uint32_t>(src.width() - 1, static_cast<std::uint32_t>((x + 0.5) / sx));
      out.at(x, y) = src.at(xx, yy);
    }
  }
  return out;
}

}  // namespace

OracleNoisy::OracleNoisy(const PointSet& annotation, const NoiseModel& noise)
    : inner_(perturb(annotation, noise)) {}

Raster<float> FilePredictor::predict_density(const PredictQuery& q, const DensityConfig&,
                                             KernelMode) const {
  check_query(q);
  const auto* map = std::get_if<Raster<float>>(&content_);
  if (!map) throw ValidationError("prediction file holds labels, not a density map");
  if (map->width() != q.frame_width || map->height() != q.frame_height)
    throw ValidationError("prediction map size differs from the annotation frame");
  if (q.full_frame()) return *map;
  auto region = crop(*map, q.bbox);
  if (q.scale == 1.0) return region;
  const double mass = sum(region);
  auto resized = bilinear_resize(region, q.scale);
  const double resized_mass = sum(resized);
  if (resized_mass > 0.0)
    for (auto& v : resized.values()) v = static_cast<float>(v * (mass / resized_mass));
  return resized;
}

ProbabilityVolume FilePredictor::predict_probabilities(const PredictQuery& q,
                                                       const LabelConfig& labels) const {
  check_query(q);
  if (const auto* lab = std::get_if<LabelRaster>(&content_)) {
    if (lab->width() != q.frame_width || lab->height() != q.frame_height)
      throw ValidationError("prediction map size differs from the annotation frame");
    auto region = q.full_frame() ? *lab : nearest_resample(crop(*lab, q.bbox), q.scale);
    return ProbabilityVolume::one_hot(region, labels.n_classes());
  }
  if (const auto* pr = std::get_if<ProbabilityVolume>(&content_)) {
    if (pr->width() != q.frame_width || pr->height() != q.frame_height)
      throw ValidationError("prediction volume size differs from the annotation frame");
    if (pr->n_classes() != labels.n_classes())
      throw ValidationError("prediction volume class count differs from the label config");
    if (q.full_frame()) return *pr;
    std::vector<Raster<float>> planes;
    for (std::uint8_t k = 0; k < pr->n_classes(); ++k)
      planes.push_back(bilinear_resize(crop(pr->plane(k), q.bbox), q.scale));
    ProbabilityVolume out(std::move(planes));
    for (std::size_t i = 0; i < out.plane(0).size(); ++i) {
      double total = 0.0;
      for (std::uint8_t k = 0; k < out.n_classes(); ++k) total += out.plane(k).values()[i];
      if (total > 0.0)
        for (std::uint8_t k = 0; k < out.n_classes(); ++k)
          out.plane(k).values()[i] = static_cast<float>(out.plane(k).values()[i] / total);
    }
    return out;
  }
  throw ValidationError("prediction file holds a density map, not labels");
}

std::vector<BBox> select_regions(const Mask& mask, double min_area_ratio, std::uint32_t top_k) {
  auto components = connected_components(mask, Connectivity::Eight);
  std::stable_sort(components.begin(), components.end(),
                   [](const Component& a, const Component& b) { return a.pixels > b.pixels; });
  const double frame = double(mask.width()) * mask.height();
  std::vector<BBox> picked;
  for (std::size_t i = 0; i < components.size() && i < top_k; ++i) {
    const BBox& box = components[i].bbox;
    if (double(box.area()) / frame < min_area_ratio) continue;
    const bool clash = std::any_of(picked.begin(), picked.end(),
                                   [&](const BBox& b) { return b.overlaps(box); });
    if (!clash) picked.push_back(box);
  }
  return picked;
}

Mask regression_mask(const Raster<float>& density) {
  const double threshold = 2.0 * sum(density) / static_cast<double>(density.size());
  Mask mask(density.width(), density.height());
  for (std::size_t i = 0; i < density.size(); ++i)
    mask.values()[i] = density.values()[i] > threshold ? 1 : 0;
  return mask;
}

Mask localization_mask(const DistanceLabelMap& labels, std::uint8_t c_thresh) {
  if (c_thresh >= labels.config.n_classes())
    throw ValidationError("c_thresh must be below the number of classes");
  Mask mask(labels.labels.width(), labels.labels.height());
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask.values()[i] = labels.labels.values()[i] < c_thresh ? 1 : 0;
  return mask;
}

std::optional<BBox> select_dense_region_regression(const Raster<float>& density, double j_r) {
  const auto boxes = select_regions(regression_mask(density), j_r, 1);
  if (boxes.empty()) return std::nullopt;
  return boxes.front();
}

std::optional<BBox> select_dense_region_localization(const DistanceLabelMap& labels,
                                                     std::uint8_t c_thresh, double j_l) {
  const auto boxes = select_regions(localization_mask(labels, c_thresh), j_l, 1);
  if (boxes.empty()) return std::nullopt;
  return boxes.front();
}

ScaleChoice analytic_scale(const PointSet& points_in_region, double target_center,
                           const L2SConfig& cfg) {
  cfg.validate();
  if (!(target_center > 0.0)) throw ValidationError("target center must be positive");
  if (points_in_region.size() < 2) return {1.0, true, 0.0};
  const double s = closeness_level(points_in_region);
  return {clamp_scale(std::sqrt(target_center / s), cfg), false, s};
}

Raster<float> regenerate_density(const PointSet& points, const BBox& box, double r,
                                 const DensityConfig& cfg, KernelMode kernel) {
  check_bbox(box, points.width(), points.height());
  const std::uint32_t w = scaled_extent(box.width(), r);
  const std::uint32_t h = scaled_extent(box.height(), r);
  const auto centers = scaled_centers(points, box, r, w, h);
  const std::vector<double> unit(centers.size(), 1.0);
  return render_density(w, h, centers, unit, scaled_kernel(cfg, r, kernel));
}

DistanceLabelMap regenerate_labels(const PointSet& points, const BBox& box, double r,
                                   const LabelConfig& cfg) {
  check_bbox(box, points.width(), points.height());
  const std::uint32_t w = scaled_extent(box.width(), r);
  const std::uint32_t h = scaled_extent(box.height(), r);
  return label_map(PointSet(w, h, scaled_centers(points, box, r, w, h)), cfg);
}

double stitch_count(const Raster<float>& initial, std::span<const BBox> boxes,
                    std::span<const Raster<float>> refined, std::span<const double> scales) {
  if (boxes.size() != refined.size() || boxes.size() != scales.size())
    throw ValidationError("each region needs exactly one refined map and scale");
  double total = sum(initial);
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    if (refined[k].width() != scaled_extent(boxes[k].width(), scales[k]) ||
        refined[k].height() != scaled_extent(boxes[k].height(), scales[k]))
      throw ValidationError("refined map size does not match the rescaled region");
    total += sum(refined[k]) - sum(crop(initial, boxes[k]));
  }
  return total;
}

double stitch_count(const Raster<float>& initial, const std::optional<BBox>& box,
                    const std::optional<Raster<float>>& refined, double scale) {
  if (box.has_value() != refined.has_value())
    throw ValidationError("a refined map is required exactly when a region is given");
  if (!box) return sum(initial);
  return stitch_count(initial, std::span(&*box, 1), std::span(&*refined, 1), std::span(&scale, 1));
}

Raster<float> stitch_raster(const Raster<float>& initial, std::span<const BBox> boxes,
                            std::span<const Raster<float>> refined) {
  if (boxes.size() != refined.size())
    throw ValidationError("each region needs exactly one refined map");
  Raster<float> out = initial;
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    const auto& b = boxes[k];
    check_bbox(b, initial.width(), initial.height());
    auto patch = bilinear_resize_to(refined[k], b.width(), b.height());
    const double have = sum(patch);
    const double want = sum(refined[k]);
    const double gain = have > 0.0 ? want / have : 0.0;
    for (std::uint32_t y = 0; y < b.height(); ++y) {
      auto src = patch.row(y);
      auto dst = out.row(b.y0 + y);
      for (std::uint32_t x = 0; x < b.width(); ++x)
        dst[b.x0 + x] = static_cast<float>(src[x] * gain);
    }
  }
  return out;
}

PointSet stitch_points(const PointSet& initial, std::span<const BBox> boxes,
                       std::span<const PointSet> refined, std::span<const double> scales) {
  if (boxes.size() != refined.size() || boxes.size() != scales.size())
    throw ValidationError("each region needs exactly one refined point set and scale");
  std::vector<Point> out;
  for (const auto& p : initial.points())
    if (std::none_of(boxes.begin(), boxes.end(), [&](const BBox& b) { return b.contains(p); }))
      out.push_back(p);
  const double max_x = std::nextafter(double(initial.width()), 0.0);
  const double max_y = std::nextafter(double(initial.height()), 0.0);
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    check_bbox(boxes[k], initial.width(), initial.height());
    if (refined[k].width() != scaled_extent(boxes[k].width(), scales[k]) ||
        refined[k].height() != scaled_extent(boxes[k].height(), scales[k]))
      throw ValidationError("refined point frame does not match the rescaled region");
    for (const auto& p : refined[k].points())
      out.push_back({std::min(p.x / scales[k] + boxes[k].x0, max_x),
                     std::min(p.y / scales[k] + boxes[k].y0, max_y)});
  }
  return PointSet(initial.width(), initial.height(), std::move(out));
}

PointSet stitch_points(const PointSet& initial, const std::optional<BBox>& box,
                       const std::optional<PointSet>& refined, double r) {
  if (box.has_value() != refined.has_value())
    throw ValidationError("refined points are required exactly when a region is given");
  if (!box) return initial;
  return stitch_points(initial, std::span(&*box, 1), std::span(&*refined, 1), std::span(&r, 1));
}

namespace {

ScaleChoice choose_scale(const PointSet& annotation, const BBox& box, const PipelineConfig& cfg) {
  if (cfg.fixed_scale) return {clamp_scale(*cfg.fixed_scale, cfg.l2s), false, 0.0};
  return analytic_scale(restrict_to(annotation, box), cfg.target_center, cfg.l2s);
}

}  // namespace

AutoScaleResult run_autoscale(const PointSet& annotation, const Predictor& predictor, Mode mode,
                              const PipelineConfig& cfg) {
  cfg.validate();
  const std::uint32_t w = annotation.width();
  const std::uint32_t h = annotation.height();
  const PredictQuery full{w, h, {0, 0, w, h}, 1.0};
  AutoScaleResult result;

  std::vector<BBox> boxes;
  std::vector<double> scales;
  auto pick_scales = [&] {
    for (const auto& box : boxes) {
      const auto choice = choose_scale(annotation, box, cfg);
      scales.push_back(choice.r);
      result.regions.push_back({box, choice.r, mode});
      result.scale_defaulted = result.scale_defaulted || choice.too_few_points;
    }
    if (!scales.empty()) result.r_used = scales.front();
  };

  if (mode == Mode::Regression) {
    const auto initial = predictor.predict_density(full, cfg.density, cfg.kernel);
    check_output(initial.width(), initial.height(), full, "density map");
    result.initial_count = sum(initial);
    boxes = select_regions(regression_mask(initial), cfg.j_r, cfg.top_k);
    pick_scales();
    std::vector<Raster<float>> refined;
    result.sparse_count = result.initial_count;
    for (std::size_t k = 0; k < boxes.size(); ++k) {
      const PredictQuery q{w, h, boxes[k], scales[k]};
      refined.push_back(predictor.predict_density(q, cfg.density, cfg.kernel));
      check_output(refined.back().width(), refined.back().height(), q, "density map");
      result.sparse_count -= sum(crop(initial, boxes[k]));
    }
    result.final_count = stitch_count(initial, boxes, refined, scales);
    if (cfg.keep_stitched_map) result.stitched_map = stitch_raster(initial, boxes, refined);
    return result;
  }

  const auto initial_pr = predictor.predict_probabilities(full, cfg.labels);
  check_output(initial_pr.width(), initial_pr.height(), full, "probability volume");
  if (initial_pr.n_classes() != cfg.labels.n_classes())
    throw ValidationError("predictor returned the wrong number of classes");
  const DistanceLabelMap initial{argmax(initial_pr), cfg.labels};
  const PointSet initial_points = local_minima(initial);
  result.initial_count = static_cast<double>(initial_points.size());
  boxes = select_regions(localization_mask(initial, cfg.c_thresh), cfg.j_l, cfg.top_k);
  pick_scales();
  std::vector<PointSet> refined;
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    const PredictQuery q{w, h, boxes[k], scales[k]};
    const auto pr = predictor.predict_probabilities(q, cfg.labels);
    check_output(pr.width(), pr.height(), q, "probability volume");
    refined.push_back(local_minima({argmax(pr), cfg.labels}));
  }
  auto points = stitch_points(initial_points, boxes, refined, scales);
  std::size_t refined_total = 0;
  for (const auto& r : refined) refined_total += r.size();
  result.final_count = static_cast<double>(points.size());
  result.sparse_count = static_cast<double>(points.size() - refined_total);
  result.points = std::move(points);
  return result;
}

}  // namespace autoscale
