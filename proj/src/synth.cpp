#include "autoscale/synth.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace autoscale {

void SceneSpec::validate() const {
  if (width == 0 || height == 0) throw ValidationError("scene frame must be at least 1x1");
  std::visit(
      [](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, PoissonProcess>) {
          if (!(p.intensity >= 0.0) || !std::isfinite(p.intensity))
            throw ValidationError("Poisson intensity must be finite and >= 0");
        } else {
          if (!(p.parent_intensity >= 0.0) || !(p.mean_offspring >= 0.0) ||
              !std::isfinite(p.parent_intensity) || !std::isfinite(p.mean_offspring))
            throw ValidationError("Thomas intensities must be finite and >= 0");
          if (!(p.spread > 0.0) || !std::isfinite(p.spread))
            throw ValidationError("Thomas spread must be positive");
        }
      },
      process);
}

double SceneRng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double SceneRng::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t SceneRng::poisson(double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw ValidationError("Poisson mean must be >= 0");
  std::uint64_t total = 0;
  while (mean > 0.0) {
    const double chunk = std::min(mean, 256.0);
    mean -= chunk;
    const double limit = std::exp(-chunk);
    double prod = uniform();
    while (prod >= limit) {
      ++total;
      prod *= uniform();
    }
  }
  return total;
}

namespace {

double inside(double v, std::uint32_t extent) {
  return v < extent ? v : std::nextafter(static_cast<double>(extent), 0.0);
}

}  // namespace

PointSet generate(const SceneSpec& spec) {
  spec.validate();
  SceneRng rng(spec.seed);
  const double w = spec.width;
  const double h = spec.height;
  std::vector<Point> pts;
  if (const auto* p = std::get_if<PoissonProcess>(&spec.process)) {
    const std::uint64_t n = rng.poisson(p->intensity * w * h);
    pts.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      const double x = inside(rng.uniform() * w, spec.width);
      const double y = inside(rng.uniform() * h, spec.height);
      pts.push_back({x, y});
    }
  } else {
    const auto& t = std::get<ThomasProcess>(spec.process);
    const std::uint64_t parents = rng.poisson(t.parent_intensity * w * h);
    for (std::uint64_t k = 0; k < parents; ++k) {
      const double px = rng.uniform() * w;
      const double py = rng.uniform() * h;
      const std::uint64_t children = rng.poisson(t.mean_offspring);
      for (std::uint64_t c = 0; c < children; ++c) {
        const double x = px + t.spread * rng.normal();
        const double y = py + t.spread * rng.normal();
        if (x >= 0.0 && x < w && y >= 0.0 && y < h) pts.push_back({x, y});
      }
    }
  }
  return PointSet(spec.width, spec.height, std::move(pts));
}

PointSet dense_sparse_composite(const SceneSpec& sparse, const SceneSpec& dense,
                                const BBox& dense_box) {
  check_bbox(dense_box, sparse.width, sparse.height);
  if (dense.width != dense_box.width() || dense.height != dense_box.height())
    throw ValidationError("dense scene dims must equal the dense box size");
  const PointSet background = generate(sparse);
  const PointSet cluster = generate(dense);
  std::vector<Point> pts(background.points().begin(), background.points().end());
  for (const auto& p : cluster.points()) pts.push_back({p.x + dense_box.x0, p.y + dense_box.y0});
  return PointSet(sparse.width, sparse.height, std::move(pts));
}

PointSet generate_hard_core(std::uint32_t width, std::uint32_t height, double intensity,
                            double min_distance, std::uint64_t seed) {
  const PointSet candidates = generate({width, height, PoissonProcess{intensity}, seed});
  std::vector<Point> kept;
  for (const auto& c : candidates.points()) {
    bool ok = true;
    for (const auto& k : kept)
      if (distance(c, k) <= min_distance) {
        ok = false;
        break;
      }
    if (ok) kept.push_back(c);
  }
  return PointSet(width, height, std::move(kept));
}

}  // namespace autoscale
