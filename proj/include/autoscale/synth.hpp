#pragma once

#include <cstdint>
#include <random>
#include <variant>

#include "autoscale/core.hpp"

namespace autoscale {

/// Homogeneous Poisson process; intensity in points per square pixel.
struct PoissonProcess {
  double intensity = 0.0;
};

/// Thomas cluster process: Poisson parents, each with Poisson(mean_offspring)
/// children displaced by an isotropic Gaussian of std `spread`. Only the
/// children are returned.
struct ThomasProcess {
  double parent_intensity = 0.0;
  double mean_offspring = 0.0;
  double spread = 1.0;
};

struct SceneSpec {
  std::uint32_t width = 512;
  std::uint32_t height = 512;
  std::variant<PoissonProcess, ThomasProcess> process = PoissonProcess{};
  std::uint64_t seed = 0;

  void validate() const;
};

/// Seeded sampler over std::mt19937_64, whose output sequence is fixed by
/// the C++ standard. Distributions are implemented here rather than taken
/// from <random> because the standard leaves those implementation-defined.
class SceneRng {
 public:
  explicit SceneRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) from the top 53 bits of one draw.
  double uniform();
  /// Box-Muller; consumes two draws per call.
  double normal();
  /// Knuth's product method, applied in chunks of mean <= 256.
  std::uint64_t poisson(double mean);

 private:
  std::mt19937_64 engine_;
};

inline constexpr const char* kRngName = "mt19937_64";

PointSet generate(const SceneSpec& spec);

/// Sparse background over the whole frame plus a dense scene confined to
/// dense_box. dense.width/height must equal the box size.
PointSet dense_sparse_composite(const SceneSpec& sparse, const SceneSpec& dense,
                                const BBox& dense_box);

/// Poisson points with every pairwise distance greater than min_distance
/// (candidates violating it are discarded, in draw order).
PointSet generate_hard_core(std::uint32_t width, std::uint32_t height, double intensity,
                            double min_distance, std::uint64_t seed);

}  // namespace autoscale
