#pragma once

#include <string>

#include "json.hpp"
#include "autoscale/metrics.hpp"
#include "autoscale/pipeline.hpp"

namespace autoscale::report {

using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

/// v rounded to 9 significant digits, so serialized output is stable.
double sig9(double v);

/// Compact-per-line JSON with a trailing newline; keys keep insertion order.
std::string dump(const Json& j);

Json bbox_json(const BBox& b);
Json points_json(const PointSet& p);
Json autoscale_json(const AutoScaleResult& r);
Json count_errors_json(const CountErrors& e);
Json prf_json(const PRF& p, const MatchResult& m);

}  // namespace autoscale::report
