#include "autoscale/report.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace autoscale::report {

double sig9(double v) {
  if (!std::isfinite(v) || v == 0.0) return v;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return std::strtod(buf, nullptr);
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json bbox_json(const BBox& b) {
  return Json{{"x0", b.x0}, {"y0", b.y0}, {"x1", b.x1}, {"y1", b.y1}};
}

Json points_json(const PointSet& p) {
  Json arr = Json::array();
  for (const auto& q : p.points()) arr.push_back(Json::array({sig9(q.x), sig9(q.y)}));
  return arr;
}

Json autoscale_json(const AutoScaleResult& r) {
  Json j;
  j["version"] = kFormatVersion;
  j["final_count"] = sig9(r.final_count);
  j["sparse_count"] = sig9(r.sparse_count);
  j["initial_count"] = sig9(r.initial_count);
  if (r.regions.empty()) {
    j["region"] = nullptr;
  } else {
    auto region = bbox_json(r.regions.front().bbox);
    region["scale"] = sig9(r.regions.front().scale);
    j["region"] = region;
  }
  Json regions = Json::array();
  for (const auto& reg : r.regions) {
    auto e = bbox_json(reg.bbox);
    e["scale"] = sig9(reg.scale);
    regions.push_back(e);
  }
  j["regions"] = regions;
  j["r_used"] = sig9(r.r_used);
  j["scale_defaulted"] = r.scale_defaulted;
  j["points"] = r.points ? points_json(*r.points) : Json(nullptr);
  return j;
}

Json count_errors_json(const CountErrors& e) {
  return Json{{"version", kFormatVersion}, {"mae", sig9(e.mae)}, {"mse", sig9(e.mse)}};
}

Json prf_json(const PRF& p, const MatchResult& m) {
  return Json{{"version", kFormatVersion}, {"precision", sig9(p.precision)},
              {"recall", sig9(p.recall)},  {"f", sig9(p.f)},
              {"tp", m.tp},                {"fp", m.fp},
              {"fn", m.fn}};
}

}  // namespace autoscale::report
