#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <omp.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "autoscale/closeness.hpp"
#include "autoscale/error.hpp"
#include "autoscale/io.hpp"
#include "autoscale/l2s.hpp"
#include "autoscale/losses.hpp"
#include "autoscale/mapgen.hpp"
#include "autoscale/metrics.hpp"
#include "autoscale/pipeline.hpp"
#include "autoscale/report.hpp"
#include "autoscale/synth.hpp"

namespace fs = std::filesystem;
using namespace autoscale;
using report::Json;
using report::sig9;

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("autoscale-kit");
  logger->set_pattern("%^%l%$: %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("AUTOSCALE_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to "off"; only honor it when asked for.
    if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
    else spdlog::warn("AUTOSCALE_LOG={} not recognized; keeping 'warn'", env);
  }
}

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw ValidationError(std::string("bad number in --") + what + ": " + item);
    out.push_back(v);
  }
  return out;
}

BBox parse_bbox(const std::string& text) {
  const auto v = parse_list(text, "bbox");
  if (v.size() != 4) throw ValidationError("--bbox expects x0,y0,x1,y1");
  for (double c : v)
    if (c < 0 || c != std::floor(c)) throw ValidationError("--bbox expects non-negative integers");
  return {static_cast<std::uint32_t>(v[0]), static_cast<std::uint32_t>(v[1]),
          static_cast<std::uint32_t>(v[2]), static_cast<std::uint32_t>(v[3])};
}

LabelConfig label_config(const std::string& edges) {
  LabelConfig cfg;
  if (!edges.empty()) cfg.edges = parse_list(edges, "edges");
  cfg.validate();
  return cfg;
}

void emit(const Json& j, const std::string& path) {
  const auto text = report::dump(j);
  if (path.empty() || path == "-") std::cout << text << std::flush;
  else io::write_atomically(path, text);
}

// Optional frame dims shared by the commands that read point CSVs.
struct FrameFlags {
  std::optional<std::uint32_t> width, height;
  void add(CLI::App* app) {
    app->add_option("--width", width, "Frame width when the CSV has no header");
    app->add_option("--height", height, "Frame height when the CSV has no header");
  }
};

Json stats_json(std::vector<double> d) {
  std::sort(d.begin(), d.end());
  return Json{{"min", sig9(d.front())}, {"median", sig9(percentile(d, 0.5))}, {"max", sig9(d.back())}};
}

// ---------------------------------------------------------------------------
// mapgen

void add_gen_density(CLI::App& app) {
  struct Opts {
    std::string points, out;
    double sigma = 4.0;
    FrameFlags frame;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("gen-density", "Render the density map of a point CSV");
  cmd->add_option("--points", o->points, "Point CSV")->required();
  cmd->add_option("--sigma", o->sigma, "Gaussian sigma in px");
  cmd->add_option("--out", o->out, "Output CRMP (f32)")->required();
  o->frame.add(cmd);
  cmd->callback([o] {
    const DensityConfig cfg{o->sigma};
    cfg.validate();
    const auto pts = io::read_points(o->points, o->frame.width, o->frame.height);
    const auto d = density_map(pts, cfg);
    io::write_crmp(o->out, d);
    spdlog::info("{} points, mass {:.6f}", pts.size(), sum(d));
  });
}

void add_gen_labels(CLI::App& app) {
  struct Opts {
    std::string points, out, pgm, edges;
    FrameFlags frame;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("gen-labels", "Render the distance-label map of a point CSV");
  cmd->add_option("--points", o->points, "Point CSV")->required();
  cmd->add_option("--edges", o->edges, "Comma-separated class edges in px");
  cmd->add_option("--out", o->out, "Output CRMP (u8)")->required();
  cmd->add_option("--pgm", o->pgm, "Also write a grayscale PGM");
  o->frame.add(cmd);
  cmd->callback([o] {
    const auto cfg = label_config(o->edges);
    const auto pts = io::read_points(o->points, o->frame.width, o->frame.height);
    const auto m = label_map(pts, cfg);
    io::write_crmp(o->out, m.labels);
    if (!o->pgm.empty()) io::write_label_pgm(o->pgm, m.labels, cfg.n_classes());
  });
}

void add_histogram(CLI::App& app) {
  struct Opts {
    std::string map, csv, out;
    std::uint32_t bins = 50;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("histogram", "Pixel-value histogram of a density map");
  cmd->add_option("--map", o->map, "Density CRMP (f32)")->required();
  cmd->add_option("--bins", o->bins, "Number of bins");
  cmd->add_option("--csv", o->csv, "Write bin_lo,bin_hi,count rows here");
  cmd->add_option("--out", o->out, "JSON summary (default stdout)");
  cmd->callback([o] {
    const auto h = value_histogram(io::read_f32(o->map), o->bins);
    if (!h.tail_ratio) spdlog::warn("map has no positive pixels; tail_ratio undefined");
    if (!o->csv.empty()) {
      std::string csv = "bin_lo,bin_hi,count\n";
      for (std::size_t k = 0; k < h.counts.size(); ++k)
        csv += io::format_double(sig9(h.edges[k])) + "," + io::format_double(sig9(h.edges[k + 1])) +
               "," + std::to_string(h.counts[k]) + "\n";
      io::write_atomically(o->csv, csv);
    }
    Json j{{"version", report::kFormatVersion},
           {"bins", o->bins},
           {"positive_pixels", h.positive_pixels},
           {"tail_ratio", h.tail_ratio ? Json(sig9(*h.tail_ratio)) : Json(nullptr)}};
    Json counts = Json::array();
    for (auto c : h.counts) counts.push_back(c);
    j["counts"] = counts;
    emit(j, o->out);
  });
}

// ---------------------------------------------------------------------------
// closeness / l2s

void add_closeness(CLI::App& app) {
  struct Opts {
    std::string points, bbox, out;
    FrameFlags frame;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("closeness", "Closeness level of a point set or a region of it");
  cmd->add_option("--points", o->points, "Point CSV")->required();
  cmd->add_option("--bbox", o->bbox, "Restrict to x0,y0,x1,y1");
  cmd->add_option("--out", o->out, "JSON output (default stdout)");
  o->frame.add(cmd);
  cmd->callback([o] {
    auto pts = io::read_points(o->points, o->frame.width, o->frame.height);
    if (!o->bbox.empty()) pts = restrict_to(pts, parse_bbox(o->bbox));
    const auto s = closeness_stats(pts);
    if (s.has_duplicates) spdlog::warn("duplicate points present");
    Json j{{"version", report::kFormatVersion}, {"S", sig9(s.level)}, {"count", s.count}};
    j.update(stats_json(s.nn_distances));
    j["has_duplicates"] = s.has_duplicates;
    emit(j, o->out);
  });
}

void add_fit_l2s(CLI::App& app) {
  struct Opts {
    std::string closeness, trace, out;
    L2SConfig cfg;
    std::optional<double> center;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("fit-l2s", "Fit per-region scale factors to a common center");
  cmd->add_option("--closeness", o->closeness, "Comma-separated closeness levels")->required();
  cmd->add_option("--alpha", o->cfg.alpha, "Center learning rate");
  cmd->add_option("--eta", o->cfg.eta, "Scale-factor step size");
  cmd->add_option("--rmin", o->cfg.r_min, "Lower scale clamp");
  cmd->add_option("--rmax", o->cfg.r_max, "Upper scale clamp");
  cmd->add_option("--interval", o->cfg.update_interval, "Iterations between center updates");
  cmd->add_option("--max-iters", o->cfg.max_iters, "Iteration cap");
  cmd->add_option("--tol", o->cfg.tol, "Stop when the loss changes by less than this");
  cmd->add_option("--center", o->center, "Initial center (default mean closeness)");
  cmd->add_flag("--freeze-center", o->cfg.freeze_center, "Keep the center fixed");
  cmd->add_option("--trace", o->trace, "CSV with columns iter,loss,center");
  cmd->add_option("--out", o->out, "JSON output (default stdout)");
  cmd->callback([o] {
    o->cfg.validate();
    const auto s = parse_list(o->closeness, "closeness");
    if (s.empty()) throw ValidationError("--closeness is empty");
    std::optional<L2SState> init;
    if (o->center) {
      init.emplace();
      init->r.assign(s.size(), 1.0);
      init->center = *o->center;
    }
    const auto st = fit(s, o->cfg, init);
    Json r = Json::array();
    for (double v : st.r) r.push_back(sig9(v));
    const Json j{{"version", report::kFormatVersion},
                 {"r", r},
                 {"center", sig9(st.center)},
                 {"loss", sig9(center_loss(s, st.r, st.center))},
                 {"iterations", st.iter},
                 {"converged", st.converged}};
    if (!o->trace.empty()) {
      std::string csv = "iter,loss,center\n";
      for (std::size_t k = 0; k < st.loss_trace.size(); ++k)
        csv += std::to_string(k + 1) + "," + io::format_double(sig9(st.loss_trace[k])) + "," +
               io::format_double(sig9(st.center_trace[k])) + "\n";
      io::write_atomically(o->trace, csv);
    }
    emit(j, o->out);
  });
}

// ---------------------------------------------------------------------------
// losses

void add_loss(CLI::App& app) {
  auto* cmd = app.add_subcommand("loss", "Evaluate a training loss on stored maps");
  cmd->require_subcommand(1);

  struct MseOpts {
    std::string pred, gt, out;
    bool mean = false;
  };
  auto m = std::make_shared<MseOpts>();
  auto* mse = cmd->add_subcommand("mse", "Squared L2 distance between two density maps");
  mse->add_option("--pred", m->pred, "Predicted CRMP (f32)")->required();
  mse->add_option("--gt", m->gt, "Ground-truth CRMP (f32)")->required();
  mse->add_flag("--mean", m->mean, "Average over pixels instead of summing");
  mse->add_option("--out", m->out, "JSON output (default stdout)");
  mse->callback([m] {
    const double l = mse_loss(io::read_f32(m->pred), io::read_f32(m->gt), m->mean);
    emit(Json{{"version", report::kFormatVersion}, {"loss", sig9(l)}}, m->out);
  });

  struct DceOpts {
    std::string probs, gt, edges, out;
    double floor = 1e-12;
  };
  auto d = std::make_shared<DceOpts>();
  auto* dce = cmd->add_subcommand("dce", "Dynamic cross-entropy of a probability stack");
  dce->add_option("--probs", d->probs, "Probability-stack CRMP")->required();
  dce->add_option("--gt", d->gt, "Ground-truth label CRMP (u8)")->required();
  dce->add_option("--edges", d->edges, "Class edges (fixes the class count)");
  dce->add_option("--floor", d->floor, "Probability floor inside the log");
  dce->add_option("--out", d->out, "JSON output (default stdout)");
  dce->callback([d] {
    const auto content = io::read_crmp(d->probs);
    const auto* pr = std::get_if<ProbabilityVolume>(&content);
    if (!pr) throw ValidationError(d->probs + " is not a probability stack");
    LabelConfig labels = label_config(d->edges);
    LossConfig cfg;
    cfg.prob_floor = d->floor;
    const double l = dce_loss(*pr, {io::read_u8(d->gt), labels}, cfg);
    emit(Json{{"version", report::kFormatVersion}, {"loss", sig9(l)}}, d->out);
  });
}

// ---------------------------------------------------------------------------
// pipeline

Mode parse_mode(const std::string& s) {
  if (s == "regression") return Mode::Regression;
  if (s == "localization") return Mode::Localization;
  throw ValidationError("--mode must be regression or localization");
}

KernelMode parse_kernel(const std::string& s) {
  if (s == "fixed") return KernelMode::Fixed;
  if (s == "multiplied") return KernelMode::Multiplied;
  if (s == "divided") return KernelMode::Divided;
  throw ValidationError("--kernel must be fixed, multiplied or divided");
}

void add_select(CLI::App& app) {
  struct Opts {
    std::string map, mode = "regression", edges, out;
    std::optional<double> j;
    int c_thresh = 8;
    std::uint32_t top_k = 1;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("select", "Dense-region selection on a stored map");
  cmd->add_option("--map", o->map, "Density (f32), label (u8) or probability CRMP")->required();
  cmd->add_option("--mode", o->mode, "regression or localization");
  cmd->add_option("--j", o->j, "Minimum bbox area ratio (default 0.1 / 0.02 by mode)");
  cmd->add_option("--c-thresh", o->c_thresh, "Label threshold for localization");
  cmd->add_option("--top-k", o->top_k, "Number of regions");
  cmd->add_option("--edges", o->edges, "Class edges");
  cmd->add_option("--out", o->out, "JSON output (default stdout)");
  cmd->callback([o] {
    const Mode mode = parse_mode(o->mode);
    if (o->top_k == 0) throw ValidationError("--top-k must be at least 1");
    if (o->c_thresh < 0 || o->c_thresh > 255) throw ValidationError("--c-thresh out of range");
    const auto content = io::read_crmp(o->map);
    std::vector<BBox> boxes;
    if (mode == Mode::Regression) {
      const auto* d = std::get_if<Raster<float>>(&content);
      if (!d) throw ValidationError("regression selection needs an f32 density map");
      boxes = select_regions(regression_mask(*d), o->j.value_or(0.1), o->top_k);
    } else {
      const auto labels = label_config(o->edges);
      LabelRaster l;
      if (const auto* u = std::get_if<LabelRaster>(&content)) l = *u;
      else if (const auto* p = std::get_if<ProbabilityVolume>(&content)) l = argmax(*p);
      else throw ValidationError("localization selection needs a label map or probability stack");
      boxes = select_regions(localization_mask({l, labels}, static_cast<std::uint8_t>(o->c_thresh)),
                             o->j.value_or(0.02), o->top_k);
    }
    Json regions = Json::array();
    for (const auto& b : boxes) regions.push_back(report::bbox_json(b));
    emit(Json{{"version", report::kFormatVersion},
              {"region", boxes.empty() ? Json(nullptr) : report::bbox_json(boxes.front())},
              {"regions", regions}},
         o->out);
  });
}

struct PipelineFlags {
  std::string mode = "regression", predictor = "oracle", kernel = "fixed", edges;
  std::optional<double> target_center, fixed_scale;
  double sigma = 4.0, j_r = 0.1, j_l = 0.02;
  int c_thresh = 8;
  std::uint32_t top_k = 1;
  double jitter = 0.0, drop = 0.0, spurious = 0.0;
  std::optional<std::uint64_t> seed;

  PipelineConfig config() const {
    PipelineConfig cfg;
    if (!target_center && !fixed_scale) throw ValidationError("--target-center is required");
    if (c_thresh < 0 || c_thresh > 255) throw ValidationError("--c-thresh out of range");
    cfg.target_center = target_center.value_or(0.0);
    cfg.fixed_scale = fixed_scale;
    cfg.density.sigma = sigma;
    cfg.labels = label_config(edges);
    cfg.j_r = j_r;
    cfg.j_l = j_l;
    cfg.c_thresh = static_cast<std::uint8_t>(c_thresh);
    cfg.top_k = top_k;
    cfg.kernel = parse_kernel(kernel);
    cfg.validate();
    return cfg;
  }

  void check_predictor() const {
    if (predictor != "oracle" && predictor != "noisy" && predictor != "file")
      throw ValidationError("--predictor must be oracle, noisy or file");
    if (predictor == "noisy" && !seed) throw ValidationError("the noisy predictor requires --seed");
  }

  std::unique_ptr<Predictor> make(const PointSet& gt, const std::string& pred_map,
                                  std::uint64_t seed_offset) const {
    if (predictor == "oracle") return std::make_unique<OracleExact>(gt);
    if (predictor == "noisy")
      return std::make_unique<OracleNoisy>(gt, NoiseModel{jitter, drop, spurious, *seed + seed_offset});
    if (pred_map.empty()) throw ValidationError("the file predictor requires a prediction map");
    return std::visit([](auto&& c) -> std::unique_ptr<Predictor> {
      return std::make_unique<FilePredictor>(FilePredictor::Content(std::move(c)));
    }, io::read_crmp(pred_map));
  }
};

// Manifest: {"config": {...}, "scenes": [{"points": "a.csv", "pred_map": "a.crmp"}, ...]}.
// Config keys mirror the long flags with underscores; relative paths resolve
// against the manifest's directory.
void apply_manifest_config(const nlohmann::json& c, PipelineFlags& f, double& eval_sigma) {
  auto get = [&](const char* key, auto& dst) {
    if (!c.contains(key)) return;
    using T = std::decay_t<decltype(dst)>;
    if constexpr (std::is_same_v<T, std::optional<double>>) dst = c.at(key).get<double>();
    else if constexpr (std::is_same_v<T, std::optional<std::uint64_t>>) dst = c.at(key).get<std::uint64_t>();
    else dst = c.at(key).get<T>();
  };
  static const std::vector<std::string> known{
      "mode", "predictor", "kernel", "edges", "target_center", "fixed_scale", "sigma", "j_r", "j_l",
      "c_thresh", "top_k", "sigma_jitter", "drop", "spurious", "seed", "eval_sigma"};
  for (const auto& [k, _] : c.items())
    if (std::find(known.begin(), known.end(), k) == known.end())
      throw ValidationError("unknown manifest config key: " + k);
  get("mode", f.mode);
  get("predictor", f.predictor);
  get("kernel", f.kernel);
  if (c.contains("edges")) {
    std::string s;
    for (double e : c.at("edges").get<std::vector<double>>()) s += io::format_double(e) + ",";
    f.edges = s;
  }
  get("target_center", f.target_center);
  get("fixed_scale", f.fixed_scale);
  get("sigma", f.sigma);
  get("j_r", f.j_r);
  get("j_l", f.j_l);
  get("c_thresh", f.c_thresh);
  get("top_k", f.top_k);
  get("sigma_jitter", f.jitter);
  get("drop", f.drop);
  get("spurious", f.spurious);
  get("seed", f.seed);
  get("eval_sigma", eval_sigma);
}

void add_autoscale(CLI::App& app) {
  struct Opts {
    PipelineFlags p;
    std::string points, pred_map, report, manifest, stitched;
    FrameFlags frame;
    int jobs = 1;
    double eval_sigma = 3.0;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("autoscale", "Run the dense-region rescaling pipeline");
  cmd->add_option("--points", o->points, "Annotation CSV");
  cmd->add_option("--manifest", o->manifest, "JSON manifest of scenes (replaces --points)");
  cmd->add_option("--mode", o->p.mode, "regression or localization");
  cmd->add_option("--predictor", o->p.predictor, "oracle, noisy or file");
  cmd->add_option("--pred-map", o->pred_map, "Full-frame prediction for the file predictor");
  cmd->add_option("--target-center", o->p.target_center, "Closeness level to rescale toward");
  cmd->add_option("--fixed-scale", o->p.fixed_scale, "Use this scale instead of the analytic one");
  cmd->add_option("--sigma", o->p.sigma, "Density Gaussian sigma in px");
  cmd->add_option("--edges", o->p.edges, "Class edges");
  cmd->add_option("--j-r", o->p.j_r, "Regression area ratio");
  cmd->add_option("--j-l", o->p.j_l, "Localization area ratio");
  cmd->add_option("--c-thresh", o->p.c_thresh, "Localization label threshold");
  cmd->add_option("--top-k", o->p.top_k, "Number of refined regions");
  cmd->add_option("--kernel", o->p.kernel, "fixed, multiplied or divided");
  cmd->add_option("--sigma-jitter", o->p.jitter, "Noisy predictor: jitter std in px");
  cmd->add_option("--drop", o->p.drop, "Noisy predictor: drop probability");
  cmd->add_option("--spurious", o->p.spurious, "Noisy predictor: spurious points per frame");
  cmd->add_option("--seed", o->p.seed, "Seed for randomized predictors");
  cmd->add_option("--eval-sigma", o->eval_sigma, "Manifest runs: matching threshold for the summary");
  cmd->add_option("--jobs", o->jobs, "Scenes processed in parallel (manifest runs)");
  cmd->add_option("--report", o->report, "JSON report (default stdout)");
  cmd->add_option("--stitched-map", o->stitched, "Regression: write the stitched density for viewing");
  o->frame.add(cmd);
  cmd->callback([o] {
    if (o->points.empty() == o->manifest.empty())
      throw ValidationError("give exactly one of --points and --manifest");
    if (o->jobs < 1) throw ValidationError("--jobs must be at least 1");

    if (!o->points.empty()) {
      o->p.check_predictor();
      auto cfg = o->p.config();
      const Mode mode = parse_mode(o->p.mode);
      if (!o->stitched.empty() && mode != Mode::Regression)
        throw ValidationError("--stitched-map applies to regression mode only");
      cfg.keep_stitched_map = !o->stitched.empty();
      const auto gt = io::read_points(o->points, o->frame.width, o->frame.height);
      const auto pred = o->p.make(gt, o->pred_map, 0);
      const auto res = run_autoscale(gt, *pred, mode, cfg);
      if (res.scale_defaulted) spdlog::warn("region held fewer than 2 points; scale defaulted to 1");
      if (res.stitched_map) io::write_crmp(o->stitched, *res.stitched_map);
      emit(report::autoscale_json(res), o->report);
      return;
    }

    std::ifstream in(o->manifest);
    if (!in) throw IoError("cannot open " + o->manifest);
    nlohmann::json m;
    try {
      in >> m;
    } catch (const nlohmann::json::exception& e) {
      throw IoError(o->manifest + ": " + e.what());
    }
    const fs::path base = fs::path(o->manifest).parent_path();
    struct Scene {
      fs::path points, pred_map;
    };
    std::vector<Scene> scenes;
    try {
      if (m.contains("config")) apply_manifest_config(m.at("config"), o->p, o->eval_sigma);
      for (const auto& s : m.at("scenes")) {
        Scene sc{base / s.at("points").get<std::string>(), {}};
        if (s.contains("pred_map")) sc.pred_map = base / s.at("pred_map").get<std::string>();
        scenes.push_back(sc);
      }
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(o->manifest + ": " + e.what());
    }
    o->p.check_predictor();
    if (!(o->eval_sigma > 0)) throw ValidationError("eval_sigma must be positive");
    const auto cfg = o->p.config();
    const Mode mode = parse_mode(o->p.mode);

    const auto n = static_cast<std::int64_t>(scenes.size());
    std::vector<Json> out(scenes.size());
    std::vector<double> finals(scenes.size()), truths(scenes.size());
    std::vector<MatchResult> matches(scenes.size());
    std::vector<std::exception_ptr> errors(scenes.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(o->jobs)
    for (std::int64_t i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      try {
        const auto gt = io::read_points(scenes[k].points, o->frame.width, o->frame.height);
        const auto pred = o->p.make(gt, scenes[k].pred_map.string(), k);
        const auto res = run_autoscale(gt, *pred, mode, cfg);
        finals[k] = res.final_count;
        truths[k] = static_cast<double>(gt.size());
        Json j{{"points", scenes[k].points.string()}, {"gt_count", gt.size()}};
        if (mode == Mode::Localization) {
          MatchConfig mc;
          mc.sigma = o->eval_sigma;
          matches[k] = match_points(*res.points, gt, mc);
        }
        j.update(report::autoscale_json(res));
        j.erase("version");
        out[k] = std::move(j);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);

    Json summary;
    if (mode == Mode::Regression) {
      summary = report::count_errors_json(count_errors(finals, truths));
    } else {
      MatchResult total;
      for (const auto& r : matches) {
        total.tp += r.tp;
        total.fp += r.fp;
        total.fn += r.fn;
      }
      summary = report::prf_json(prf(total), total);
      summary["sigma"] = sig9(o->eval_sigma);
    }
    summary.erase("version");
    emit(Json{{"version", report::kFormatVersion},
              {"mode", o->p.mode},
              {"scenes", out},
              {"summary", summary}},
         o->report);
  });
}

// ---------------------------------------------------------------------------
// metrics

void add_eval_count(CLI::App& app) {
  struct Opts {
    std::string pred, gt, out;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("eval-count", "MAE and MSE over per-image counts");
  cmd->add_option("--pred", o->pred, "Predicted counts (one per line, last CSV column)")->required();
  cmd->add_option("--gt", o->gt, "Ground-truth counts")->required();
  cmd->add_option("--out", o->out, "JSON output (default stdout)");
  cmd->callback([o] {
    const auto p = io::read_values(o->pred);
    const auto g = io::read_values(o->gt);
    emit(report::count_errors_json(count_errors(p, g)), o->out);
  });
}

void add_eval_loc(CLI::App& app) {
  struct Opts {
    std::string pred, gt, sigma = "4", out, csv;
    bool optimal = false;
    FrameFlags frame;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("eval-loc", "Precision, recall and F-measure of point predictions");
  cmd->add_option("--pred", o->pred, "Predicted point CSV")->required();
  cmd->add_option("--gt", o->gt, "Ground-truth point CSV")->required();
  cmd->add_option("--sigma", o->sigma, "Threshold in px, a comma list for a sweep, or 'knn'");
  cmd->add_flag("--optimal", o->optimal, "Maximum matching instead of greedy");
  cmd->add_option("--csv", o->csv, "Sweep table: sigma,precision,recall,f,tp,fp,fn");
  cmd->add_option("--out", o->out, "JSON output (default stdout)");
  o->frame.add(cmd);
  cmd->callback([o] {
    const auto gt = io::read_points(o->gt, o->frame.width, o->frame.height);
    const auto pred = io::read_points(o->pred, o->frame.width.value_or(gt.width()),
                                      o->frame.height.value_or(gt.height()));
    MatchConfig mc;
    mc.strategy = o->optimal ? MatchStrategy::Optimal : MatchStrategy::Greedy;

    std::vector<std::pair<Json, MatchResult>> rows;
    if (o->sigma == "knn") {
      mc.per_gt_sigma = knn_sigma(gt);
      rows.emplace_back("knn", match_points(pred, gt, mc));
    } else {
      const auto sigmas = parse_list(o->sigma, "sigma");
      if (sigmas.empty()) throw ValidationError("--sigma is empty");
      for (double s : sigmas) {
        if (!(s > 0)) throw ValidationError("--sigma values must be positive");
        mc.sigma = s;
        rows.emplace_back(sig9(s), match_points(pred, gt, mc));
      }
    }
    std::string csv = "sigma,precision,recall,f,tp,fp,fn\n";
    Json sweep = Json::array();
    for (const auto& [s, m] : rows) {
      const auto q = prf(m);
      auto e = report::prf_json(q, m);
      e.erase("version");
      Json row{{"sigma", s}};
      row.update(e);
      sweep.push_back(row);
      csv += (s.is_string() ? s.get<std::string>() : io::format_double(s.get<double>())) + "," +
             io::format_double(sig9(q.precision)) + "," + io::format_double(sig9(q.recall)) + "," +
             io::format_double(sig9(q.f)) + "," + std::to_string(m.tp) + "," +
             std::to_string(m.fp) + "," + std::to_string(m.fn) + "\n";
    }
    if (!o->csv.empty()) io::write_atomically(o->csv, csv);
    if (rows.size() == 1) {
      Json j{{"version", report::kFormatVersion}};
      j.update(sweep[0]);
      emit(j, o->out);
    } else {
      emit(Json{{"version", report::kFormatVersion}, {"sweep", sweep}}, o->out);
    }
  });
}

void add_game(CLI::App& app) {
  struct Opts {
    std::string pred, gt, out;
    int n = 3;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("game", "Grid average mean absolute error");
  cmd->add_option("--pred", o->pred, "Predicted density CRMP (f32)")->required();
  cmd->add_option("--gt", o->gt, "Ground-truth point CSV")->required();
  cmd->add_option("--n", o->n, "Grid level (2^n x 2^n cells)");
  cmd->add_option("--out", o->out, "JSON output (default stdout)");
  cmd->callback([o] {
    if (o->n < 0 || o->n > 5) throw ValidationError("--n must be in [0, 5]");
    const auto map = io::read_f32(o->pred);
    const auto gt = io::read_points(o->gt, map.width(), map.height());
    const double g = game(map, gt, static_cast<std::uint8_t>(o->n));
    emit(Json{{"version", report::kFormatVersion}, {"n", o->n}, {"game", sig9(g)}}, o->out);
  });
}

// ---------------------------------------------------------------------------
// synth / bench

void add_synth(CLI::App& app) {
  struct Opts {
    std::uint32_t w = 512, h = 512;
    std::string process = "poisson", out;
    double intensity = 1e-3, parents = 1e-4, mu = 30.0, spread = 6.0, min_distance = 0.0;
    std::uint64_t seed = 0;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("synth", "Generate a synthetic annotated scene");
  cmd->set_help_flag("--help", "Print this help message and exit");  // frees -h for --h
  cmd->add_option("--w", o->w, "Frame width");
  cmd->add_option("--h", o->h, "Frame height");
  cmd->add_option("--process", o->process, "poisson, thomas or hardcore");
  cmd->add_option("--intensity", o->intensity, "Points per px^2 (poisson, hardcore)");
  cmd->add_option("--parents", o->parents, "Parent intensity (thomas)");
  cmd->add_option("--mu", o->mu, "Mean offspring per parent (thomas)");
  cmd->add_option("--spread", o->spread, "Offspring std in px (thomas)");
  cmd->add_option("--min-distance", o->min_distance, "Pairwise separation (hardcore)");
  cmd->add_option("--seed", o->seed, "RNG seed")->required();
  cmd->add_option("--out", o->out, "Output point CSV")->required();
  cmd->callback([o] {
    std::optional<PointSet> pts;
    std::string desc;
    if (o->process == "poisson") {
      pts = generate({o->w, o->h, PoissonProcess{o->intensity}, o->seed});
      desc = "process=poisson intensity=" + io::format_double(o->intensity);
    } else if (o->process == "thomas") {
      pts = generate({o->w, o->h, ThomasProcess{o->parents, o->mu, o->spread}, o->seed});
      desc = "process=thomas parents=" + io::format_double(o->parents) +
             " mu=" + io::format_double(o->mu) + " spread=" + io::format_double(o->spread);
    } else if (o->process == "hardcore") {
      pts = generate_hard_core(o->w, o->h, o->intensity, o->min_distance, o->seed);
      desc = "process=hardcore intensity=" + io::format_double(o->intensity) +
             " min_distance=" + io::format_double(o->min_distance);
    } else {
      throw ValidationError("--process must be poisson, thomas or hardcore");
    }
    io::write_points(o->out, *pts,
                     std::string("rng=") + kRngName + " seed=" + std::to_string(o->seed) + " " + desc);
    spdlog::info("{} points", pts->size());
  });
}

template <class F>
double time_ms(F&& f, int reps) {
  double best = 1e300;
  for (int k = 0; k < reps; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void add_bench(CLI::App& app) {
  struct Opts {
    std::uint64_t seed = 0;
    int reps = 3;
    std::vector<std::uint32_t> sizes{256, 512};
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("bench", "Time the core kernels, serial reference vs parallel");
  cmd->add_option("--seed", o->seed, "Scene seed")->required();
  cmd->add_option("--reps", o->reps, "Repetitions (best time is reported)");
  cmd->add_option("--sizes", o->sizes, "Square frame sizes")->delimiter(',');
  cmd->callback([o] {
    if (o->reps < 1) throw ValidationError("--reps must be at least 1");
    std::printf("threads: %d\n", omp_get_max_threads());
    std::printf("%-14s %6s %7s %12s %12s\n", "kernel", "size", "points", "serial_ms", "parallel_ms");
    for (const auto s : o->sizes) {
      const auto pts = generate({s, s, ThomasProcess{4e-5, 40.0, 12.0}, o->seed});
      const DensityConfig dc;
      auto row = [&](const char* name, double a, double b) {
        std::printf("%-14s %6u %7zu %12.3f %12.3f\n", name, s, pts.size(), a, b);
      };
      row("density_map", time_ms([&] { reference::density_map(pts, dc); }, o->reps),
          time_ms([&] { density_map(pts, dc); }, o->reps));
      if (!pts.empty())
        row("distance_map", time_ms([&] { reference::distance_map(pts); }, o->reps),
            time_ms([&] { distance_map(pts); }, o->reps));
      const auto noisy = OracleNoisy(pts, {1.0, 0.05, 10.0, o->seed + 1}).perturbed();
      MatchConfig greedy, optimal;
      optimal.strategy = MatchStrategy::Optimal;
      row("match_points", time_ms([&] { match_points(noisy, pts, greedy); }, o->reps),
          time_ms([&] { match_points(noisy, pts, optimal); }, o->reps));
    }
    std::printf("(match_points columns: greedy, optimal)\n");
  });
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Density, distance-label and dense-region rescaling toolkit", "autoscale-kit"};
  app.require_subcommand(1);
  add_gen_density(app);
  add_gen_labels(app);
  add_histogram(app);
  add_closeness(app);
  add_fit_l2s(app);
  add_loss(app);
  add_select(app);
  add_autoscale(app);
  add_eval_count(app);
  add_eval_loc(app);
  add_game(app);
  add_synth(app);
  add_bench(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const IoError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const fs::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
