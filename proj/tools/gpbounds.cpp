// gpbounds: interval bounds of black-box responses by Bayesian optimization.
//
//   gpbounds run      --config run.json [--seed N] [--out DIR] [--parallel N] [--resume LOG]
//   gpbounds baseline --config run.json [--method vertex|subinterval] [--n N] [--out DIR]
//   gpbounds design   --q Q --r R [--config run.json] [--out DIR]
//   gpbounds report   --report report.json [--reference-lower X --reference-upper Y] [--out DIR]

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "gpbounds/gpbounds.hpp"

namespace fs = std::filesystem;
using namespace gpbounds;

namespace {

constexpr int kExitError = 1;
constexpr int kExitIncomplete = 2;

fs::path prepare_dir(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

template <class Fn>
void write_csv(const fs::path& path, Fn&& fn) {
  std::ostringstream os;
  fn(os);
  write_text_file(path.string(), os.str());
}

std::string point_str(const Eigen::VectorXd& b, const IntervalBox& box) {
  std::string s;
  char buf[64];
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%s=%.6g", i ? ", " : "", box.name(static_cast<int>(i)).c_str(), b[i]);
    s += buf;
  }
  return s;
}

void print_bound(const char* label, const BoundEstimate& e, const IntervalBox& box) {
  std::printf("  %s  %.6g  [%.6g, %.6g]  at %s\n", label, e.mean, e.lo(), e.hi(),
              point_str(e.location, box).c_str());
  std::printf("         observed optimum %.6g at %s\n", e.observed_optimum,
              point_str(e.observed_location, box).c_str());
}

std::string flags(const std::vector<bool>& v) {
  std::string s;
  for (bool b : v) s += b ? 'P' : 'F';
  return s;
}

void print_metrics(const char* label, const SatisfactionReport& r) {
  const char* mag = !r.metric2.magnitude_ok ? "indeterminate" : *r.metric2.magnitude_ok ? "pass" : "fail";
  std::printf("  %s  metric1 distance %s ci %s | metric2 distance %s magnitude %s%s\n", label,
              flags(r.metric1.distance_ok).c_str(), r.metric1.ci_ok ? "pass" : "fail",
              flags(r.metric2.distance_ok).c_str(), mag, r.warning ? "  [warning]" : "");
}

void write_run_artifacts(const fs::path& out, const RunReport& rep, const RunConfig& cfg,
                         const Eigen::MatrixXd& design) {
  auto j = to_json(rep);
  j["generated_at"] = utc_timestamp();
  write_text_file((out / "report.json").string(), j.dump(2) + "\n");
  write_csv(out / "trace.csv", [&](std::ostream& os) { write_trace_csv(os, rep); });
  write_csv(out / "bounds.csv", [&](std::ostream& os) { write_bounds_csv(os, rep); });
  write_csv(out / "af_trace.csv", [&](std::ostream& os) { write_af_trace_csv(os, rep); });
  write_csv(out / "design.csv", [&](std::ostream& os) { write_design_csv(os, cfg.box, design); });
  if (cfg.reference)
    write_csv(out / "error_trace.csv", [&](std::ostream& os) {
      write_error_trace_csv(os, rep, cfg.reference->first, cfg.reference->second);
    });
  if (cfg.box.dim() == 1) {
    // Approach A keeps one model per side; the max-side curve is the primary one.
    const SideModel& primary = rep.models.back();
    write_csv(out / "gp_curve.csv", [&](std::ostream& os) { write_gp_curve_csv(os, primary, cfg.box); });
    if (rep.models.size() > 1)
      write_csv(out / "gp_curve_min.csv",
                [&](std::ostream& os) { write_gp_curve_csv(os, rep.models.front(), cfg.box); });
  }
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed, std::optional<std::string> out_dir,
            int parallel, std::optional<std::string> resume) {
  RunConfig cfg = load_config(config_path);
  if (seed) cfg.seed = *seed;
  if (out_dir) cfg.output_dir = *out_dir;
  const fs::path out = prepare_dir(cfg.output_dir);

  auto cache = std::make_shared<EvaluationCache>(cfg.box, model_source(cfg), "run-" + std::to_string(cfg.seed));
  if (resume) {
    const auto loaded = cache->replay(*resume);
    std::printf("resume: %zu cached evaluations from %s\n", loaded, resume->c_str());
    for (const auto& w : cache->warnings()) std::fprintf(stderr, "warning: %s\n", w.c_str());
  }
  cache->attach_log((out / "eval_log.jsonl").string());
  CachedBlackBox cached(make_blackbox(cfg, "run-" + std::to_string(cfg.seed)), cache);
  const BlackBox bb = [cached](const Eigen::VectorXd& b) { return cached(b); };

  const auto [design, description] = initial_design(cfg);
  const int n0 = static_cast<int>(design.rows());
  const int total = n0 + cfg.policy.budget;
  if (4 * n0 > total)
    std::printf("WARNING: the initial set (%d points) exceeds a quarter of the total budget (%d evaluations)\n",
                n0, total);
  const TrainingSet initial = evaluate_design(bb, cfg.box, design, parallel);

  RunReport rep = cfg.approach == "A"
                      ? run_approach_a(bb, cfg.box, initial, cfg.af, cfg.policy, cfg.seed, cfg.solver_options())
                      : run_approach_b(bb, cfg.box, initial, cfg.af, cfg.policy, cfg.seed, cfg.solver_options());
  rep.initial_design = description;
  write_run_artifacts(out, rep, cfg, design);

  std::printf("approach %s, af %s, initial design %s\n", rep.approach.c_str(), rep.af.name().c_str(),
              description.c_str());
  std::printf("evaluations: %d (%d initial + %d additional, budget %d); black-box calls %ld, cache hits %ld\n",
              rep.evaluations, rep.initial_size, rep.additional_evaluations(), rep.policy.budget,
              cached.calls(), cached.hits());
  std::printf("stop: lower %s, upper %s\n", rep.lower_stop.c_str(), rep.upper_stop.c_str());
  print_bound("LB", rep.lower, cfg.box);
  print_bound("UB", rep.upper, cfg.box);
  print_metrics("LB", rep.lower_metrics);
  print_metrics("UB", rep.upper_metrics);
  if (cfg.reference) {
    const auto [el, eu] = compare_to_reference(rep, cfg.reference->first, cfg.reference->second);
    std::printf("error vs reference: LB %+.4g%%, UB %+.4g%%\n", el, eu);
  }
  for (const auto& e : rep.events) std::printf("event: %s\n", e.c_str());
  if (rep.warning()) {
    std::printf("WARNING\n");
    std::printf("  One or more satisfaction conditions failed; further evaluations are advisable.\n");
  }
  std::printf("artifacts written to %s\n", out.string().c_str());
  if (!rep.complete) {
    std::fprintf(stderr, "error: run incomplete: %s\n", rep.error.c_str());
    return kExitIncomplete;
  }
  return 0;
}

int cmd_baseline(const std::string& config_path, std::optional<std::string> method, std::optional<int> n,
                 std::optional<std::string> out_dir) {
  RunConfig cfg = load_config(config_path);
  if (method) cfg.baseline_method = *method;
  if (n) cfg.baseline_n = *n;
  if (out_dir) cfg.output_dir = *out_dir;
  const fs::path out = prepare_dir(cfg.output_dir);
  auto cache = std::make_shared<EvaluationCache>(cfg.box, model_source(cfg), "baseline");
  cache->attach_log((out / "eval_log.jsonl").string());
  CachedBlackBox cached(make_blackbox(cfg, "baseline"), cache);
  const BlackBox bb = [cached](const Eigen::VectorXd& b) { return cached(b); };

  BaselineResult res;
  if (cfg.baseline_method == "vertex")
    res = vertex_method(bb, cfg.box);
  else if (cfg.baseline_method == "subinterval")
    res = subinterval_method(bb, cfg.box, cfg.baseline_n);
  else
    throw InvalidArgument("unknown baseline method \"" + cfg.baseline_method + "\"");
  auto j = to_json(res, cfg.baseline_method, cfg.box);
  if (cfg.baseline_method == "subinterval") j["n"] = cfg.baseline_n;
  j["generated_at"] = utc_timestamp();
  write_text_file((out / "baseline.json").string(), j.dump(2) + "\n");
  std::printf("%s method: %llu evaluations\n", cfg.baseline_method.c_str(),
              static_cast<unsigned long long>(res.evaluations));
  std::printf("  LB %.6g at %s\n", res.lower, point_str(res.lower_location, cfg.box).c_str());
  std::printf("  UB %.6g at %s\n", res.upper, point_str(res.upper_location, cfg.box).c_str());
  return 0;
}

int cmd_design(int q, int r, std::optional<std::string> config_path, std::optional<std::string> out_dir) {
  IntervalBox box;
  std::optional<std::vector<std::vector<double>>> levels;
  std::string dir = out_dir.value_or(".");
  if (config_path) {
    const RunConfig cfg = load_config(*config_path);
    box = cfg.box;
    levels = cfg.initial.level_values;
    if (!out_dir) dir = cfg.output_dir;
  } else {
    box.lower.assign(r, 0.0);
    box.upper.assign(r, 1.0);
  }
  if (box.dim() != r)
    throw InvalidArgument("design: --r " + std::to_string(r) + " but the box has " + std::to_string(box.dim()) +
                          " variables");
  const DesignMatrix d = taguchi_array(q, r);
  const Eigen::MatrixXd pts = map_levels(d, box, levels);
  const fs::path out = prepare_dir(dir);
  write_csv(out / "design.csv", [&](std::ostream& os) { write_design_csv(os, box, pts); });
  write_design_csv(std::cout, box, pts);
  return 0;
}

int cmd_report(const std::string& report_path, std::optional<double> ref_lo, std::optional<double> ref_hi,
               std::optional<std::string> out_dir) {
  if (!fs::exists(report_path)) throw InvalidArgument("report file not found: " + report_path);
  const RunReport rep = report_from_json(read_json_file(report_path));
  const fs::path out = prepare_dir(out_dir.value_or(fs::path(report_path).parent_path().string().empty()
                                                        ? "."
                                                        : fs::path(report_path).parent_path().string()));
  write_csv(out / "af_trace.csv", [&](std::ostream& os) { write_af_trace_csv(os, rep); });
  std::printf("wrote %s\n", (out / "af_trace.csv").string().c_str());
  if (rep.box.dim() == 1 && !rep.models.empty()) {
    write_csv(out / "gp_curve.csv", [&](std::ostream& os) { write_gp_curve_csv(os, rep.models.back(), rep.box); });
    std::printf("wrote %s\n", (out / "gp_curve.csv").string().c_str());
  }
  if (ref_lo.has_value() != ref_hi.has_value())
    throw InvalidArgument("report: give both --reference-lower and --reference-upper");
  if (ref_lo) {
    write_csv(out / "error_trace.csv", [&](std::ostream& os) { write_error_trace_csv(os, rep, *ref_lo, *ref_hi); });
    std::printf("wrote %s\n", (out / "error_trace.csv").string().c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interval bounds of black-box responses by Bayesian optimization"};
  app.require_subcommand(1);

  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out, resume, method, report_config;
  std::optional<int> n;
  std::optional<double> ref_lo, ref_hi;
  int parallel = 1, q = 0, r = 0;
  std::string report_path;

  auto* run = app.add_subcommand("run", "Run Approach A or B from a configuration");
  run->add_option("--config", config, "Configuration file (JSON)")->required();
  run->add_option("--seed", seed, "Override the configured seed");
  run->add_option("--out", out, "Output directory");
  run->add_option("--parallel", parallel, "Threads for the initial design evaluations")->check(CLI::PositiveNumber);
  run->add_option("--resume", resume, "Replay evaluations from a JSONL log");

  auto* base = app.add_subcommand("baseline", "Vertex or subinterval reference bounds");
  base->add_option("--config", config, "Configuration file (JSON)")->required();
  base->add_option("--method", method, "vertex or subinterval")->check(CLI::IsMember({"vertex", "subinterval"}));
  base->add_option("--n", n, "Subintervals per variable")->check(CLI::PositiveNumber);
  base->add_option("--out", out, "Output directory");

  auto* des = app.add_subcommand("design", "Write a Taguchi initial design");
  des->add_option("--q", q, "Levels")->required();
  des->add_option("--r", r, "Variables")->required();
  des->add_option("--config", report_config, "Take the box and level values from a configuration");
  des->add_option("--out", out, "Output directory");

  auto* rep = app.add_subcommand("report", "Plot-ready CSVs from a report.json");
  rep->add_option("--report", report_path, "report.json of a previous run")->required();
  rep->add_option("--reference-lower", ref_lo, "Reference lower bound");
  rep->add_option("--reference-upper", ref_hi, "Reference upper bound");
  rep->add_option("--out", out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config, seed, out, parallel, resume);
    if (*base) return cmd_baseline(config, method, n, out);
    if (*des) return cmd_design(q, r, report_config, out);
    if (*rep) return cmd_report(report_path, ref_lo, ref_hi, out);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
  return kExitError;
}
