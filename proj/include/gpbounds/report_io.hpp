#pragma once

// Serialization of run reports, baselines and plot-ready CSV traces.
// JSON doubles round-trip exactly; CSV doubles use 17 significant digits.

#include <cstdio>
#include <ctime>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "gpbounds/baselines.hpp"
#include "gpbounds/bound_solver.hpp"
#include "gpbounds/errors.hpp"

namespace gpbounds {

using nlohmann::json;

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Eigen::VectorXd vec_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline json mat_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec_json(m.row(i).transpose()));
  return rows;
}

inline Eigen::MatrixXd mat_from(const json& j) {
  const auto n = static_cast<Eigen::Index>(j.size());
  if (n == 0) return {};
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(n, cols);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(j[i].size()) != cols) throw InvalidArgument("ragged matrix in JSON");
    m.row(i) = vec_from(j[i]).transpose();
  }
  return m;
}

inline Direction direction_from(const std::string& s) {
  if (s == "min") return Direction::Min;
  if (s == "max") return Direction::Max;
  throw InvalidArgument("unknown side \"" + s + "\"");
}

template <class T>
json bools(const std::vector<T>& v) {
  json a = json::array();
  for (bool b : v) a.push_back(b);
  return a;
}

}  // namespace detail

inline json to_json(const IntervalBox& box) {
  json vars = json::array();
  for (int i = 0; i < box.dim(); ++i) {
    json v{{"name", box.name(i)}, {"lower", box.lower[i]}, {"upper", box.upper[i]}};
    if (i < static_cast<int>(box.units.size()) && !box.units[i].empty()) v["unit"] = box.units[i];
    vars.push_back(v);
  }
  return vars;
}

inline IntervalBox box_from_json(const json& j) {
  IntervalBox box;
  for (const auto& v : j) {
    box.lower.push_back(v.at("lower").get<double>());
    box.upper.push_back(v.at("upper").get<double>());
    box.names.push_back(v.value("name", ""));
    box.units.push_back(v.value("unit", ""));
  }
  box.validate();
  return box;
}

inline json to_json(const AcquisitionKind& k) {
  json j{{"kind", k.name()}};
  if (k.type == AcquisitionKind::Type::CB) j["chi"] = k.chi;
  return j;
}

inline AcquisitionKind af_from_json(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "pi") return AcquisitionKind::pi();
  if (kind == "ei") return AcquisitionKind::ei();
  if (kind == "cb") return AcquisitionKind::cb(j.value("chi", 2.0));
  throw InvalidArgument("unknown acquisition kind \"" + kind + "\"");
}

inline json to_json(const KernelHyperparams& h) {
  return {{"theta", detail::vec_json(h.theta)}, {"p", detail::vec_json(h.p)}};
}

inline KernelHyperparams hyper_from_json(const json& j) {
  return {detail::vec_from(j.at("theta")), detail::vec_from(j.at("p"))};
}

inline json to_json(const BoundEstimate& e) {
  return {{"side", to_string(e.side)},
          {"location", detail::vec_json(e.location)},
          {"mean", e.mean},
          {"sigma", e.sigma},
          {"interval", {e.lo(), e.hi()}},
          {"observed_optimum", e.observed_optimum},
          {"observed_location", detail::vec_json(e.observed_location)}};
}

inline BoundEstimate bound_from_json(const json& j) {
  BoundEstimate e;
  e.side = detail::direction_from(j.at("side").get<std::string>());
  e.location = detail::vec_from(j.at("location"));
  e.mean = j.at("mean").get<double>();
  e.sigma = j.at("sigma").get<double>();
  e.observed_optimum = j.at("observed_optimum").get<double>();
  e.observed_location = detail::vec_from(j.at("observed_location"));
  return e;
}

inline json to_json(const SatisfactionReport& r) {
  const auto& m1 = r.metric1;
  const auto& m2 = r.metric2;
  json j;
  j["side"] = to_string(r.side);
  j["metric1"] = {{"af_point", detail::vec_json(m1.af_point)},
                  {"distance", m1.distance},
                  {"threshold", m1.threshold},
                  {"distance_ok", detail::bools(m1.distance_ok)},
                  {"af_mean", m1.af_mean},
                  {"af_sigma", m1.af_sigma},
                  {"bound_endpoint", m1.bound_endpoint},
                  {"ci_ok", m1.ci_ok}};
  j["metric2"] = {{"distance", m2.distance},
                  {"threshold", m2.threshold},
                  {"distance_ok", detail::bools(m2.distance_ok)},
                  {"bound_mean", m2.bound_mean},
                  {"observed_mean", m2.observed_mean},
                  {"magnitude_ok", m2.magnitude_ok ? json(*m2.magnitude_ok) : json(nullptr)}};
  j["warning"] = r.warning;
  return j;
}

inline SatisfactionReport satisfaction_from_json(const json& j) {
  SatisfactionReport r;
  r.side = detail::direction_from(j.at("side").get<std::string>());
  const auto& a = j.at("metric1");
  r.metric1.af_point = detail::vec_from(a.at("af_point"));
  r.metric1.distance = a.at("distance").get<std::vector<double>>();
  r.metric1.threshold = a.at("threshold").get<std::vector<double>>();
  r.metric1.distance_ok = a.at("distance_ok").get<std::vector<bool>>();
  r.metric1.af_mean = a.at("af_mean").get<double>();
  r.metric1.af_sigma = a.at("af_sigma").get<double>();
  r.metric1.bound_endpoint = a.at("bound_endpoint").get<double>();
  r.metric1.ci_ok = a.at("ci_ok").get<bool>();
  const auto& b = j.at("metric2");
  r.metric2.distance = b.at("distance").get<std::vector<double>>();
  r.metric2.threshold = b.at("threshold").get<std::vector<double>>();
  r.metric2.distance_ok = b.at("distance_ok").get<std::vector<bool>>();
  r.metric2.bound_mean = b.at("bound_mean").get<double>();
  r.metric2.observed_mean = b.at("observed_mean").get<double>();
  if (!b.at("magnitude_ok").is_null()) r.metric2.magnitude_ok = b.at("magnitude_ok").get<bool>();
  r.warning = j.at("warning").get<bool>();
  return r;
}

inline json to_json(const IterationRecord& rec) {
  json steps = json::array();
  for (const auto& s : rec.steps)
    steps.push_back({{"side", to_string(s.side)},
                     {"b_hat", detail::vec_json(s.b_hat)},
                     {"af_value", s.af_value},
                     {"incumbent", s.incumbent},
                     {"evaluated", s.evaluated},
                     {"value", s.evaluated ? json(s.value) : json(nullptr)},
                     {"af_stop", s.af_stop},
                     {"bound_mean", s.bound_mean},
                     {"bound_location", detail::vec_json(s.bound_location)}});
  return {{"iteration", rec.iteration},
          {"training_size", rec.training_size},
          {"hyper", to_json(rec.hyper)},
          {"steps", steps}};
}

inline IterationRecord iteration_from_json(const json& j) {
  IterationRecord rec;
  rec.iteration = j.at("iteration").get<int>();
  rec.training_size = j.at("training_size").get<int>();
  rec.hyper = hyper_from_json(j.at("hyper"));
  for (const auto& s : j.at("steps")) {
    SideStep st;
    st.side = detail::direction_from(s.at("side").get<std::string>());
    st.b_hat = detail::vec_from(s.at("b_hat"));
    st.af_value = s.at("af_value").get<double>();
    st.incumbent = s.at("incumbent").get<double>();
    st.evaluated = s.at("evaluated").get<bool>();
    if (st.evaluated) st.value = s.at("value").get<double>();
    st.af_stop = s.at("af_stop").get<bool>();
    st.bound_mean = s.at("bound_mean").get<double>();
    st.bound_location = detail::vec_from(s.at("bound_location"));
    rec.steps.push_back(std::move(st));
  }
  return rec;
}

inline json to_json(const SideModel& m) {
  return {{"side", m.side},
          {"hyper", to_json(m.hyper)},
          {"points", detail::mat_json(m.points)},
          {"values", detail::vec_json(m.values)},
          {"shift", m.shift},
          {"scale", m.scale}};
}

inline SideModel side_model_from_json(const json& j) {
  return {j.at("side").get<std::string>(), hyper_from_json(j.at("hyper")),
          detail::mat_from(j.at("points")), detail::vec_from(j.at("values")),
          j.at("shift").get<double>(), j.at("scale").get<double>()};
}

/// Rebuilds the posterior stored in a report (no refitting).
inline Surrogate surrogate_from_model(const SideModel& m, const IntervalBox& box) {
  TrainingSet ts;
  ts.points = scale_rows(box, m.points);
  ts.values = (m.values.array() - m.shift) / m.scale;
  return Surrogate(FittedGp(std::move(ts), m.hyper), m.values, m.shift, m.scale);
}

inline json to_json(const RunReport& r) {
  json j;
  j["format"] = "gpbounds-report/1";
  j["approach"] = r.approach;
  j["af"] = to_json(r.af);
  j["stopping"] = {{"budget", r.policy.budget},
                   {"budget_counts", "additional evaluations beyond the initial set"},
                   {"use_af_criterion", r.policy.use_af_criterion},
                   {"delta", r.policy.af.delta},
                   {"cb_slack", r.policy.af.cb_slack}};
  j["seed"] = r.seed;
  j["box"] = to_json(r.box);
  j["initial_design"] = r.initial_design;
  j["initial_size"] = r.initial_size;
  j["evaluations"] = r.evaluations;
  j["additional_evaluations"] = r.additional_evaluations();
  j["complete"] = r.complete;
  j["error"] = r.error;
  j["lower"] = to_json(r.lower);
  j["upper"] = to_json(r.upper);
  j["lower_stop"] = r.lower_stop;
  j["upper_stop"] = r.upper_stop;
  j["lower_metrics"] = to_json(r.lower_metrics);
  j["upper_metrics"] = to_json(r.upper_metrics);
  j["warning"] = r.warning();
  json hist = json::array();
  for (const auto& h : r.history) hist.push_back(to_json(h));
  j["history"] = hist;
  json models = json::array();
  for (const auto& m : r.models) models.push_back(to_json(m));
  j["models"] = models;
  j["events"] = r.events;
  return j;
}

inline RunReport report_from_json(const json& j) {
  if (j.value("format", "") != "gpbounds-report/1")
    throw InvalidArgument("not a gpbounds-report/1 document");
  RunReport r;
  r.approach = j.at("approach").get<std::string>();
  r.af = af_from_json(j.at("af"));
  const auto& st = j.at("stopping");
  r.policy.budget = st.at("budget").get<int>();
  r.policy.use_af_criterion = st.at("use_af_criterion").get<bool>();
  r.policy.af.delta = st.at("delta").get<double>();
  r.policy.af.cb_slack = st.at("cb_slack").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.box = box_from_json(j.at("box"));
  r.initial_design = j.at("initial_design").get<std::string>();
  r.initial_size = j.at("initial_size").get<int>();
  r.evaluations = j.at("evaluations").get<int>();
  r.complete = j.at("complete").get<bool>();
  r.error = j.at("error").get<std::string>();
  r.lower = bound_from_json(j.at("lower"));
  r.upper = bound_from_json(j.at("upper"));
  r.lower_stop = j.at("lower_stop").get<std::string>();
  r.upper_stop = j.at("upper_stop").get<std::string>();
  r.lower_metrics = satisfaction_from_json(j.at("lower_metrics"));
  r.upper_metrics = satisfaction_from_json(j.at("upper_metrics"));
  for (const auto& h : j.at("history")) r.history.push_back(iteration_from_json(h));
  for (const auto& m : j.at("models")) r.models.push_back(side_model_from_json(m));
  r.events = j.at("events").get<std::vector<std::string>>();
  return r;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InvalidArgument("cannot write " + path);
  out << text;
  if (!out) throw InvalidArgument("write failed for " + path);
}

// ---------------------------------------------------------------------------
// CSV

/// One row per (iteration, side) step.
inline void write_trace_csv(std::ostream& os, const RunReport& r) {
  const int dim = r.box.dim();
  os << "iteration,side,training_size";
  for (int i = 0; i < dim; ++i) os << ",b_hat_" << r.box.name(i);
  os << ",af_value,incumbent,evaluated,value,af_stop,bound_mean";
  for (int i = 0; i < dim; ++i) os << ",theta_" << i + 1;
  for (int i = 0; i < dim; ++i) os << ",p_" << i + 1;
  os << '\n';
  for (const auto& h : r.history)
    for (const auto& s : h.steps) {
      os << h.iteration << ',' << to_string(s.side) << ',' << h.training_size;
      for (int i = 0; i < dim; ++i) os << ',' << fmt17(s.b_hat[i]);
      os << ',' << fmt17(s.af_value) << ',' << fmt17(s.incumbent) << ',' << (s.evaluated ? 1 : 0) << ','
         << (s.evaluated ? fmt17(s.value) : "") << ',' << (s.af_stop ? 1 : 0) << ','
         << fmt17(s.bound_mean);
      for (int i = 0; i < dim; ++i) os << ',' << fmt17(h.hyper.theta[i]);
      for (int i = 0; i < dim; ++i) os << ',' << fmt17(h.hyper.p[i]);
      os << '\n';
    }
}

inline void write_bounds_csv(std::ostream& os, const RunReport& r) {
  const int dim = r.box.dim();
  os << "side,mean,sigma,lo,hi,observed_optimum,warning";
  for (int i = 0; i < dim; ++i) os << ",location_" << r.box.name(i);
  for (int i = 0; i < dim; ++i) os << ",observed_" << r.box.name(i);
  os << '\n';
  for (const auto* pr : {&r.lower_metrics, &r.upper_metrics}) {
    const auto& e = pr == &r.lower_metrics ? r.lower : r.upper;
    os << to_string(e.side) << ',' << fmt17(e.mean) << ',' << fmt17(e.sigma) << ',' << fmt17(e.lo())
       << ',' << fmt17(e.hi()) << ',' << fmt17(e.observed_optimum) << ',' << (pr->warning ? 1 : 0);
    for (int i = 0; i < dim; ++i) os << ',' << fmt17(e.location[i]);
    for (int i = 0; i < dim; ++i) os << ',' << fmt17(e.observed_location[i]);
    os << '\n';
  }
}

/// AF maximum per iteration and side.
inline void write_af_trace_csv(std::ostream& os, const RunReport& r) {
  os << "iteration,side,af_value,af_stop\n";
  for (const auto& h : r.history)
    for (const auto& s : h.steps)
      os << h.iteration << ',' << to_string(s.side) << ',' << fmt17(s.af_value) << ','
         << (s.af_stop ? 1 : 0) << '\n';
}

/// Signed percentage error of the per-iteration posterior-mean bound.
inline void write_error_trace_csv(std::ostream& os, const RunReport& r, double ref_lower,
                                  double ref_upper) {
  compare_to_reference(0.0, 0.0, ref_lower, ref_upper);  // validates the references
  os << "iteration,side,bound_mean,reference,error_pct\n";
  for (const auto& h : r.history)
    for (const auto& s : h.steps) {
      const double ref = s.side == Direction::Min ? ref_lower : ref_upper;
      os << h.iteration << ',' << to_string(s.side) << ',' << fmt17(s.bound_mean) << ',' << fmt17(ref)
         << ',' << fmt17(100.0 * (s.bound_mean - ref) / ref) << '\n';
    }
}

/// Posterior mean and 2-sigma band of a one-variable model on `points` equally spaced values.
inline void write_gp_curve_csv(std::ostream& os, const SideModel& m, const IntervalBox& box,
                               int points = 301) {
  if (box.dim() != 1) throw InvalidArgument("gp_curve: only available for one variable");
  if (points < 2) throw InvalidArgument("gp_curve: need at least 2 points");
  const Surrogate s = surrogate_from_model(m, box);
  Eigen::MatrixXd grid(points, 1);
  for (int i = 0; i < points; ++i) grid(i, 0) = i == points - 1 ? 1.0 : static_cast<double>(i) / (points - 1);
  Eigen::VectorXd mean, var;
  s.predict_many(grid, mean, var);
  os << "b,mean,lo,hi\n";
  for (int i = 0; i < points; ++i) {
    const double sd = std::sqrt(var[i]);
    os << fmt17(unscale(box, grid.row(i).transpose())[0]) << ',' << fmt17(mean[i]) << ','
       << fmt17(mean[i] - 2 * sd) << ',' << fmt17(mean[i] + 2 * sd) << '\n';
  }
}

inline json to_json(const BaselineResult& b, const std::string& method, const IntervalBox& box) {
  return {{"format", "gpbounds-baseline/1"},
          {"method", method},
          {"box", to_json(box)},
          {"lower", b.lower},
          {"upper", b.upper},
          {"lower_location", detail::vec_json(b.lower_location)},
          {"upper_location", detail::vec_json(b.upper_location)},
          {"evaluations", b.evaluations}};
}

}  // namespace gpbounds
