#pragma once

// Bayesian-optimization bound search. Approach A grows one training set per
// side; Approach B grows a single shared set with two points per iteration.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>

#include "gpbounds/acquisition.hpp"
#include "gpbounds/design.hpp"
#include "gpbounds/errors.hpp"
#include "gpbounds/gp_core.hpp"
#include "gpbounds/models.hpp"

namespace gpbounds {

struct StoppingPolicy {
  int budget = 30;            // additional evaluations beyond the initial set
  bool use_af_criterion = true;
  AfStoppingPolicy af{};

  void validate() const {
    if (budget < 0) throw InvalidArgument("StoppingPolicy: budget must be >= 0");
    if (!(af.delta > 0.0)) throw InvalidArgument("StoppingPolicy: delta must be > 0");
  }
};

struct SolverOptions {
  SurrogateOptions surrogate{};
  std::optional<GridSpec> grid;  // default_grid_spec(r, seed) when unset
};

struct BoundEstimate {
  Direction side = Direction::Min;
  Eigen::VectorXd location;  // physical
  double mean = 0.0;
  double sigma = 0.0;
  double observed_optimum = 0.0;
  Eigen::VectorXd observed_location;  // physical

  double lo() const { return mean - 2.0 * sigma; }
  double hi() const { return mean + 2.0 * sigma; }
  /// Conservative endpoint: lower end for Min, upper end for Max.
  double conservative() const { return side == Direction::Min ? lo() : hi(); }
};

struct SideStep {
  Direction side = Direction::Min;
  Eigen::VectorXd b_hat;  // physical
  double af_value = 0.0;
  double incumbent = 0.0;
  bool evaluated = false;
  double value = 0.0;
  bool af_stop = false;
  double bound_mean = 0.0;  // posterior-mean optimum on this iteration's GP
  Eigen::VectorXd bound_location;
};

struct IterationRecord {
  int iteration = 0;
  int training_size = 0;  // rows the GP was fitted on
  KernelHyperparams hyper;
  std::vector<SideStep> steps;
};

struct Metric1Result {
  Eigen::VectorXd af_point;  // physical b-hat|LI
  std::vector<double> distance;
  std::vector<double> threshold;
  std::vector<bool> distance_ok;
  double af_mean = 0.0;
  double af_sigma = 0.0;
  double bound_endpoint = 0.0;  // conservative endpoint of the estimate
  bool ci_ok = false;

  bool passed() const {
    return ci_ok && std::all_of(distance_ok.begin(), distance_ok.end(), [](bool b) { return b; });
  }
};

struct Metric2Result {
  std::vector<double> distance;
  std::vector<double> threshold;
  std::vector<bool> distance_ok;
  double bound_mean = 0.0;
  double observed_mean = 0.0;
  std::optional<bool> magnitude_ok;  // empty when m(b_bound) == 0

  bool passed() const {
    return magnitude_ok.value_or(false) &&
           std::all_of(distance_ok.begin(), distance_ok.end(), [](bool b) { return b; });
  }
};

struct SatisfactionReport {
  Direction side = Direction::Min;
  Metric1Result metric1;
  Metric2Result metric2;
  bool warning = true;
};

struct SideModel {
  std::string side;  // "min", "max" or "shared"
  KernelHyperparams hyper;
  Eigen::MatrixXd points;  // physical
  Eigen::VectorXd values;
  double shift = 0.0;
  double scale = 1.0;
};

struct RunReport {
  std::string approach;  // "A" or "B"
  AcquisitionKind af;
  StoppingPolicy policy;
  std::uint64_t seed = 0;
  IntervalBox box;
  std::string initial_design;
  int initial_size = 0;
  int evaluations = 0;  // initial_size + iteration evaluations
  BoundEstimate lower, upper;
  SatisfactionReport lower_metrics, upper_metrics;
  std::string lower_stop, upper_stop;  // "af", "budget", "exhausted" or "error"
  std::vector<IterationRecord> history;
  std::vector<SideModel> models;
  std::vector<std::string> events;
  bool complete = true;
  std::string error;

  int additional_evaluations() const { return evaluations - initial_size; }
  bool warning() const { return lower_metrics.warning || upper_metrics.warning; }
};

// ---------------------------------------------------------------------------

/// Evaluates physical design rows, optionally on several threads. The black
/// box must be safe to call concurrently when parallel > 1.
inline TrainingSet evaluate_design(const BlackBox& bb, const IntervalBox& box,
                                   const Eigen::MatrixXd& physical, int parallel = 1) {
  box.validate();
  if (physical.rows() == 0) throw InvalidArgument("evaluate_design: empty design");
  if (physical.cols() != box.dim()) throw InvalidArgument("evaluate_design: dimension mismatch");
  const Eigen::Index n = physical.rows();
  Eigen::VectorXd values(n);
  std::vector<std::string> errors(n);
  auto work = [&](Eigen::Index begin, Eigen::Index step) {
    for (Eigen::Index j = begin; j < n; j += step) {
      try {
        values[j] = bb(physical.row(j).transpose());
        if (!std::isfinite(values[j])) errors[j] = "non-finite value";
      } catch (const std::exception& e) {
        errors[j] = e.what();
      }
    }
  };
  const int threads = std::clamp(parallel, 1, static_cast<int>(n));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    for (auto& th : pool) th.join();
  }
  for (Eigen::Index j = 0; j < n; ++j)
    if (!errors[j].empty())
      throw EvaluationError("initial design row " + std::to_string(j) + ": " + errors[j]);
  TrainingSet ts;
  ts.points = scale_rows(box, physical);
  ts.values = values;
  ts.validate();
  return ts;
}

namespace detail {

/// Candidate set for bound extraction: grid rows followed by training rows.
inline Eigen::MatrixXd with_training_rows(const Eigen::MatrixXd& grid, const Eigen::MatrixXd& train) {
  Eigen::MatrixXd all(grid.rows() + train.rows(), grid.cols());
  all << grid, train;
  return all;
}

inline Eigen::Index observed_index(const Eigen::VectorXd& w, Direction dir) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < w.size(); ++i)
    if (dir == Direction::Max ? w[i] > w[best] : w[i] < w[best]) best = i;
  return best;
}

inline BoundEstimate extract_bound(const Surrogate& s, const Eigen::MatrixXd& candidates,
                                   const Eigen::VectorXd& mean, const Eigen::VectorXd& var,
                                   const IntervalBox& box, Direction dir) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < mean.size(); ++i)
    if (dir == Direction::Max ? mean[i] > mean[best] : mean[i] < mean[best]) best = i;
  BoundEstimate e;
  e.side = dir;
  e.location = unscale(box, candidates.row(best).transpose());
  e.mean = mean[best];
  e.sigma = std::sqrt(var[best]);
  const Eigen::Index j = observed_index(s.observed(), dir);
  e.observed_optimum = s.observed()[j];
  e.observed_location = unscale(box, s.points().row(j).transpose());
  return e;
}

/// Same seed for the same iteration on every side, so all approaches share
/// the initial GP.
inline std::uint64_t fit_seed(std::uint64_t seed, int iteration) {
  std::uint64_t h = (seed ^ 0x9E3779B97F4A7C15ULL) * 0xBF58476D1CE4E5B9ULL;
  h = (h ^ static_cast<std::uint64_t>(iteration + 1)) * 0x94D049BB133111EBULL;
  return h ^ (h >> 31);
}

inline Surrogate fit_for(const TrainingSet& data, const SolverOptions& opts, std::uint64_t seed) {
  SurrogateOptions so = opts.surrogate;
  so.fit.seed = seed;
  return fit_surrogate(data, so);
}

/// Posterior, AF values and bound estimates for one side on one GP.
struct SidePass {
  AcquisitionResult af;
  Eigen::VectorXd af_values;
  BoundEstimate bound;
};

struct Posterior {
  Eigen::MatrixXd candidates;
  Eigen::VectorXd mean, var;
};

inline Posterior posterior_on(const Surrogate& s, const Eigen::MatrixXd& grid) {
  Posterior p;
  p.candidates = with_training_rows(grid, s.points());
  s.predict_many(p.candidates, p.mean, p.var);
  return p;
}

inline SidePass side_pass(const Surrogate& s, const Posterior& p, const Eigen::MatrixXd& grid,
                          const IntervalBox& box, const AcquisitionKind& kind, Direction dir) {
  SidePass out;
  const double inc = observed_incumbent(s.observed(), dir);
  out.af_values = af_from_posterior(p.mean.head(grid.rows()), p.var.head(grid.rows()), inc, kind, dir);
  out.af = make_result(out.af_values, first_argmax(out.af_values), grid, box, inc, dir);
  out.bound = extract_bound(s, p.candidates, p.mean, p.var, box, dir);
  return out;
}

/// Highest-AF grid row that is not already a training row (lowest index on ties).
inline std::optional<Eigen::Index> pick_new_point(const Eigen::VectorXd& af, const Eigen::MatrixXd& grid,
                                                  const TrainingSet& data) {
  std::vector<Eigen::Index> order(af.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return af[a] > af[b]; });
  for (Eigen::Index i : order)
    if (!data.find(grid.row(i).transpose())) return i;
  return std::nullopt;
}

inline std::string fmt_point(const Eigen::VectorXd& b) {
  std::string s = "(";
  char buf[32];
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.10g", b[i]);
    s += (i ? ", " : "") + std::string(buf);
  }
  return s + ")";
}

inline SideModel side_model(const std::string& name, const Surrogate& s, const IntervalBox& box) {
  return {name, s.gp().hyper(), unscale_rows(box, s.points()), s.observed(), s.shift(), s.scale()};
}

inline void check_inputs(const IntervalBox& box, const TrainingSet& initial, const StoppingPolicy& policy) {
  box.validate();
  initial.validate();
  policy.validate();
  if (initial.size() == 0) throw InvalidArgument("solver: initial training set is empty");
  if (initial.dim() != box.dim()) throw InvalidArgument("solver: initial set dimension differs from box");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Bound extraction and satisfaction metrics

/// Posterior-mean optima over grid plus training rows, with observed optima.
inline std::pair<BoundEstimate, BoundEstimate> estimate_bounds(const Surrogate& s,
                                                               const Eigen::MatrixXd& grid,
                                                               const IntervalBox& box) {
  const auto p = detail::posterior_on(s, grid);
  return {detail::extract_bound(s, p.candidates, p.mean, p.var, box, Direction::Min),
          detail::extract_bound(s, p.candidates, p.mean, p.var, box, Direction::Max)};
}

namespace detail {

inline void distance_flags(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const IntervalBox& box,
                           std::vector<double>& dist, std::vector<double>& thr, std::vector<bool>& ok) {
  dist.clear();
  thr.clear();
  ok.clear();
  for (int i = 0; i < box.dim(); ++i) {
    dist.push_back(std::abs(a[i] - b[i]));
    thr.push_back(0.02 * std::abs(box.length(i)));
    ok.push_back(dist.back() <= thr.back());
  }
}

}  // namespace detail

/// Distances from the bound location to the last AF point, plus the CI
/// condition at that point. Posterior values are recomputed from the model.
inline Metric1Result metric1(const Eigen::VectorXd& last_af_point, const BoundEstimate& est,
                             const Surrogate& s, const IntervalBox& box) {
  if (last_af_point.size() != box.dim() || est.location.size() != box.dim())
    throw InvalidArgument("metric1: dimension mismatch");
  Metric1Result m;
  m.af_point = last_af_point;
  detail::distance_flags(est.location, last_af_point, box, m.distance, m.threshold, m.distance_ok);
  const auto at_af = s.predict(scale(box, last_af_point));
  const auto at_bound = s.predict(scale(box, est.location));
  m.af_mean = at_af.mean;
  m.af_sigma = at_af.sigma();
  if (est.side == Direction::Min) {
    m.bound_endpoint = at_bound.mean - 2.0 * at_bound.sigma();
    m.ci_ok = m.af_mean - 2.0 * m.af_sigma >= m.bound_endpoint;
  } else {
    m.bound_endpoint = at_bound.mean + 2.0 * at_bound.sigma();
    m.ci_ok = m.af_mean + 2.0 * m.af_sigma <= m.bound_endpoint;
  }
  return m;
}

/// Distances and magnitude change between the bound location and the
/// observed optimum.
inline Metric2Result metric2(const BoundEstimate& est, const Surrogate& s, const IntervalBox& box) {
  if (est.location.size() != box.dim() || est.observed_location.size() != box.dim())
    throw InvalidArgument("metric2: dimension mismatch");
  Metric2Result m;
  detail::distance_flags(est.location, est.observed_location, box, m.distance, m.threshold,
                         m.distance_ok);
  m.bound_mean = s.predict(scale(box, est.location)).mean;
  m.observed_mean = s.predict(scale(box, est.observed_location)).mean;
  if (m.bound_mean != 0.0)
    m.magnitude_ok = std::abs(m.bound_mean - m.observed_mean) < 0.05 * std::abs(m.bound_mean);
  return m;
}

inline SatisfactionReport satisfaction(const Eigen::VectorXd& last_af_point, const BoundEstimate& est,
                                       const Surrogate& s, const IntervalBox& box) {
  SatisfactionReport r;
  r.side = est.side;
  r.metric1 = metric1(last_af_point, est, s, box);
  r.metric2 = metric2(est, s, box);
  r.warning = !(r.metric1.passed() && r.metric2.passed());
  return r;
}

/// Signed percentage errors of the posterior-mean bounds against reference values.
inline std::pair<double, double> compare_to_reference(double lower, double upper, double ref_lower,
                                                      double ref_upper) {
  for (double v : {ref_lower, ref_upper})
    if (!std::isfinite(v) || v == 0.0)
      throw InvalidArgument("compare_to_reference: reference bounds must be finite and nonzero");
  return {100.0 * (lower - ref_lower) / ref_lower, 100.0 * (upper - ref_upper) / ref_upper};
}

inline std::pair<double, double> compare_to_reference(const RunReport& report, double ref_lower,
                                                      double ref_upper) {
  return compare_to_reference(report.lower.mean, report.upper.mean, ref_lower, ref_upper);
}

// ---------------------------------------------------------------------------
// Approach A

namespace detail {

struct SideOutcome {
  BoundEstimate bound;
  SatisfactionReport metrics;
  std::string stop;
  std::optional<Surrogate> model;
  int evaluations = 0;
  std::vector<IterationRecord> history;
  std::vector<std::string> events;
  std::string error;
};

inline SideOutcome run_side(const BlackBox& bb, const IntervalBox& box, TrainingSet data,
                            const Eigen::MatrixXd& grid, const AcquisitionKind& kind,
                            const StoppingPolicy& policy, int side_budget, Direction dir,
                            const SolverOptions& opts, std::uint64_t seed) {
  SideOutcome out;
  for (int it = 0;; ++it) {
    Surrogate s = fit_for(data, opts, fit_seed(seed, it));
    const auto post = posterior_on(s, grid);
    auto pass = side_pass(s, post, grid, box, kind, dir);

    IterationRecord rec;
    rec.iteration = it;
    rec.training_size = data.size();
    rec.hyper = s.gp().hyper();
    SideStep step;
    step.side = dir;
    step.b_hat = pass.af.b_hat;
    step.af_value = pass.af.af_value;
    step.incumbent = pass.af.incumbent;
    step.af_stop = policy.use_af_criterion && stopping_check(pass.af, kind, policy.af);
    step.bound_mean = pass.bound.mean;
    step.bound_location = pass.bound.location;

    auto finish = [&](const std::string& why, const Eigen::VectorXd& af_point) {
      out.history.push_back(rec);
      out.stop = why;
      out.bound = pass.bound;
      out.metrics = satisfaction(af_point, pass.bound, s, box);
      out.model.emplace(std::move(s));
    };

    if (step.af_stop) {
      rec.steps.push_back(step);
      finish("af", pass.af.b_hat);
      return out;
    }
    if (out.evaluations >= side_budget) {
      rec.steps.push_back(step);
      finish("budget", pass.af.b_hat);
      return out;
    }
    const auto pick = pick_new_point(pass.af_values, grid, data);
    if (!pick) {
      rec.steps.push_back(step);
      out.events.push_back(std::string(to_string(dir)) + ": every grid point already evaluated");
      finish("exhausted", pass.af.b_hat);
      return out;
    }
    if (*pick != pass.af.index) {
      out.events.push_back(std::string(to_string(dir)) + " iteration " + std::to_string(it) +
                           ": AF maximizer " + fmt_point(pass.af.b_hat) +
                           " already evaluated, taking next-best grid point");
      step.b_hat = unscale(box, grid.row(*pick).transpose());
      step.af_value = pass.af_values[*pick];
    }
    const Eigen::VectorXd b_scaled = grid.row(*pick).transpose();
    try {
      step.value = bb(step.b_hat);
      if (!std::isfinite(step.value)) throw EvaluationError("black box returned a non-finite value");
    } catch (const std::exception& e) {
      rec.steps.push_back(step);
      out.error = std::string(to_string(dir)) + " iteration " + std::to_string(it) + ": " + e.what();
      finish("error", pass.af.b_hat);
      return out;
    }
    step.evaluated = true;
    rec.steps.push_back(step);
    out.history.push_back(rec);
    data.append(b_scaled, step.value);
    ++out.evaluations;
  }
}

inline GridSpec grid_spec_for(const SolverOptions& opts, const IntervalBox& box, std::uint64_t seed) {
  return opts.grid ? *opts.grid : default_grid_spec(box.dim(), seed);
}

}  // namespace detail

/// Two independent side loops; floor(budget/2) extra evaluations go to Min
/// and the remainder to Max.
inline RunReport run_approach_a(const BlackBox& bb, const IntervalBox& box, const TrainingSet& initial,
                                const AcquisitionKind& kind, const StoppingPolicy& policy,
                                std::uint64_t seed, const SolverOptions& opts = {}) {
  detail::check_inputs(box, initial, policy);
  const Eigen::MatrixXd grid = test_grid(box, detail::grid_spec_for(opts, box, seed));
  const int min_budget = policy.budget / 2;
  const int max_budget = policy.budget - min_budget;

  RunReport rep;
  rep.approach = "A";
  rep.af = kind;
  rep.policy = policy;
  rep.seed = seed;
  rep.box = box;
  rep.initial_size = initial.size();

  auto lo = detail::run_side(bb, box, initial, grid, kind, policy, min_budget, Direction::Min, opts, seed);
  std::optional<detail::SideOutcome> hi;
  if (lo.error.empty())
    hi = detail::run_side(bb, box, initial, grid, kind, policy, max_budget, Direction::Max, opts, seed);

  rep.lower = lo.bound;
  rep.lower_metrics = lo.metrics;
  rep.lower_stop = lo.stop;
  rep.history = lo.history;
  rep.events = lo.events;
  rep.models.push_back(detail::side_model("min", *lo.model, box));
  rep.evaluations = initial.size() + lo.evaluations;
  if (!lo.error.empty()) {
    rep.complete = false;
    rep.error = lo.error;
    // The Max side never ran; report the initial-set estimate for it.
    Surrogate s = detail::fit_for(initial, opts, detail::fit_seed(seed, 0));
    const auto post = detail::posterior_on(s, grid);
    const auto pass = detail::side_pass(s, post, grid, box, kind, Direction::Max);
    rep.upper = pass.bound;
    rep.upper_metrics = satisfaction(pass.af.b_hat, pass.bound, s, box);
    rep.upper_stop = "error";
    rep.models.push_back(detail::side_model("max", s, box));
    return rep;
  }
  rep.upper = hi->bound;
  rep.upper_metrics = hi->metrics;
  rep.upper_stop = hi->stop;
  rep.history.insert(rep.history.end(), hi->history.begin(), hi->history.end());
  rep.events.insert(rep.events.end(), hi->events.begin(), hi->events.end());
  rep.models.push_back(detail::side_model("max", *hi->model, box));
  rep.evaluations += hi->evaluations;
  if (!hi->error.empty()) {
    rep.complete = false;
    rep.error = hi->error;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Approach B

/// One shared GP; each live side contributes one evaluation per iteration.
/// When a single budget slot remains with both sides live, Min takes it.
inline RunReport run_approach_b(const BlackBox& bb, const IntervalBox& box, const TrainingSet& initial,
                                const AcquisitionKind& kind, const StoppingPolicy& policy,
                                std::uint64_t seed, const SolverOptions& opts = {}) {
  detail::check_inputs(box, initial, policy);
  const Eigen::MatrixXd grid = test_grid(box, detail::grid_spec_for(opts, box, seed));

  RunReport rep;
  rep.approach = "B";
  rep.af = kind;
  rep.policy = policy;
  rep.seed = seed;
  rep.box = box;
  rep.initial_size = initial.size();

  TrainingSet data = initial;
  bool live[2] = {true, true};
  std::string stop[2];
  const Direction dirs[2] = {Direction::Min, Direction::Max};
  int used = 0;

  for (int it = 0;; ++it) {
    Surrogate s = detail::fit_for(data, opts, detail::fit_seed(seed, it));
    const auto post = detail::posterior_on(s, grid);
    detail::SidePass pass[2] = {detail::side_pass(s, post, grid, box, kind, Direction::Min),
                                detail::side_pass(s, post, grid, box, kind, Direction::Max)};

    IterationRecord rec;
    rec.iteration = it;
    rec.training_size = data.size();
    rec.hyper = s.gp().hyper();
    SideStep steps[2];
    const bool was_live[2] = {live[0], live[1]};
    for (int k = 0; k < 2; ++k) {
      steps[k].side = dirs[k];
      steps[k].b_hat = pass[k].af.b_hat;
      steps[k].af_value = pass[k].af.af_value;
      steps[k].incumbent = pass[k].af.incumbent;
      steps[k].bound_mean = pass[k].bound.mean;
      steps[k].bound_location = pass[k].bound.location;
      if (live[k] && policy.use_af_criterion && stopping_check(pass[k].af, kind, policy.af)) {
        steps[k].af_stop = true;
        live[k] = false;
        stop[k] = "af";
      }
    }

    // Select points for the live sides.
    std::optional<Eigen::Index> pick[2];
    for (int k = 0; k < 2; ++k) {
      if (!live[k]) continue;
      if (used >= policy.budget) {
        live[k] = false;
        stop[k] = "budget";
        continue;
      }
      pick[k] = detail::pick_new_point(pass[k].af_values, grid, data);
      if (!pick[k]) {
        live[k] = false;
        stop[k] = "exhausted";
        rep.events.push_back(std::string(to_string(dirs[k])) + ": every grid point already evaluated");
        continue;
      }
      if (*pick[k] != pass[k].af.index) {
        rep.events.push_back(std::string(to_string(dirs[k])) + " iteration " + std::to_string(it) +
                             ": AF maximizer " + detail::fmt_point(pass[k].af.b_hat) +
                             " already evaluated, taking next-best grid point");
        steps[k].b_hat = unscale(box, grid.row(*pick[k]).transpose());
        steps[k].af_value = pass[k].af_values[*pick[k]];
      }
    }
    for (int k = 0; k < 2; ++k)
      if (was_live[k]) rec.steps.push_back(steps[k]);

    if (!live[0] && !live[1]) {
      rep.history.push_back(rec);
      for (int k = 0; k < 2; ++k) {
        (k == 0 ? rep.lower : rep.upper) = pass[k].bound;
        (k == 0 ? rep.lower_metrics : rep.upper_metrics) =
            satisfaction(pass[k].af.b_hat, pass[k].bound, s, box);
      }
      rep.lower_stop = stop[0];
      rep.upper_stop = stop[1];
      rep.models.push_back(detail::side_model("shared", s, box));
      break;
    }

    const bool same_point = pick[0] && pick[1] && *pick[0] == *pick[1];
    if (same_point)
      rep.events.push_back("iteration " + std::to_string(it) +
                           ": min and max selected the same point, evaluated once");
    bool failed = false;
    for (int k = 0; k < 2 && !failed; ++k) {
      if (!pick[k]) continue;
      auto& step = *std::find_if(rec.steps.begin(), rec.steps.end(),
                                 [&](const SideStep& st) { return st.side == dirs[k]; });
      if (k == 1 && same_point) {
        step.evaluated = true;
        step.value = rec.steps.front().value;
        continue;
      }
      if (used >= policy.budget) {
        live[k] = false;
        stop[k] = "budget";
        continue;
      }
      try {
        step.value = bb(step.b_hat);
        if (!std::isfinite(step.value)) throw EvaluationError("black box returned a non-finite value");
      } catch (const std::exception& e) {
        rep.complete = false;
        rep.error = std::string(to_string(dirs[k])) + " iteration " + std::to_string(it) + ": " + e.what();
        failed = true;
        break;
      }
      step.evaluated = true;
      data.append(grid.row(*pick[k]).transpose(), step.value);
      ++used;
    }
    rep.history.push_back(rec);
    if (failed) {
      // Estimates from the last model fitted on the data collected so far.
      Surrogate f = detail::fit_for(data, opts, detail::fit_seed(seed, it + 1));
      const auto fp = detail::posterior_on(f, grid);
      for (int k = 0; k < 2; ++k) {
        const auto sp = detail::side_pass(f, fp, grid, box, kind, dirs[k]);
        (k == 0 ? rep.lower : rep.upper) = sp.bound;
        (k == 0 ? rep.lower_metrics : rep.upper_metrics) = satisfaction(sp.af.b_hat, sp.bound, f, box);
        if (stop[k].empty()) stop[k] = "error";
      }
      rep.lower_stop = stop[0];
      rep.upper_stop = stop[1];
      rep.models.push_back(detail::side_model("shared", f, box));
      break;
    }
  }
  rep.evaluations = initial.size() + used;
  return rep;
}

}  // namespace gpbounds
