#pragma once

#include <cmath>
#include <concepts>
#include <numbers>
#include <string>

#include <Eigen/Core>

#include "gpbounds/design.hpp"
#include "gpbounds/errors.hpp"
#include "gpbounds/gp_core.hpp"

namespace gpbounds {

/// Which bound a search improves.
enum class Direction { Min, Max };

inline const char* to_string(Direction d) { return d == Direction::Min ? "min" : "max"; }

struct AcquisitionKind {
  enum class Type { PI, EI, CB };
  Type type = Type::EI;
  double chi = 2.0;  // CB only

  static AcquisitionKind pi() { return {Type::PI, 0.0}; }
  static AcquisitionKind ei() { return {Type::EI, 0.0}; }
  static AcquisitionKind cb(double chi = 2.0) {
    if (!(chi >= 0.0)) throw InvalidArgument("CB: chi must be >= 0");
    return {Type::CB, chi};
  }

  std::string name() const {
    switch (type) {
      case Type::PI: return "pi";
      case Type::EI: return "ei";
      case Type::CB: return "cb";
    }
    return "?";
  }
};

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double gamma(double mean, double sigma, double incumbent, Direction dir) {
  if (!(sigma > 0.0)) throw InvalidArgument("gamma: sigma must be > 0");
  return dir == Direction::Max ? (mean - incumbent) / sigma : (incumbent - mean) / sigma;
}

inline double probability_of_improvement(const Prediction& pred, double incumbent, Direction dir) {
  const double s = pred.sigma();
  if (s <= 0.0) return 0.0;
  return normal_cdf(gamma(pred.mean, s, incumbent, dir));
}

/// g * Phi(g) + phi(g). Below g = -8 the two terms cancel, so the
/// asymptotic series phi(g)/g^2 * (1 - 3/g^2 + 15/g^4 - ...) is summed
/// until its terms stop shrinking.
inline double ei_unit(double g) {
  if (g >= -8.0) return std::max(0.0, g * normal_cdf(g) + normal_pdf(g));
  const double inv = 1.0 / (g * g);
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 60; ++k) {
    const double next = -term * (2 * k + 1) * inv;
    if (std::abs(next) >= std::abs(term)) break;
    term = next;
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return normal_pdf(g) * inv * sum;
}

inline double expected_improvement(const Prediction& pred, double incumbent, Direction dir) {
  const double s = pred.sigma();
  if (s <= 0.0) return 0.0;
  return s * ei_unit(gamma(pred.mean, s, incumbent, dir));
}

/// UCB for Max, LCB = -(m - chi*sigma) for Min.
inline double confidence_bound(const Prediction& pred, double chi, Direction dir) {
  if (!(chi >= 0.0)) throw InvalidArgument("confidence_bound: chi must be >= 0");
  const double s = pred.sigma();
  return dir == Direction::Max ? pred.mean + chi * s : -(pred.mean - chi * s);
}

inline double acquisition_value(const Prediction& pred, double incumbent,
                                const AcquisitionKind& kind, Direction dir) {
  switch (kind.type) {
    case AcquisitionKind::Type::PI: return probability_of_improvement(pred, incumbent, dir);
    case AcquisitionKind::Type::EI: return expected_improvement(pred, incumbent, dir);
    case AcquisitionKind::Type::CB: return confidence_bound(pred, kind.chi, dir);
  }
  return 0.0;
}

/// Posterior-model requirements for acquisition over a grid.
template <class M>
concept PosteriorModel = requires(const M& m, const Eigen::VectorXd& b, const Eigen::MatrixXd& g,
                                  Eigen::VectorXd& out) {
  { m.predict(b) } -> std::same_as<Prediction>;
  m.predict_many(g, out, out);
};

inline double observed_incumbent(const Eigen::VectorXd& observed, Direction dir) {
  return dir == Direction::Max ? observed.maxCoeff() : observed.minCoeff();
}

template <PosteriorModel M>
double incumbent_of(const M& model, Direction dir) {
  if constexpr (requires { model.observed(); })
    return observed_incumbent(model.observed(), dir);
  else
    return observed_incumbent(model.training().values, dir);
}

struct AcquisitionResult {
  Eigen::Index index = 0;   // grid row
  Eigen::VectorXd b_scaled;
  Eigen::VectorXd b_hat;    // physical coordinates
  double af_value = 0.0;
  double incumbent = 0.0;
  Direction direction = Direction::Max;
};

/// AF values from a precomputed posterior (means and variances).
inline Eigen::VectorXd af_from_posterior(const Eigen::VectorXd& mean, const Eigen::VectorXd& var,
                                         double incumbent, const AcquisitionKind& kind,
                                         Direction dir) {
  Eigen::VectorXd af(mean.size());
  for (Eigen::Index i = 0; i < mean.size(); ++i)
    af[i] = acquisition_value({mean[i], var[i]}, incumbent, kind, dir);
  return af;
}

/// AF value at every grid row (scaled coordinates).
template <PosteriorModel M>
Eigen::VectorXd evaluate_af(const M& model, const Eigen::MatrixXd& grid,
                            const AcquisitionKind& kind, Direction dir) {
  Eigen::VectorXd mean, var;
  model.predict_many(grid, mean, var);
  return af_from_posterior(mean, var, incumbent_of(model, dir), kind, dir);
}

/// First index attaining the maximum.
inline Eigen::Index first_argmax(const Eigen::VectorXd& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline AcquisitionResult make_result(const Eigen::VectorXd& af, Eigen::Index index,
                                     const Eigen::MatrixXd& grid, const IntervalBox& box,
                                     double incumbent, Direction dir) {
  AcquisitionResult res;
  res.index = index;
  res.b_scaled = grid.row(index).transpose();
  res.b_hat = unscale(box, res.b_scaled);
  res.af_value = af[index];
  res.incumbent = incumbent;
  res.direction = dir;
  return res;
}

/// Brute-force argmax over the grid; ties go to the lowest index.
template <PosteriorModel M>
AcquisitionResult maximize_af(const M& model, const Eigen::MatrixXd& grid,
                              const AcquisitionKind& kind, Direction dir, const IntervalBox& box) {
  if (grid.rows() == 0) throw InvalidArgument("maximize_af: empty candidate grid");
  const Eigen::VectorXd af = evaluate_af(model, grid, kind, dir);
  return make_result(af, first_argmax(af), grid, box, incumbent_of(model, dir), dir);
}

struct AfStoppingPolicy {
  double delta = 1e-2;     // PI/EI: stop when |max AF| < delta (objective units for EI)
  double cb_slack = 1e-6;  // CB: relative slack on the observed optimum
};

/// AF-based stopping test for one bound.
inline bool stopping_check(const AcquisitionResult& result, const AcquisitionKind& kind,
                           const AfStoppingPolicy& policy = {}) {
  if (kind.type != AcquisitionKind::Type::CB) return std::abs(result.af_value) < policy.delta;
  const double w = result.incumbent;
  const double target = result.direction == Direction::Max ? w : -w;
  return result.af_value <= target + policy.cb_slack * (1.0 + std::abs(w));
}

}  // namespace gpbounds
