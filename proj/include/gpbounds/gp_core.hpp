#pragma once

// Zero-mean Gaussian-process regression with the exponential weighted-distance
// kernel  k(a, b) = exp(-sum_h theta_h |a_h - b_h|^p_h).  All inputs are in
// the scaled unit hypercube; outputs are noise-free observations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "gpbounds/errors.hpp"
#include "gpbounds/low_discrepancy.hpp"

namespace gpbounds {

/// Scaled infinity-norm distance below which two points are the same point.
inline constexpr double kDuplicateTolerance = 1e-9;
/// Posterior variances below this are reported as exactly zero.
inline constexpr double kVarianceFloor = 1e-10;

struct KernelHyperparams {
  Eigen::VectorXd theta;
  Eigen::VectorXd p;

  int dim() const { return static_cast<int>(theta.size()); }

  void validate() const {
    if (theta.size() != p.size() || theta.size() == 0)
      throw InvalidArgument("KernelHyperparams: theta and p must have equal, nonzero length");
    for (int h = 0; h < dim(); ++h) {
      if (!(theta[h] >= 0.0) || !std::isfinite(theta[h]))
        throw InvalidArgument("KernelHyperparams: theta must be finite and >= 0");
      if (!(p[h] >= 1.0 && p[h] <= 2.0))
        throw InvalidArgument("KernelHyperparams: p must lie in [1, 2]");
    }
  }

  static KernelHyperparams uniform(int r, double theta, double p) {
    return {Eigen::VectorXd::Constant(r, theta), Eigen::VectorXd::Constant(r, p)};
  }
};

/// Box constraints for the hyperparameter search.
struct HyperBounds {
  double theta_lo = 0.0;
  double theta_hi = 2.0;
  double p_lo = 1.0;
  double p_hi = 2.0;

  KernelHyperparams midpoint(int r) const {
    return KernelHyperparams::uniform(r, 0.5 * (theta_lo + theta_hi), 0.5 * (p_lo + p_hi));
  }
};

struct TrainingSet {
  Eigen::MatrixXd points;  // n0 x r, scaled coordinates
  Eigen::VectorXd values;  // n0

  int size() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }

  /// Index of a row within `tol` (infinity norm) of b, if any.
  std::optional<int> find(const Eigen::VectorXd& b, double tol = kDuplicateTolerance) const {
    for (int j = 0; j < size(); ++j)
      if ((points.row(j).transpose() - b).cwiseAbs().maxCoeff() <= tol) return j;
    return std::nullopt;
  }

  void append(const Eigen::VectorXd& b, double w) {
    points.conservativeResize(size() + 1, b.size());
    points.row(size() - 1) = b.transpose();
    values.conservativeResize(values.size() + 1);
    values[values.size() - 1] = w;
  }

  void validate() const {
    if (size() < 1) throw InvalidArgument("TrainingSet: at least one point required");
    if (values.size() != points.rows())
      throw InvalidArgument("TrainingSet: points/values length mismatch");
    constexpr double slack = 1e-12;
    if (points.minCoeff() < -slack || points.maxCoeff() > 1.0 + slack)
      throw InvalidArgument("TrainingSet: points must lie in the unit hypercube");
    if (!values.allFinite()) throw InvalidArgument("TrainingSet: non-finite observation");
    for (int i = 0; i < size(); ++i)
      for (int j = i + 1; j < size(); ++j)
        if ((points.row(i) - points.row(j)).cwiseAbs().maxCoeff() <= kDuplicateTolerance)
          throw InvalidArgument("TrainingSet: duplicate rows " + std::to_string(i) + " and " +
                                std::to_string(j));
  }
};

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;

  double sigma() const { return std::sqrt(variance); }
};

inline double clamp_variance(double v) { return v < kVarianceFloor ? 0.0 : v; }

// ---------------------------------------------------------------------------
// Kernel

namespace detail {

inline double weighted_distance(const double* a, const double* b, Eigen::Index stride_a,
                                Eigen::Index stride_b, const KernelHyperparams& hyper) {
  double d = 0.0;
  for (int h = 0; h < hyper.dim(); ++h) {
    const double delta = std::abs(a[h * stride_a] - b[h * stride_b]);
    if (delta == 0.0 || hyper.theta[h] == 0.0) continue;
    d += hyper.theta[h] * (hyper.p[h] == 2.0 ? delta * delta : std::pow(delta, hyper.p[h]));
  }
  return d;
}

}  // namespace detail

inline double kernel_eval(const Eigen::VectorXd& bj, const Eigen::VectorXd& bl,
                          const KernelHyperparams& hyper) {
  if (bj.size() != bl.size() || bj.size() != hyper.dim())
    throw InvalidArgument("kernel_eval: dimension mismatch");
  return std::exp(-detail::weighted_distance(bj.data(), bl.data(), 1, 1, hyper));
}

inline Eigen::MatrixXd build_covariance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                        const KernelHyperparams& hyper) {
  if (a.cols() != b.cols() || a.cols() != hyper.dim())
    throw InvalidArgument("build_covariance: dimension mismatch");
  Eigen::MatrixXd k(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j)
      k(i, j) = std::exp(-detail::weighted_distance(&a(i, 0), &b(j, 0), a.rows(), b.rows(), hyper));
  return k;
}

/// Symmetric version for a single point set; the diagonal is exactly one.
inline Eigen::MatrixXd build_covariance(const Eigen::MatrixXd& a, const KernelHyperparams& hyper) {
  if (a.cols() != hyper.dim()) throw InvalidArgument("build_covariance: dimension mismatch");
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j)
      k(i, j) = k(j, i) = std::exp(-detail::weighted_distance(&a(i, 0), &a(j, 0), n, n, hyper));
  }
  return k;
}

// ---------------------------------------------------------------------------
// Factorization with escalating jitter

struct JitteredCholesky {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;  // absolute value added to the diagonal
};

inline constexpr double kJitterStart = 1e-12;
inline constexpr double kJitterMax = 1e-6;

/// Tries jitter 0, then 1e-12, 1e-11, ... 1e-6 times the mean diagonal.
inline JitteredCholesky factorize(const Eigen::MatrixXd& k) {
  const double mean_diag = k.diagonal().mean();
  JitteredCholesky out;
  double rel = 0.0;
  while (true) {
    out.jitter = rel * mean_diag;
    Eigen::MatrixXd kj = k;
    kj.diagonal().array() += out.jitter;
    out.llt.compute(kj);
    if (out.llt.info() == Eigen::Success) {
      const auto diag = out.llt.matrixLLT().diagonal();
      if (diag.allFinite() && diag.minCoeff() > 0.0) return out;
    }
    if (rel >= kJitterMax * (1.0 - 1e-9)) break;
    rel = rel == 0.0 ? kJitterStart : rel * 10.0;
  }
  throw NumericalError("covariance matrix not positive definite after jitter escalation", out.jitter);
}

inline double log_det(const JitteredCholesky& f) {
  return 2.0 * f.llt.matrixLLT().diagonal().array().log().sum();
}

// ---------------------------------------------------------------------------
// Log marginal likelihood and its gradient

inline double log_marginal_likelihood(const TrainingSet& training, const KernelHyperparams& hyper) {
  const auto f = factorize(build_covariance(training.points, hyper));
  const Eigen::VectorXd alpha = f.llt.solve(training.values);
  const double n = training.size();
  return -0.5 * training.values.dot(alpha) - 0.5 * log_det(f) -
         0.5 * n * std::log(2.0 * std::numbers::pi);
}

struct LmlWithGradient {
  double value = 0.0;
  Eigen::VectorXd gradient;  // [dL/dtheta_1..r, dL/dp_1..r]
};

/// dL/da = 1/2 tr((alpha alpha^T - K^-1) dK/da), with dK/da assembled
/// elementwise from the kernel definition.
inline LmlWithGradient lml_with_gradient(const TrainingSet& training,
                                         const KernelHyperparams& hyper) {
  const int n = training.size();
  const int r = training.dim();
  if (hyper.dim() != r) throw InvalidArgument("lml_gradient: dimension mismatch");
  const Eigen::MatrixXd k = build_covariance(training.points, hyper);
  const auto f = factorize(k);
  const Eigen::VectorXd alpha = f.llt.solve(training.values);

  LmlWithGradient out;
  out.value = -0.5 * training.values.dot(alpha) - 0.5 * log_det(f) -
              0.5 * n * std::log(2.0 * std::numbers::pi);
  out.gradient = Eigen::VectorXd::Zero(2 * r);
  if (n == 1) return out;

  const Eigen::MatrixXd kinv = f.llt.solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd a = alpha * alpha.transpose() - kinv;
  // Off-diagonal pairs counted twice; diagonal derivatives vanish.
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double w = a(i, j) * k(i, j);
      if (w == 0.0) continue;
      for (int h = 0; h < r; ++h) {
        const double delta = std::abs(training.points(i, h) - training.points(j, h));
        if (delta == 0.0) continue;
        const double pw = std::pow(delta, hyper.p[h]);
        out.gradient[h] -= w * pw;
        out.gradient[r + h] -= w * hyper.theta[h] * pw * std::log(delta);
      }
    }
  return out;
}

inline Eigen::VectorXd lml_gradient(const TrainingSet& training, const KernelHyperparams& hyper) {
  return lml_with_gradient(training, hyper).gradient;
}

// ---------------------------------------------------------------------------
// Hyperparameter fitting: multistart spectral projected gradient

struct FitOptions {
  HyperBounds bounds{};
  int starts = 10;
  std::uint64_t seed = 0;
  int max_iterations = 150;
};

namespace detail {

inline Eigen::VectorXd pack(const KernelHyperparams& h) {
  Eigen::VectorXd x(2 * h.dim());
  x << h.theta, h.p;
  return x;
}

inline KernelHyperparams unpack(const Eigen::VectorXd& x) {
  const auto r = x.size() / 2;
  return {x.head(r), x.tail(r)};
}

inline Eigen::VectorXd project(const Eigen::VectorXd& x, const HyperBounds& b) {
  const auto r = x.size() / 2;
  Eigen::VectorXd y = x;
  y.head(r) = y.head(r).cwiseMax(b.theta_lo).cwiseMin(b.theta_hi);
  y.tail(r) = y.tail(r).cwiseMax(b.p_lo).cwiseMin(b.p_hi);
  return y;
}

struct Objective {
  double f = std::numeric_limits<double>::infinity();  // negative LML
  Eigen::VectorXd g;
  bool ok = false;
};

inline Objective neg_lml(const TrainingSet& t, const Eigen::VectorXd& x) {
  Objective o;
  try {
    auto res = lml_with_gradient(t, unpack(x));
    if (!std::isfinite(res.value) || !res.gradient.allFinite()) return o;
    o.f = -res.value;
    o.g = -res.gradient;
    o.ok = true;
  } catch (const NumericalError&) {
  }
  return o;
}

// Birgin-Martinez-Raydan SPG with a nonmonotone Armijo search.
inline Objective spg_minimize(const TrainingSet& t, Eigen::VectorXd& x, const HyperBounds& b,
                              int max_iterations) {
  constexpr int kMemory = 10;
  constexpr double kLambdaMin = 1e-10, kLambdaMax = 1e10, kGamma = 1e-4;
  x = project(x, b);
  Objective cur = neg_lml(t, x);
  if (!cur.ok) return cur;
  std::vector<double> history{cur.f};

  const double pg0 = (project(x - cur.g, b) - x).cwiseAbs().maxCoeff();
  double lambda = pg0 > 0 ? std::clamp(1.0 / pg0, kLambdaMin, kLambdaMax) : 1.0;

  for (int it = 0; it < max_iterations; ++it) {
    const Eigen::VectorXd d = project(x - lambda * cur.g, b) - x;
    if (d.cwiseAbs().maxCoeff() < 1e-9) break;
    const double fmax = *std::max_element(history.begin(), history.end());
    const double gd = cur.g.dot(d);
    double step = 1.0;
    Objective next;
    Eigen::VectorXd xn;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      xn = x + step * d;
      next = neg_lml(t, xn);
      if (next.ok && next.f <= fmax + kGamma * step * gd) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const Eigen::VectorXd s = xn - x;
    const Eigen::VectorXd y = next.g - cur.g;
    const double sy = s.dot(y);
    lambda = sy <= 0 ? kLambdaMax : std::clamp(s.squaredNorm() / sy, kLambdaMin, kLambdaMax);
    const double improvement = cur.f - next.f;
    x = xn;
    cur = std::move(next);
    history.push_back(cur.f);
    if (history.size() > kMemory) history.erase(history.begin());
    if (std::abs(improvement) < 1e-12 * (1.0 + std::abs(cur.f)) && improvement >= 0) break;
  }
  return cur;
}

}  // namespace detail

/// Best-LML hyperparameters over `starts` projected-gradient runs: the box
/// midpoint first, then seeded Halton points. Ties go to the lowest start.
inline KernelHyperparams fit_hyperparameters(const TrainingSet& training,
                                             const FitOptions& opts = {}) {
  if (opts.starts < 1) throw InvalidArgument("fit_hyperparameters: starts must be >= 1");
  training.validate();
  const int r = training.dim();
  const auto& b = opts.bounds;
  if (training.size() == 1) return b.midpoint(r);

  std::vector<Eigen::VectorXd> starts{detail::pack(b.midpoint(r))};
  if (opts.starts > 1) {
    const Eigen::MatrixXd u = halton_points(opts.starts - 1, 2 * r, opts.seed);
    for (int s = 0; s < u.rows(); ++s) {
      Eigen::VectorXd x(2 * r);
      for (int h = 0; h < r; ++h) {
        x[h] = b.theta_lo + u(s, h) * (b.theta_hi - b.theta_lo);
        x[r + h] = b.p_lo + u(s, r + h) * (b.p_hi - b.p_lo);
      }
      starts.push_back(x);
    }
  }

  std::optional<Eigen::VectorXd> best;
  double best_f = std::numeric_limits<double>::infinity();
  for (auto x : starts) {
    const auto res = detail::spg_minimize(training, x, b, opts.max_iterations);
    if (res.ok && res.f < best_f) {
      best_f = res.f;
      best = x;
    }
  }
  if (!best) throw FittingError("fit_hyperparameters: no start produced a finite likelihood");
  return detail::unpack(*best);
}

// ---------------------------------------------------------------------------
// Conditioning and prediction

class FittedGp {
 public:
  FittedGp(TrainingSet training, KernelHyperparams hyper)
      : training_(std::move(training)), hyper_(std::move(hyper)) {
    training_.validate();
    hyper_.validate();
    if (hyper_.dim() != training_.dim()) throw InvalidArgument("condition: dimension mismatch");
    factor_ = factorize(build_covariance(training_.points, hyper_));
    alpha_ = factor_.llt.solve(training_.values);
  }

  const TrainingSet& training() const { return training_; }
  const KernelHyperparams& hyper() const { return hyper_; }
  const Eigen::VectorXd& alpha() const { return alpha_; }
  double jitter() const { return factor_.jitter; }
  const Eigen::LLT<Eigen::MatrixXd>& factor() const { return factor_.llt; }

  /// Posterior at a scaled point. Training rows return (observed value, 0).
  Prediction predict(const Eigen::VectorXd& b) const {
    if (b.size() != training_.dim()) throw InvalidArgument("predict: dimension mismatch");
    if (auto j = training_.find(b)) return {training_.values[*j], 0.0};
    Eigen::VectorXd k(training_.size());
    for (int j = 0; j < training_.size(); ++j)
      k[j] = std::exp(-detail::weighted_distance(b.data(), &training_.points(j, 0), 1,
                                                 training_.points.rows(), hyper_));
    const Eigen::VectorXd v = factor_.llt.matrixL().solve(k);
    return {k.dot(alpha_), clamp_variance(std::max(0.0, 1.0 - v.squaredNorm()))};
  }

  /// Posterior over every row of a scaled grid.
  void predict_many(const Eigen::MatrixXd& grid, Eigen::VectorXd& mean,
                    Eigen::VectorXd& variance) const {
    if (grid.cols() != training_.dim()) throw InvalidArgument("predict: dimension mismatch");
    const Eigen::MatrixXd ks = build_covariance(grid, training_.points, hyper_);
    mean = ks * alpha_;
    const Eigen::MatrixXd v = factor_.llt.matrixL().solve(ks.transpose());
    variance = (1.0 - v.colwise().squaredNorm().array()).matrix().transpose();
    for (Eigen::Index i = 0; i < grid.rows(); ++i) {
      if (auto j = training_.find(grid.row(i).transpose())) {
        mean[i] = training_.values[*j];
        variance[i] = 0.0;
      } else {
        variance[i] = clamp_variance(std::max(0.0, variance[i]));
      }
    }
  }

 private:
  TrainingSet training_;
  KernelHyperparams hyper_;
  JitteredCholesky factor_;
  Eigen::VectorXd alpha_;
};

inline FittedGp condition(const TrainingSet& training, const KernelHyperparams& hyper) {
  return FittedGp(training, hyper);
}

// ---------------------------------------------------------------------------
// Surrogate: a fitted GP with optional output standardization. Predictions
// and observations are always in objective units.

class Surrogate {
 public:
  Surrogate(FittedGp gp, Eigen::VectorXd raw_values, double shift, double scale)
      : gp_(std::move(gp)), raw_(std::move(raw_values)), shift_(shift), scale_(scale) {}

  const FittedGp& gp() const { return gp_; }
  const Eigen::MatrixXd& points() const { return gp_.training().points; }
  const Eigen::VectorXd& observed() const { return raw_; }
  double shift() const { return shift_; }
  double scale() const { return scale_; }

  Prediction predict(const Eigen::VectorXd& b) const {
    if (auto j = gp_.training().find(b)) return {raw_[*j], 0.0};
    const auto p = gp_.predict(b);
    return {shift_ + scale_ * p.mean, clamp_variance(scale_ * scale_ * p.variance)};
  }

  void predict_many(const Eigen::MatrixXd& grid, Eigen::VectorXd& mean,
                    Eigen::VectorXd& variance) const {
    gp_.predict_many(grid, mean, variance);
    for (Eigen::Index i = 0; i < grid.rows(); ++i) {
      if (auto j = gp_.training().find(grid.row(i).transpose())) {
        mean[i] = raw_[*j];
        variance[i] = 0.0;
      } else {
        mean[i] = shift_ + scale_ * mean[i];
        variance[i] = clamp_variance(scale_ * scale_ * variance[i]);
      }
    }
  }

 private:
  FittedGp gp_;
  Eigen::VectorXd raw_;
  double shift_;
  double scale_;
};

struct SurrogateOptions {
  FitOptions fit{};
  bool standardize_outputs = false;
};

/// Fits hyperparameters by LML and conditions. `training.values` are raw.
inline Surrogate fit_surrogate(const TrainingSet& training, const SurrogateOptions& opts = {}) {
  training.validate();
  double shift = 0.0, scale = 1.0;
  TrainingSet work = training;
  if (opts.standardize_outputs && training.size() > 1) {
    shift = training.values.mean();
    const double var = (training.values.array() - shift).square().sum() / (training.size() - 1);
    scale = var > 0 ? std::sqrt(var) : 1.0;
    work.values = (training.values.array() - shift) / scale;
  }
  const auto hyper = fit_hyperparameters(work, opts.fit);
  return Surrogate(FittedGp(std::move(work), hyper), training.values, shift, scale);
}

/// Surrogate with given hyperparameters (no fitting).
inline Surrogate make_surrogate(const TrainingSet& training, const KernelHyperparams& hyper) {
  return Surrogate(FittedGp(training, hyper), training.values, 0.0, 1.0);
}

}  // namespace gpbounds
