#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "gpbounds/gp_core.hpp"

using namespace gpbounds;

namespace {

TrainingSet random_set(std::mt19937_64& rng, int n, int r) {
  std::uniform_real_distribution<double> u(0.0, 1.0), w(-3.0, 3.0);
  TrainingSet t;
  t.points.resize(n, r);
  t.values.resize(n);
  for (int j = 0; j < n; ++j) {
    for (int h = 0; h < r; ++h) t.points(j, h) = u(rng);
    t.values[j] = w(rng);
  }
  return t;
}

KernelHyperparams random_hyper(std::mt19937_64& rng, int r, double theta_lo = 0.2) {
  std::uniform_real_distribution<double> th(theta_lo, 2.0), p(1.0, 2.0);
  KernelHyperparams h;
  h.theta.resize(r);
  h.p.resize(r);
  for (int i = 0; i < r; ++i) {
    h.theta[i] = th(rng);
    h.p[i] = p(rng);
  }
  return h;
}

// Independent reference: explicit inverse and determinant by full-pivot LU.
double dense_lml(const TrainingSet& t, const KernelHyperparams& h) {
  const int n = t.size();
  Eigen::MatrixXd k(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double d = 0;
      for (int q = 0; q < t.dim(); ++q) d += h.theta[q] * std::pow(std::abs(t.points(i, q) - t.points(j, q)), h.p[q]);
      k(i, j) = std::exp(-d);
    }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(k);
  return -0.5 * t.values.dot(lu.inverse() * t.values) - 0.5 * std::log(lu.determinant()) -
         0.5 * n * std::log(2 * std::numbers::pi);
}

}  // namespace

TEST(Kernel, ValueAtKnownDistance) {
  KernelHyperparams h{Eigen::Vector2d(0.5, 2.0), Eigen::Vector2d(2.0, 1.0)};
  Eigen::Vector2d a(0.1, 0.2), b(0.4, 0.7);
  // 0.5 * 0.3^2 + 2 * 0.5 = 1.045
  EXPECT_NEAR(kernel_eval(a, b, h), std::exp(-1.045), 1e-15);
  EXPECT_DOUBLE_EQ(kernel_eval(a, a, h), 1.0);
}

TEST(Kernel, CovarianceIsSymmetric) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    auto t = random_set(rng, 7, 3);
    auto h = random_hyper(rng, 3);
    const auto k = build_covariance(t.points, h);
    EXPECT_LE((k - k.transpose()).cwiseAbs().maxCoeff(), 1e-14);
    const auto kab = build_covariance(t.points, t.points, h);
    EXPECT_LE((k - kab).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Kernel, RejectsInvalidHyperparameters) {
  EXPECT_THROW((KernelHyperparams{Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd::Ones(1)}.validate()),
               InvalidArgument);
  EXPECT_THROW((KernelHyperparams{Eigen::VectorXd::Ones(1), Eigen::VectorXd::Constant(1, 2.5)}.validate()),
               InvalidArgument);
  EXPECT_THROW(kernel_eval(Eigen::Vector2d(0, 0), Eigen::Vector3d(0, 0, 0), KernelHyperparams::uniform(2, 1, 2)),
               InvalidArgument);
}

TEST(Likelihood, MatchesDenseInverseOracle) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int r = 1 + trial % 4;
    auto t = random_set(rng, 2 + trial % 7, r);
    auto h = random_hyper(rng, r, 0.5);
    const double ref = dense_lml(t, h);
    EXPECT_NEAR(log_marginal_likelihood(t, h), ref, 1e-7 * (1 + std::abs(ref))) << "trial " << trial;
  }
}

TEST(Likelihood, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(21);
  int checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int r = 1 + trial % 4;
    const int n = 2 + trial % 7;
    auto t = random_set(rng, n, r);
    // Keep away from the box faces so central differences stay inside.
    std::uniform_real_distribution<double> th(0.4, 1.8), pp(1.1, 1.9);
    KernelHyperparams h;
    h.theta.resize(r);
    h.p.resize(r);
    for (int i = 0; i < r; ++i) {
      h.theta[i] = th(rng);
      h.p[i] = pp(rng);
    }
    const auto g = lml_gradient(t, h);
    ASSERT_EQ(g.size(), 2 * r);
    for (int k = 0; k < 2 * r; ++k) {
      const double step = 1e-6;
      auto hp = h, hm = h;
      (k < r ? hp.theta[k] : hp.p[k - r]) += step;
      (k < r ? hm.theta[k] : hm.p[k - r]) -= step;
      const double fd = (log_marginal_likelihood(t, hp) - log_marginal_likelihood(t, hm)) / (2 * step);
      EXPECT_NEAR(g[k], fd, 1e-4 * std::max(1.0, std::abs(fd))) << "trial " << trial << " component " << k;
      ++checked;
    }
  }
  EXPECT_GT(checked, 40);
}

TEST(Likelihood, SinglePointValue) {
  TrainingSet t;
  t.points = Eigen::MatrixXd::Constant(1, 1, 0.3);
  t.values = Eigen::VectorXd::Constant(1, 2.0);
  // K = [1]: -w^2/2 - ln(2 pi)/2
  EXPECT_NEAR(log_marginal_likelihood(t, KernelHyperparams::uniform(1, 1, 2)),
              -2.0 - 0.5 * std::log(2 * std::numbers::pi), 1e-14);
}

TEST(Conditioning, TwoPointClosedForm) {
  TrainingSet t;
  t.points.resize(2, 1);
  t.points << 0.0, 1.0;
  t.values = Eigen::Vector2d(1.0, 3.0);
  const auto h = KernelHyperparams::uniform(1, 1.0, 2.0);
  const FittedGp gp = condition(t, h);
  const double rho = std::exp(-1.0);
  for (double b : {0.25, 0.5, 0.9}) {
    const double k1 = std::exp(-b * b), k2 = std::exp(-(1 - b) * (1 - b));
    const double det = 1 - rho * rho;
    const double a1 = (1.0 - rho * 3.0) / det, a2 = (3.0 - rho * 1.0) / det;
    const double mean = k1 * a1 + k2 * a2;
    const double var = 1 - (k1 * k1 - 2 * rho * k1 * k2 + k2 * k2) / det;
    const auto pr = gp.predict(Eigen::VectorXd::Constant(1, b));
    EXPECT_NEAR(pr.mean, mean, 1e-12);
    EXPECT_NEAR(pr.variance, var, 1e-12);
  }
}

TEST(Conditioning, InterpolatesTrainingRows) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int r = 1 + trial % 4;
    auto t = random_set(rng, 3 + trial % 6, r);
    const FittedGp gp = condition(t, random_hyper(rng, r));
    Eigen::VectorXd mean, var;
    gp.predict_many(t.points, mean, var);
    for (int j = 0; j < t.size(); ++j) {
      const auto p = gp.predict(t.points.row(j).transpose());
      EXPECT_LE(std::abs(p.mean - t.values[j]), 1e-8 * (1 + std::abs(t.values[j])));
      EXPECT_EQ(p.variance, 0.0);
      EXPECT_EQ(mean[j], t.values[j]);
      EXPECT_EQ(var[j], 0.0);
    }
  }
}

TEST(Conditioning, PredictManyAgreesWithPredict) {
  std::mt19937_64 rng(8);
  auto t = random_set(rng, 6, 2);
  const FittedGp gp = condition(t, random_hyper(rng, 2));
  Eigen::MatrixXd grid = Eigen::MatrixXd::Random(40, 2).array() * 0.5 + 0.5;
  Eigen::VectorXd mean, var;
  gp.predict_many(grid, mean, var);
  for (int i = 0; i < grid.rows(); ++i) {
    const auto p = gp.predict(grid.row(i).transpose());
    EXPECT_NEAR(mean[i], p.mean, 1e-12);
    EXPECT_NEAR(var[i], p.variance, 1e-12);
  }
}

TEST(Conditioning, VarianceNeverGrowsWithMoreData) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int r = 1 + trial % 4;
    auto t = random_set(rng, 3 + trial % 5, r);
    const auto h = random_hyper(rng, r);
    auto bigger = t;
    Eigen::VectorXd extra(r);
    for (int i = 0; i < r; ++i) extra[i] = u(rng);
    bigger.append(extra, 0.5);
    const FittedGp a = condition(t, h), b = condition(bigger, h);
    for (int k = 0; k < 50; ++k) {
      Eigen::VectorXd x(r);
      for (int i = 0; i < r; ++i) x[i] = u(rng);
      EXPECT_LE(b.predict(x).variance, a.predict(x).variance + 1e-10) << "trial " << trial;
    }
  }
}

TEST(Conditioning, RevertsToPriorFarAway) {
  TrainingSet t;
  t.points = Eigen::MatrixXd::Constant(1, 1, 0.0);
  t.values = Eigen::VectorXd::Constant(1, 4.0);
  const FittedGp gp = condition(t, KernelHyperparams::uniform(1, 2.0, 2.0));
  const auto p = gp.predict(Eigen::VectorXd::Constant(1, 10.0));
  EXPECT_NEAR(p.mean, 0.0, 1e-12);
  EXPECT_NEAR(p.variance, 1.0, 1e-12);
}

TEST(Conditioning, NearDuplicatesUseJitter) {
  TrainingSet t;
  t.points.resize(3, 1);
  t.points << 0.2, 0.2 + 1e-8, 0.8;
  t.values = Eigen::Vector3d(1.0, 1.0, 2.0);
  const FittedGp gp = condition(t, KernelHyperparams::uniform(1, 0.1, 2.0));
  EXPECT_GT(gp.jitter(), 0.0);
  EXPECT_LE(gp.jitter(), kJitterMax * 1.0000001);
  EXPECT_TRUE(std::isfinite(gp.predict(Eigen::VectorXd::Constant(1, 0.5)).mean));
}

TEST(Conditioning, VarianceClampedToZero) {
  EXPECT_EQ(clamp_variance(5e-11), 0.0);
  EXPECT_EQ(clamp_variance(-1e-14), 0.0);
  EXPECT_EQ(clamp_variance(2e-10), 2e-10);
}

TEST(TrainingSetTest, FindUsesScaledTolerance) {
  TrainingSet t;
  t.points.resize(2, 2);
  t.points << 0.1, 0.2, 0.5, 0.5;
  t.values = Eigen::Vector2d(1, 2);
  EXPECT_EQ(t.find(Eigen::Vector2d(0.5, 0.5 + 5e-10)), 1);
  EXPECT_FALSE(t.find(Eigen::Vector2d(0.5, 0.5 + 1e-8)).has_value());
}

TEST(TrainingSetTest, RejectsNonFiniteValues) {
  TrainingSet t;
  t.points = Eigen::MatrixXd::Zero(1, 1);
  t.values = Eigen::VectorXd::Constant(1, std::nan(""));
  EXPECT_THROW(t.validate(), InvalidArgument);
}

TEST(Fitting, StaysInsideBoundsAndImprovesOnMidpoint) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 8; ++trial) {
    const int r = 1 + trial % 3;
    auto t = random_set(rng, 5 + trial, r);
    FitOptions opts;
    opts.seed = trial;
    const auto h = fit_hyperparameters(t, opts);
    for (int i = 0; i < r; ++i) {
      EXPECT_GE(h.theta[i], 0.0);
      EXPECT_LE(h.theta[i], 2.0);
      EXPECT_GE(h.p[i], 1.0);
      EXPECT_LE(h.p[i], 2.0);
    }
    EXPECT_GE(log_marginal_likelihood(t, h), log_marginal_likelihood(t, opts.bounds.midpoint(r)) - 1e-9);
  }
}

TEST(Fitting, DeterministicForSeed) {
  std::mt19937_64 rng(19);
  auto t = random_set(rng, 7, 2);
  FitOptions opts;
  opts.seed = 42;
  const auto a = fit_hyperparameters(t, opts), b = fit_hyperparameters(t, opts);
  EXPECT_EQ(a.theta, b.theta);
  EXPECT_EQ(a.p, b.p);
}

TEST(Fitting, SinglePointReturnsMidpoint) {
  TrainingSet t;
  t.points = Eigen::MatrixXd::Constant(1, 2, 0.5);
  t.values = Eigen::VectorXd::Constant(1, 1.0);
  const auto h = fit_hyperparameters(t, {});
  EXPECT_EQ(h.theta, Eigen::Vector2d(1.0, 1.0));
  EXPECT_EQ(h.p, Eigen::Vector2d(1.5, 1.5));
}

TEST(SurrogateTest, StandardizedPredictionsReturnObjectiveUnits) {
  TrainingSet t;
  t.points.resize(3, 1);
  t.points << 0.0, 0.5, 1.0;
  t.values = Eigen::Vector3d(30.0, 45.0, 35.0);
  SurrogateOptions opts;
  opts.standardize_outputs = true;
  const Surrogate s = fit_surrogate(t, opts);
  EXPECT_NEAR(s.shift(), 110.0 / 3.0, 1e-12);
  for (int j = 0; j < 3; ++j) {
    const auto p = s.predict(t.points.row(j).transpose());
    EXPECT_EQ(p.mean, t.values[j]);
    EXPECT_EQ(p.variance, 0.0);
  }
  const auto far = s.gp().predict(Eigen::VectorXd::Constant(1, 0.25));
  const auto mid = s.predict(Eigen::VectorXd::Constant(1, 0.25));
  EXPECT_NEAR(mid.mean, s.shift() + s.scale() * far.mean, 1e-12);
  EXPECT_NEAR(mid.variance, s.scale() * s.scale() * far.variance, 1e-9);
}
