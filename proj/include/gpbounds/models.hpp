#pragma once

// Objective functions: the single-degree-of-freedom forced oscillator and a
// 4-D synthetic multimodal test function. A BlackBox maps a physical point to
// a scalar response.

#include <cmath>
#include <functional>
#include <numbers>
#include <string>

#include <Eigen/Core>
#include <unsupported/Eigen/MatrixFunctions>

#include "gpbounds/errors.hpp"

namespace gpbounds {

using BlackBox = std::function<double(const Eigen::VectorXd&)>;

// ---------------------------------------------------------------------------
// SDOF oscillator  M x'' + c x' + k x = f(t),  f = F0 sin(wf t) on [0, Tf].

struct SdofParams {
  enum class Damping {
    Fixed,          // c = damping for every k
    ConstantRatio,  // c(k) = damping * sqrt(k / damping_reference_stiffness)
  };
  enum class Acceleration {
    VelocityDifference,  // a_k = (v_{k+1} - v_k) / dt
    EquationOfMotion,    // a_k = (f_k - c v_k - k x_k) / M
  };

  double mass = 1000.0;                         // kg
  double damping = 1.98e3;                      // N s/m
  double damping_reference_stiffness = 2.45e6;  // N/m
  double force_amplitude = 1e5;                 // N
  double forcing_frequency = 4.0 * std::numbers::pi;  // rad/s
  double forcing_duration = 0.5;                // s
  double horizon = 5.0;                         // s
  double dt = 1e-3;                             // s
  Damping damping_model = Damping::ConstantRatio;
  Acceleration acceleration = Acceleration::VelocityDifference;

  void validate() const {
    for (double v : {mass, damping, damping_reference_stiffness, force_amplitude,
                     forcing_frequency, forcing_duration, horizon, dt})
      if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("SdofParams: all values must be positive");
    if (dt > horizon) throw InvalidArgument("SdofParams: dt must not exceed horizon");
    if (forcing_duration > horizon)
      throw InvalidArgument("SdofParams: forcing_duration must not exceed horizon");
  }

  double damping_at(double k) const {
    return damping_model == Damping::Fixed
               ? damping
               : damping * std::sqrt(k / damping_reference_stiffness);
  }

  double force(double t) const {
    return t <= forcing_duration + 1e-12 ? force_amplitude * std::sin(forcing_frequency * t) : 0.0;
  }
};

/// Exact discretization of the state-space system over one step with the
/// forcing held constant: x+ = Phi x + Gamma f.
struct TransitionMatrix {
  Eigen::Matrix2d phi;
  Eigen::Vector2d gamma;

  TransitionMatrix(double k, double c, double mass, double dt) {
    // exp([[A, B], [0, 0]] dt) carries Phi and the ZOH input column.
    Eigen::Matrix3d aug = Eigen::Matrix3d::Zero();
    aug(0, 1) = 1.0;
    aug(1, 0) = -k / mass;
    aug(1, 1) = -c / mass;
    aug(1, 2) = 1.0 / mass;
    const Eigen::Matrix3d e = (aug * dt).exp();
    phi = e.topLeftCorner<2, 2>();
    gamma = e.topRightCorner<2, 1>();
  }

  Eigen::Vector2d step(const Eigen::Vector2d& state, double force) const {
    return phi * state + gamma * force;
  }
};

/// One transition-matrix step of [x, v] from time t with the forcing sampled at t.
inline Eigen::Vector2d transition_matrix_step(const Eigen::Vector2d& state, double k,
                                              const SdofParams& params, double t) {
  const TransitionMatrix tm(k, params.damping_at(k), params.mass, params.dt);
  return tm.step(state, params.force(t));
}

/// max_t |a(t, k)| over [0, horizon] from rest.
inline double sdof_max_abs_acceleration(double k, const SdofParams& params = {}) {
  params.validate();
  if (!(k > 0.0)) throw InvalidArgument("sdof: stiffness must be positive");
  const double c = params.damping_at(k);
  const TransitionMatrix tm(k, c, params.mass, params.dt);
  const long steps = std::lround(params.horizon / params.dt);
  Eigen::Vector2d state = Eigen::Vector2d::Zero();
  double peak = 0.0;
  for (long i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) * params.dt;
    const double f = params.force(t);
    if (params.acceleration == SdofParams::Acceleration::EquationOfMotion) {
      peak = std::max(peak, std::abs((f - c * state[1] - k * state[0]) / params.mass));
      if (i == steps) break;
      state = tm.step(state, f);
    } else {
      if (i == steps) break;
      const Eigen::Vector2d next = tm.step(state, f);
      peak = std::max(peak, std::abs((next[1] - state[1]) / params.dt));
      state = next;
    }
  }
  return peak;
}

/// SDOF black box over stiffness in N/m.
inline BlackBox sdof_blackbox(SdofParams params = {}) {
  params.validate();
  return [params](const Eigen::VectorXd& b) {
    if (b.size() != 1) throw InvalidArgument("sdof: expects one variable (stiffness)");
    return sdof_max_abs_acceleration(b[0], params);
  };
}

// ---------------------------------------------------------------------------
// Synthetic 4-D multimodal function on [0,1]^4:
//
//   f(b) = 0.8 |b - 0.5|^2 + 3 g(b; c1) - 3 g(b; c2),
//   g(b; c) = exp(-|b - c|^2 / (2 * 0.25^2)),
//   c1 = (0.25, 0.25, 0.75, 0.375),  c2 = (0.75, 0.75, 0.25, 0.625).
//
// Invariant under swapping b1 and b2. On the 41^4 lattice the maximum is
// at c1 and the minimum at c2 (see kGridMax/kGridMin).

namespace synthetic4d {

inline const Eigen::Vector4d kPeakCenter{0.25, 0.25, 0.75, 0.375};
inline const Eigen::Vector4d kTroughCenter{0.75, 0.75, 0.25, 0.625};
inline constexpr double kWidth = 0.25;
inline constexpr double kAmplitude = 3.0;
inline constexpr double kTrend = 0.8;

/// Extrema over the 41^4 lattice, computed once by exhaustive scan.
inline constexpr double kGridMax = 3.1579896824210674;
inline constexpr double kGridMin = -2.832989682421067;

}  // namespace synthetic4d

inline double synthetic_4d(const Eigen::VectorXd& b) {
  using namespace synthetic4d;
  if (b.size() != 4) throw InvalidArgument("synthetic_4d: expects 4 variables");
  const Eigen::Vector4d x = b;
  const double two_s2 = 2.0 * kWidth * kWidth;
  return kTrend * (x.array() - 0.5).square().sum() +
         kAmplitude * std::exp(-(x - kPeakCenter).squaredNorm() / two_s2) -
         kAmplitude * std::exp(-(x - kTroughCenter).squaredNorm() / two_s2);
}

}  // namespace gpbounds
