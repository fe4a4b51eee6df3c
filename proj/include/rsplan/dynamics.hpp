#pragma once

#include <cmath>
#include <numbers>

#include "rsplan/geometry.hpp"
#include "rsplan/rng.hpp"

namespace rsplan {

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double theta) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  return theta - two_pi * std::ceil((theta - std::numbers::pi) / two_pi);
}

struct PendulumState {
  double angle = 0.0;  // radians, 0 = hanging down, stored wrapped to (-pi, pi]
  double omega = 0.0;  // rad/s
};

/// Planar control-limited pendulum. torque_limit < m*g*l so reaching the top
/// requires energy pumping rather than a direct rotation.
struct PendulumModel {
  double mass = 1.0;
  double length = 1.0;
  double gravity = 9.81;
  double damping = 0.05;
  double torque_limit = 2.0;
  double dt = 0.02;
  double t_prop_max = 1.0;
  double omega_max = 8.0;
  double goal_angle = std::numbers::pi;
  double goal_tol_angle = 0.3;
  double goal_tol_omega = 1.0;

  void validate() const {
    if (dt <= 0.0) throw ValidationError("pendulum dt must be > 0");
    if (t_prop_max < dt) throw ValidationError("t_prop_max must be >= dt");
    if (omega_max <= 0.0) throw ValidationError("omega_max must be > 0");
    if (torque_limit >= mass * gravity * length) {
      throw ValidationError("torque_limit must be below mass*gravity*length");
    }
  }
};

inline PendulumState goal_state(const PendulumModel& m) {
  return PendulumState{wrap_angle(m.goal_angle), 0.0};
}

inline bool at_goal(const PendulumModel& m, const PendulumState& s) {
  return std::abs(wrap_angle(s.angle - m.goal_angle)) <= m.goal_tol_angle &&
         std::abs(s.omega) <= m.goal_tol_omega;
}

/// One semi-implicit Euler step of
///   theta_dd = (u - damping*omega - m*g*l*sin(theta)) / (m*l^2)
/// with the velocity update applied before the position update. The angle is
/// wrapped and the velocity clamped to +-omega_max.
PendulumState pendulum_step(const PendulumModel& m, const PendulumState& s, double torque);

struct ControlSample {
  double torque = 0.0;
  double duration = 0.0;
};

/// Torque uniform on [-torque_limit, +torque_limit], duration uniform on
/// [dt, t_prop_max].
ControlSample sample_control(Rng& rng, const PendulumModel& m);

/// Applies pendulum_step round(duration/dt) times.
PendulumState propagate(const PendulumModel& m, PendulumState s, double torque,
                        double duration);

/// Kinetic + potential energy with the potential zero at the hanging rest state.
inline double pendulum_energy(const PendulumModel& m, const PendulumState& s) {
  return 0.5 * m.mass * m.length * m.length * s.omega * s.omega +
         m.mass * m.gravity * m.length * (1.0 - std::cos(s.angle));
}

/// Nearest-neighbor metric: angular error dominates, velocity down-weighted.
inline double pendulum_distance(const PendulumState& a, const PendulumState& b) {
  const double dth = wrap_angle(a.angle - b.angle);
  const double dw = a.omega - b.omega;
  return std::sqrt(dth * dth + 0.1 * dw * dw);
}

}  // namespace rsplan
