#include "rsplan/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace rsplan {

PendulumState pendulum_step(const PendulumModel& m, const PendulumState& s,
                            double torque) {
  if (std::abs(torque) > m.torque_limit) {
    throw ValidationError("torque exceeds torque_limit");
  }
  const double inertia = m.mass * m.length * m.length;
  const double accel =
      (torque - m.damping * s.omega - m.mass * m.gravity * m.length * std::sin(s.angle)) /
      inertia;
  double omega = s.omega + m.dt * accel;
  omega = std::clamp(omega, -m.omega_max, m.omega_max);
  const double angle = wrap_angle(s.angle + m.dt * omega);
  return PendulumState{angle, omega};
}

ControlSample sample_control(Rng& rng, const PendulumModel& m) {
  ControlSample c;
  c.torque = rng.uniform(-m.torque_limit, m.torque_limit);
  c.duration = rng.uniform(m.dt, m.t_prop_max);
  return c;
}

PendulumState propagate(const PendulumModel& m, PendulumState s, double torque,
                        double duration) {
  if (duration < m.dt) throw ValidationError("propagate duration must be >= dt");
  const long steps = std::lround(duration / m.dt);
  for (long i = 0; i < steps; ++i) {
    s = pendulum_step(m, s, torque);
  }
  return s;
}

}  // namespace rsplan
