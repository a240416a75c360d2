// Kinematic bicycle model on a fixed 10 Hz tick.
#pragma once

#include <cmath>

#include "cirl/geometry.hpp"
#include "cirl/types.hpp"

namespace cirl {

constexpr double kDt = 0.1;  // seconds per simulation frame (10 fps)

struct VehicleParams {
  double wheelbase = 2.5;                     // m
  double max_wheel_angle = 35.0 * M_PI / 180;  // rad
  double max_accel = 3.0;                     // m/s^2 at full throttle
  double max_brake = 8.0;                     // m/s^2 at full brake
  double drag = 0.05;                         // 1/s, speed-proportional decel
  double v_max = 15.0;                        // m/s
  double half_len = 2.0;                      // footprint half extents, m
  double half_wid = 0.9;
};

inline geom::Poly vehicle_footprint(const VehicleState& v, const VehicleParams& p) {
  return geom::oriented_rect({v.x, v.y}, v.heading, p.half_len, p.half_wid);
}

/// One tick of the kinematic bicycle model. The pose advances along the
/// exact constant-curvature arc for the current speed and wheel angle, then
/// the speed integrates throttle/brake/drag and clips to [0, v_max].
/// Positive steer turns right (heading decreases).
inline VehicleState step_dynamics(const VehicleState& s, const ActionTriple& action, double dt,
                                  const VehicleParams& p) {
  if (!action.is_finite()) throw_numeric("step_dynamics: non-finite action rejected");
  ActionTriple a = action.clipped();

  VehicleState n = s;
  const double wheel = a.steer * p.max_wheel_angle;
  const double omega = -(s.speed / p.wheelbase) * std::tan(wheel);
  if (std::abs(omega) < 1e-9) {
    n.x += s.speed * dt * std::cos(s.heading);
    n.y += s.speed * dt * std::sin(s.heading);
    n.heading = geom::normalize_angle(s.heading + omega * dt);
  } else {
    const double radius = s.speed / omega;
    const double h1 = s.heading + omega * dt;
    n.x += radius * (std::sin(h1) - std::sin(s.heading));
    n.y += -radius * (std::cos(h1) - std::cos(s.heading));
    n.heading = geom::normalize_angle(h1);
  }
  const double accel = p.max_accel * a.throttle - p.max_brake * a.brake - p.drag * s.speed;
  n.speed = std::clamp(s.speed + accel * dt, 0.0, p.v_max);
  return n;
}

}  // namespace cirl
