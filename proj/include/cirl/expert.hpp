// Scripted demonstrator: pure-pursuit steering along the route waypoints,
// proportional speed control toward command-dependent targets, full brake
// when a dynamic obstacle blocks the lane ahead.
#pragma once

#include "cirl/dynamics.hpp"
#include "cirl/env.hpp"
#include "cirl/route.hpp"

namespace cirl {

struct ExpertConfig {
  double lookahead_min = 4.0;        // m
  double lookahead_time = 0.8;       // s; lookahead = max(min, time * speed)
  double target_follow_kmh = 25.0;   // inside the high-reward speed bands
  double target_straight_kmh = 30.0;
  double target_turn_kmh = 15.0;
  double block_distance = 8.0;       // m, full brake inside this bumper gap
  double block_half_width = 1.6;     // m, half width of the checked corridor
  double throttle_gain = 0.6;        // throttle per m/s of speed deficit
  double brake_gain = 0.4;           // brake per m/s of speed excess
  double brake_margin = 0.5;         // m/s of tolerated overspeed before braking
  double max_off_route = 10.0;       // m, beyond this the demonstration aborts
};

class ExpertDriver {
 public:
  ExpertDriver(const Route* route, VehicleParams vp, ExpertConfig cfg = {})
      : route_(route), vp_(vp), cfg_(cfg) {}

  /// Action for the current state. `command` selects the target speed and
  /// normally comes from the environment's schedule lookup.
  ActionTriple act(const VehicleState& v, std::span<const ObstacleState> obstacles,
                   Command command) {
    const geom::Vec2 pos{v.x, v.y};
    // monotonic progress along the waypoint list
    while (idx_ + 1 < route_->waypoints.size() &&
           (route_->waypoints[idx_ + 1] - pos).norm2() <= (route_->waypoints[idx_] - pos).norm2())
      ++idx_;
    const double off = (route_->waypoints[idx_] - pos).norm();
    if (off > cfg_.max_off_route)
      throw_data(strfmt("expert: vehicle %.1f m off route, demonstration aborted", off));

    // pure pursuit toward the waypoint one lookahead ahead
    const double lookahead = std::max(cfg_.lookahead_min, cfg_.lookahead_time * v.speed);
    size_t ti = idx_;
    while (ti + 1 < route_->waypoints.size() &&
           route_->cum[ti] < route_->cum[idx_] + lookahead)
      ++ti;
    const geom::Vec2 target = route_->waypoints[ti];

    const geom::Vec2 fwd{std::cos(v.heading), std::sin(v.heading)};
    const geom::Vec2 left = fwd.perp_left();
    const geom::Vec2 d = target - pos;
    const double xe = d.dot(fwd), ye = d.dot(left);
    const double dist2 = std::max(1e-6, xe * xe + ye * ye);
    const double curvature = 2.0 * ye / dist2;  // positive curves left
    const double wheel = std::atan(vp_.wheelbase * curvature);
    ActionTriple a;
    a.steer = std::clamp(-wheel / vp_.max_wheel_angle, -1.0, 1.0);

    double target_kmh = cfg_.target_follow_kmh;
    if (command == Command::Straight) target_kmh = cfg_.target_straight_kmh;
    if (command == Command::TurnLeft || command == Command::TurnRight)
      target_kmh = cfg_.target_turn_kmh;
    const double err = target_kmh / 3.6 - v.speed;
    if (err >= 0) {
      const double drag_comp = vp_.drag * v.speed / vp_.max_accel;
      a.throttle = std::clamp(err * cfg_.throttle_gain + drag_comp, 0.0, 1.0);
    } else if (err < -cfg_.brake_margin) {
      a.brake = std::clamp(-err * cfg_.brake_gain, 0.0, 1.0);
    }

    // dynamic obstacle directly ahead: full brake overrides everything
    for (const ObstacleState& o : obstacles) {
      const geom::Vec2 od = o.pos - pos;
      const double ox = od.dot(fwd), oy = od.dot(left);
      const double radius = o.kind == ObstacleState::Kind::Vehicle
                                ? ObstacleState::kVehicleHalfWid
                                : ObstacleState::kPedRadius;
      if (ox > 0 && ox <= cfg_.block_distance + vp_.half_len &&
          std::abs(oy) <= cfg_.block_half_width + radius) {
        a.throttle = 0.0;
        a.brake = 1.0;
        break;
      }
    }
    return a;
  }

  size_t progress_index() const { return idx_; }

 private:
  const Route* route_;
  VehicleParams vp_;
  ExpertConfig cfg_;
  size_t idx_ = 0;
};

}  // namespace cirl
