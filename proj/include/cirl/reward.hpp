// Command-conditioned reward: abnormal-steer penalty, speed shaping, and
// sidewalk / opposite-lane / collision penalties. Pure functions.
#pragma once

#include "cirl/types.hpp"

namespace cirl {

struct RewardConfig {
  double steer_opposite_penalty = -15.0;   // steering against a commanded turn
  double steer_straight_penalty = -20.0;   // |steer| beyond threshold under Straight
  double straight_steer_threshold = 0.2;
  double steer_dead_band = 0.05;           // tolerated counter-steer magnitude on turns
  double sidewalk_penalty = -100.0;
  double opposite_penalty = -100.0;
  double collision_vp_penalty = -100.0;    // vehicles and pedestrians
  double collision_other_penalty = -50.0;  // static obstacles
  double overlap_trigger = 0.0;            // overlap fraction beyond this penalizes
  double scale = 1.0;
  bool enable_steer = true;
  bool enable_speed = true;
  bool enable_offroad_collision = true;    // gates r_r, r_o and r_d together
};

struct RewardBreakdown {
  double r_s = 0, r_v = 0, r_r = 0, r_o = 0, r_d = 0;
  double total = 0;  // scale * (sum of enabled components)
};

/// Abnormal-steer penalty. Turns penalize steering against the commanded
/// direction beyond a small dead-band; Straight penalizes |steer| above the
/// threshold; Follow has no steer case.
inline double steer_reward(Command command, double steer, const RewardConfig& cfg = {}) {
  switch (command) {
    case Command::TurnLeft:
    case Command::TurnRight:
      if (steer * steer_sign_toward(command) < -cfg.steer_dead_band)
        return cfg.steer_opposite_penalty;
      return 0.0;
    case Command::Straight:
      return std::abs(steer) > cfg.straight_steer_threshold ? cfg.steer_straight_penalty : 0.0;
    case Command::Follow:
      return 0.0;
  }
  return 0.0;
}

/// Speed shaping in km/h: capped at 25 under Follow and 35 under Straight;
/// turns reward up to 20 km/h and fall off as 40 - v beyond it.
inline double speed_reward(Command command, double speed_kmh) {
  switch (command) {
    case Command::Follow: return std::min(25.0, speed_kmh);
    case Command::Straight: return std::min(35.0, speed_kmh);
    case Command::TurnLeft:
    case Command::TurnRight:
      return speed_kmh <= 20.0 ? speed_kmh : 40.0 - speed_kmh;
  }
  return 0.0;
}

inline RewardBreakdown total_reward(const Measurements& m, Command command,
                                    const ActionTriple& action, const RewardConfig& cfg = {}) {
  RewardBreakdown b;
  if (cfg.enable_steer) b.r_s = steer_reward(command, action.steer, cfg);
  if (cfg.enable_speed) b.r_v = speed_reward(command, m.speed_kmh);
  if (cfg.enable_offroad_collision) {
    b.r_r = m.sidewalk_overlap > cfg.overlap_trigger ? cfg.sidewalk_penalty : 0.0;
    b.r_o = m.opposite_overlap > cfg.overlap_trigger ? cfg.opposite_penalty : 0.0;
    switch (m.collision_kind) {
      case CollisionKind::VehicleOrPedestrian: b.r_d = cfg.collision_vp_penalty; break;
      case CollisionKind::Other: b.r_d = cfg.collision_other_penalty; break;
      case CollisionKind::None: break;
    }
  }
  b.total = cfg.scale * (b.r_s + b.r_v + b.r_r + b.r_o + b.r_d);
  return b;
}

}  // namespace cirl
