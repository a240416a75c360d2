// Domain types shared across the simulator, reward, policy and trainers.
#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "cirl/common.hpp"

namespace cirl {

/// High-level navigation command. The enum order fixes the actor branch
/// order everywhere: Follow=0, Straight=1, TurnLeft=2, TurnRight=3.
enum class Command : uint8_t { Follow = 0, Straight = 1, TurnLeft = 2, TurnRight = 3 };

constexpr int kNumCommands = 4;

inline const char* command_name(Command c) {
  switch (c) {
    case Command::Follow: return "follow";
    case Command::Straight: return "straight";
    case Command::TurnLeft: return "turn_left";
    case Command::TurnRight: return "turn_right";
  }
  return "?";
}

inline Command command_from_name(const std::string& s) {
  for (int i = 0; i < kNumCommands; ++i)
    if (s == command_name(Command(i))) return Command(i);
  throw_config(strfmt("unknown command '%s'", s.c_str()));
}

/// Steer convention: positive steer turns the vehicle to the right
/// (clockwise in a world frame with counterclockwise-positive headings).
/// Returns the steer sign that executes the commanded turn; 0 when the
/// command does not prescribe a direction.
inline int steer_sign_toward(Command c) {
  if (c == Command::TurnRight) return 1;
  if (c == Command::TurnLeft) return -1;
  return 0;
}

struct ActionTriple {
  double steer = 0;     // [-1, 1]
  double throttle = 0;  // [0, 1]
  double brake = 0;     // [0, 1]

  bool is_finite() const { return finite(steer) && finite(throttle) && finite(brake); }

  ActionTriple clipped() const {
    return {std::clamp(steer, -1.0, 1.0), std::clamp(throttle, 0.0, 1.0),
            std::clamp(brake, 0.0, 1.0)};
  }

  bool in_bounds() const {
    return steer >= -1 && steer <= 1 && throttle >= 0 && throttle <= 1 && brake >= 0 && brake <= 1;
  }
};

struct VehicleState {
  double x = 0, y = 0;    // meters
  double heading = 0;     // radians, normalized to (-pi, pi]
  double speed = 0;       // m/s, >= 0
};

enum class CollisionKind : uint8_t { None = 0, VehicleOrPedestrian = 1, Other = 2 };

enum class EpisodeStatus : uint8_t { Running = 0, GoalReached = 1, Collision = 2, TimeBudgetExhausted = 3 };

inline const char* status_name(EpisodeStatus s) {
  switch (s) {
    case EpisodeStatus::Running: return "running";
    case EpisodeStatus::GoalReached: return "goal_reached";
    case EpisodeStatus::Collision: return "collision";
    case EpisodeStatus::TimeBudgetExhausted: return "time_budget_exhausted";
  }
  return "?";
}

/// Post-step simulator measurements feeding the reward module.
struct Measurements {
  double speed_kmh = 0;
  CollisionKind collision_kind = CollisionKind::None;
  double sidewalk_overlap = 0;  // footprint-area fraction in [0,1]
  double opposite_overlap = 0;  // footprint-area fraction in [0,1]
  double distance_to_goal = 0;  // meters
};

/// Egocentric occupancy raster intensity codes. Distinct per content kind;
/// larger codes win when contents stack in one cell.
namespace raster_code {
constexpr double kEmpty = 0.0;
constexpr double kSidewalk = 0.2;
constexpr double kDrivable = 0.4;
constexpr double kOpposite = 0.6;
constexpr double kCorridor = 0.8;
constexpr double kObstacle = 1.0;
}  // namespace raster_code

/// The state o = (raster, speed, command) seen by the policy.
struct Observation {
  int h = 0, w = 0;
  std::vector<double> raster;  // row-major, h*w values in [0,1]
  double speed = 0;            // m/s
  Command command = Command::Follow;

  double& at(int r, int c) { return raster[size_t(r) * w + c]; }
  double at(int r, int c) const { return raster[size_t(r) * w + c]; }
};

/// Observation corruption standing in for weather conditions: additive
/// raster noise, cell dropout and intensity rescaling.
struct PerturbationRegime {
  std::string name = "none";
  double noise_sigma = 0;
  double dropout_p = 0;
  double intensity_scale = 1.0;
  uint64_t seed = 0;

  bool is_identity() const {
    return noise_sigma == 0 && dropout_p == 0 && intensity_scale == 1.0;
  }
};

};  // namespace cirl
