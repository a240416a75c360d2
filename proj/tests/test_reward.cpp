#include <catch2/catch_amalgamated.hpp>

#include "cirl/reward.hpp"

using namespace cirl;

namespace {

// Independent table-driven transcription of the reward definition, written
// against the published piecewise forms rather than the implementation.
double oracle_r_s(Command c, double steer) {
  if (c == Command::TurnLeft && steer > 0.05) return -15;    // opposite of a left turn
  if (c == Command::TurnRight && steer < -0.05) return -15;  // opposite of a right turn
  if (c == Command::Straight && std::abs(steer) > 0.2) return -20;
  return 0;
}

double oracle_r_v(Command c, double v) {
  if (c == Command::Follow) return v < 25 ? v : 25;
  if (c == Command::Straight) return v < 35 ? v : 35;
  return v <= 20 ? v : 40 - v;
}

double oracle_total(const Measurements& m, Command c, const ActionTriple& a) {
  double r_r = m.sidewalk_overlap > 0 ? -100 : 0;
  double r_o = m.opposite_overlap > 0 ? -100 : 0;
  double r_d = 0;
  if (m.collision_kind == CollisionKind::VehicleOrPedestrian) r_d = -100;
  if (m.collision_kind == CollisionKind::Other) r_d = -50;
  return oracle_r_s(c, a.steer) + oracle_r_v(c, m.speed_kmh) + r_r + r_o + r_d;
}

}  // namespace

TEST_CASE("steer reward: anchored cases") {
  REQUIRE(steer_reward(Command::Straight, 0.5) == -20.0);
  REQUIRE(steer_reward(Command::Follow, 0.9) == 0.0);
  REQUIRE(steer_reward(Command::TurnLeft, 0.3) == -15.0);
  REQUIRE(steer_reward(Command::TurnLeft, -0.3) == 0.0);
}

TEST_CASE("steer reward: full sign-convention table") {
  // positive steer = right turn
  struct Row {
    Command c;
    double steer;
    double expect;
  };
  const Row rows[] = {
      {Command::TurnLeft, 0.5, -15},   {Command::TurnLeft, 0.06, -15},
      {Command::TurnLeft, 0.05, 0},    {Command::TurnLeft, -0.5, 0},
      {Command::TurnRight, -0.5, -15}, {Command::TurnRight, -0.06, -15},
      {Command::TurnRight, -0.05, 0},  {Command::TurnRight, 0.5, 0},
      {Command::Straight, 0.2, 0},     {Command::Straight, 0.21, -20},
      {Command::Straight, -0.21, -20}, {Command::Straight, 0.0, 0},
      {Command::Follow, 1.0, 0},       {Command::Follow, -1.0, 0},
  };
  for (const Row& r : rows) {
    INFO(command_name(r.c) << " steer=" << r.steer);
    REQUIRE(steer_reward(r.c, r.steer) == r.expect);
  }
}

TEST_CASE("speed reward: anchored cases") {
  REQUIRE(speed_reward(Command::Follow, 30) == 25.0);
  REQUIRE(speed_reward(Command::TurnRight, 30) == 10.0);
  REQUIRE(speed_reward(Command::Straight, 0) == 0.0);
}

TEST_CASE("speed reward: turn branch is continuous at the v=20 kink") {
  REQUIRE(speed_reward(Command::TurnLeft, 20.0) == 20.0);
  REQUIRE(speed_reward(Command::TurnLeft, 20.0 + 1e-12) == Catch::Approx(20.0).margin(1e-9));
}

TEST_CASE("speed reward: monotone up to 20 then strictly decreasing for turns") {
  double prev = -1;
  for (double v = 0; v <= 20.0; v += 0.5) {
    double r = speed_reward(Command::TurnRight, v);
    REQUIRE(r >= prev);
    prev = r;
  }
  prev = speed_reward(Command::TurnRight, 20.0);
  for (double v = 20.5; v < 80; v += 0.5) {
    double r = speed_reward(Command::TurnRight, v);
    REQUIRE(r < prev);
    prev = r;
  }
}

TEST_CASE("total reward: clean straight driving at 35 km/h scores 35") {
  Measurements m;
  m.speed_kmh = 35;
  RewardBreakdown b = total_reward(m, Command::Straight, {0, 0.8, 0});
  REQUIRE(b.total == 35.0);
  REQUIRE(b.r_v == 35.0);
  REQUIRE(b.r_s == 0.0);
}

TEST_CASE("total reward: pedestrian collision while turning at 10 km/h") {
  Measurements m;
  m.speed_kmh = 10;
  m.collision_kind = CollisionKind::VehicleOrPedestrian;
  // steer in the commanded direction
  RewardBreakdown b = total_reward(m, Command::TurnRight, {0.4, 0.3, 0});
  REQUIRE(b.r_d == -100.0);
  REQUIRE(b.r_v == 10.0);
  REQUIRE(b.total == -90.0);
}

TEST_CASE("total reward: scale multiplies the total exactly") {
  Measurements m;
  m.speed_kmh = 10;
  m.collision_kind = CollisionKind::VehicleOrPedestrian;
  RewardConfig cfg;
  cfg.scale = 10.0;
  RewardBreakdown b = total_reward(m, Command::TurnRight, {0.4, 0.3, 0}, cfg);
  REQUIRE(b.total == -900.0);
  REQUIRE(b.r_d == -100.0);  // components stay unscaled
}

TEST_CASE("total reward: collision kinds map to -100 / -50 / 0") {
  Measurements m;
  m.speed_kmh = 0;
  m.collision_kind = CollisionKind::Other;
  REQUIRE(total_reward(m, Command::Follow, {}).r_d == -50.0);
  m.collision_kind = CollisionKind::VehicleOrPedestrian;
  REQUIRE(total_reward(m, Command::Follow, {}).r_d == -100.0);
  m.collision_kind = CollisionKind::None;
  REQUIRE(total_reward(m, Command::Follow, {}).r_d == 0.0);
}

TEST_CASE("total reward: any positive overlap triggers the full penalty") {
  Measurements m;
  m.speed_kmh = 0;
  m.sidewalk_overlap = 1e-6;
  REQUIRE(total_reward(m, Command::Follow, {}).r_r == -100.0);
  m.sidewalk_overlap = 0;
  m.opposite_overlap = 0.4;
  REQUIRE(total_reward(m, Command::Follow, {}).r_o == -100.0);
}

TEST_CASE("total reward: oracle equivalence on 10000 random inputs") {
  Rng rng(20240607);
  for (int i = 0; i < 10000; ++i) {
    Measurements m;
    m.speed_kmh = rng.uniform(0, 60);
    m.sidewalk_overlap = rng.uniform() < 0.3 ? rng.uniform(0, 1) : 0.0;
    m.opposite_overlap = rng.uniform() < 0.3 ? rng.uniform(0, 1) : 0.0;
    m.collision_kind = CollisionKind(rng.uniform_int(3));
    Command c = Command(rng.uniform_int(4));
    ActionTriple a{rng.uniform(-1, 1), rng.uniform(0, 1), rng.uniform(0, 1)};
    RewardBreakdown b = total_reward(m, c, a);
    REQUIRE(b.total == oracle_total(m, c, a));
  }
}

TEST_CASE("total reward: decomposition is exact and toggles are local") {
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    Measurements m;
    m.speed_kmh = rng.uniform(0, 50);
    m.sidewalk_overlap = rng.uniform() < 0.5 ? rng.uniform(0, 1) : 0.0;
    m.opposite_overlap = rng.uniform() < 0.5 ? rng.uniform(0, 1) : 0.0;
    m.collision_kind = CollisionKind(rng.uniform_int(3));
    Command c = Command(rng.uniform_int(4));
    ActionTriple a{rng.uniform(-1, 1), rng.uniform(0, 1), rng.uniform(0, 1)};

    RewardConfig cfg;
    cfg.scale = rng.uniform(0.1, 10);
    RewardBreakdown b = total_reward(m, c, a, cfg);
    REQUIRE(b.total == cfg.scale * (b.r_s + b.r_v + b.r_r + b.r_o + b.r_d));

    RewardConfig no_steer = cfg;
    no_steer.enable_steer = false;
    RewardBreakdown bs = total_reward(m, c, a, no_steer);
    REQUIRE(bs.r_s == 0.0);
    REQUIRE(bs.r_v == b.r_v);
    REQUIRE(bs.r_r == b.r_r);
    REQUIRE(bs.r_o == b.r_o);
    REQUIRE(bs.r_d == b.r_d);

    RewardConfig no_speed = cfg;
    no_speed.enable_speed = false;
    RewardBreakdown bv = total_reward(m, c, a, no_speed);
    REQUIRE(bv.r_v == 0.0);
    REQUIRE(bv.r_s == b.r_s);

    RewardConfig no_infra = cfg;
    no_infra.enable_offroad_collision = false;
    RewardBreakdown bi = total_reward(m, c, a, no_infra);
    REQUIRE(bi.r_r == 0.0);
    REQUIRE(bi.r_o == 0.0);
    REQUIRE(bi.r_d == 0.0);
    REQUIRE(bi.r_s == b.r_s);
    REQUIRE(bi.r_v == b.r_v);
  }
}

TEST_CASE("configurable overlap trigger gates the penalty threshold") {
  Measurements m;
  m.sidewalk_overlap = 0.25;
  RewardConfig cfg;
  cfg.overlap_trigger = 0.3;
  REQUIRE(total_reward(m, Command::Follow, {}, cfg).r_r == 0.0);
  m.sidewalk_overlap = 0.31;
  REQUIRE(total_reward(m, Command::Follow, {}, cfg).r_r == -100.0);
}
