// Deterministic episode simulator: vehicle dynamics on a town map, scripted
// dynamic obstacles, egocentric observation rendering with perturbation
// regimes, infraction measurement and the episode state machine.
#pragma once

#include <functional>
#include <memory>

#include "cirl/dynamics.hpp"
#include "cirl/route.hpp"
#include "cirl/town.hpp"

namespace cirl {

struct SimConfig {
  double dt = kDt;
  int raster_h = 32, raster_w = 32;
  double window_forward = 35.0;     // raster window extents around the vehicle, m
  double window_back = 5.0;
  double window_half_width = 20.0;
  double goal_tolerance = 2.0;      // m
  double approach_window = 25.0;    // command window before an intersection, m
  double corridor_half_width = 1.75;
  double budget_speed_kmh = 10.0;   // time budget = optimal path at this speed
  VehicleParams vehicle;
};

/// Immutable per-map data shared by any number of environments.
struct World {
  TownMap map;
  StaticGrid grid;

  static std::shared_ptr<const World> make(TownMap m) {
    auto w = std::make_shared<World>();
    w->map = std::move(m);
    w->grid = build_static_grid(w->map);
    return w;
  }
};

// ---------------------------------------------------------------------------
// Scripted dynamic obstacles

struct ObstacleState {
  enum class Kind : uint8_t { Vehicle = 0, Pedestrian = 1 };
  Kind kind = Kind::Vehicle;
  geom::Vec2 pos;
  double heading = 0;

  static constexpr double kVehicleHalfLen = 2.0;
  static constexpr double kVehicleHalfWid = 0.9;
  static constexpr double kPedRadius = 0.35;

  geom::Poly footprint() const {
    return geom::oriented_rect(pos, heading, kVehicleHalfLen, kVehicleHalfWid);
  }
  geom::Disc disc() const { return {pos, kPedRadius}; }

  geom::Aabb box() const {
    geom::Aabb b;
    if (kind == Kind::Vehicle) {
      b = geom::Aabb::of(footprint());
    } else {
      b.grow(pos);
      b.pad(kPedRadius);
    }
    return b;
  }

  bool contains(geom::Vec2 p) const {
    if (kind == Kind::Vehicle) return geom::point_in_convex(p, footprint());
    return (p - pos).norm2() <= kPedRadius * kPedRadius;
  }
};

/// Constant-speed follower of a precomputed polyline; stops at the end.
struct ObstacleScript {
  ObstacleState::Kind kind;
  std::vector<geom::Vec2> path;
  std::vector<double> cum;
  double speed = 0;

  ObstacleState at_time(double t) const {
    double s = std::min(speed * t, cum.back());
    ObstacleState st;
    st.kind = kind;
    size_t i = 0;
    while (i + 2 < path.size() && s > cum[i + 1]) ++i;
    double seg = cum[i + 1] - cum[i];
    double u = seg > 0 ? (s - cum[i]) / seg : 0.0;
    st.pos = path[i] + (path[i + 1] - path[i]) * u;
    geom::Vec2 d = (path[i + 1] - path[i]).normalized();
    st.heading = std::atan2(d.y, d.x);
    return st;
  }
};

namespace detail {

inline void finalize_script(ObstacleScript& s) {
  s.cum.assign(s.path.size(), 0.0);
  for (size_t i = 0; i + 1 < s.path.size(); ++i)
    s.cum[i + 1] = s.cum[i] + (s.path[i + 1] - s.path[i]).norm();
}

/// Lane-following traffic vehicle: a no-U-turn random walk over the lane
/// graph, long enough to outlast any episode.
inline ObstacleScript make_vehicle_script(const TownMap& map, Rng& rng) {
  ObstacleScript s;
  s.kind = ObstacleState::Kind::Vehicle;
  s.speed = rng.uniform(3.0, 6.0);
  int e = rng.uniform_int(int(map.edges.size()));
  for (int hops = 0; hops < 40; ++hops) {
    const LaneEdge& cur = map.edge(e);
    for (geom::Vec2 p : cur.centerline) s.path.push_back(p);
    std::vector<int> options;
    for (int o : map.out_edges[size_t(cur.to_node)])
      if (o != cur.opposite_id) options.push_back(o);
    if (options.empty()) break;
    e = options[size_t(rng.uniform_int(int(options.size())))];
  }
  detail::finalize_script(s);
  return s;
}

/// Sidewalk pedestrian; about half of them cross the road once mid-path.
inline ObstacleScript make_pedestrian_script(const TownMap& map, Rng& rng) {
  ObstacleScript s;
  s.kind = ObstacleState::Kind::Pedestrian;
  s.speed = rng.uniform(0.9, 1.5);
  const LaneEdge& e = map.edge(rng.uniform_int(int(map.edges.size())));
  geom::Vec2 a = e.centerline.front(), b = e.centerline.back();
  geom::Vec2 d = (b - a).normalized();
  // edge centerline sits lane_width/2 right of the road axis; its sidewalk
  // center is another lane_width/2 + sidewalk/2 to the right
  geom::Vec2 off = d.perp_right() * (e.width / 2 + map.sidewalk_width / 2);
  geom::Vec2 cross_off = d.perp_left() * (e.width * 2 + map.sidewalk_width);
  bool crosses = rng.uniform() < 0.5;
  double tc = rng.uniform(0.3, 0.7);
  if (crosses) {
    s.path = {a + off, a + (b - a) * tc + off, a + (b - a) * tc + off + cross_off,
              b + off + cross_off};
  } else {
    s.path = {a + off, b + off};
  }
  detail::finalize_script(s);
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Infractions

/// Collision and overlap measurement. Overlap fractions are exact
/// footprint-area fractions (inclusion-exclusion over the region polygons);
/// the opposite-lane region is the paired lane of `current_edge`.
inline Measurements detect_infractions(const World& w, const SimConfig& cfg,
                                       const VehicleState& v, int current_edge,
                                       std::span<const ObstacleState> obstacles) {
  Measurements m;
  m.speed_kmh = v.speed * 3.6;

  geom::Poly fp = vehicle_footprint(v, cfg.vehicle);
  geom::Aabb fpbox = geom::Aabb::of(fp);
  const double fp_area = 4.0 * cfg.vehicle.half_len * cfg.vehicle.half_wid;

  std::vector<const geom::Poly*> regions;
  const auto& sw = w.map.sidewalk_polys();
  const auto& swb = w.map.sidewalk_boxes();
  for (size_t i = 0; i < sw.size(); ++i)
    if (fpbox.overlaps(swb[i])) regions.push_back(&sw[i]);
  if (!regions.empty())
    m.sidewalk_overlap = std::clamp(geom::union_overlap_area(fp, regions) / fp_area, 0.0, 1.0);

  if (current_edge >= 0) {
    const LaneEdge& opp = w.map.edge(w.map.edge(current_edge).opposite_id);
    regions.clear();
    for (size_t i = 0; i < opp.quads.size(); ++i)
      if (fpbox.overlaps(opp.quad_boxes[i])) regions.push_back(&opp.quads[i]);
    if (!regions.empty())
      m.opposite_overlap = std::clamp(geom::union_overlap_area(fp, regions) / fp_area, 0.0, 1.0);
  }

  for (const ObstacleState& o : obstacles) {
    if (!fpbox.overlaps(o.box())) continue;
    bool hit = o.kind == ObstacleState::Kind::Vehicle ? geom::polys_intersect(fp, o.footprint())
                                                      : geom::poly_intersects_disc(fp, o.disc());
    if (hit) {
      m.collision_kind = CollisionKind::VehicleOrPedestrian;
      return m;
    }
  }
  for (size_t i = 0; i < w.map.static_obstacles.size(); ++i) {
    if (!fpbox.overlaps(w.map.obstacle_boxes[i])) continue;
    if (geom::polys_intersect(fp, w.map.static_obstacles[i])) {
      m.collision_kind = CollisionKind::Other;
      return m;
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Observation rendering

/// Route corridor painted into a map-aligned bitmap at reset time.
struct CorridorGrid {
  std::vector<uint8_t> cells;

  static CorridorGrid build(const StaticGrid& g, const Route& route, double half_width) {
    CorridorGrid c;
    c.cells.assign(size_t(g.w) * g.h, 0);
    for (size_t i = 0; i + 1 < route.waypoints.size(); ++i) {
      geom::Vec2 a = route.waypoints[i], b = route.waypoints[i + 1];
      geom::Aabb box;
      box.grow(a);
      box.grow(b);
      box.pad(half_width + g.cell);
      int x0 = std::max(0, int(std::floor((box.lo.x - g.origin.x) / g.cell)));
      int x1 = std::min(g.w - 1, int(std::ceil((box.hi.x - g.origin.x) / g.cell)));
      int y0 = std::max(0, int(std::floor((box.lo.y - g.origin.y) / g.cell)));
      int y1 = std::min(g.h - 1, int(std::ceil((box.hi.y - g.origin.y) / g.cell)));
      for (int cy = y0; cy <= y1; ++cy)
        for (int cx = x0; cx <= x1; ++cx) {
          geom::Vec2 p{g.origin.x + (cx + 0.5) * g.cell, g.origin.y + (cy + 0.5) * g.cell};
          if (geom::point_segment_distance(p, a, b) <= half_width) c.cells[g.idx(cx, cy)] = 1;
        }
    }
    return c;
  }

  bool at(const StaticGrid& g, geom::Vec2 p) const {
    int cx, cy;
    if (!g.cell_of(p, cx, cy)) return false;
    return cells[g.idx(cx, cy)] != 0;
  }
};

/// Renders the egocentric occupancy raster. Row index grows toward the
/// front of the vehicle, column index grows to its left; the perturbation
/// regime is applied after rendering using draws from `noise_rng`.
inline Observation render_observation(const World& w, const SimConfig& cfg, const VehicleState& v,
                                      Command command, const CorridorGrid& corridor,
                                      std::span<const ObstacleState> obstacles,
                                      const PerturbationRegime& regime, Rng& noise_rng) {
  Observation obs;
  obs.h = cfg.raster_h;
  obs.w = cfg.raster_w;
  obs.raster.assign(size_t(obs.h) * obs.w, raster_code::kEmpty);
  obs.speed = v.speed;
  obs.command = command;

  const geom::Vec2 fwd{std::cos(v.heading), std::sin(v.heading)};
  const geom::Vec2 left = fwd.perp_left();
  const double cell_f = (cfg.window_forward + cfg.window_back) / obs.h;
  const double cell_l = (2.0 * cfg.window_half_width) / obs.w;

  std::vector<geom::Aabb> oboxes;
  for (const ObstacleState& o : obstacles) oboxes.push_back(o.box());

  for (int r = 0; r < obs.h; ++r) {
    const double fx = -cfg.window_back + (r + 0.5) * cell_f;
    for (int c = 0; c < obs.w; ++c) {
      const double fy = -cfg.window_half_width + (c + 0.5) * cell_l;
      const geom::Vec2 p{v.x + fx * fwd.x + fy * left.x, v.y + fx * fwd.y + fy * left.y};

      double code = raster_code::kEmpty;
      geom::Vec2 lane_dir;
      switch (w.grid.type_at(p, &lane_dir)) {
        case CellType::Drivable: {
          bool opposite = (lane_dir.x != 0 || lane_dir.y != 0) && lane_dir.dot(fwd) < -0.5;
          code = opposite ? raster_code::kOpposite : raster_code::kDrivable;
          if (corridor.at(w.grid, p)) code = raster_code::kCorridor;
          break;
        }
        case CellType::Sidewalk:
          code = raster_code::kSidewalk;
          break;
        case CellType::Obstacle:
          code = raster_code::kObstacle;
          break;
        case CellType::Empty:
          break;
      }
      for (size_t i = 0; i < obstacles.size(); ++i) {
        if (!oboxes[i].contains(p)) continue;
        if (obstacles[i].contains(p)) {
          code = raster_code::kObstacle;
          break;
        }
      }
      obs.at(r, c) = code;
    }
  }

  if (!regime.is_identity()) {
    const size_t n = obs.raster.size();
    if (regime.intensity_scale != 1.0)
      for (double& x : obs.raster) x *= regime.intensity_scale;
    if (regime.noise_sigma > 0)
      for (double& x : obs.raster) x += regime.noise_sigma * noise_rng.normal();
    if (regime.dropout_p > 0)
      for (size_t i = 0; i < n; ++i)
        if (noise_rng.uniform() < regime.dropout_p) obs.raster[i] = 0.0;
    for (double& x : obs.raster) x = std::clamp(x, 0.0, 1.0);
  }
  return obs;
}

// ---------------------------------------------------------------------------
// Episode specification and environment

struct EpisodeSpec {
  std::string map_name = "town-a";
  LanePos start, goal;
  int n_vehicles = 0;
  int n_pedestrians = 0;
  PerturbationRegime regime;
  uint64_t seed = 0;
};

inline nlohmann::json episode_spec_to_json(const EpisodeSpec& s) {
  return nlohmann::json{
      {"map", s.map_name},
      {"start", {{"edge", s.start.edge}, {"s", s.start.s}}},
      {"goal", {{"edge", s.goal.edge}, {"s", s.goal.s}}},
      {"vehicles", s.n_vehicles},
      {"pedestrians", s.n_pedestrians},
      {"regime",
       {{"name", s.regime.name},
        {"noise_sigma", s.regime.noise_sigma},
        {"dropout_p", s.regime.dropout_p},
        {"intensity_scale", s.regime.intensity_scale},
        {"seed", s.regime.seed}}},
      {"seed", s.seed}};
}

inline EpisodeSpec episode_spec_from_json(const nlohmann::json& j) {
  EpisodeSpec s;
  s.map_name = j.at("map").get<std::string>();
  s.start = {j.at("start").at("edge").get<int>(), j.at("start").at("s").get<double>()};
  s.goal = {j.at("goal").at("edge").get<int>(), j.at("goal").at("s").get<double>()};
  s.n_vehicles = j.at("vehicles").get<int>();
  s.n_pedestrians = j.at("pedestrians").get<int>();
  const auto& r = j.at("regime");
  s.regime.name = r.at("name").get<std::string>();
  s.regime.noise_sigma = r.at("noise_sigma").get<double>();
  s.regime.dropout_p = r.at("dropout_p").get<double>();
  s.regime.intensity_scale = r.at("intensity_scale").get<double>();
  s.regime.seed = r.at("seed").get<uint64_t>();
  s.seed = j.at("seed").get<uint64_t>();
  return s;
}

class Environment {
 public:
  struct StepResult {
    Observation obs;
    Measurements m;
    EpisodeStatus status = EpisodeStatus::Running;
  };

  explicit Environment(std::shared_ptr<const World> world, SimConfig cfg = {})
      : world_(std::move(world)), cfg_(cfg) {}

  const World& world() const { return *world_; }
  const SimConfig& config() const { return cfg_; }
  const Route& route() const { return route_; }
  const VehicleState& vehicle() const { return vehicle_; }
  EpisodeStatus status() const { return status_; }
  int64_t steps() const { return steps_; }
  int64_t budget_steps() const { return budget_steps_; }
  const std::vector<ObstacleState>& obstacles() const { return obstacle_states_; }
  const Measurements& last_measurements() const { return last_m_; }

  /// Command at the nearest upcoming schedule entry.
  Command current_command() const { return route_.commands[progress_idx_]; }
  double route_progress() const { return route_.cum[progress_idx_]; }

  Observation reset(const EpisodeSpec& spec) {
    require(spec.map_name == world_->map.name, ErrorKind::Config,
            strfmt("episode spec names map '%s' but environment holds '%s'",
                   spec.map_name.c_str(), world_->map.name.c_str()));
    route_ = plan_route(world_->map, spec.start, spec.goal, cfg_.approach_window);
    require(route_.length > 2.0 * cfg_.goal_tolerance, ErrorKind::Config,
            "episode spec rejected: goal coincides with start (degenerate episode)");
    spec_ = spec;

    const double budget_speed = cfg_.budget_speed_kmh / 3.6;
    budget_time_ = route_.length / budget_speed;
    budget_steps_ = int64_t(std::floor(budget_time_ / cfg_.dt + 1e-9));

    vehicle_ = VehicleState{};
    geom::Vec2 p = world_->map.lane_point(spec.start);
    geom::Vec2 d = world_->map.lane_dir(spec.start);
    vehicle_.x = p.x;
    vehicle_.y = p.y;
    vehicle_.heading = std::atan2(d.y, d.x);
    vehicle_.speed = 0;

    corridor_ = CorridorGrid::build(world_->grid, route_, cfg_.corridor_half_width);

    scripts_.clear();
    obstacle_states_.clear();
    Rng orng(seed_mix(spec.seed, fnv1a64("obstacles")));
    auto spawn_clear = [&](const ObstacleScript& s) {
      return (s.at_time(0).pos - p).norm() > 15.0;
    };
    for (int i = 0; i < spec.n_vehicles; ++i)
      for (int tries = 0; tries < 50; ++tries) {
        ObstacleScript s = detail::make_vehicle_script(world_->map, orng);
        if (spawn_clear(s)) {
          scripts_.push_back(std::move(s));
          break;
        }
      }
    for (int i = 0; i < spec.n_pedestrians; ++i)
      for (int tries = 0; tries < 50; ++tries) {
        ObstacleScript s = detail::make_pedestrian_script(world_->map, orng);
        if (spawn_clear(s)) {
          scripts_.push_back(std::move(s));
          break;
        }
      }
    for (const ObstacleScript& s : scripts_) obstacle_states_.push_back(s.at_time(0));

    noise_rng_ = Rng(seed_mix(seed_mix(spec.seed, fnv1a64("perturb")), spec.regime.seed));
    steps_ = 0;
    progress_idx_ = 0;
    status_ = EpisodeStatus::Running;
    last_m_ = detect_infractions(*world_, cfg_, vehicle_, current_edge(), obstacle_states_);
    last_m_.distance_to_goal = (geom::Vec2{vehicle_.x, vehicle_.y} - route_.goal_point).norm();
    return render();
  }

  StepResult step(const ActionTriple& action) {
    require(status_ == EpisodeStatus::Running, ErrorKind::Logic,
            "env_step rejected: episode already terminal");
    vehicle_ = step_dynamics(vehicle_, action, cfg_.dt, cfg_.vehicle);
    steps_ += 1;
    const double t = double(steps_) * cfg_.dt;
    for (size_t i = 0; i < scripts_.size(); ++i) obstacle_states_[i] = scripts_[i].at_time(t);
    advance_progress();

    Measurements m = detect_infractions(*world_, cfg_, vehicle_, current_edge(), obstacle_states_);
    m.distance_to_goal = (geom::Vec2{vehicle_.x, vehicle_.y} - route_.goal_point).norm();
    last_m_ = m;

    if (m.collision_kind != CollisionKind::None) {
      status_ = EpisodeStatus::Collision;
    } else if (m.distance_to_goal < cfg_.goal_tolerance) {
      status_ = EpisodeStatus::GoalReached;
    } else if (steps_ > budget_steps_) {
      status_ = EpisodeStatus::TimeBudgetExhausted;
    }
    return {render(), m, status_};
  }

  /// Lane edge owning the current route position (approach lane in plazas).
  int current_edge() const { return route_.edge_at(progress_idx_); }

 private:
  void advance_progress() {
    const geom::Vec2 p{vehicle_.x, vehicle_.y};
    while (progress_idx_ + 1 < route_.waypoints.size() &&
           (route_.waypoints[progress_idx_ + 1] - p).norm2() <=
               (route_.waypoints[progress_idx_] - p).norm2())
      ++progress_idx_;
  }

  Observation render() {
    return render_observation(*world_, cfg_, vehicle_, current_command(), corridor_,
                              obstacle_states_, spec_.regime, noise_rng_);
  }

  std::shared_ptr<const World> world_;
  SimConfig cfg_;
  EpisodeSpec spec_;
  Route route_;
  VehicleState vehicle_;
  CorridorGrid corridor_;
  std::vector<ObstacleScript> scripts_;
  std::vector<ObstacleState> obstacle_states_;
  Rng noise_rng_{0};
  EpisodeStatus status_ = EpisodeStatus::Running;
  Measurements last_m_;
  int64_t steps_ = 0;
  int64_t budget_steps_ = 0;
  double budget_time_ = 0;
  size_t progress_idx_ = 0;
};

}  // namespace cirl
