#include <catch2/catch_amalgamated.hpp>
#include <fstream>

#include <filesystem>
#include <limits>

#include "cirl/route.hpp"
#include "cirl/town.hpp"

using namespace cirl;

namespace {

// Single crossroad: center node 0, arms N/E/S/W at 80 m.
TownMap crossroad_map() {
  std::vector<geom::Vec2> nodes = {{0, 0}, {80, 0}, {0, 80}, {-80, 0}, {0, -80}};
  std::vector<townbuild::RoadSpec> roads = {{0, 1}, {0, 2}, {0, 3}, {0, 4}};
  return townbuild::build_town("cross", std::move(nodes), roads, {});
}

TownMap straight_map(double len = 120) {
  std::vector<geom::Vec2> nodes = {{0, 0}, {len, 0}};
  return townbuild::build_town("line", std::move(nodes), {{0, 1}}, {});
}

int find_edge(const TownMap& m, int from, int to) {
  for (const LaneEdge& e : m.edges)
    if (e.from_node == from && e.to_node == to) return e.id;
  FAIL("edge not found");
  return -1;
}

// Independent shortest-path oracle: Bellman-Ford over edge states with the
// same no-U-turn rule and lane-length metric as the planner contract.
double oracle_lane_length(const TownMap& map, LanePos start, LanePos goal) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  if (start.edge == goal.edge && goal.s >= start.s) {
    // the direct candidate competes with graph paths below
  }
  std::vector<double> dist(map.edges.size(), kInf);
  dist[size_t(start.edge)] = map.edge(start.edge).length - start.s;
  for (size_t iter = 0; iter < map.edges.size() + 1; ++iter) {
    for (const LaneEdge& e : map.edges) {
      if (dist[size_t(e.id)] == kInf) continue;
      for (const LaneEdge& o : map.edges) {
        if (o.from_node != e.to_node || o.id == e.opposite_id) continue;
        double nd = dist[size_t(e.id)] + o.length;
        if (nd < dist[size_t(o.id)]) dist[size_t(o.id)] = nd;
      }
    }
  }
  double best = kInf;
  if (start.edge == goal.edge && goal.s >= start.s) best = goal.s - start.s;
  for (const LaneEdge& e : map.edges) {
    if (dist[size_t(e.id)] == kInf || e.to_node != map.edge(goal.edge).from_node ||
        e.id == map.edge(goal.edge).opposite_id)
      continue;
    best = std::min(best, dist[size_t(e.id)] + goal.s);
  }
  return best;
}

}  // namespace

TEST_CASE("bundled towns satisfy the map invariants") {
  for (const TownMap& m : {town_a(), town_b()}) {
    // finalize() already validated pairing symmetry, lane disjointness and
    // strong connectivity; spot-check the basics here
    REQUIRE(m.edges.size() >= 20);
    for (const LaneEdge& e : m.edges) {
      REQUIRE(m.edge(e.opposite_id).opposite_id == e.id);
      REQUIRE(e.length > 10.0);
      REQUIRE_FALSE(e.sidewalks.empty());
    }
  }
}

TEST_CASE("towns differ in layout") {
  TownMap a = town_a(), b = town_b();
  REQUIRE(a.bounds.hi.x != b.bounds.hi.x);
  REQUIRE(a.bounds.hi.y != b.bounds.hi.y);
  // intersection degree profiles differ
  auto degrees = [](const TownMap& m) {
    std::vector<int> d(m.nodes.size(), 0);
    for (const LaneEdge& e : m.edges) d[size_t(e.from_node)]++;
    std::sort(d.begin(), d.end());
    return d;
  };
  REQUIRE(degrees(a) != degrees(b));
}

TEST_CASE("a broken opposite pairing is rejected") {
  TownMap m = straight_map();
  m.edges[0].opposite_id = 0;  // self-paired
  REQUIRE_THROWS_AS(m.finalize(), Error);
}

TEST_CASE("a disconnected lane graph is rejected") {
  std::vector<geom::Vec2> nodes = {{0, 0}, {100, 0}, {0, 100}, {100, 100}};
  // two disjoint roads
  REQUIRE_THROWS_WITH(townbuild::build_town("bad", std::move(nodes), {{0, 1}, {2, 3}}, {}),
                      Catch::Matchers::ContainsSubstring("strongly connected"));
}

TEST_CASE("map file round-trip preserves the map") {
  TownMap m = town_a();
  auto path = (std::filesystem::temp_directory_path() / "cirl_town_roundtrip.json").string();
  save_map(path, m);
  TownMap r = load_map(path);
  REQUIRE(r.name == m.name);
  REQUIRE(r.nodes.size() == m.nodes.size());
  REQUIRE(r.edges.size() == m.edges.size());
  for (size_t i = 0; i < m.edges.size(); ++i) {
    REQUIRE(r.edges[i].centerline == m.edges[i].centerline);
    REQUIRE(r.edges[i].opposite_id == m.edges[i].opposite_id);
    REQUIRE(r.edges[i].length == m.edges[i].length);
  }
  REQUIRE(r.static_obstacles.size() == m.static_obstacles.size());
  std::remove(path.c_str());
}

TEST_CASE("map loader rejects foreign files") {
  auto path = (std::filesystem::temp_directory_path() / "cirl_not_a_map.json").string();
  {
    std::ofstream os(path);
    os << "{\"format\": \"something-else\", \"version\": 1}";
  }
  REQUIRE_THROWS_WITH(load_map(path), Catch::Matchers::ContainsSubstring("not a cirl-town"));
  std::remove(path.c_str());
}

TEST_CASE("same-lane route is all-Follow with arc-distance length") {
  TownMap m = straight_map();
  int e = find_edge(m, 0, 1);
  Route r = plan_route(m, {e, 10.0}, {e, 70.0});
  REQUIRE(r.lane_length == Catch::Approx(60.0).margin(1e-9));
  REQUIRE(r.intersections_crossed == 0);
  REQUIRE(r.turn_count == 0);
  for (Command c : r.commands) REQUIRE(c == Command::Follow);
  REQUIRE(r.length == Catch::Approx(60.0).margin(1e-9));
}

TEST_CASE("left-turn route holds TurnLeft exactly in the approach window") {
  TownMap m = crossroad_map();
  // approach from the south arm heading north, leave on the west arm
  int in = find_edge(m, 4, 0);
  int out = find_edge(m, 0, 3);
  const double approach = 25.0;
  Route r = plan_route(m, {in, 5.0}, {out, 40.0}, approach);
  REQUIRE(r.edges == std::vector<int>{in, out});
  REQUIRE(r.intersections_crossed == 1);
  REQUIRE(r.turn_count == 1);

  // oracle: geometric turn classification from the lane directions
  geom::Vec2 din = m.edge(in).dir_at(m.edge(in).length);
  geom::Vec2 dout = m.edge(out).dir_at(0);
  REQUIRE(din.cross(dout) > 0);  // left turn

  double entry_arc = 0, exit_arc = 0;
  for (size_t i = 0; i + 1 < r.waypoints.size(); ++i)
    if (r.wp_edge[i] == in && r.wp_edge[i + 1] < 0) entry_arc = r.cum[i];
  for (size_t i = 1; i < r.waypoints.size(); ++i)
    if (r.wp_edge[i] == out && r.wp_edge[i - 1] < 0) exit_arc = r.cum[i];
  REQUIRE(entry_arc > 0);
  REQUIRE(exit_arc > entry_arc);

  for (size_t i = 0; i < r.waypoints.size(); ++i) {
    bool in_window = r.cum[i] >= entry_arc - approach && r.cum[i] <= exit_arc;
    REQUIRE(r.commands[i] == (in_window ? Command::TurnLeft : Command::Follow));
  }
}

TEST_CASE("right-turn and straight crossings classify correctly") {
  TownMap m = crossroad_map();
  int in = find_edge(m, 4, 0);
  Route right = plan_route(m, {in, 5.0}, {find_edge(m, 0, 1), 40.0});
  REQUIRE(right.turn_count == 1);
  REQUIRE(std::count(right.commands.begin(), right.commands.end(), Command::TurnRight) > 0);
  REQUIRE(std::count(right.commands.begin(), right.commands.end(), Command::TurnLeft) == 0);

  Route straight = plan_route(m, {in, 5.0}, {find_edge(m, 0, 2), 40.0});
  REQUIRE(straight.turn_count == 0);
  REQUIRE(straight.intersections_crossed == 1);
  REQUIRE(std::count(straight.commands.begin(), straight.commands.end(), Command::Straight) > 0);
}

TEST_CASE("planner picks the shorter of two parallel roads") {
  // feeder 2 -> 0, two parallel roads 0 -> 1 (one straight, one detour), feeder 1 -> 3
  std::vector<geom::Vec2> nodes = {{0, 0}, {100, 0}, {-80, 0}, {180, 0}};
  TownMap m;
  m.name = "parallel";
  m.nodes = nodes;
  auto add_road = [&](int a, int b, std::vector<geom::Vec2> axis) {
    // hand-rolled two-way road along the given axis polyline
    auto off_line = [&](bool rev) {
      std::vector<geom::Vec2> pts = axis;
      if (rev) std::reverse(pts.begin(), pts.end());
      return geom::offset_polyline(pts, 1.75);
    };
    int base = int(m.edges.size());
    for (int k = 0; k < 2; ++k) {
      LaneEdge e;
      e.id = base + k;
      e.from_node = k == 0 ? a : b;
      e.to_node = k == 0 ? b : a;
      e.centerline = off_line(k == 1);
      e.opposite_id = base + (1 - k);
      geom::Vec2 p0 = e.centerline.front();
      e.sidewalks.push_back(geom::rect(p0 + geom::Vec2{-1, -8}, p0 + geom::Vec2{1, -7}));
      m.edges.push_back(std::move(e));
    }
  };
  add_road(2, 0, {{-80, 0}, {-6, 0}});
  add_road(0, 1, {{6, 0}, {94, 0}});                                  // ~88 m
  add_road(0, 1, {{6, 6}, {50, 60}, {94, 6}});                        // detour, longer
  add_road(1, 3, {{106, 0}, {174, 0}});
  m.finalize();

  int feeder_in = 0;  // 2 -> 0
  int feeder_out = find_edge(m, 1, 3);
  Route r = plan_route(m, {feeder_in, 5.0}, {feeder_out, 30.0});
  int straight_road = find_edge(m, 0, 1);  // first 0->1 edge inserted = straight one
  REQUIRE(std::find(r.edges.begin(), r.edges.end(), straight_road) != r.edges.end());
  REQUIRE(r.lane_length ==
          Catch::Approx(oracle_lane_length(m, {feeder_in, 5.0}, {feeder_out, 30.0})).margin(1e-9));
}

TEST_CASE("unreachable goals are rejected") {
  TownMap m = straight_map();
  REQUIRE_THROWS_WITH(plan_route(m, {0, 50.0}, {999, 1.0}),
                      Catch::Matchers::ContainsSubstring("out of range"));
}

TEST_CASE("property: planner length equals the brute-force oracle on town-a") {
  TownMap m = town_a();
  Rng rng(7);
  for (int trial = 0; trial < 60; ++trial) {
    LanePos a{rng.uniform_int(int(m.edges.size())), 0.0};
    LanePos b{rng.uniform_int(int(m.edges.size())), 0.0};
    a.s = rng.uniform(1.0, m.edge(a.edge).length - 1.0);
    b.s = rng.uniform(1.0, m.edge(b.edge).length - 1.0);
    double oracle = oracle_lane_length(m, a, b);
    if (!std::isfinite(oracle)) continue;
    Route r = plan_route(m, a, b);
    INFO("trial " << trial);
    REQUIRE(r.lane_length == Catch::Approx(oracle).margin(1e-6));
  }
}

TEST_CASE("property: turn commands lie only inside approach windows") {
  TownMap m = town_b();
  Rng rng(21);
  const double approach = 25.0;
  for (int trial = 0; trial < 30; ++trial) {
    LanePos a{rng.uniform_int(int(m.edges.size())), 0.0};
    LanePos b{rng.uniform_int(int(m.edges.size())), 0.0};
    a.s = rng.uniform(1.0, m.edge(a.edge).length - 1.0);
    b.s = rng.uniform(1.0, m.edge(b.edge).length - 1.0);
    Route r = plan_route(m, a, b, approach);
    // every non-Follow waypoint must be within `approach` meters (along the
    // route) of some plaza traversal
    for (size_t i = 0; i < r.waypoints.size(); ++i) {
      if (r.commands[i] == Command::Follow) continue;
      double nearest = 1e18;
      for (size_t k = 0; k < r.waypoints.size(); ++k)
        if (r.wp_edge[k] < 0) nearest = std::min(nearest, std::abs(r.cum[k] - r.cum[i]));
      REQUIRE(nearest <= approach + 2.0 + 1e-9);  // plus one waypoint spacing each side
    }
  }
}

TEST_CASE("static grid paints lanes, sidewalks and plazas") {
  TownMap m = straight_map();
  StaticGrid g = build_static_grid(m);
  // eastbound lane center at y=-1.75 mid-road
  geom::Vec2 dir;
  REQUIRE(g.type_at({60, -1.75}, &dir) == CellType::Drivable);
  REQUIRE(dir.x > 0.9);
  REQUIRE(g.type_at({60, 1.75}, &dir) == CellType::Drivable);
  REQUIRE(dir.x < -0.9);  // westbound
  REQUIRE(g.type_at({60, -4.5}) == CellType::Sidewalk);
  REQUIRE(g.type_at({0, 0}) == CellType::Drivable);   // plaza
  REQUIRE(g.type_at({60, 30}) == CellType::Empty);
}
