// Topological route planning: shortest lane path, waypoint polyline with
// turn connectors through intersection plazas, and the per-waypoint command
// schedule driving the gated policy.
#pragma once

#include <limits>

#include "cirl/town.hpp"

namespace cirl {

struct Route {
  std::vector<geom::Vec2> waypoints;
  std::vector<double> cum;        // cumulative arc length per waypoint
  std::vector<Command> commands;  // schedule entry per waypoint
  std::vector<int> wp_edge;       // owning lane edge per waypoint, -1 inside plazas
  std::vector<int> edges;         // traversed lane edges in order

  double lane_length = 0;  // shortest-path metric: lane-centerline meters
  double length = 0;       // polyline length incl. connectors (time-budget basis)
  int turn_count = 0;
  int intersections_crossed = 0;

  LanePos start_pos, goal_pos;
  geom::Vec2 goal_point;

  /// Owning lane edge at progress index i, falling back to the last lane
  /// edge when inside a plaza.
  int edge_at(size_t i) const {
    for (size_t k = std::min(i, wp_edge.size() - 1);; --k) {
      if (wp_edge[k] >= 0) return wp_edge[k];
      if (k == 0) break;
    }
    return edges.empty() ? -1 : edges.front();
  }
};

namespace detail {

/// Crossing classification by heading change; |angle| below 30 degrees is a
/// straight-through, the sign picks the turn side (CCW positive = left).
inline Command classify_turn(geom::Vec2 dir_in, geom::Vec2 dir_out) {
  double angle = std::atan2(dir_in.cross(dir_out), dir_in.dot(dir_out));
  constexpr double kStraightBand = 30.0 * M_PI / 180.0;
  if (std::abs(angle) < kStraightBand) return Command::Straight;
  return angle > 0 ? Command::TurnLeft : Command::TurnRight;
}

/// Connector curve across a plaza: quadratic Bezier anchored on the two lane
/// tangents for turns, straight segment otherwise. Returns interior points
/// only (endpoints belong to the lanes), spaced ~2 m.
inline std::vector<geom::Vec2> connector_points(geom::Vec2 p_in, geom::Vec2 d_in, geom::Vec2 p_out,
                                                geom::Vec2 d_out) {
  std::vector<geom::Vec2> pts;
  double cr = d_in.cross(d_out);
  geom::Vec2 ctrl;
  if (std::abs(cr) < 0.1) {
    ctrl = (p_in + p_out) * 0.5;
  } else {
    // intersection of p_in + t*d_in and p_out - u*d_out
    double t = (p_out - p_in).cross(d_out) / cr;
    ctrl = p_in + d_in * t;
  }
  double approx_len = (ctrl - p_in).norm() + (p_out - ctrl).norm();
  int n = std::max(2, int(std::ceil(approx_len / 2.0)));
  for (int i = 1; i < n; ++i) {
    double u = double(i) / n;
    geom::Vec2 q = p_in * ((1 - u) * (1 - u)) + ctrl * (2 * u * (1 - u)) + p_out * (u * u);
    pts.push_back(q);
  }
  return pts;
}

}  // namespace detail

/// Shortest route by lane-centerline length from start to goal, built edge
/// by edge (no U-turns onto the paired opposite lane). Throws when the goal
/// is unreachable.
inline Route plan_route(const TownMap& map, LanePos start, LanePos goal,
                        double approach_window = 25.0) {
  require(start.edge >= 0 && start.edge < int(map.edges.size()), ErrorKind::Config,
          "plan_route: start edge out of range");
  require(goal.edge >= 0 && goal.edge < int(map.edges.size()), ErrorKind::Config,
          "plan_route: goal edge out of range");
  const LaneEdge& se = map.edge(start.edge);
  const LaneEdge& ge = map.edge(goal.edge);
  start.s = std::clamp(start.s, 0.0, se.length);
  goal.s = std::clamp(goal.s, 0.0, ge.length);

  constexpr double kInf = std::numeric_limits<double>::infinity();

  // direct same-edge candidate
  double direct = (start.edge == goal.edge && goal.s >= start.s) ? goal.s - start.s : kInf;

  // Dijkstra over edge states: dist[e] = lane meters from start to the END of e
  std::vector<double> dist(map.edges.size(), kInf);
  std::vector<int> pred(map.edges.size(), -1);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[size_t(start.edge)] = se.length - start.s;
  pq.push({dist[size_t(start.edge)], start.edge});
  while (!pq.empty()) {
    auto [d, e] = pq.top();
    pq.pop();
    if (d > dist[size_t(e)]) continue;
    const LaneEdge& cur = map.edge(e);
    for (int o : map.out_edges[size_t(cur.to_node)]) {
      if (o == cur.opposite_id) continue;  // no U-turns
      double nd = d + map.edge(o).length;
      if (nd < dist[size_t(o)]) {
        dist[size_t(o)] = nd;
        pred[size_t(o)] = e;
        pq.push({nd, o});
      }
    }
  }

  // goal reached mid-edge: arrive via a predecessor of goal.edge
  double via_graph = kInf;
  int goal_pred = -1;
  for (int e = 0; e < int(map.edges.size()); ++e) {
    if (dist[size_t(e)] == kInf) continue;
    const LaneEdge& cur = map.edge(e);
    if (cur.to_node != ge.from_node || e == ge.opposite_id) continue;
    double total = dist[size_t(e)] + goal.s;
    if (total < via_graph) {
      via_graph = total;
      goal_pred = e;
    }
  }

  require(direct < kInf || via_graph < kInf, ErrorKind::Config,
          strfmt("plan_route: goal on edge %d unreachable from edge %d", goal.edge, start.edge));

  Route route;
  route.start_pos = start;
  route.goal_pos = goal;
  if (direct <= via_graph) {
    route.edges = {start.edge};
    route.lane_length = direct;
  } else {
    std::vector<int> chain = {goal.edge};
    for (int e = goal_pred; e != -1; e = pred[size_t(e)]) chain.push_back(e);
    std::reverse(chain.begin(), chain.end());
    route.edges = std::move(chain);
    route.lane_length = via_graph;
  }

  // --- waypoint polyline ---
  auto push_wp = [&](geom::Vec2 p, int edge_id) {
    if (!route.waypoints.empty() && (p - route.waypoints.back()).norm() < 0.25) return;
    route.waypoints.push_back(p);
    route.wp_edge.push_back(edge_id);
  };
  auto add_lane_span = [&](const LaneEdge& e, double s0, double s1) {
    int n = std::max(1, int(std::ceil((s1 - s0) / 2.0)));
    for (int i = 0; i <= n; ++i) push_wp(e.point_at(s0 + (s1 - s0) * i / n), e.id);
  };

  struct Crossing {
    size_t entry_wp;  // last waypoint on the incoming lane
    size_t exit_wp;   // first waypoint on the outgoing lane
    Command turn;
  };
  std::vector<Crossing> crossings;

  for (size_t k = 0; k < route.edges.size(); ++k) {
    const LaneEdge& e = map.edge(route.edges[k]);
    double s0 = (k == 0) ? start.s : 0.0;
    double s1 = (k + 1 == route.edges.size()) ? goal.s : e.length;
    if (k > 0) {
      const LaneEdge& prev = map.edge(route.edges[k - 1]);
      Crossing c;
      c.entry_wp = route.waypoints.size() - 1;
      c.turn = detail::classify_turn(prev.dir_at(prev.length), e.dir_at(0));
      for (geom::Vec2 q :
           detail::connector_points(prev.point_at(prev.length), prev.dir_at(prev.length),
                                    e.point_at(0), e.dir_at(0)))
        push_wp(q, -1);
      add_lane_span(e, s0, s1);
      // exit waypoint: first on-lane waypoint after the connector
      c.exit_wp = c.entry_wp + 1;
      while (c.exit_wp < route.wp_edge.size() && route.wp_edge[c.exit_wp] < 0) ++c.exit_wp;
      crossings.push_back(c);
      route.intersections_crossed += 1;
      if (c.turn != Command::Straight) route.turn_count += 1;
    } else {
      add_lane_span(e, s0, s1);
    }
  }
  require(route.waypoints.size() >= 2, ErrorKind::Config, "plan_route: degenerate route");

  route.cum.assign(route.waypoints.size(), 0.0);
  for (size_t i = 0; i + 1 < route.waypoints.size(); ++i)
    route.cum[i + 1] = route.cum[i] + (route.waypoints[i + 1] - route.waypoints[i]).norm();
  route.length = route.cum.back();
  route.goal_point = route.waypoints.back();

  // command schedule: Follow everywhere except the approach window and the
  // plaza traversal of each crossing
  route.commands.assign(route.waypoints.size(), Command::Follow);
  for (const Crossing& c : crossings) {
    double entry_arc = route.cum[c.entry_wp];
    double exit_arc = route.cum[c.exit_wp];
    for (size_t i = 0; i < route.waypoints.size(); ++i)
      if (route.cum[i] >= entry_arc - approach_window && route.cum[i] <= exit_arc)
        route.commands[i] = c.turn;
  }
  return route;
}

}  // namespace cirl
