// Town maps: a directed lane graph with sidewalks, intersection plazas and
// static obstacles, plus the rasterization grid the observation renderer
// samples from. Two towns are bundled: town-a (training) and town-b
// (held-out evaluation).
#pragma once

#include <fstream>
#include <json.hpp>
#include <memory>
#include <queue>

#include "cirl/geometry.hpp"
#include "cirl/types.hpp"

namespace cirl {

struct LaneEdge {
  int id = -1;
  int from_node = -1, to_node = -1;
  std::vector<geom::Vec2> centerline;  // >= 2 points, lane direction = travel direction
  double width = 3.5;
  int opposite_id = -1;                // paired lane of the same road, other direction
  std::vector<geom::Poly> sidewalks;   // flanking strip(s) on this edge's outer side

  // derived by TownMap::finalize()
  double length = 0;
  std::vector<double> cum;            // cumulative arc length per centerline vertex
  std::vector<geom::Poly> quads;      // one lane-width strip polygon per segment
  std::vector<geom::Aabb> quad_boxes;

  geom::Vec2 point_at(double s) const {
    s = std::clamp(s, 0.0, length);
    for (size_t i = 0; i + 1 < centerline.size(); ++i) {
      if (s <= cum[i + 1] || i + 2 == centerline.size()) {
        double seg = cum[i + 1] - cum[i];
        double t = seg > 0 ? (s - cum[i]) / seg : 0.0;
        return centerline[i] + (centerline[i + 1] - centerline[i]) * t;
      }
    }
    return centerline.back();
  }

  geom::Vec2 dir_at(double s) const {
    s = std::clamp(s, 0.0, length);
    for (size_t i = 0; i + 1 < centerline.size(); ++i)
      if (s <= cum[i + 1] || i + 2 == centerline.size())
        return (centerline[i + 1] - centerline[i]).normalized();
    return geom::Vec2{1, 0};
  }
};

/// Drivable plaza covering an intersection; lanes stop at its boundary.
struct IntersectionPatch {
  int node = -1;
  geom::Poly poly;
  geom::Aabb box;
};

/// Position on a lane: edge id plus arc length along its centerline.
struct LanePos {
  int edge = -1;
  double s = 0;
};

struct TownMap {
  std::string name;
  std::vector<geom::Vec2> nodes;
  std::vector<LaneEdge> edges;
  std::vector<geom::Poly> static_obstacles;
  std::vector<geom::Poly> corner_sidewalks;  // sidewalk squares at plaza corners
  double lane_width = 3.5;
  double patch_half = 6.0;
  double sidewalk_width = 2.0;

  // derived
  std::vector<IntersectionPatch> patches;
  std::vector<std::vector<int>> out_edges;  // per node
  std::vector<geom::Aabb> obstacle_boxes;
  geom::Aabb bounds;

  const LaneEdge& edge(int id) const { return edges.at(size_t(id)); }

  geom::Vec2 lane_point(LanePos p) const { return edge(p.edge).point_at(p.s); }
  geom::Vec2 lane_dir(LanePos p) const { return edge(p.edge).dir_at(p.s); }

  /// All sidewalk polygons (edge strips + corner squares) with their boxes.
  const std::vector<geom::Poly>& sidewalk_polys() const { return sidewalk_polys_; }
  const std::vector<geom::Aabb>& sidewalk_boxes() const { return sidewalk_boxes_; }

  void finalize() {
    require(!nodes.empty() && !edges.empty(), ErrorKind::Data, "town map needs nodes and edges");
    out_edges.assign(nodes.size(), {});
    bounds = geom::Aabb{};
    for (geom::Vec2 n : nodes) bounds.grow(n);
    for (size_t i = 0; i < edges.size(); ++i) {
      LaneEdge& e = edges[i];
      require(e.id == int(i), ErrorKind::Data, "edge ids must be dense and ordered");
      require(e.centerline.size() >= 2, ErrorKind::Data, "edge centerline needs >= 2 points");
      require(e.from_node >= 0 && e.from_node < int(nodes.size()) && e.to_node >= 0 &&
                  e.to_node < int(nodes.size()),
              ErrorKind::Data, "edge endpoints out of range");
      e.cum.assign(e.centerline.size(), 0.0);
      for (size_t k = 0; k + 1 < e.centerline.size(); ++k)
        e.cum[k + 1] = e.cum[k] + (e.centerline[k + 1] - e.centerline[k]).norm();
      e.length = e.cum.back();
      require(e.length > 1.0, ErrorKind::Data, strfmt("edge %d is degenerate", e.id));
      e.quads.clear();
      e.quad_boxes.clear();
      // mitered cross-sections: consecutive quads tile exactly and the two
      // paired lanes of a road never cross the shared road axis
      auto miters = geom::miter_normals(e.centerline);
      for (size_t k = 0; k + 1 < e.centerline.size(); ++k) {
        geom::Vec2 a = e.centerline[k], b = e.centerline[k + 1];
        geom::Vec2 oa = miters[k].dir * (e.width / 2 * miters[k].scale);
        geom::Vec2 ob = miters[k + 1].dir * (e.width / 2 * miters[k + 1].scale);
        geom::Poly q = {a - oa, b - ob, b + ob, a + oa};
        if (geom::poly_area(q) < 0) std::reverse(q.begin(), q.end());
        e.quad_boxes.push_back(geom::Aabb::of(q));
        e.quads.push_back(std::move(q));
      }
      out_edges[size_t(e.from_node)].push_back(e.id);
      for (geom::Vec2 v : e.centerline) bounds.grow(v);
    }
    // intersection plazas
    patches.clear();
    for (size_t n = 0; n < nodes.size(); ++n) {
      IntersectionPatch p;
      p.node = int(n);
      p.poly = geom::rect(nodes[n] - geom::Vec2{patch_half, patch_half},
                          nodes[n] + geom::Vec2{patch_half, patch_half});
      p.box = geom::Aabb::of(p.poly);
      patches.push_back(std::move(p));
    }
    sidewalk_polys_.clear();
    for (const LaneEdge& e : edges)
      for (const geom::Poly& s : e.sidewalks) sidewalk_polys_.push_back(s);
    for (const geom::Poly& s : corner_sidewalks) sidewalk_polys_.push_back(s);
    sidewalk_boxes_.clear();
    for (const geom::Poly& s : sidewalk_polys_) sidewalk_boxes_.push_back(geom::Aabb::of(s));
    obstacle_boxes.clear();
    for (const geom::Poly& o : static_obstacles) obstacle_boxes.push_back(geom::Aabb::of(o));
    for (const geom::Poly& s : sidewalk_polys_)
      for (geom::Vec2 v : s) bounds.grow(v);
    for (const geom::Poly& o : static_obstacles)
      for (geom::Vec2 v : o) bounds.grow(v);
    bounds.pad(5.0);
    validate();
  }

 private:
  std::vector<geom::Poly> sidewalk_polys_;
  std::vector<geom::Aabb> sidewalk_boxes_;

  void validate() const {
    // opposite-lane pairing is symmetric and polygon-disjoint
    for (const LaneEdge& e : edges) {
      require(e.opposite_id >= 0 && e.opposite_id < int(edges.size()), ErrorKind::Data,
              strfmt("edge %d has no opposite lane", e.id));
      const LaneEdge& o = edges[size_t(e.opposite_id)];
      require(o.opposite_id == e.id, ErrorKind::Data,
              strfmt("opposite pairing not symmetric for edge %d", e.id));
      for (const geom::Poly& qa : e.quads)
        for (const geom::Poly& qb : o.quads)
          require(geom::intersection_area(qa, qb) < 1e-9, ErrorKind::Data,
                  strfmt("paired lanes %d/%d overlap", e.id, o.id));
    }
    // strong connectivity over the directed lane graph
    auto reach = [&](bool reversed) {
      std::vector<char> seen(nodes.size(), 0);
      std::queue<int> q;
      q.push(0);
      seen[0] = 1;
      size_t count = 1;
      while (!q.empty()) {
        int n = q.front();
        q.pop();
        for (const LaneEdge& e : edges) {
          int from = reversed ? e.to_node : e.from_node;
          int to = reversed ? e.from_node : e.to_node;
          if (from == n && !seen[size_t(to)]) {
            seen[size_t(to)] = 1;
            ++count;
            q.push(to);
          }
        }
      }
      return count == nodes.size();
    };
    require(reach(false) && reach(true), ErrorKind::Data,
            strfmt("town '%s' lane graph is not strongly connected", name.c_str()));
  }
};

// ---------------------------------------------------------------------------
// Rasterization grid: the whole map pre-painted at 0.5 m resolution so the
// per-step egocentric render is a plain lookup.

enum class CellType : uint8_t { Empty = 0, Drivable = 1, Sidewalk = 2, Obstacle = 3 };

struct StaticGrid {
  geom::Vec2 origin;
  double cell = 0.5;
  int w = 0, h = 0;
  std::vector<uint8_t> type;
  std::vector<float> dir_x, dir_y;  // lane direction; zero for plazas

  size_t idx(int cx, int cy) const { return size_t(cy) * w + cx; }

  bool cell_of(geom::Vec2 p, int& cx, int& cy) const {
    cx = int(std::floor((p.x - origin.x) / cell));
    cy = int(std::floor((p.y - origin.y) / cell));
    return cx >= 0 && cx < w && cy >= 0 && cy < h;
  }

  CellType type_at(geom::Vec2 p, geom::Vec2* dir = nullptr) const {
    int cx, cy;
    if (!cell_of(p, cx, cy)) return CellType::Empty;
    size_t i = idx(cx, cy);
    if (dir) *dir = {dir_x[i], dir_y[i]};
    return CellType(type[i]);
  }
};

inline StaticGrid build_static_grid(const TownMap& map, double cell = 0.5) {
  StaticGrid g;
  g.cell = cell;
  g.origin = map.bounds.lo;
  g.w = int(std::ceil((map.bounds.hi.x - map.bounds.lo.x) / cell));
  g.h = int(std::ceil((map.bounds.hi.y - map.bounds.lo.y) / cell));
  g.type.assign(size_t(g.w) * g.h, uint8_t(CellType::Empty));
  g.dir_x.assign(size_t(g.w) * g.h, 0.f);
  g.dir_y.assign(size_t(g.w) * g.h, 0.f);

  auto paint = [&](const geom::Poly& poly, CellType t, geom::Vec2 dir) {
    geom::Aabb b = geom::Aabb::of(poly);
    int x0 = std::max(0, int(std::floor((b.lo.x - g.origin.x) / cell)));
    int x1 = std::min(g.w - 1, int(std::ceil((b.hi.x - g.origin.x) / cell)));
    int y0 = std::max(0, int(std::floor((b.lo.y - g.origin.y) / cell)));
    int y1 = std::min(g.h - 1, int(std::ceil((b.hi.y - g.origin.y) / cell)));
    for (int cy = y0; cy <= y1; ++cy)
      for (int cx = x0; cx <= x1; ++cx) {
        geom::Vec2 c{g.origin.x + (cx + 0.5) * cell, g.origin.y + (cy + 0.5) * cell};
        if (!geom::point_in_convex(c, poly)) continue;
        size_t i = g.idx(cx, cy);
        g.type[i] = uint8_t(t);
        g.dir_x[i] = float(dir.x);
        g.dir_y[i] = float(dir.y);
      }
  };

  for (const geom::Poly& s : map.sidewalk_polys()) paint(s, CellType::Sidewalk, {0, 0});
  for (const IntersectionPatch& p : map.patches) paint(p.poly, CellType::Drivable, {0, 0});
  for (const LaneEdge& e : map.edges)
    for (size_t k = 0; k < e.quads.size(); ++k) {
      geom::Vec2 d = (e.centerline[k + 1] - e.centerline[k]).normalized();
      paint(e.quads[k], CellType::Drivable, d);
    }
  for (const geom::Poly& o : map.static_obstacles) paint(o, CellType::Obstacle, {0, 0});
  return g;
}

// ---------------------------------------------------------------------------
// Grid-town construction

namespace townbuild {

struct RoadSpec {
  int a = 0, b = 0;
};

/// Builds a two-way grid town. Every road contributes one directed lane per
/// direction (right-hand traffic) plus a sidewalk strip on each side; plaza
/// corner squares join the strips. Buildings fill the given block rectangles
/// and a perimeter wall closes the map.
inline TownMap build_town(const std::string& name, std::vector<geom::Vec2> nodes,
                          const std::vector<RoadSpec>& roads,
                          const std::vector<geom::Poly>& buildings, double lane_width = 3.5,
                          double patch_half = 6.0, double sidewalk_width = 2.0) {
  TownMap map;
  map.name = name;
  map.nodes = std::move(nodes);
  map.lane_width = lane_width;
  map.patch_half = patch_half;
  map.sidewalk_width = sidewalk_width;

  for (const RoadSpec& r : roads) {
    geom::Vec2 na = map.nodes.at(size_t(r.a)), nb = map.nodes.at(size_t(r.b));
    geom::Vec2 d = (nb - na).normalized();
    geom::Vec2 start = na + d * patch_half;
    geom::Vec2 end = nb - d * patch_half;
    require((end - start).norm() > 2.0, ErrorKind::Config,
            strfmt("road %d-%d too short for plaza spacing", r.a, r.b));

    auto make_edge = [&](int from, int to, geom::Vec2 p0, geom::Vec2 p1) {
      LaneEdge e;
      e.id = int(map.edges.size());
      e.from_node = from;
      e.to_node = to;
      e.width = lane_width;
      geom::Vec2 dir = (p1 - p0).normalized();
      geom::Vec2 off = dir.perp_right() * (lane_width / 2);
      e.centerline = {p0 + off, p1 + off};
      // sidewalk strip on this edge's right (outer) side
      geom::Vec2 so = dir.perp_right();
      geom::Vec2 s0 = p0 + so * lane_width, s1 = p1 + so * lane_width;
      geom::Poly strip = {s0, s1, s1 + so * sidewalk_width, s0 + so * sidewalk_width};
      if (geom::poly_area(strip) < 0) std::reverse(strip.begin(), strip.end());
      e.sidewalks.push_back(std::move(strip));
      map.edges.push_back(std::move(e));
      return map.edges.back().id;
    };

    int fwd = make_edge(r.a, r.b, start, end);
    int rev = make_edge(r.b, r.a, end, start);
    map.edges[size_t(fwd)].opposite_id = rev;
    map.edges[size_t(rev)].opposite_id = fwd;
  }

  // sidewalk squares at the four corners of every plaza
  for (geom::Vec2 n : map.nodes) {
    double inr = patch_half, outr = patch_half + sidewalk_width;
    for (int sx : {-1, 1})
      for (int sy : {-1, 1}) {
        geom::Vec2 lo{n.x + (sx < 0 ? -outr : inr), n.y + (sy < 0 ? -outr : inr)};
        geom::Vec2 hi{n.x + (sx < 0 ? -inr : outr), n.y + (sy < 0 ? -inr : outr)};
        map.corner_sidewalks.push_back(geom::rect(lo, hi));
      }
  }

  map.static_obstacles = buildings;

  // perimeter wall: four slabs just outside the outermost sidewalks
  geom::Aabb b;
  for (geom::Vec2 n : map.nodes) b.grow(n);
  b.pad(patch_half + sidewalk_width + 6.0);
  double t = 1.0;
  map.static_obstacles.push_back(geom::rect({b.lo.x - t, b.lo.y - t}, {b.hi.x + t, b.lo.y}));
  map.static_obstacles.push_back(geom::rect({b.lo.x - t, b.hi.y}, {b.hi.x + t, b.hi.y + t}));
  map.static_obstacles.push_back(geom::rect({b.lo.x - t, b.lo.y}, {b.lo.x, b.hi.y}));
  map.static_obstacles.push_back(geom::rect({b.hi.x, b.lo.y}, {b.hi.x + t, b.hi.y}));

  map.finalize();
  return map;
}

inline geom::Poly block_building(geom::Vec2 corner_lo, geom::Vec2 corner_hi, double margin) {
  return geom::rect(corner_lo + geom::Vec2{margin, margin}, corner_hi - geom::Vec2{margin, margin});
}

}  // namespace townbuild

/// Training town: 4x3 grid, 80 m spacing, two roads removed for degree variety.
inline TownMap town_a() {
  std::vector<geom::Vec2> nodes;
  for (int row = 0; row < 3; ++row)
    for (int col = 0; col < 4; ++col) nodes.push_back({col * 80.0, row * 80.0});
  auto id = [](int col, int row) { return row * 4 + col; };
  std::vector<townbuild::RoadSpec> roads;
  for (int row = 0; row < 3; ++row)
    for (int col = 0; col + 1 < 4; ++col)
      if (!(row == 1 && col == 2))  // removed road (2,1)-(3,1)
        roads.push_back({id(col, row), id(col + 1, row)});
  for (int col = 0; col < 4; ++col)
    for (int row = 0; row + 1 < 3; ++row)
      if (!(col == 1 && row == 0))  // removed road (1,0)-(1,1)
        roads.push_back({id(col, row), id(col, row + 1)});
  // one building per block, inset from road axes by lane+sidewalk+gap
  const double m = 3.5 + 2.0 + 1.5;
  std::vector<geom::Poly> buildings;
  for (int row = 0; row < 2; ++row)
    for (int col = 0; col < 3; ++col)
      buildings.push_back(townbuild::block_building({col * 80.0, row * 80.0},
                                                    {(col + 1) * 80.0, (row + 1) * 80.0}, m));
  return townbuild::build_town("town-a", std::move(nodes), roads, buildings);
}

/// Held-out town: 3x4 grid with 90 m x 70 m blocks, a single removed road
/// and degree-4 intersections that town-a does not have.
inline TownMap town_b() {
  std::vector<geom::Vec2> nodes;
  for (int row = 0; row < 4; ++row)
    for (int col = 0; col < 3; ++col) nodes.push_back({col * 90.0, row * 70.0});
  auto id = [](int col, int row) { return row * 3 + col; };
  std::vector<townbuild::RoadSpec> roads;
  for (int row = 0; row < 4; ++row)
    for (int col = 0; col + 1 < 3; ++col) roads.push_back({id(col, row), id(col + 1, row)});
  for (int col = 0; col < 3; ++col)
    for (int row = 0; row + 1 < 4; ++row)
      if (!(col == 0 && row == 1))  // removed road (0,1)-(0,2)
        roads.push_back({id(col, row), id(col, row + 1)});
  const double m = 3.5 + 2.0 + 1.5;
  std::vector<geom::Poly> buildings;
  for (int row = 0; row < 3; ++row)
    for (int col = 0; col < 2; ++col)
      buildings.push_back(townbuild::block_building({col * 90.0, row * 70.0},
                                                    {(col + 1) * 90.0, (row + 1) * 70.0}, m));
  return townbuild::build_town("town-b", std::move(nodes), roads, buildings);
}

inline TownMap builtin_map(const std::string& name) {
  if (name == "town-a") return town_a();
  if (name == "town-b") return town_b();
  throw_config(strfmt("unknown map '%s' (expected town-a or town-b)", name.c_str()));
}

// ---------------------------------------------------------------------------
// Map file format: versioned human-readable JSON listing nodes, edges
// (centerlines, widths, opposite pairing, sidewalks) and obstacles.

inline nlohmann::json map_to_json(const TownMap& map) {
  nlohmann::json j;
  j["format"] = "cirl-town";
  j["version"] = 1;
  j["name"] = map.name;
  j["lane_width"] = map.lane_width;
  j["patch_half"] = map.patch_half;
  j["sidewalk_width"] = map.sidewalk_width;
  for (geom::Vec2 n : map.nodes) j["nodes"].push_back({n.x, n.y});
  auto poly_json = [](const geom::Poly& p) {
    nlohmann::json out = nlohmann::json::array();
    for (geom::Vec2 v : p) out.push_back({v.x, v.y});
    return out;
  };
  j["edges"] = nlohmann::json::array();
  for (const LaneEdge& e : map.edges) {
    nlohmann::json je;
    je["id"] = e.id;
    je["from"] = e.from_node;
    je["to"] = e.to_node;
    je["width"] = e.width;
    je["opposite"] = e.opposite_id;
    je["centerline"] = poly_json(e.centerline);
    je["sidewalks"] = nlohmann::json::array();
    for (const geom::Poly& s : e.sidewalks) je["sidewalks"].push_back(poly_json(s));
    j["edges"].push_back(std::move(je));
  }
  j["corner_sidewalks"] = nlohmann::json::array();
  for (const geom::Poly& s : map.corner_sidewalks) j["corner_sidewalks"].push_back(poly_json(s));
  j["static_obstacles"] = nlohmann::json::array();
  for (const geom::Poly& o : map.static_obstacles) j["static_obstacles"].push_back(poly_json(o));
  return j;
}

inline TownMap map_from_json(const nlohmann::json& j) {
  require(j.value("format", "") == "cirl-town", ErrorKind::Data, "not a cirl-town map file");
  require(j.value("version", 0) == 1, ErrorKind::Data, "unsupported map file version");
  TownMap map;
  map.name = j.at("name").get<std::string>();
  map.lane_width = j.at("lane_width").get<double>();
  map.patch_half = j.at("patch_half").get<double>();
  map.sidewalk_width = j.at("sidewalk_width").get<double>();
  auto poly_from = [](const nlohmann::json& ja) {
    geom::Poly p;
    for (const auto& v : ja) p.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
    return p;
  };
  for (const auto& v : j.at("nodes")) map.nodes.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
  for (const auto& je : j.at("edges")) {
    LaneEdge e;
    e.id = je.at("id").get<int>();
    e.from_node = je.at("from").get<int>();
    e.to_node = je.at("to").get<int>();
    e.width = je.at("width").get<double>();
    e.opposite_id = je.at("opposite").get<int>();
    e.centerline = poly_from(je.at("centerline"));
    for (const auto& s : je.at("sidewalks")) e.sidewalks.push_back(poly_from(s));
    map.edges.push_back(std::move(e));
  }
  for (const auto& s : j.value("corner_sidewalks", nlohmann::json::array()))
    map.corner_sidewalks.push_back(poly_from(s));
  for (const auto& o : j.value("static_obstacles", nlohmann::json::array()))
    map.static_obstacles.push_back(poly_from(o));
  map.finalize();
  return map;
}

inline void save_map(const std::string& path, const TownMap& map) {
  std::ofstream os(path);
  require(bool(os), ErrorKind::Data, strfmt("cannot write map file %s", path.c_str()));
  os << map_to_json(map).dump(1) << "\n";
}

inline TownMap load_map(const std::string& path) {
  std::ifstream is(path);
  require(bool(is), ErrorKind::Data, strfmt("cannot open map file %s", path.c_str()));
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw_data(strfmt("map file %s: %s", path.c_str(), e.what()));
  }
  return map_from_json(j);
}

}  // namespace cirl
