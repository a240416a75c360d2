#include <catch2/catch_amalgamated.hpp>

#include "cirl/geometry.hpp"

using namespace cirl::geom;

TEST_CASE("polygon area of the unit square") {
  Poly sq = rect({0, 0}, {1, 1});
  REQUIRE(poly_area(sq) == 1.0);
}

TEST_CASE("convex clip of overlapping squares") {
  Poly a = rect({0, 0}, {2, 2});
  Poly b = rect({1, 1}, {3, 3});
  REQUIRE(intersection_area(a, b) == Catch::Approx(1.0).margin(1e-12));
  Poly c = rect({5, 5}, {6, 6});
  REQUIRE(intersection_area(a, c) == 0.0);
}

TEST_CASE("oriented rect has the right area and contains its center") {
  Poly r = oriented_rect({3, 4}, 0.7, 2.0, 0.9);
  REQUIRE(poly_area(r) == Catch::Approx(4 * 2.0 * 0.9).margin(1e-12));
  REQUIRE(point_in_convex({3, 4}, r));
}

TEST_CASE("SAT intersection agrees with clip area on random rectangles") {
  cirl::Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    Poly a = oriented_rect({rng.uniform(-3, 3), rng.uniform(-3, 3)}, rng.uniform(0, 6.28),
                           rng.uniform(0.3, 2), rng.uniform(0.3, 2));
    Poly b = oriented_rect({rng.uniform(-3, 3), rng.uniform(-3, 3)}, rng.uniform(0, 6.28),
                           rng.uniform(0.3, 2), rng.uniform(0.3, 2));
    double area = intersection_area(a, b);
    bool sat = polys_intersect(a, b);
    if (area > 1e-9) REQUIRE(sat);
    if (!sat) REQUIRE(area < 1e-9);
  }
}

TEST_CASE("disc-polygon intersection: containment, edge contact, separation") {
  Poly sq = rect({0, 0}, {2, 2});
  REQUIRE(poly_intersects_disc(sq, {{1, 1}, 0.1}));
  REQUIRE(poly_intersects_disc(sq, {{3, 1}, 1.0}));  // touches edge x=2
  REQUIRE_FALSE(poly_intersects_disc(sq, {{4, 1}, 0.5}));
}

TEST_CASE("union overlap area does not double count overlapping regions") {
  Poly fp = rect({0, 0}, {2, 1});
  Poly r1 = rect({-1, -1}, {1, 2});
  Poly r2 = rect({-0.5, -1}, {1, 2});
  std::vector<const Poly*> regions = {&r1, &r2};
  REQUIRE(union_overlap_area(fp, regions) == Catch::Approx(1.0).margin(1e-12));

  Poly r3 = rect({1.5, 0}, {3, 3});
  regions = {&r1, &r3};
  REQUIRE(union_overlap_area(fp, regions) == Catch::Approx(1.0 + 0.5).margin(1e-12));
}

TEST_CASE("union overlap matches a Monte Carlo oracle on random regions") {
  cirl::Rng rng(42);
  Poly fp = oriented_rect({0.3, -0.2}, 0.4, 1.5, 0.8);
  std::vector<Poly> regions;
  for (int i = 0; i < 4; ++i)
    regions.push_back(oriented_rect({rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)},
                                    rng.uniform(0, 3.14), rng.uniform(0.5, 1.5),
                                    rng.uniform(0.5, 1.5)));
  std::vector<const Poly*> ptrs;
  for (auto& r : regions) ptrs.push_back(&r);
  double exact = union_overlap_area(fp, ptrs);

  int hits = 0;
  const int n = 200000;
  Vec2 f{std::cos(0.4), std::sin(0.4)};
  Vec2 l = f.perp_left();
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform(-1.5, 1.5), w = rng.uniform(-0.8, 0.8);
    Vec2 p = Vec2{0.3, -0.2} + f * u + l * w;
    for (const Poly* r : ptrs)
      if (point_in_convex(p, *r)) {
        ++hits;
        break;
      }
  }
  double mc = double(hits) / n * poly_area(fp);
  REQUIRE(exact == Catch::Approx(mc).margin(0.02));
  REQUIRE(exact >= 0.0);
}

TEST_CASE("angle normalization lands in (-pi, pi]") {
  REQUIRE(normalize_angle(3 * M_PI) == Catch::Approx(M_PI));
  REQUIRE(normalize_angle(-3 * M_PI) == Catch::Approx(M_PI));
  REQUIRE(normalize_angle(0.3) == Catch::Approx(0.3));
  REQUIRE(normalize_angle(2 * M_PI - 0.3) == Catch::Approx(-0.3));
}
