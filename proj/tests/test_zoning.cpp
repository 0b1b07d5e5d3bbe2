#include <catch2/catch.hpp>

#include <random>

#include "helpers.hpp"
#include "odflow/zoning.hpp"

using namespace odflow;

namespace {
Zoning two_squares() {
  ZoningUnit a;
  a.id = "A";
  a.polygons.push_back(make_polygon(Ring{{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {}, "A"));
  ZoningUnit b;
  b.id = "B";
  b.polygons.push_back(make_polygon(Ring{{2, 0}, {3, 0}, {3, 1}, {2, 1}}, {}, "B"));
  return Zoning("test", {std::move(a), std::move(b)});
}
}  // namespace

TEST_CASE("assign_unit resolves disjoint squares", "[zoning]") {
  const Zoning zoning = two_squares();
  const SpatialIndex index(zoning);
  auto hit = assign_unit(index, zoning, {2.5, 0.5});
  REQUIRE(hit);
  CHECK(zoning.unit(*hit).id == "B");
  CHECK_FALSE(assign_unit(index, zoning, {1.5, 0.5}).has_value());
}

TEST_CASE("shared edge resolves to the earliest unit in catalog order", "[zoning]") {
  ZoningUnit a;
  a.id = "A";
  a.polygons.push_back(make_polygon(Ring{{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {}, "A"));
  ZoningUnit b;
  b.id = "B";
  b.polygons.push_back(make_polygon(Ring{{1, 0}, {2, 0}, {2, 1}, {1, 1}}, {}, "B"));
  const Zoning zoning("test", {std::move(a), std::move(b)});
  const SpatialIndex index(zoning);
  const Point on_edge{1.0, 0.5};
  auto indexed = assign_unit(index, zoning, on_edge);
  auto scanned = assign_unit_scan(zoning, on_edge);
  REQUIRE(indexed);
  REQUIRE(scanned);
  CHECK(*indexed == *scanned);
  CHECK(zoning.unit(*indexed).id == "A");
}

TEST_CASE("multi-polygon units resolve through any part", "[zoning]") {
  ZoningUnit a;
  a.id = "A";
  a.polygons.push_back(make_polygon(Ring{{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {}, "A"));
  a.polygons.push_back(make_polygon(Ring{{5, 5}, {6, 5}, {6, 6}, {5, 6}}, {}, "A"));
  const Zoning zoning("test", {std::move(a)});
  const SpatialIndex index(zoning);
  CHECK(assign_unit(index, zoning, {0.5, 0.5}).value() == 0);
  CHECK(assign_unit(index, zoning, {5.5, 5.5}).value() == 0);
  CHECK_FALSE(assign_unit(index, zoning, {3.0, 3.0}).has_value());
}

TEST_CASE("duplicate unit ids are rejected", "[zoning]") {
  ZoningUnit a;
  a.id = "A";
  a.polygons.push_back(make_polygon(Ring{{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {}, "A"));
  ZoningUnit a2 = a;
  CHECK_THROWS(Zoning("test", {a, a2}));
}

TEST_CASE("indexed assignment equals exhaustive scan", "[zoning]") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> coord(-1.0, 14.0);
  for (int z = 0; z < 10; ++z) {
    const Zoning zoning = test_helpers::random_zoning(rng, 50);
    const SpatialIndex index(zoning);
    for (int i = 0; i < 1000; ++i) {
      const Point p{coord(rng), coord(rng)};
      CHECK(assign_unit(index, zoning, p) == assign_unit_scan(zoning, p));
    }
  }
}
