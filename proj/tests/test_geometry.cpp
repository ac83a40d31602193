#include <random>

#include "catalog/geometry.hpp"
#include "test_support.hpp"

using namespace catalog;

TEST_CASE("iou of identical boxes is one") { CHECK(iou(BoundingBox{5, 5, 10, 10}, BoundingBox{5, 5, 10, 10}) == 1.0); }

TEST_CASE("iou of disjoint boxes is zero") {
  CHECK(iou(BoundingBox{5, 5, 10, 10}, BoundingBox{100, 100, 10, 10}) == 0.0);
}

TEST_CASE("iou of half-shifted boxes is one third") {
  // [0,10]x[0,10] vs [5,15]x[0,10]: intersection 50, union 150.
  CHECK(iou(BoundingBox{5, 5, 10, 10}, BoundingBox{10, 5, 10, 10}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("touching boxes do not overlap") {
  CHECK(iou(BoundingBox{5, 5, 10, 10}, BoundingBox{15, 5, 10, 10}) == 0.0);
}

TEST_CASE("iou rejects degenerate boxes") {
  CHECK_THROWS_AS(iou(BoundingBox{0, 0, 0, 10}, BoundingBox{0, 0, 1, 1}), ValidationError);
  CHECK_THROWS_AS(iou(BoundingBox{0, 0, 1, 1}, BoundingBox{0, 0, 1, -2}), ValidationError);
  CHECK_THROWS_AS(center_distance(BoundingBox{0, 0, -1, 1}, BoundingBox{0, 0, 1, 1}), ValidationError);
}

TEST_CASE("center distance examples") {
  CHECK(center_distance(BoundingBox{0, 0, 2, 2}, BoundingBox{0, 0, 8, 4}) == 0.0);
  CHECK(center_distance(BoundingBox{0, 0, 2, 2}, BoundingBox{3, 4, 2, 2}) == 5.0);
  CHECK(center_distance(BoundingBox{1, 1, 2, 2}, BoundingBox{1, 2, 2, 2}) == 1.0);
}

namespace {

BoundingBox random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(0.0, 200.0);
  std::uniform_real_distribution<double> size(0.5, 120.0);
  return {pos(rng), pos(rng), size(rng), size(rng)};
}

}  // namespace

TEST_CASE("iou is symmetric and bounded on random pairs") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10000; ++trial) {
    const auto a = random_box(rng);
    const auto b = random_box(rng);
    const double ab = iou(a, b);
    REQUIRE(ab == iou(b, a));
    REQUIRE(ab >= 0.0);
    REQUIRE(ab <= 1.0);
    REQUIRE(iou(a, a) == 1.0);
  }
}

TEST_CASE("center distance satisfies the triangle inequality") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10000; ++trial) {
    const auto a = random_box(rng), b = random_box(rng), c = random_box(rng);
    const double ab = center_distance(a, b), bc = center_distance(b, c), ac = center_distance(a, c);
    REQUIRE(ac <= ab + bc + 1e-12);
    REQUIRE(ab == center_distance(b, a));
  }
}

TEST_CASE("center and corner forms round-trip on integer pixels") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> coord(-2000, 2000);
  std::uniform_int_distribution<int> extent(1, 3000);
  for (int trial = 0; trial < 10000; ++trial) {
    const Corners c{double(coord(rng)), double(coord(rng)), 0, 0};
    const Corners full{c.x0, c.y0, c.x0 + extent(rng), c.y0 + extent(rng)};
    const auto box = BoundingBox::from_corners(full);
    const auto back = box.corners();
    REQUIRE(back.x0 == full.x0);
    REQUIRE(back.y0 == full.y0);
    REQUIRE(back.x1 == full.x1);
    REQUIRE(back.y1 == full.y1);
    REQUIRE(BoundingBox::from_corners(back) == box);
  }
}
