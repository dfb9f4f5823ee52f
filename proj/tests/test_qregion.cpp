#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <set>
#include <vector>

#include "ctn/qregion.hpp"
#include "ctn/rng.hpp"

using namespace ctn;

namespace {

// Point-set oracle. Everything here works on explicit lattice points, so it
// is independent of the box algebra it checks.
using PointSet = std::set<std::vector<Coord>>;

PointSet points_of(const QRegion& r) {
  PointSet s;
  for (const QN& p : r.enumerate_points()) s.insert(p.coords());
  return s;
}

PointSet ps_intersect(const PointSet& a, const PointSet& b) {
  PointSet out;
  for (const auto& p : a) {
    if (b.count(p)) out.insert(p);
  }
  return out;
}

PointSet ps_minus(const PointSet& a, const PointSet& b) {
  PointSet out;
  for (const auto& p : a) {
    if (!b.count(p)) out.insert(p);
  }
  return out;
}

PointSet ps_union(const PointSet& a, const PointSet& b) {
  PointSet out = a;
  out.insert(b.begin(), b.end());
  return out;
}

PointSet ps_add(const PointSet& a, const PointSet& b) {
  PointSet out;
  for (const auto& p : a) {
    for (const auto& q : b) {
      std::vector<Coord> s(p);
      for (std::size_t k = 0; k < s.size(); ++k) s[k] += q[k];
      out.insert(s);
    }
  }
  return out;
}

QN qn(std::vector<Coord> c) { return QN(std::move(c)); }
IntBox box(std::vector<Coord> lo, std::vector<Coord> hi) {
  return IntBox(qn(std::move(lo)), qn(std::move(hi)));
}
QRegion region(std::vector<IntBox> boxes) {
  const int d = boxes.front().dim();
  return QRegion(d, std::move(boxes));
}

QRegion random_region(Rng& rng, int dim, int max_boxes) {
  const int nb = static_cast<int>(rng.uniform_int(0, max_boxes));
  std::vector<IntBox> boxes;
  for (int i = 0; i < nb; ++i) {
    std::vector<Coord> lo, hi;
    for (int k = 0; k < dim; ++k) {
      const Coord a = rng.uniform_int(-6, 6);
      const Coord len = rng.uniform_int(0, 4);
      lo.push_back(a);
      hi.push_back(a + len);
    }
    boxes.emplace_back(qn(lo), qn(hi));
  }
  return QRegion(dim, std::move(boxes));
}

}  // namespace

TEST_CASE("box_intersect basics") {
  auto r = box_intersect(box({0, 0}, {2, 2}), box({1, 1}, {3, 3}));
  REQUIRE(r.has_value());
  CHECK(*r == box({1, 1}, {2, 2}));

  CHECK_FALSE(box_intersect(box({0, 0}, {1, 1}), box({2, 2}, {3, 3})).has_value());

  // flux box against a cumulative bound that encloses it
  auto f = box_intersect(box({-1, -1}, {2, 1}), box({-1, -3}, {3, 3}));
  REQUIRE(f.has_value());
  CHECK(*f == box({-1, -1}, {2, 1}));
  // cross-check by enumeration
  CHECK(points_of(QRegion(*f)) ==
        ps_intersect(points_of(QRegion(box({-1, -1}, {2, 1}))),
                     points_of(QRegion(box({-1, -3}, {3, 3})))));

  CHECK_THROWS_AS(box_intersect(box({0}, {1}), box({0, 0}, {1, 1})), Error);
}

TEST_CASE("intersect") {
  const QRegion a(box({0, 0}, {2, 2}));
  const QRegion b(box({1, 1}, {3, 3}));
  CHECK(a.intersect(b) == QRegion(box({1, 1}, {2, 2})));
  CHECK(a.intersect(a) == a);

  const QRegion c = region({box({1, -1}, {2, 0}), box({-1, 1}, {2, 1})});
  const QRegion d(box({0, 0}, {3, 1}));
  const QRegion expect = region({box({1, 0}, {2, 0}), box({0, 1}, {2, 1})});
  CHECK(points_of(c.intersect(d)) == points_of(expect));
}

TEST_CASE("symdiff") {
  const QRegion a(box({0, 0}, {2, 2}));
  const QRegion b(box({1, 1}, {3, 3}));
  const auto [ab, ba] = a.symdiff(b);
  CHECK(points_of(ab) == PointSet{{0, 0}, {1, 0}, {2, 0}, {0, 1}, {0, 2}});
  CHECK(points_of(ba) == PointSet{{3, 1}, {3, 2}, {3, 3}, {1, 3}, {2, 3}});

  const auto [x, y] = a.symdiff(a);
  CHECK(x.empty());
  CHECK(y.empty());

  const QRegion none(2);
  const auto [p, q] = a.symdiff(none);
  CHECK(p == a);
  CHECK(q.empty());
}

TEST_CASE("shift") {
  CHECK(QRegion(box({2}, {4})).shifted(qn({-1})) == QRegion(box({1}, {3})));
  const QRegion a = region({box({1, -1}, {2, 0}), box({-1, 1}, {2, 1})});
  CHECK(a.shifted(QN::zero(2)) == a);
  CHECK(QRegion(box({-1, -1}, {2, 1})).shifted(qn({1, -1})) == QRegion(box({0, -2}, {3, 0})));
}

TEST_CASE("add") {
  const QRegion a(box({0, 1}, {2, 3}));
  const QRegion b(box({-1, 2}, {4, 5}));
  CHECK(a.plus(b) == QRegion(box({-1, 3}, {6, 8})));

  CHECK(a.plus(QRegion(box({0, 0}, {0, 0}))) == a);

  const QRegion u(box({0}, {1}));
  CHECK(u.plus(u) == QRegion(box({0}, {2})));
  CHECK(points_of(u.plus(u)) == ps_add(points_of(u), points_of(u)));
}

TEST_CASE("is_subset") {
  CHECK(QRegion(box({1, 1}, {2, 2})).is_subset_of(QRegion(box({0, 0}, {3, 3}))));
  CHECK(QRegion(2).is_subset_of(QRegion(box({0, 0}, {1, 1}))));
  // an element test against the index {1, [2,3], 4}
  const QRegion l5 = region({box({1}, {1}), box({2}, {3}), box({4}, {4})});
  CHECK(QRegion(box({2}, {3})).is_subset_of(l5));
  CHECK_FALSE(QRegion(box({1}, {2})).is_subset_of(QRegion(box({2}, {3}))));
}

TEST_CASE("contains_point") {
  const QRegion a(box({-1, -1}, {2, 1}));
  CHECK(a.contains(qn({0, 0})));
  CHECK_FALSE(a.contains(qn({3, 0})));
  const QRegion l = region({box({1, -2}, {3, -2}), box({3, -1}, {3, 0})});
  CHECK(l.contains(qn({3, -1})));
}

TEST_CASE("enumerate_points") {
  CHECK(QRegion(box({0, 0}, {1, 1})).enumerate_points().size() == 4);
  CHECK(QRegion(2).enumerate_points().empty());
  const QRegion r = region({box({2}, {3}), box({4}, {4})});
  CHECK(points_of(r) == PointSet{{2}, {3}, {4}});
  CHECK_THROWS_AS(QRegion(box({0, 0}, {2000, 2000})).enumerate_points(1000), BoundExceededError);
}

TEST_CASE("normalize") {
  CHECK(region({box({0}, {2}), box({1}, {3})}) == QRegion(box({0}, {3})));
  const QRegion already = region({box({0, 0}, {1, 1}), box({5, 5}, {6, 6})});
  CHECK(QRegion(2, already.boxes()) == already);

  const QRegion overlap = region({box({0, 0}, {1, 1}), box({1, 1}, {2, 2})});
  CHECK(overlap.num_points() == 7);
  // disjointness of the stored boxes
  for (std::size_t i = 0; i < overlap.boxes().size(); ++i) {
    for (std::size_t j = i + 1; j < overlap.boxes().size(); ++j) {
      CHECK_FALSE(box_intersect(overlap.boxes()[i], overlap.boxes()[j]).has_value());
    }
  }
}

TEST_CASE("normalization is canonical across decompositions") {
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const int dim = static_cast<int>(rng.uniform_int(1, 3));
    const QRegion r = random_region(rng, dim, 4);
    if (r.empty()) continue;
    // rebuild from single-point boxes: same point set, maximally different
    // decomposition
    std::vector<IntBox> dots;
    for (const QN& p : r.enumerate_points()) dots.emplace_back(p, p);
    CHECK(QRegion(dim, dots) == r);
  }
}

TEST_CASE("set-operation properties against the point oracle") {
  Rng rng(7);
  for (int trial = 0; trial < 150; ++trial) {
    const int dim = static_cast<int>(rng.uniform_int(1, 3));
    const QRegion a = random_region(rng, dim, 3);
    const QRegion b = random_region(rng, dim, 3);
    const PointSet pa = points_of(a);
    const PointSet pb = points_of(b);

    const QRegion inter = a.intersect(b);
    const auto [d1, d2] = a.symdiff(b);
    CHECK(points_of(inter) == ps_intersect(pa, pb));
    CHECK(points_of(d1) == ps_minus(pa, pb));
    CHECK(points_of(d2) == ps_minus(pb, pa));

    // the three pieces partition the union
    CHECK(inter.intersect(d1).empty());
    CHECK(inter.intersect(d2).empty());
    CHECK(d1.intersect(d2).empty());
    CHECK(ps_union(ps_union(points_of(inter), points_of(d1)), points_of(d2)) ==
          ps_union(pa, pb));

    CHECK(a.is_subset_of(b) == (ps_minus(pa, pb).empty()));
    CHECK(b.intersect(a) == inter);

    if (pa.size() * pb.size() <= 20000) {
      CHECK(points_of(a.plus(b)) == ps_add(pa, pb));
      CHECK(b.plus(a) == a.plus(b));
    }
  }
}

TEST_CASE("associativity at the point-set level") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int dim = 2;
    const QRegion a = random_region(rng, dim, 2);
    const QRegion b = random_region(rng, dim, 2);
    const QRegion c = random_region(rng, dim, 2);
    CHECK(a.intersect(b).intersect(c) == a.intersect(b.intersect(c)));
  }
}

TEST_CASE("text round trip") {
  const QRegion a = region({box({-1, -1}, {0, 0}), box({-1, 1}, {2, 1})});
  CHECK(QRegion::parse(a.to_string()) == a);
  CHECK(QRegion::parse("empty", 3) == QRegion(3));
  CHECK(QRegion::parse("[(-1,-1),(0,0)]u[(-1,1),(2,1)]") == a);
  CHECK_THROWS_AS(QRegion::parse("[(1,2),(0"), ParseError);
  CHECK_THROWS_AS(QRegion::parse("empty"), ParseError);
  CHECK_THROWS_AS(QRegion::parse("[(1),(2)]x"), ParseError);

  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const QRegion r = random_region(rng, static_cast<int>(rng.uniform_int(1, 3)), 3);
    if (r.empty()) continue;
    CHECK(QRegion::parse(r.to_string()) == r);
  }
}

TEST_CASE("coordinate and construction guards") {
  CHECK_THROWS_AS(qn({Coord{1} << 41}), BoundExceededError);
  CHECK_THROWS_AS(box({2}, {1}), Error);
  CHECK_THROWS_AS(QRegion(0), Error);
}
