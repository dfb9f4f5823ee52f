#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ctn/errors.hpp"

namespace ctn {

using Coord = std::int64_t;

/// Coordinates are rejected beyond this magnitude. Cumulative bounds are sums
/// of |A| entries, so desk-scale instances never get close.
inline constexpr Coord kCoordLimit = Coord{1} << 40;

/// A quantum number: an integer point in Z^M.
class QN {
 public:
  explicit QN(std::vector<Coord> coords);
  static QN zero(int dim);

  int dim() const { return static_cast<int>(coords_.size()); }
  Coord operator[](int k) const { return coords_[static_cast<std::size_t>(k)]; }
  const std::vector<Coord>& coords() const { return coords_; }

  QN operator+(const QN& o) const;
  QN operator-(const QN& o) const;
  QN operator-() const;

  bool operator==(const QN& o) const { return coords_ == o.coords_; }
  bool operator<(const QN& o) const { return coords_ < o.coords_; }

  std::string to_string() const;

 private:
  std::vector<Coord> coords_;
};

/// An axis-aligned box of lattice points with inclusive corners, lo <= hi
/// componentwise. Empty boxes are never stored; absence is represented by
/// std::optional or by an empty QRegion.
class IntBox {
 public:
  IntBox(QN lo, QN hi);

  int dim() const { return lo_.dim(); }
  const QN& lo() const { return lo_; }
  const QN& hi() const { return hi_; }

  bool contains(const QN& p) const;
  bool contains_box(const IntBox& b) const;
  std::uint64_t point_count() const;
  IntBox translated(const QN& v) const;

  bool operator==(const IntBox& o) const { return lo_ == o.lo_ && hi_ == o.hi_; }
  bool operator<(const IntBox& o) const {
    return lo_ < o.lo_ || (lo_ == o.lo_ && hi_ < o.hi_);
  }

  std::string to_string() const;

 private:
  QN lo_, hi_;
};

/// Componentwise intersection; absent when the boxes are disjoint.
std::optional<IntBox> box_intersect(const IntBox& a, const IntBox& b);

/// A quantum region: a finite union of disjoint integer boxes in Z^M.
///
/// The representation is canonical: normalization atomizes the boxes on the
/// grid induced by all box faces and then re-merges runs dimension by
/// dimension, so two regions with equal point sets compare equal with
/// operator==. The empty region is a first-class value and carries its
/// dimension.
class QRegion {
 public:
  explicit QRegion(int dim);
  explicit QRegion(const IntBox& box);
  QRegion(int dim, std::vector<IntBox> boxes);
  static QRegion point(const QN& p);

  int dim() const { return dim_; }
  bool empty() const { return boxes_.empty(); }
  const std::vector<IntBox>& boxes() const { return boxes_; }

  std::uint64_t num_points() const;
  bool contains(const QN& p) const;
  bool is_subset_of(const QRegion& b) const;

  QRegion intersect(const QRegion& b) const;
  /// Set difference: points of *this not in b.
  QRegion minus(const QRegion& b) const;
  /// (this \ b, b \ this).
  std::pair<QRegion, QRegion> symdiff(const QRegion& b) const;
  QRegion shifted(const QN& v) const;
  /// Minkowski sum at the point-set level (componentwise box addition).
  QRegion plus(const QRegion& b) const;

  /// All lattice points, each exactly once, in deterministic order.
  /// Throws BoundExceededError when more than `bound` points.
  std::vector<QN> enumerate_points(std::uint64_t bound = 1000000) const;

  bool operator==(const QRegion& o) const {
    return dim_ == o.dim_ && boxes_ == o.boxes_;
  }

  /// Text form like `[(-1,-1),(0,0)]u[(-1,1),(2,1)]`, or `empty`.
  std::string to_string() const;
  /// Inverse of to_string. `dim` is required only for the `empty` literal.
  static QRegion parse(const std::string& text, int dim = -1);

 private:
  int dim_;
  std::vector<IntBox> boxes_;  // pairwise disjoint, canonical order

  void normalize();
};

}  // namespace ctn
