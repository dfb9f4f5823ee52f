#pragma once

#include <vector>

#include "ctn/qregion.hpp"

namespace ctn {

/// Integer linear constraints  lower <= A x <= upper  over x in {0,1}^N.
/// Equalities are the lower == upper degenerate case.
class ConstraintSystem {
 public:
  ConstraintSystem(int n, int m, std::vector<Coord> a_row_major,
                   std::vector<Coord> lower, std::vector<Coord> upper);

  int num_vars() const { return n_; }
  int num_constraints() const { return m_; }
  Coord a(int row, int col) const {
    return a_[static_cast<std::size_t>(row) * static_cast<std::size_t>(n_) +
              static_cast<std::size_t>(col)];
  }
  const std::vector<Coord>& a_row_major() const { return a_; }
  const std::vector<Coord>& lower() const { return lower_; }
  const std::vector<Coord>& upper() const { return upper_; }

  /// Column j of A as a point in Z^M.
  QN column(int j) const;
  /// Box(lower, upper): the flux of the embedding.
  IntBox flux_box() const;
  /// Same bounds, columns in reverse order (A_j -> A_{N-j+1}).
  ConstraintSystem reversed() const;

  bool satisfied(const std::vector<std::uint8_t>& x) const;

 private:
  int n_, m_;
  std::vector<Coord> a_;  // row-major M x N
  std::vector<Coord> lower_, upper_;
};

/// Cumulative per-site bounds B_1..B_N; B_i encloses every value A x can
/// reach using only the first i variables.
struct Boundary {
  std::vector<IntBox> boxes;  // boxes[i-1] = B_i

  const IntBox& at(int site) const { return boxes[static_cast<std::size_t>(site) - 1]; }
};

Boundary boundary(const ConstraintSystem& sys);

/// One MPS bond: an ordered list of disjoint QRegions with per-region block
/// dimensions (all 1 at construction time).
struct LinkIndex {
  int dim = 1;  // M
  std::vector<QRegion> qregions;
  std::vector<int> dims;

  int size() const { return static_cast<int>(qregions.size()); }
  bool empty() const { return qregions.empty(); }
  /// Union of all QRegions as one region (they are pairwise disjoint).
  QRegion merged() const;
  /// Index of the unique QRegion containing p, or -1.
  int find_containing(const QN& p) const;
  /// Index of the unique QRegion with r subset of it, or -1.
  int find_superset(const QRegion& r) const;
};

/// Sorted LinkIndex over the given regions (unit dims). Ordering is
/// lexicographic by the smallest corner of the first box.
LinkIndex make_link_index(int dim, std::vector<QRegion> regions);

/// Common refinement of two indices: all pairwise intersection pieces plus,
/// per region, what is left after removing the other index entirely. Output
/// regions are pairwise disjoint and cover pointset(a) | pointset(b).
LinkIndex index_refine(const LinkIndex& a, const LinkIndex& b);

/// The regions of sup for which some region of sub, shifted by offset, is a
/// subset. Order of sup is preserved.
LinkIndex chi(const LinkIndex& sub, const LinkIndex& sup, const QN& offset);

/// Backward decomposition sweep only: candidate link indices l_1..l_N with
/// flux at the rightmost site, before forward validation.
std::vector<LinkIndex> backward_decomposition(const ConstraintSystem& sys);

/// Full link-index construction with flux at the rightmost site: backward
/// decomposition followed by the forward validation sweep. Throws
/// InfeasibleSystemError when the feasible set is empty.
std::vector<LinkIndex> constraints_to_indices(const ConstraintSystem& sys);

/// Max number of QRegions over all links, taken over both the flux-at-last
/// and flux-at-first (reversed columns) index families.
int charge_complexity(const ConstraintSystem& sys);

}  // namespace ctn
