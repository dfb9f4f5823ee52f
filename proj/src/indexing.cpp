#include "ctn/indexing.hpp"

#include <algorithm>

#include "ctn/errors.hpp"

namespace ctn {

// ---------------------------------------------------------------------------
// ConstraintSystem

ConstraintSystem::ConstraintSystem(int n, int m, std::vector<Coord> a_row_major,
                                   std::vector<Coord> lower, std::vector<Coord> upper)
    : n_(n), m_(m), a_(std::move(a_row_major)), lower_(std::move(lower)), upper_(std::move(upper)) {
  if (n_ < 1 || m_ < 1) throw ParseError("constraint system needs N >= 1 and M >= 1");
  if (a_.size() != static_cast<std::size_t>(n_) * static_cast<std::size_t>(m_)) {
    throw ParseError("A has " + std::to_string(a_.size()) + " entries, expected " +
                     std::to_string(n_ * m_));
  }
  if (lower_.size() != static_cast<std::size_t>(m_) || upper_.size() != static_cast<std::size_t>(m_)) {
    throw ParseError("bound vectors must have M entries");
  }
  constexpr Coord entry_limit = Coord{1} << 20;
  for (Coord v : a_) {
    if (v > entry_limit || v < -entry_limit) {
      throw ParseError("matrix entry exceeds 2^20: " + std::to_string(v));
    }
  }
  for (int k = 0; k < m_; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    if (lower_[ks] > upper_[ks]) {
      throw ParseError("lower bound exceeds upper bound in row " + std::to_string(k));
    }
  }
}

QN ConstraintSystem::column(int j) const {
  std::vector<Coord> c(static_cast<std::size_t>(m_));
  for (int k = 0; k < m_; ++k) c[static_cast<std::size_t>(k)] = a(k, j);
  return QN(std::move(c));
}

IntBox ConstraintSystem::flux_box() const { return IntBox(QN(lower_), QN(upper_)); }

ConstraintSystem ConstraintSystem::reversed() const {
  std::vector<Coord> rev(a_.size());
  for (int k = 0; k < m_; ++k) {
    for (int j = 0; j < n_; ++j) {
      rev[static_cast<std::size_t>(k) * static_cast<std::size_t>(n_) +
          static_cast<std::size_t>(j)] = a(k, n_ - 1 - j);
    }
  }
  return ConstraintSystem(n_, m_, std::move(rev), lower_, upper_);
}

bool ConstraintSystem::satisfied(const std::vector<std::uint8_t>& x) const {
  if (x.size() != static_cast<std::size_t>(n_)) throw Error("bitstring length mismatch");
  for (int k = 0; k < m_; ++k) {
    Coord s = 0;
    for (int j = 0; j < n_; ++j) {
      if (x[static_cast<std::size_t>(j)]) s += a(k, j);
    }
    const auto ks = static_cast<std::size_t>(k);
    if (s < lower_[ks] || s > upper_[ks]) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Boundary

Boundary boundary(const ConstraintSystem& sys) {
  const int n = sys.num_vars();
  const int m = sys.num_constraints();
  Boundary b;
  std::vector<Coord> lo(static_cast<std::size_t>(m), 0);
  std::vector<Coord> hi(static_cast<std::size_t>(m), 0);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < m; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      const Coord v = sys.a(k, j);
      lo[ks] += std::min<Coord>(0, v);
      hi[ks] += std::max<Coord>(0, v);
    }
    b.boxes.emplace_back(QN(lo), QN(hi));
  }
  return b;
}

// ---------------------------------------------------------------------------
// LinkIndex

QRegion LinkIndex::merged() const {
  std::vector<IntBox> all;
  for (const QRegion& q : qregions) {
    all.insert(all.end(), q.boxes().begin(), q.boxes().end());
  }
  return QRegion(dim, std::move(all));
}

int LinkIndex::find_containing(const QN& p) const {
  for (int i = 0; i < size(); ++i) {
    if (qregions[static_cast<std::size_t>(i)].contains(p)) return i;
  }
  return -1;
}

int LinkIndex::find_superset(const QRegion& r) const {
  for (int i = 0; i < size(); ++i) {
    if (r.is_subset_of(qregions[static_cast<std::size_t>(i)])) return i;
  }
  return -1;
}

namespace {

bool region_order(const QRegion& a, const QRegion& b) {
  return a.boxes() < b.boxes();  // lexicographic; first box lo decides
}

LinkIndex restrict_to(const LinkIndex& l, const IntBox& box) {
  LinkIndex out;
  out.dim = l.dim;
  const QRegion box_region(box);
  for (const QRegion& q : l.qregions) {
    QRegion r = q.intersect(box_region);
    if (!r.empty()) {
      out.qregions.push_back(std::move(r));
      out.dims.push_back(1);
    }
  }
  return out;
}

LinkIndex shift_index(const LinkIndex& l, const QN& v) {
  LinkIndex out;
  out.dim = l.dim;
  for (const QRegion& q : l.qregions) {
    out.qregions.push_back(q.shifted(v));
    out.dims.push_back(1);
  }
  return out;
}

/// Union of two selections from the same sup index, in sup order.
LinkIndex combine_kept(const LinkIndex& sup, const std::vector<bool>& keep) {
  LinkIndex out;
  out.dim = sup.dim;
  for (int i = 0; i < sup.size(); ++i) {
    if (keep[static_cast<std::size_t>(i)]) {
      out.qregions.push_back(sup.qregions[static_cast<std::size_t>(i)]);
      out.dims.push_back(sup.dims[static_cast<std::size_t>(i)]);
    }
  }
  return out;
}

std::vector<bool> chi_mask(const LinkIndex& sub, const LinkIndex& sup, const QN& offset) {
  std::vector<bool> keep(static_cast<std::size_t>(sup.size()), false);
  for (const QRegion& qa : sub.qregions) {
    const QRegion shifted = qa.shifted(offset);
    for (int i = 0; i < sup.size(); ++i) {
      if (!keep[static_cast<std::size_t>(i)] &&
          shifted.is_subset_of(sup.qregions[static_cast<std::size_t>(i)])) {
        keep[static_cast<std::size_t>(i)] = true;
      }
    }
  }
  return keep;
}

}  // namespace

LinkIndex make_link_index(int dim, std::vector<QRegion> regions) {
  LinkIndex out;
  out.dim = dim;
  std::sort(regions.begin(), regions.end(), region_order);
  out.qregions = std::move(regions);
  out.dims.assign(out.qregions.size(), 1);
  return out;
}

LinkIndex index_refine(const LinkIndex& a, const LinkIndex& b) {
  if (a.dim != b.dim) throw Error("index dimension mismatch");
  std::vector<QRegion> pieces;
  for (const QRegion& p : a.qregions) {
    for (const QRegion& q : b.qregions) {
      QRegion r = p.intersect(q);
      if (!r.empty()) pieces.push_back(std::move(r));
    }
  }
  const QRegion all_a = a.merged();
  const QRegion all_b = b.merged();
  for (const QRegion& p : a.qregions) {
    QRegion r = p.minus(all_b);
    if (!r.empty()) pieces.push_back(std::move(r));
  }
  for (const QRegion& q : b.qregions) {
    QRegion r = q.minus(all_a);
    if (!r.empty()) pieces.push_back(std::move(r));
  }
  return make_link_index(a.dim, std::move(pieces));
}

LinkIndex chi(const LinkIndex& sub, const LinkIndex& sup, const QN& offset) {
  if (sub.dim != sup.dim) throw Error("index dimension mismatch");
  return combine_kept(sup, chi_mask(sub, sup, offset));
}

std::vector<LinkIndex> backward_decomposition(const ConstraintSystem& sys) {
  const int n = sys.num_vars();
  const int m = sys.num_constraints();
  const Boundary bounds = boundary(sys);

  std::vector<LinkIndex> links(static_cast<std::size_t>(n));
  const auto flux = box_intersect(sys.flux_box(), bounds.at(n));
  if (!flux) {
    throw InfeasibleSystemError("flux box does not intersect the cumulative bounds");
  }
  links[static_cast<std::size_t>(n - 1)] = make_link_index(m, {QRegion(*flux)});

  for (int i = n - 1; i >= 1; --i) {
    const LinkIndex& next = links[static_cast<std::size_t>(i)];
    const IntBox& bound = bounds.at(i);
    const LinkIndex l0 = restrict_to(next, bound);
    const LinkIndex l1 = restrict_to(shift_index(next, -sys.column(i)), bound);
    links[static_cast<std::size_t>(i - 1)] = index_refine(l0, l1);
    if (links[static_cast<std::size_t>(i - 1)].empty()) {
      throw InfeasibleSystemError("link index " + std::to_string(i) +
                                  " is empty in the backward sweep");
    }
  }
  return links;
}

std::vector<LinkIndex> constraints_to_indices(const ConstraintSystem& sys) {
  const int n = sys.num_vars();
  const int m = sys.num_constraints();
  std::vector<LinkIndex> links = backward_decomposition(sys);

  // Left boundary condition: keep the regions reachable from x_1 in {0,1}.
  LinkIndex zero_idx = make_link_index(m, {QRegion::point(QN::zero(m))});
  LinkIndex col_idx = make_link_index(m, {QRegion::point(sys.column(0))});
  {
    const LinkIndex& l1 = links[0];
    std::vector<bool> keep = chi_mask(zero_idx, l1, QN::zero(m));
    const std::vector<bool> keep2 = chi_mask(col_idx, l1, QN::zero(m));
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = keep[i] || keep2[i];
    links[0] = combine_kept(l1, keep);
    if (links[0].empty()) {
      throw InfeasibleSystemError("no feasible assignment of the first variable");
    }
  }

  for (int i = 0; i + 1 < n; ++i) {
    const LinkIndex& cur = links[static_cast<std::size_t>(i)];
    const LinkIndex& next = links[static_cast<std::size_t>(i + 1)];
    std::vector<bool> keep = chi_mask(cur, next, QN::zero(m));
    const std::vector<bool> keep2 = chi_mask(cur, next, sys.column(i + 1));
    for (std::size_t k = 0; k < keep.size(); ++k) keep[k] = keep[k] || keep2[k];
    links[static_cast<std::size_t>(i + 1)] = combine_kept(next, keep);
    if (links[static_cast<std::size_t>(i + 1)].empty()) {
      throw InfeasibleSystemError("link index " + std::to_string(i + 2) +
                                  " is empty in the forward sweep");
    }
  }
  return links;
}

int charge_complexity(const ConstraintSystem& sys) {
  int q = 0;
  for (const LinkIndex& l : constraints_to_indices(sys)) q = std::max(q, l.size());
  for (const LinkIndex& l : constraints_to_indices(sys.reversed())) q = std::max(q, l.size());
  return q;
}

}  // namespace ctn
