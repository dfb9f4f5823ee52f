#include "ctn/cmps.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <tuple>

#include "ctn/errors.hpp"

namespace ctn {

namespace {

using VecMap = std::map<int, Eigen::RowVectorXd>;
using MatMap = std::map<std::pair<int, int>, Eigen::MatrixXd>;

constexpr double kDeadRowTol = 1e-8;

VecMap apply_tensor(const VecMap& v, const BlockTensor& t, int x) {
  VecMap out;
  for (const auto& [key, mat] : t.blocks) {
    if (key.x != x) continue;
    const auto it = v.find(key.left);
    if (it == v.end()) continue;
    auto slot = out.try_emplace(key.right, Eigen::RowVectorXd::Zero(mat.cols())).first;
    slot->second.noalias() += it->second * mat;
  }
  return out;
}

VecMap apply_tensor_sum(const VecMap& v, const BlockTensor& t) {
  VecMap out;
  for (const auto& [key, mat] : t.blocks) {
    const auto it = v.find(key.left);
    if (it == v.end()) continue;
    auto slot = out.try_emplace(key.right, Eigen::RowVectorXd::Zero(mat.cols())).first;
    slot->second.noalias() += it->second * mat;
  }
  return out;
}

VecMap apply_bond_matrix(const VecMap& v, const BondMatrix& f) {
  VecMap out;
  for (const auto& [key, mat] : f.blocks) {
    const auto it = v.find(key.first);
    if (it == v.end()) continue;
    auto slot = out.try_emplace(key.second, Eigen::RowVectorXd::Zero(mat.cols())).first;
    slot->second.noalias() += it->second * mat;
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Small types

std::string bitstring_to_string(const Bitstring& x) {
  std::string s;
  s.reserve(x.size());
  for (auto b : x) s += b ? '1' : '0';
  return s;
}

Bitstring bitstring_from_string(const std::string& s) {
  Bitstring x;
  x.reserve(s.size());
  for (char c : s) {
    if (c != '0' && c != '1') throw ParseError("bitstring must consist of 0/1");
    x.push_back(c == '1' ? 1 : 0);
  }
  return x;
}

int BondIndex::total_dim() const {
  int d = 0;
  for (int v : dims) d += v;
  return d;
}

int BondIndex::position_of(int region_id) const {
  for (std::size_t i = 0; i < region_ids.size(); ++i) {
    if (region_ids[i] == region_id) return static_cast<int>(i);
  }
  return -1;
}

int BondIndex::dim_of(int region_id) const {
  const int p = position_of(region_id);
  return p < 0 ? 0 : dims[static_cast<std::size_t>(p)];
}

double BondMatrix::norm_squared() const {
  double s = 0;
  for (const auto& [key, mat] : blocks) s += mat.squaredNorm();
  return s;
}

void BondMatrix::scale(double s) {
  for (auto& [key, mat] : blocks) mat *= s;
}

// ---------------------------------------------------------------------------
// Joint-block SVD

JointSvdResult joint_block_svd(const std::vector<Eigen::MatrixXd>& groups, double cutoff,
                               int max_dim) {
  if (groups.empty()) throw Error("joint_block_svd: no groups");
  if (max_dim < 1) throw Error("joint_block_svd: max_dim must be >= 1");
  double total = 0;
  for (const auto& g : groups) total += g.squaredNorm();
  if (total == 0.0) throw Error("joint_block_svd: all groups are zero");

  struct Sv {
    double value;
    int group;
    int pos;
  };
  std::vector<Eigen::BDCSVD<Eigen::MatrixXd>> svds;
  svds.reserve(groups.size());
  std::vector<Sv> all;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    svds.emplace_back(groups[gi], Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svds.back().singularValues();
    for (int k = 0; k < sv.size(); ++k) all.push_back({sv(k), static_cast<int>(gi), k});
  }

  // Retention priority: larger value, then lower group id, then lower
  // in-group position.
  std::sort(all.begin(), all.end(), [](const Sv& a, const Sv& b) {
    if (a.value != b.value) return a.value > b.value;
    if (a.group != b.group) return a.group < b.group;
    return a.pos < b.pos;
  });

  const int n = static_cast<int>(all.size());
  int keep = std::min(n, max_dim);
  const double budget = cutoff * total;
  double dropped = 0;
  for (int k = n - 1; k >= keep; --k) {
    const double v = all[static_cast<std::size_t>(k)].value;
    dropped += v * v;
  }
  while (keep > 1) {
    const double v = all[static_cast<std::size_t>(keep - 1)].value;
    if (dropped + v * v > budget) break;
    dropped += v * v;
    --keep;
  }

  std::vector<int> kept(groups.size(), 0);
  for (int k = 0; k < keep; ++k) {
    kept[static_cast<std::size_t>(all[static_cast<std::size_t>(k)].group)]++;
  }

  JointSvdResult out;
  out.kept = kept;
  out.discarded_weight = dropped;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const int k = kept[gi];
    const auto& svd = svds[gi];
    out.isometries.push_back(svd.matrixU().leftCols(k));
    out.factors.push_back(svd.singularValues().head(k).asDiagonal() *
                          svd.matrixV().leftCols(k).transpose());
  }
  return out;
}

BondRowVector row_times_tensor(const BondRowVector& v, const BlockTensor& t, int x) {
  return apply_tensor(v, t, x);
}

BondRowVector row_times_bond(const BondRowVector& v, const BondMatrix& f) {
  return apply_bond_matrix(v, f);
}

BondColVector tensor_times_col(const BlockTensor& t, int x, const BondColVector& v) {
  BondColVector out;
  for (const auto& [key, mat] : t.blocks) {
    if (key.x != x) continue;
    const auto it = v.find(key.right);
    if (it == v.end()) continue;
    auto slot = out.try_emplace(key.left, Eigen::VectorXd::Zero(mat.rows())).first;
    slot->second.noalias() += mat * it->second;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Construction

ConstrainedMPS::ConstrainedMPS(ConstraintSystem sys)
    : sys_(std::move(sys)), trivial_region_(QRegion::point(QN::zero(sys_.num_constraints()))) {}

ConstrainedMPS ConstrainedMPS::build(const ConstraintSystem& sys, int flux_site) {
  const int n = sys.num_vars();
  if (flux_site < 1 || flux_site > n) throw Error("flux site out of range");
  ConstrainedMPS mps(sys);
  mps.left_family_ = constraints_to_indices(sys);
  const auto rev = constraints_to_indices(sys.reversed());
  mps.right_family_.resize(static_cast<std::size_t>(n));
  for (int b = 0; b < n; ++b) {
    mps.right_family_[static_cast<std::size_t>(b)] = rev[static_cast<std::size_t>(n - 1 - b)];
  }
  const int m0 = flux_site - 1;
  mps.flux_site_ = m0;
  mps.center_bond_ = -1;

  mps.bonds_.resize(static_cast<std::size_t>(n) + 1);
  for (int b = 0; b <= n; ++b) {
    int count;
    if (b == 0 || b == n) {
      count = 1;
    } else if (b <= m0) {
      count = mps.left_family_[static_cast<std::size_t>(b - 1)].size();
    } else {
      count = mps.right_family_[static_cast<std::size_t>(b)].size();
    }
    BondIndex& bi = mps.bonds_[static_cast<std::size_t>(b)];
    bi.region_ids.resize(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) bi.region_ids[static_cast<std::size_t>(i)] = i;
    bi.dims.assign(static_cast<std::size_t>(count), 1);
  }

  const QRegion flux_region{sys.flux_box()};
  mps.tensors_.resize(static_cast<std::size_t>(n));
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  for (int i = 0; i < n; ++i) {
    BlockTensor& t = mps.tensors_[static_cast<std::size_t>(i)];
    t.site = i;
    if (i < m0) {
      t.side = TensorSide::left_of_flux;
      for (int ql : mps.bonds_[static_cast<std::size_t>(i)].region_ids) {
        for (int x = 0; x < 2; ++x) {
          QRegion r = mps.left_region(i, ql);
          if (x) r = r.shifted(sys.column(i));
          const int g = mps.left_family_[static_cast<std::size_t>(i)].find_superset(r);
          if (g >= 0) t.blocks[{ql, x, g}] = one;
        }
      }
    } else if (i > m0) {
      t.side = TensorSide::right_of_flux;
      for (int s : mps.bonds_[static_cast<std::size_t>(i) + 1].region_ids) {
        for (int x = 0; x < 2; ++x) {
          QRegion r = mps.right_region(i + 1, s);
          if (x) r = r.shifted(sys.column(i));
          const int g = mps.right_family_[static_cast<std::size_t>(i)].find_superset(r);
          if (g >= 0) t.blocks[{g, x, s}] = one;
        }
      }
    } else {
      t.side = TensorSide::flux;
      for (int ql : mps.bonds_[static_cast<std::size_t>(i)].region_ids) {
        for (int s : mps.bonds_[static_cast<std::size_t>(i) + 1].region_ids) {
          for (int x = 0; x < 2; ++x) {
            QRegion r = mps.left_region(i, ql).plus(mps.right_region(i + 1, s));
            if (x) r = r.shifted(sys.column(i));
            if (r.is_subset_of(flux_region)) t.blocks[{ql, x, s}] = one;
          }
        }
      }
    }
  }
  return mps;
}

const QRegion& ConstrainedMPS::left_region(int bond, int region_id) const {
  if (bond == 0) return trivial_region_;
  return left_family_[static_cast<std::size_t>(bond - 1)]
      .qregions[static_cast<std::size_t>(region_id)];
}

const QRegion& ConstrainedMPS::right_region(int bond, int region_id) const {
  if (bond == num_sites()) return trivial_region_;
  return right_family_[static_cast<std::size_t>(bond)]
      .qregions[static_cast<std::size_t>(region_id)];
}

const BondMatrix& ConstrainedMPS::center_matrix() const {
  if (center_bond_ < 0) throw Error("MPS is site-centered; no bond matrix");
  return f_;
}

BondMatrix& ConstrainedMPS::center_matrix() {
  if (center_bond_ < 0) throw Error("MPS is site-centered; no bond matrix");
  return f_;
}

std::size_t ConstrainedMPS::total_blocks() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.blocks.size();
  return n;
}

int ConstrainedMPS::max_bond_dimension() const {
  int d = 0;
  for (const auto& b : bonds_) d = std::max(d, b.total_dim());
  if (center_bond_ >= 0) d = std::max(d, f_.cols.total_dim());
  return d;
}

// ---------------------------------------------------------------------------
// Contractions

double ConstrainedMPS::evaluate(const Bitstring& x) const {
  if (static_cast<int>(x.size()) != num_sites()) throw Error("bitstring length mismatch");
  VecMap v{{0, Eigen::RowVectorXd::Ones(1)}};
  for (int i = 0; i < num_sites(); ++i) {
    if (center_bond_ == i) v = apply_bond_matrix(v, f_);
    v = apply_tensor(v, tensors_[static_cast<std::size_t>(i)], x[static_cast<std::size_t>(i)]);
    if (v.empty()) return 0.0;
  }
  if (center_bond_ == num_sites()) v = apply_bond_matrix(v, f_);
  if (v.empty()) return 0.0;
  return v.begin()->second(0);
}

double ConstrainedMPS::count_solutions() const {
  VecMap v{{0, Eigen::RowVectorXd::Ones(1)}};
  for (int i = 0; i < num_sites(); ++i) {
    if (center_bond_ == i) v = apply_bond_matrix(v, f_);
    v = apply_tensor_sum(v, tensors_[static_cast<std::size_t>(i)]);
    if (v.empty()) return 0.0;
  }
  if (center_bond_ == num_sites()) v = apply_bond_matrix(v, f_);
  if (v.empty()) return 0.0;
  return v.begin()->second(0);
}

namespace {

MatMap transfer_tensor(const MatMap& e, const BlockTensor& t) {
  MatMap out;
  for (const auto& [ab, emat] : e) {
    for (const auto& [k1, m1] : t.blocks) {
      if (k1.left != ab.first) continue;
      for (const auto& [k2, m2] : t.blocks) {
        if (k2.left != ab.second || k2.x != k1.x) continue;
        auto slot = out.try_emplace({k1.right, k2.right},
                                    Eigen::MatrixXd::Zero(m1.cols(), m2.cols()))
                        .first;
        slot->second.noalias() += m1.transpose() * emat * m2;
      }
    }
  }
  return out;
}

MatMap transfer_bond(const MatMap& e, const BondMatrix& f) {
  MatMap out;
  for (const auto& [ab, emat] : e) {
    for (const auto& [k1, m1] : f.blocks) {
      if (k1.first != ab.first) continue;
      for (const auto& [k2, m2] : f.blocks) {
        if (k2.first != ab.second) continue;
        auto slot = out.try_emplace({k1.second, k2.second},
                                    Eigen::MatrixXd::Zero(m1.cols(), m2.cols()))
                        .first;
        slot->second.noalias() += m1.transpose() * emat * m2;
      }
    }
  }
  return out;
}

}  // namespace

double ConstrainedMPS::norm_squared() const {
  MatMap e{{{0, 0}, Eigen::MatrixXd::Ones(1, 1)}};
  for (int i = 0; i < num_sites(); ++i) {
    if (center_bond_ == i) e = transfer_bond(e, f_);
    e = transfer_tensor(e, tensors_[static_cast<std::size_t>(i)]);
    if (e.empty()) return 0.0;
  }
  if (center_bond_ == num_sites()) e = transfer_bond(e, f_);
  const auto it = e.find({0, 0});
  return it == e.end() ? 0.0 : it->second(0, 0);
}

// ---------------------------------------------------------------------------
// Center moves

namespace {

// A merged slot of the matricized environment: one (region, physical) pair.
struct Slot {
  int region;
  int x;
  int offset = 0;
  int dim = 0;
};

struct GroupLayout {
  std::vector<Slot> slots;
  int rows = 0;
};

std::vector<int> offsets_of(const BondIndex& idx) {
  std::vector<int> off(idx.region_ids.size() + 1, 0);
  for (std::size_t i = 0; i < idx.region_ids.size(); ++i) off[i + 1] = off[i] + idx.dims[i];
  return off;
}

}  // namespace

double ConstrainedMPS::shift_center_right(double cutoff, int max_dim) {
  if (center_bond_ < 0) throw Error("shift on a site-centered MPS; canonicalize first");
  const int c = center_bond_;
  if (c >= num_sites()) throw Error("center is at the right boundary");

  // W = F * T(c), keyed (left id on the row side of bond c, x, id on bond c+1).
  // An empty F marks the conversion step right after Algorithm 2: the flux
  // site tensor is already keyed by both families and is used as W directly.
  std::map<std::tuple<int, int, int>, Eigen::MatrixXd> w;
  if (f_.blocks.empty()) {
    for (const auto& [key, mat] : tensors_[static_cast<std::size_t>(c)].blocks) {
      w[std::tuple{key.left, key.x, key.right}] = mat;
    }
  } else {
    const BlockTensor& t = tensors_[static_cast<std::size_t>(c)];
    for (const auto& [fk, fm] : f_.blocks) {
      for (const auto& [tk, tm] : t.blocks) {
        if (tk.left != fk.second) continue;
        auto slot = w.try_emplace(std::tuple{fk.first, tk.x, tk.right},
                                  Eigen::MatrixXd::Zero(fm.rows(), tm.cols()))
                        .first;
        slot->second.noalias() += fm * tm;
      }
    }
  }
  if (w.empty()) throw Error("center shift on a zero state");
  double wnorm2 = 0;
  for (const auto& [k, m] : w) wnorm2 += m.squaredNorm();

  const BondIndex old_cols = bonds_[static_cast<std::size_t>(c + 1)];
  const std::vector<int> coloff = offsets_of(old_cols);

  // Row slots (x, left id) and their target regions in L[c+1].
  std::map<std::pair<int, int>, int> row_dim;
  for (const auto& [key, mat] : w) {
    row_dim[{std::get<1>(key), std::get<0>(key)}] = static_cast<int>(mat.rows());
  }
  std::map<int, GroupLayout> groups;
  for (const auto& [rk, dim] : row_dim) {
    const auto [x, ql] = rk;
    QRegion r = left_region(c, ql);
    if (x) r = r.shifted(sys_.column(c));
    const int g = left_family_[static_cast<std::size_t>(c)].find_superset(r);
    if (g < 0) {
      double rn = 0;
      for (const auto& [key, mat] : w) {
        if (std::get<0>(key) == ql && std::get<1>(key) == x) rn += mat.squaredNorm();
      }
      if (rn > kDeadRowTol * kDeadRowTol * std::max(1.0, wnorm2)) {
        throw Error("merged row without a containing QRegion carries weight");
      }
      continue;
    }
    groups[g].slots.push_back({ql, x, 0, dim});
  }
  if (groups.empty()) throw Error("center shift produced no admissible rows");

  std::vector<int> group_ids;
  std::vector<Eigen::MatrixXd> mats;
  std::map<std::pair<int, int>, bool> support_cols;  // (group, col id) has a block
  for (auto& [g, gl] : groups) {
    int off = 0;
    for (auto& s : gl.slots) {
      s.offset = off;
      off += s.dim;
    }
    gl.rows = off;
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(off, old_cols.total_dim());
    for (const Slot& s : gl.slots) {
      for (std::size_t ci = 0; ci < old_cols.region_ids.size(); ++ci) {
        const auto it = w.find(std::tuple{s.region, s.x, old_cols.region_ids[ci]});
        if (it == w.end()) continue;
        m.block(s.offset, coloff[ci], s.dim, old_cols.dims[ci]) = it->second;
        support_cols[{g, old_cols.region_ids[ci]}] = true;
      }
    }
    group_ids.push_back(g);
    mats.push_back(std::move(m));
  }

  const JointSvdResult svd = joint_block_svd(mats, cutoff, max_dim);

  BlockTensor nt;
  nt.site = c;
  nt.side = TensorSide::left_of_flux;
  BondMatrix nf;
  BondIndex nrows;
  for (std::size_t gi = 0; gi < group_ids.size(); ++gi) {
    const int g = group_ids[gi];
    if (svd.kept[gi] == 0) continue;
    for (const Slot& s : groups[g].slots) {
      nt.blocks[{s.region, s.x, g}] = svd.isometries[gi].middleRows(s.offset, s.dim);
    }
    for (std::size_t ci = 0; ci < old_cols.region_ids.size(); ++ci) {
      const int cid = old_cols.region_ids[ci];
      if (!support_cols.count({g, cid})) continue;
      nf.blocks[{g, cid}] = svd.factors[gi].middleCols(coloff[ci], old_cols.dims[ci]);
    }
    nrows.region_ids.push_back(g);
    nrows.dims.push_back(svd.kept[gi]);
  }
  if (nrows.region_ids.empty()) throw Error("truncation removed the whole state");

  nf.rows = nrows;
  nf.cols = old_cols;
  tensors_[static_cast<std::size_t>(c)] = std::move(nt);
  bonds_[static_cast<std::size_t>(c + 1)] = nrows;
  f_ = std::move(nf);
  center_bond_ = c + 1;
  return svd.discarded_weight;
}

double ConstrainedMPS::shift_center_left(double cutoff, int max_dim) {
  if (center_bond_ < 0) throw Error("shift on a site-centered MPS; canonicalize first");
  const int c = center_bond_;
  if (c <= 0) throw Error("center is at the left boundary");
  const int site = c - 1;

  // W = T(site) * F, keyed (left id on bond site, x, id on the col side of bond c).
  std::map<std::tuple<int, int, int>, Eigen::MatrixXd> w;
  {
    const BlockTensor& t = tensors_[static_cast<std::size_t>(site)];
    for (const auto& [tk, tm] : t.blocks) {
      for (const auto& [fk, fm] : f_.blocks) {
        if (fk.first != tk.right) continue;
        auto slot = w.try_emplace(std::tuple{tk.left, tk.x, fk.second},
                                  Eigen::MatrixXd::Zero(tm.rows(), fm.cols()))
                        .first;
        slot->second.noalias() += tm * fm;
      }
    }
  }
  if (w.empty()) throw Error("center shift on a zero state");
  double wnorm2 = 0;
  for (const auto& [k, m] : w) wnorm2 += m.squaredNorm();

  const BondIndex old_rows = bonds_[static_cast<std::size_t>(site)];
  const std::vector<int> rowoff = offsets_of(old_rows);

  // Column slots (x, right id) and their target regions in R[site].
  std::map<std::pair<int, int>, int> col_dim;
  for (const auto& [key, mat] : w) {
    col_dim[{std::get<1>(key), std::get<2>(key)}] = static_cast<int>(mat.cols());
  }
  std::map<int, GroupLayout> groups;
  for (const auto& [ck, dim] : col_dim) {
    const auto [x, r] = ck;
    QRegion reg = right_region(c, r);
    if (x) reg = reg.shifted(sys_.column(site));
    const int g = right_family_[static_cast<std::size_t>(site)].find_superset(reg);
    if (g < 0) {
      double cn = 0;
      for (const auto& [key, mat] : w) {
        if (std::get<1>(key) == x && std::get<2>(key) == r) cn += mat.squaredNorm();
      }
      if (cn > kDeadRowTol * kDeadRowTol * std::max(1.0, wnorm2)) {
        throw Error("merged column without a containing QRegion carries weight");
      }
      continue;
    }
    groups[g].slots.push_back({r, x, 0, dim});
  }
  if (groups.empty()) throw Error("center shift produced no admissible columns");

  // Work on the transpose so the same grouped SVD applies.
  std::vector<int> group_ids;
  std::vector<Eigen::MatrixXd> mats;
  std::map<std::pair<int, int>, bool> support_rows;  // (group, row id)
  for (auto& [g, gl] : groups) {
    int off = 0;
    for (auto& s : gl.slots) {
      s.offset = off;
      off += s.dim;
    }
    gl.rows = off;
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(off, old_rows.total_dim());
    for (const Slot& s : gl.slots) {
      for (std::size_t ri = 0; ri < old_rows.region_ids.size(); ++ri) {
        const auto it = w.find(std::tuple{old_rows.region_ids[ri], s.x, s.region});
        if (it == w.end()) continue;
        m.block(s.offset, rowoff[ri], s.dim, old_rows.dims[ri]) = it->second.transpose();
        support_rows[{g, old_rows.region_ids[ri]}] = true;
      }
    }
    group_ids.push_back(g);
    mats.push_back(std::move(m));
  }

  const JointSvdResult svd = joint_block_svd(mats, cutoff, max_dim);

  BlockTensor nt;
  nt.site = site;
  nt.side = TensorSide::right_of_flux;
  BondMatrix nf;
  BondIndex ncols;
  for (std::size_t gi = 0; gi < group_ids.size(); ++gi) {
    const int g = group_ids[gi];
    if (svd.kept[gi] == 0) continue;
    for (const Slot& s : groups[g].slots) {
      nt.blocks[{g, s.x, s.region}] =
          svd.isometries[gi].middleRows(s.offset, s.dim).transpose();
    }
    for (std::size_t ri = 0; ri < old_rows.region_ids.size(); ++ri) {
      const int rid = old_rows.region_ids[ri];
      if (!support_rows.count({g, rid})) continue;
      nf.blocks[{rid, g}] =
          svd.factors[gi].middleCols(rowoff[ri], old_rows.dims[ri]).transpose();
    }
    ncols.region_ids.push_back(g);
    ncols.dims.push_back(svd.kept[gi]);
  }
  if (ncols.region_ids.empty()) throw Error("truncation removed the whole state");

  nf.rows = old_rows;
  nf.cols = ncols;
  tensors_[static_cast<std::size_t>(site)] = std::move(nt);
  bonds_[static_cast<std::size_t>(c)] = f_.cols;  // bond c is a plain right bond now
  f_ = std::move(nf);
  center_bond_ = site;
  return svd.discarded_weight;
}

double ConstrainedMPS::canonicalize(int bond, double cutoff, int max_dim) {
  if (bond < 0 || bond > num_sites()) throw Error("canonical bond out of range");
  double weight = 0;

  if (center_bond_ < 0) {
    // Detach the flux from its site tensor: pose as bond-centered with an
    // empty F at the flux site, then factor rightwards once. The tensors on
    // both sides are not isometric yet, so a full right-then-left pass must
    // run before the center settles on the requested bond.
    const int m0 = flux_site_;
    f_ = BondMatrix{};
    f_.rows = bonds_[static_cast<std::size_t>(m0)];
    f_.cols = bonds_[static_cast<std::size_t>(m0)];
    center_bond_ = m0;
    flux_site_ = -1;
    weight += shift_center_right(cutoff, max_dim);
    while (center_bond_ < num_sites()) weight += shift_center_right(cutoff, max_dim);
    while (center_bond_ > 0) weight += shift_center_left(cutoff, max_dim);
  }

  while (center_bond_ > bond) weight += shift_center_left(cutoff, max_dim);
  while (center_bond_ < bond) weight += shift_center_right(cutoff, max_dim);
  return weight;
}

// ---------------------------------------------------------------------------
// Sampling and enumeration

std::vector<Bitstring> ConstrainedMPS::sample(int count, Rng& rng) const {
  if (center_bond_ != 0) {
    ConstrainedMPS copy = *this;
    copy.canonicalize(0, 0.0, std::numeric_limits<int>::max());
    return copy.sample(count, rng);
  }
  const double z = f_.norm_squared();
  if (z <= 0) throw Error("sampling from a zero state");

  VecMap v0;
  for (const auto& [key, mat] : f_.blocks) {
    auto slot = v0.try_emplace(key.second, Eigen::RowVectorXd::Zero(mat.cols())).first;
    slot->second += mat.row(0) / std::sqrt(z);
  }

  std::vector<Bitstring> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int s = 0; s < count; ++s) {
    VecMap v = v0;
    Bitstring x(static_cast<std::size_t>(num_sites()));
    for (int i = 0; i < num_sites(); ++i) {
      VecMap w0 = apply_tensor(v, tensors_[static_cast<std::size_t>(i)], 0);
      VecMap w1 = apply_tensor(v, tensors_[static_cast<std::size_t>(i)], 1);
      double n0 = 0, n1 = 0;
      for (const auto& [id, vec] : w0) n0 += vec.squaredNorm();
      for (const auto& [id, vec] : w1) n1 += vec.squaredNorm();
      const double tot = n0 + n1;
      if (tot <= 0) throw Error("sampling dead-ended; state is not right-canonical");
      const bool one = rng.uniform01() * tot >= n0;
      x[static_cast<std::size_t>(i)] = one ? 1 : 0;
      v = one ? std::move(w1) : std::move(w0);
      const double nn = std::sqrt(one ? n1 : n0);
      for (auto& [id, vec] : v) vec /= nn;
    }
    out.push_back(std::move(x));
  }
  return out;
}

std::vector<Bitstring> ConstrainedMPS::support() const {
  if (num_sites() > 24) throw BoundExceededError("support enumeration limited to N <= 24");
  std::vector<Bitstring> out;
  Bitstring x(static_cast<std::size_t>(num_sites()));
  std::function<void(int, const VecMap&)> rec = [&](int i, const VecMap& v) {
    if (i == num_sites()) {
      const VecMap fin = (center_bond_ == num_sites()) ? apply_bond_matrix(v, f_) : v;
      if (!fin.empty() && fin.begin()->second(0) != 0.0) out.push_back(x);
      return;
    }
    const VecMap vv = (center_bond_ == i) ? apply_bond_matrix(v, f_) : v;
    for (int b = 0; b < 2; ++b) {
      const VecMap w = apply_tensor(vv, tensors_[static_cast<std::size_t>(i)], b);
      if (w.empty()) continue;
      x[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(b);
      rec(i + 1, w);
    }
    x[static_cast<std::size_t>(i)] = 0;
  };
  rec(0, VecMap{{0, Eigen::RowVectorXd::Ones(1)}});
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> ConstrainedMPS::dense_amplitudes() const {
  if (num_sites() > 24) throw BoundExceededError("dense expansion limited to N <= 24");
  std::vector<double> out(std::size_t{1} << num_sites(), 0.0);
  std::function<void(int, std::size_t, const VecMap&)> rec = [&](int i, std::size_t mask,
                                                                 const VecMap& v) {
    if (i == num_sites()) {
      const VecMap fin = (center_bond_ == num_sites()) ? apply_bond_matrix(v, f_) : v;
      if (!fin.empty()) out[mask] = fin.begin()->second(0);
      return;
    }
    const VecMap vv = (center_bond_ == i) ? apply_bond_matrix(v, f_) : v;
    for (int b = 0; b < 2; ++b) {
      const VecMap w = apply_tensor(vv, tensors_[static_cast<std::size_t>(i)], b);
      if (w.empty()) continue;
      rec(i + 1, mask | (static_cast<std::size_t>(b) << i), w);
    }
  };
  rec(0, 0, VecMap{{0, Eigen::RowVectorXd::Ones(1)}});
  return out;
}

void ConstrainedMPS::randomize_blocks(Rng& rng, double sigma) {
  for (auto& t : tensors_) {
    for (auto& [key, mat] : t.blocks) {
      for (Eigen::Index r = 0; r < mat.rows(); ++r) {
        for (Eigen::Index c = 0; c < mat.cols(); ++c) mat(r, c) = sigma * rng.normal();
      }
    }
  }
  if (center_bond_ >= 0) {
    for (auto& [key, mat] : f_.blocks) {
      for (Eigen::Index r = 0; r < mat.rows(); ++r) {
        for (Eigen::Index c = 0; c < mat.cols(); ++c) mat(r, c) = sigma * rng.normal();
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Isometry checks

double ConstrainedMPS::left_isometry_residual(int site) const {
  const BlockTensor& t = tensors_[static_cast<std::size_t>(site)];
  std::map<int, Eigen::MatrixXd> acc;
  for (const auto& [key, mat] : t.blocks) {
    auto slot = acc.try_emplace(key.right, Eigen::MatrixXd::Zero(mat.cols(), mat.cols())).first;
    slot->second.noalias() += mat.transpose() * mat;
  }
  double res = 0;
  for (const auto& [id, m] : acc) {
    res = std::max(res, (m - Eigen::MatrixXd::Identity(m.rows(), m.cols())).cwiseAbs().maxCoeff());
  }
  return res;
}

double ConstrainedMPS::right_isometry_residual(int site) const {
  const BlockTensor& t = tensors_[static_cast<std::size_t>(site)];
  std::map<int, Eigen::MatrixXd> acc;
  for (const auto& [key, mat] : t.blocks) {
    auto slot = acc.try_emplace(key.left, Eigen::MatrixXd::Zero(mat.rows(), mat.rows())).first;
    slot->second.noalias() += mat * mat.transpose();
  }
  double res = 0;
  for (const auto& [id, m] : acc) {
    res = std::max(res, (m - Eigen::MatrixXd::Identity(m.rows(), m.cols())).cwiseAbs().maxCoeff());
  }
  return res;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

std::string hex_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

double parse_hex_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw ParseError("bad float literal: " + s);
  return v;
}

void write_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
  os << m.rows() << ' ' << m.cols();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) os << ' ' << hex_double(m(r, c));
  }
  os << '\n';
}

Eigen::MatrixXd read_matrix(std::istream& is) {
  Eigen::Index rows = 0, cols = 0;
  is >> rows >> cols;
  Eigen::MatrixXd m(rows, cols);
  std::string tok;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      is >> tok;
      m(r, c) = parse_hex_double(tok);
    }
  }
  if (!is) throw ParseError("truncated matrix payload");
  return m;
}

void write_bond(std::ostream& os, const BondIndex& b) {
  os << b.size();
  for (int i = 0; i < b.size(); ++i) {
    os << ' ' << b.region_ids[static_cast<std::size_t>(i)] << ' '
       << b.dims[static_cast<std::size_t>(i)];
  }
  os << '\n';
}

BondIndex read_bond(std::istream& is) {
  int k = 0;
  is >> k;
  BondIndex b;
  for (int i = 0; i < k; ++i) {
    int id = 0, d = 0;
    is >> id >> d;
    b.region_ids.push_back(id);
    b.dims.push_back(d);
  }
  if (!is) throw ParseError("truncated bond index");
  return b;
}

}  // namespace

void ConstrainedMPS::save(std::ostream& os) const {
  const int n = num_sites();
  os << "ctn-cmps 1\n";
  os << "n " << n << " m " << num_constraints() << '\n';
  os << "a";
  for (Coord v : sys_.a_row_major()) os << ' ' << v;
  os << "\nl";
  for (Coord v : sys_.lower()) os << ' ' << v;
  os << "\nu";
  for (Coord v : sys_.upper()) os << ' ' << v;
  os << "\nfluxbox " << sys_.flux_box().to_string() << '\n';
  for (int b = 1; b <= n; ++b) {
    const LinkIndex& l = left_links(b);
    os << "leftlinks " << b << ' ' << l.size();
    for (const QRegion& q : l.qregions) os << ' ' << q.to_string();
    os << '\n';
  }
  for (int b = 0; b < n; ++b) {
    const LinkIndex& l = right_links(b);
    os << "rightlinks " << b << ' ' << l.size();
    for (const QRegion& q : l.qregions) os << ' ' << q.to_string();
    os << '\n';
  }
  if (center_bond_ >= 0) {
    os << "center bond " << center_bond_ << '\n';
  } else {
    os << "center site " << flux_site_ << '\n';
  }
  for (int b = 0; b <= n; ++b) {
    os << "bond " << b << ' ';
    write_bond(os, bonds_[static_cast<std::size_t>(b)]);
  }
  for (int i = 0; i < n; ++i) {
    const BlockTensor& t = tensors_[static_cast<std::size_t>(i)];
    os << "tensor " << i << ' ' << static_cast<int>(t.side) << ' ' << t.blocks.size() << '\n';
    for (const auto& [key, mat] : t.blocks) {
      os << "block " << key.left << ' ' << key.x << ' ' << key.right << ' ';
      write_matrix(os, mat);
    }
  }
  if (center_bond_ >= 0) {
    os << "fmatrix " << f_.blocks.size() << '\n';
    os << "frows ";
    write_bond(os, f_.rows);
    os << "fcols ";
    write_bond(os, f_.cols);
    for (const auto& [key, mat] : f_.blocks) {
      os << "fblock " << key.first << ' ' << key.second << ' ';
      write_matrix(os, mat);
    }
  }
  os << "end\n";
}

ConstrainedMPS ConstrainedMPS::load(std::istream& is) {
  auto expect = [&](const std::string& what) {
    std::string tok;
    if (!(is >> tok) || tok != what) {
      throw ParseError("mps file: expected '" + what + "', got '" + tok + "'");
    }
  };
  expect("ctn-cmps");
  int version = 0;
  is >> version;
  if (version != 1) throw ParseError("unsupported mps file version");

  int n = 0, m = 0;
  expect("n");
  is >> n;
  expect("m");
  is >> m;
  if (!is || n < 1 || m < 1) throw ParseError("mps file: bad dimensions");
  std::vector<Coord> a(static_cast<std::size_t>(n) * static_cast<std::size_t>(m));
  std::vector<Coord> lo(static_cast<std::size_t>(m)), up(static_cast<std::size_t>(m));
  expect("a");
  for (auto& v : a) is >> v;
  expect("l");
  for (auto& v : lo) is >> v;
  expect("u");
  for (auto& v : up) is >> v;
  if (!is) throw ParseError("mps file: truncated system");
  ConstraintSystem sys(n, m, std::move(a), std::move(lo), std::move(up));

  expect("fluxbox");
  std::string fluxrepr;
  is >> fluxrepr;
  if (QRegion::parse(fluxrepr) != QRegion(sys.flux_box())) {
    throw ParseError("mps file: flux box does not match bounds");
  }

  ConstrainedMPS mps(sys);
  mps.left_family_ = constraints_to_indices(sys);
  const auto rev = constraints_to_indices(sys.reversed());
  mps.right_family_.resize(static_cast<std::size_t>(n));
  for (int b = 0; b < n; ++b) {
    mps.right_family_[static_cast<std::size_t>(b)] = rev[static_cast<std::size_t>(n - 1 - b)];
  }

  auto read_family = [&](const char* tag, int b, const LinkIndex& l) {
    expect(tag);
    int bb = 0, k = 0;
    is >> bb >> k;
    if (bb != b || k != l.size()) {
      throw ParseError(std::string("mps file: ") + tag + " mismatch at bond " + std::to_string(b));
    }
    for (int i = 0; i < k; ++i) {
      std::string repr;
      is >> repr;
      if (QRegion::parse(repr) != l.qregions[static_cast<std::size_t>(i)]) {
        throw ParseError(std::string("mps file: ") + tag + " region mismatch at bond " +
                         std::to_string(b));
      }
    }
  };
  for (int b = 1; b <= n; ++b) read_family("leftlinks", b, mps.left_links(b));
  for (int b = 0; b < n; ++b) read_family("rightlinks", b, mps.right_links(b));

  expect("center");
  std::string kind;
  is >> kind;
  if (kind == "bond") {
    is >> mps.center_bond_;
    mps.flux_site_ = -1;
    if (mps.center_bond_ < 0 || mps.center_bond_ > n) throw ParseError("mps file: bad center bond");
  } else if (kind == "site") {
    is >> mps.flux_site_;
    mps.center_bond_ = -1;
    if (mps.flux_site_ < 0 || mps.flux_site_ >= n) throw ParseError("mps file: bad flux site");
  } else {
    throw ParseError("mps file: bad center kind");
  }

  mps.bonds_.resize(static_cast<std::size_t>(n) + 1);
  for (int b = 0; b <= n; ++b) {
    expect("bond");
    int bb = 0;
    is >> bb;
    if (bb != b) throw ParseError("mps file: bond order");
    mps.bonds_[static_cast<std::size_t>(b)] = read_bond(is);
  }
  mps.tensors_.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    expect("tensor");
    int site = 0, side = 0;
    std::size_t nb = 0;
    is >> site >> side >> nb;
    if (!is || site != i || side < 0 || side > 2) throw ParseError("mps file: bad tensor header");
    BlockTensor& t = mps.tensors_[static_cast<std::size_t>(i)];
    t.site = i;
    t.side = static_cast<TensorSide>(side);
    for (std::size_t k = 0; k < nb; ++k) {
      expect("block");
      BlockKey key{};
      is >> key.left >> key.x >> key.right;
      t.blocks[key] = read_matrix(is);
    }
  }
  if (mps.center_bond_ >= 0) {
    expect("fmatrix");
    std::size_t nb = 0;
    is >> nb;
    expect("frows");
    mps.f_.rows = read_bond(is);
    expect("fcols");
    mps.f_.cols = read_bond(is);
    for (std::size_t k = 0; k < nb; ++k) {
      expect("fblock");
      int r = 0, c = 0;
      is >> r >> c;
      mps.f_.blocks[{r, c}] = read_matrix(is);
    }
  }
  expect("end");
  return mps;
}

}  // namespace ctn
