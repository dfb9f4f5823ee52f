#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <map>
#include <utility>
#include <vector>

#include "ctn/indexing.hpp"
#include "ctn/rng.hpp"

namespace ctn {

using Bitstring = std::vector<std::uint8_t>;

std::string bitstring_to_string(const Bitstring& x);
Bitstring bitstring_from_string(const std::string& s);

/// Key of one dense block inside a rank-3 site tensor: (left region id,
/// physical value, right region id). Region ids refer to the precomputed
/// index family on the corresponding bond.
struct BlockKey {
  int left;
  int x;
  int right;
  bool operator<(const BlockKey& o) const {
    if (left != o.left) return left < o.left;
    if (x != o.x) return x < o.x;
    return right < o.right;
  }
  bool operator==(const BlockKey& o) const = default;
};

enum class TensorSide { left_of_flux, flux, right_of_flux };

struct BlockTensor {
  int site = 0;
  TensorSide side = TensorSide::left_of_flux;
  std::map<BlockKey, Eigen::MatrixXd> blocks;
};

/// Active region labels and block dimensions on one bond. Truncation can
/// delete labels here; the precomputed families are never mutated.
struct BondIndex {
  std::vector<int> region_ids;
  std::vector<int> dims;

  int size() const { return static_cast<int>(region_ids.size()); }
  int total_dim() const;
  int position_of(int region_id) const;
  int dim_of(int region_id) const;
};

/// The canonical-center flux matrix F living on a bond: rows are labeled by
/// the left family, columns by the right family.
struct BondMatrix {
  BondIndex rows, cols;
  std::map<std::pair<int, int>, Eigen::MatrixXd> blocks;

  double norm_squared() const;
  void scale(double s);
};

/// Result of the grouped SVD with one global truncation threshold.
struct JointSvdResult {
  std::vector<Eigen::MatrixXd> isometries;  // per group: rows x kept_i
  std::vector<Eigen::MatrixXd> factors;     // per group: kept_i x cols
  std::vector<int> kept;
  double discarded_weight = 0.0;
};

/// Per-group SVD of the row groups of W with a single retention rule across
/// groups: singular values are sorted globally and the largest chi survive,
/// where chi is bounded by max_dim and by the discarded-weight cutoff
/// (drop the smallest values whose squared sum stays within
/// cutoff * sum sigma^2). Ties break by lower group, then lower position.
JointSvdResult joint_block_svd(const std::vector<Eigen::MatrixXd>& groups, double cutoff,
                               int max_dim);

/// Block vectors living on a bond, keyed by region id.
using BondRowVector = std::map<int, Eigen::RowVectorXd>;
using BondColVector = std::map<int, Eigen::VectorXd>;

BondRowVector row_times_tensor(const BondRowVector& v, const BlockTensor& t, int x);
BondRowVector row_times_bond(const BondRowVector& v, const BondMatrix& f);
BondColVector tensor_times_col(const BlockTensor& t, int x, const BondColVector& v);

/// Block-sparse MPS over the feasible set of a constraint system.
///
/// Freshly built it carries the flux on one site tensor and every admissible
/// block holds the scalar 1, a uniform superposition of all feasible
/// bitstrings. Canonicalization moves the flux onto a bond matrix F and makes
/// every site tensor an isometry.
class ConstrainedMPS {
 public:
  /// Algorithm-driven construction; flux_site is 1-based.
  static ConstrainedMPS build(const ConstraintSystem& sys, int flux_site);

  int num_sites() const { return sys_.num_vars(); }
  int num_constraints() const { return sys_.num_constraints(); }
  const ConstraintSystem& system() const { return sys_; }

  /// l_b for b in 1..N.
  const LinkIndex& left_links(int b) const { return left_family_[static_cast<std::size_t>(b - 1)]; }
  /// \tilde l_b for b in 0..N-1.
  const LinkIndex& right_links(int b) const { return right_family_[static_cast<std::size_t>(b)]; }

  bool site_centered() const { return center_bond_ < 0; }
  int flux_site() const { return flux_site_; }  // 0-based, valid when site centered
  int center_bond() const { return center_bond_; }

  const BlockTensor& tensor(int site) const { return tensors_[static_cast<std::size_t>(site)]; }
  BlockTensor& tensor(int site) { return tensors_[static_cast<std::size_t>(site)]; }
  const BondMatrix& center_matrix() const;
  BondMatrix& center_matrix();
  const BondIndex& bond(int b) const { return bonds_[static_cast<std::size_t>(b)]; }

  const QRegion& left_region(int bond, int region_id) const;
  const QRegion& right_region(int bond, int region_id) const;

  std::size_t total_blocks() const;
  int max_bond_dimension() const;

  double evaluate(const Bitstring& x) const;
  /// Contraction with all physical indices summed: sum_x psi(x).
  double count_solutions() const;
  /// sum_x psi(x)^2 via the transfer contraction.
  double norm_squared() const;

  /// Move the canonical center one bond; returns the discarded weight.
  double shift_center_right(double cutoff, int max_dim);
  double shift_center_left(double cutoff, int max_dim);
  /// Move the center to the requested bond (0..N); sums discarded weights.
  double canonicalize(int bond, double cutoff, int max_dim);

  /// i.i.d. samples with probability |psi(x)|^2 / Z. Canonicalizes an
  /// internal copy when the center is not already at bond 0.
  std::vector<Bitstring> sample(int count, Rng& rng) const;

  /// All bitstrings with psi(x) != 0, enumerated by depth-first contraction.
  std::vector<Bitstring> support() const;
  /// Amplitudes for all 2^N bitstrings, index bit i = x_i. Requires N <= 24.
  std::vector<double> dense_amplitudes() const;

  void randomize_blocks(Rng& rng, double sigma = 1.0);

  /// max-norm deviation of sum_x T(x)^T T(x) (resp. T T^T) from identity.
  double left_isometry_residual(int site) const;
  double right_isometry_residual(int site) const;

  void save(std::ostream& os) const;
  static ConstrainedMPS load(std::istream& is);

 private:
  explicit ConstrainedMPS(ConstraintSystem sys);

  ConstraintSystem sys_;
  QRegion trivial_region_;                // the {0} point in Z^M
  std::vector<LinkIndex> left_family_;    // L[1..N]
  std::vector<LinkIndex> right_family_;   // R[0..N-1]
  std::vector<BlockTensor> tensors_;      // N site tensors
  std::vector<BondIndex> bonds_;          // N+1 active bond indices
  int center_bond_ = -1;                  // -1: flux carried by a site tensor
  int flux_site_ = -1;                    // 0-based flux site when site centered
  BondMatrix f_;                          // valid when center_bond_ >= 0
};

}  // namespace ctn
