#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ctn/cmps.hpp"
#include "ctn/indexing.hpp"
#include "ctn/rng.hpp"

namespace ctn {

/// Quadratic knapsack: minimize x . Q x subject to w . x <= W.
struct QKPInstance {
  int n = 0;
  std::vector<Coord> q;  // N x N, row-major
  std::vector<Coord> w;
  Coord capacity = 0;
  std::uint64_t seed = 0;

  /// The knapsack inequality as a one-row system, 0 <= w.x <= W.
  ConstraintSystem to_system() const;
};

/// Facility-location constraints: each demand row selects floor(0.1 N) facility
/// columns and requires 2 <= sum <= upper.
struct FacilityInstance {
  int n = 0;
  int m = 0;
  std::vector<Coord> a;  // M x N, row-major, entries in {0,1}
  Coord upper = 2;
  std::uint64_t seed = 0;

  ConstraintSystem to_system() const;
};

/// Single all-ones row with bounds [lo, hi].
ConstraintSystem gen_cardinality(int n, Coord lo, Coord hi);

/// Paper-protocol quadratic knapsack: Q entries uniform in [-5,5] drawn
/// row-major, then w uniform in [0,5], capacity floor(N/4). The draw order is
/// part of the contract so instances reproduce bit-exactly from the seed.
QKPInstance gen_qkp(int n, std::uint64_t seed);

Coord qkp_cost(const QKPInstance& inst, const Bitstring& x);

/// Random facility constraints: each of the m rows places floor(0.1 n) ones
/// at distinct random columns; lower bound 2, upper bound broadcast.
/// Requires floor(0.1 n) >= 2.
FacilityInstance gen_facility(int n, int m, Coord upper, std::uint64_t seed);

/// Exact model count by exhaustive enumeration (N <= 24).
std::uint64_t brute_force_count(const ConstraintSystem& sys);

using CostFn = std::function<double(const Bitstring&)>;

/// Exact constrained minimum with lowest-lexicographic argmin tie-break
/// (N <= 24). Throws InfeasibleSystemError when nothing is feasible.
std::pair<Bitstring, double> brute_force_solve(const ConstraintSystem& sys, const CostFn& cost);

/// An instance file: a constraint system plus optional cost data.
struct Instance {
  std::string type;  // "qkp" | "facility" | "cardinality" | "raw"
  ConstraintSystem system;
  std::optional<QKPInstance> qkp;
  std::uint64_t seed = 0;
};

Instance instance_from_qkp(QKPInstance inst);
Instance instance_from_system(std::string type, ConstraintSystem sys, std::uint64_t seed);

/// JSON instance files; readers validate invariants and point at the
/// offending field on failure.
Instance read_instance(std::istream& is);
Instance read_instance_file(const std::string& path);
void write_instance(std::ostream& os, const Instance& inst);
void write_instance_file(const std::string& path, const Instance& inst);

/// Cost callbacks selectable by name: "qkp" needs QKP data, "zero" is the
/// constant zero cost.
CostFn cost_by_name(const std::string& name, const Instance& inst);

}  // namespace ctn
