#include "ctn/problems.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "ctn/errors.hpp"
#include "json.hpp"

namespace ctn {

// ---------------------------------------------------------------------------
// Generators

ConstraintSystem QKPInstance::to_system() const {
  return ConstraintSystem(n, 1, w, {0}, {capacity});
}

ConstraintSystem FacilityInstance::to_system() const {
  return ConstraintSystem(n, m, a, std::vector<Coord>(static_cast<std::size_t>(m), 2),
                          std::vector<Coord>(static_cast<std::size_t>(m), upper));
}

ConstraintSystem gen_cardinality(int n, Coord lo, Coord hi) {
  return ConstraintSystem(n, 1, std::vector<Coord>(static_cast<std::size_t>(n), 1), {lo}, {hi});
}

QKPInstance gen_qkp(int n, std::uint64_t seed) {
  if (n < 1) throw Error("gen_qkp: n must be >= 1");
  Rng rng(seed);
  QKPInstance inst;
  inst.n = n;
  inst.seed = seed;
  inst.q.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  for (auto& v : inst.q) v = rng.uniform_int(-5, 5);
  inst.w.resize(static_cast<std::size_t>(n));
  for (auto& v : inst.w) v = rng.uniform_int(0, 5);
  inst.capacity = n / 4;
  return inst;
}

Coord qkp_cost(const QKPInstance& inst, const Bitstring& x) {
  if (static_cast<int>(x.size()) != inst.n) throw Error("qkp_cost: bitstring length mismatch");
  Coord c = 0;
  for (int i = 0; i < inst.n; ++i) {
    if (!x[static_cast<std::size_t>(i)]) continue;
    const std::size_t row = static_cast<std::size_t>(i) * static_cast<std::size_t>(inst.n);
    for (int j = 0; j < inst.n; ++j) {
      if (x[static_cast<std::size_t>(j)]) c += inst.q[row + static_cast<std::size_t>(j)];
    }
  }
  return c;
}

FacilityInstance gen_facility(int n, int m, Coord upper, std::uint64_t seed) {
  const int per_row = n / 10;
  if (per_row < 2) {
    throw Error("gen_facility: floor(0.1 N) = " + std::to_string(per_row) +
                " cannot satisfy the lower bound of 2");
  }
  if (m < 1) throw Error("gen_facility: m must be >= 1");
  Rng rng(seed);
  FacilityInstance inst;
  inst.n = n;
  inst.m = m;
  inst.upper = upper;
  inst.seed = seed;
  inst.a.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(m), 0);
  std::vector<int> cols(static_cast<std::size_t>(n));
  for (int k = 0; k < m; ++k) {
    for (int j = 0; j < n; ++j) cols[static_cast<std::size_t>(j)] = j;
    // partial Fisher-Yates: the first per_row entries become the chosen columns
    for (int j = 0; j < per_row; ++j) {
      const auto pick = j + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(n - j)));
      std::swap(cols[static_cast<std::size_t>(j)], cols[static_cast<std::size_t>(pick)]);
      inst.a[static_cast<std::size_t>(k) * static_cast<std::size_t>(n) +
             static_cast<std::size_t>(cols[static_cast<std::size_t>(j)])] = 1;
    }
  }
  return inst;
}

// ---------------------------------------------------------------------------
// Brute-force oracles

namespace {

void check_enumerable(const ConstraintSystem& sys) {
  if (sys.num_vars() > 24) {
    throw BoundExceededError("brute force limited to N <= 24, got N = " +
                             std::to_string(sys.num_vars()));
  }
}

// Gray-code walk over all bitstrings; visit(x, sums) after every flip.
template <typename Visit>
void gray_walk(const ConstraintSystem& sys, Visit&& visit) {
  const int n = sys.num_vars();
  const int m = sys.num_constraints();
  Bitstring x(static_cast<std::size_t>(n), 0);
  std::vector<Coord> sums(static_cast<std::size_t>(m), 0);
  visit(x, sums);
  for (std::uint64_t i = 1; i < (std::uint64_t{1} << n); ++i) {
    const int j = std::countr_zero(i);
    const auto js = static_cast<std::size_t>(j);
    const Coord sign = x[js] ? -1 : 1;
    x[js] ^= 1u;
    for (int k = 0; k < m; ++k) sums[static_cast<std::size_t>(k)] += sign * sys.a(k, j);
    visit(x, sums);
  }
}

bool within(const ConstraintSystem& sys, const std::vector<Coord>& sums) {
  for (int k = 0; k < sys.num_constraints(); ++k) {
    const auto ks = static_cast<std::size_t>(k);
    if (sums[ks] < sys.lower()[ks] || sums[ks] > sys.upper()[ks]) return false;
  }
  return true;
}

}  // namespace

std::uint64_t brute_force_count(const ConstraintSystem& sys) {
  check_enumerable(sys);
  std::uint64_t count = 0;
  gray_walk(sys, [&](const Bitstring&, const std::vector<Coord>& sums) {
    if (within(sys, sums)) ++count;
  });
  return count;
}

std::pair<Bitstring, double> brute_force_solve(const ConstraintSystem& sys, const CostFn& cost) {
  check_enumerable(sys);
  bool found = false;
  Bitstring best;
  double best_cost = 0;
  gray_walk(sys, [&](const Bitstring& x, const std::vector<Coord>& sums) {
    if (!within(sys, sums)) return;
    const double c = cost(x);
    if (!found || c < best_cost || (c == best_cost && x < best)) {
      found = true;
      best = x;
      best_cost = c;
    }
  });
  if (!found) throw InfeasibleSystemError("no feasible bitstring");
  return {best, best_cost};
}

// ---------------------------------------------------------------------------
// Instance files

Instance instance_from_qkp(QKPInstance inst) {
  ConstraintSystem sys = inst.to_system();
  const std::uint64_t seed = inst.seed;
  return Instance{"qkp", std::move(sys), std::move(inst), seed};
}

Instance instance_from_system(std::string type, ConstraintSystem sys, std::uint64_t seed) {
  return Instance{std::move(type), std::move(sys), std::nullopt, seed};
}

namespace {

using nlohmann::json;

std::vector<Coord> coord_array(const json& j, const std::string& field, std::size_t expect) {
  if (!j.contains(field)) throw ParseError("instance: missing field '" + field + "'");
  const json& arr = j.at(field);
  if (!arr.is_array()) throw ParseError("instance: field '" + field + "' must be an array");
  if (arr.size() != expect) {
    throw ParseError("instance: field '" + field + "' has " + std::to_string(arr.size()) +
                     " entries, expected " + std::to_string(expect));
  }
  std::vector<Coord> out(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number_integer()) {
      throw ParseError("instance: " + field + "[" + std::to_string(i) + "] is not an integer");
    }
    out[i] = arr[i].get<Coord>();
  }
  return out;
}

}  // namespace

Instance read_instance(std::istream& is) {
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("instance: ") + e.what());
  }
  if (!j.contains("type") || !j.at("type").is_string()) {
    throw ParseError("instance: missing string field 'type'");
  }
  const std::string type = j.at("type").get<std::string>();
  if (type != "qkp" && type != "facility" && type != "cardinality" && type != "raw") {
    throw ParseError("instance: unknown type '" + type + "'");
  }
  if (!j.contains("N") || !j.at("N").is_number_integer()) {
    throw ParseError("instance: missing integer field 'N'");
  }
  if (!j.contains("M") || !j.at("M").is_number_integer()) {
    throw ParseError("instance: missing integer field 'M'");
  }
  const int n = j.at("N").get<int>();
  const int m = j.at("M").get<int>();
  if (n < 1 || m < 1) throw ParseError("instance: N and M must be >= 1");
  auto a = coord_array(j, "A", static_cast<std::size_t>(n) * static_cast<std::size_t>(m));
  auto lo = coord_array(j, "l", static_cast<std::size_t>(m));
  auto up = coord_array(j, "u", static_cast<std::size_t>(m));
  ConstraintSystem sys(n, m, std::move(a), std::move(lo), std::move(up));

  Instance inst{type, std::move(sys), std::nullopt, 0};
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_integer() && !j.at("seed").is_number_unsigned()) {
      throw ParseError("instance: 'seed' must be an integer");
    }
    inst.seed = j.at("seed").get<std::uint64_t>();
  }

  if (type == "qkp") {
    QKPInstance qkp;
    qkp.n = n;
    qkp.seed = inst.seed;
    qkp.q = coord_array(j, "Q", static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    qkp.w = coord_array(j, "w", static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < qkp.w.size(); ++i) {
      if (qkp.w[i] < 0) {
        throw ParseError("instance: w[" + std::to_string(i) + "] must be nonnegative");
      }
    }
    if (!j.contains("W") || !j.at("W").is_number_integer()) {
      throw ParseError("instance: missing integer field 'W'");
    }
    qkp.capacity = j.at("W").get<Coord>();
    if (m != 1) throw ParseError("instance: qkp instances have M = 1");
    if (inst.system.a_row_major() != qkp.w || inst.system.lower()[0] != 0 ||
        inst.system.upper()[0] != qkp.capacity) {
      throw ParseError("instance: qkp constraint row must be (A, l, u) = (w, 0, W)");
    }
    inst.qkp = std::move(qkp);
  } else if (type == "facility") {
    for (std::size_t i = 0; i < inst.system.a_row_major().size(); ++i) {
      const Coord v = inst.system.a_row_major()[i];
      if (v != 0 && v != 1) {
        throw ParseError("instance: A[" + std::to_string(i) + "] must be 0/1 for facility");
      }
    }
  }
  return inst;
}

Instance read_instance_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open instance file: " + path);
  return read_instance(f);
}

void write_instance(std::ostream& os, const Instance& inst) {
  json j;
  j["type"] = inst.type;
  j["N"] = inst.system.num_vars();
  j["M"] = inst.system.num_constraints();
  j["A"] = inst.system.a_row_major();
  j["l"] = inst.system.lower();
  j["u"] = inst.system.upper();
  j["seed"] = inst.seed;
  if (inst.qkp) {
    j["Q"] = inst.qkp->q;
    j["w"] = inst.qkp->w;
    j["W"] = inst.qkp->capacity;
  }
  os << j.dump(2) << '\n';
}

void write_instance_file(const std::string& path, const Instance& inst) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write instance file: " + path);
  write_instance(f, inst);
}

CostFn cost_by_name(const std::string& name, const Instance& inst) {
  if (name == "zero") {
    return [](const Bitstring&) { return 0.0; };
  }
  if (name == "qkp") {
    if (!inst.qkp) throw ParseError("instance has no QKP cost data");
    const QKPInstance qkp = *inst.qkp;
    return [qkp](const Bitstring& x) { return static_cast<double>(qkp_cost(qkp, x)); };
  }
  throw ParseError("unknown cost callback: " + name);
}

}  // namespace ctn
