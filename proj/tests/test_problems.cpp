#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "ctn/cmps.hpp"
#include "ctn/problems.hpp"
#include "helpers.hpp"

using namespace ctn;
using ctn::testing::bits_from_string;

TEST_CASE("gen_cardinality") {
  const auto eq3 = gen_cardinality(3, 2, 2);
  CHECK(eq3.num_vars() == 3);
  CHECK(eq3.num_constraints() == 1);
  CHECK(eq3.lower()[0] == 2);
  CHECK(eq3.upper()[0] == 2);
  for (int j = 0; j < 3; ++j) CHECK(eq3.a(0, j) == 1);

  CHECK(charge_complexity(gen_cardinality(9, 0, 9)) == 1);
}

TEST_CASE("gen_qkp follows the documented protocol") {
  CHECK(gen_qkp(50, 3).capacity == 12);
  CHECK(gen_qkp(8, 3).capacity == 2);

  const auto a = gen_qkp(20, 42);
  const auto b = gen_qkp(20, 42);
  CHECK(a.q == b.q);
  CHECK(a.w == b.w);
  CHECK(a.capacity == b.capacity);
  CHECK(gen_qkp(20, 43).q != a.q);

  for (Coord v : a.q) {
    CHECK(v >= -5);
    CHECK(v <= 5);
  }
  for (Coord v : a.w) {
    CHECK(v >= 0);
    CHECK(v <= 5);
  }
}

TEST_CASE("qkp_cost is the plain bilinear form") {
  const auto inst = gen_qkp(10, 5);
  const Bitstring zero(10, 0);
  CHECK(qkp_cost(inst, zero) == 0);

  for (int i = 0; i < 10; ++i) {
    Bitstring x(10, 0);
    x[static_cast<std::size_t>(i)] = 1;
    CHECK(qkp_cost(inst, x) ==
          inst.q[static_cast<std::size_t>(i) * 10 + static_cast<std::size_t>(i)]);
  }

  Bitstring x(10, 0);
  x[2] = x[7] = 1;
  CHECK(qkp_cost(inst, x) ==
        inst.q[2 * 10 + 2] + inst.q[7 * 10 + 7] + inst.q[2 * 10 + 7] + inst.q[7 * 10 + 2]);
}

TEST_CASE("gen_facility row structure") {
  const auto inst = gen_facility(40, 3, 2, 11);
  CHECK(inst.n == 40);
  CHECK(inst.m == 3);
  for (int k = 0; k < 3; ++k) {
    Coord row_sum = 0;
    for (int j = 0; j < 40; ++j) {
      const Coord v = inst.a[static_cast<std::size_t>(k) * 40 + static_cast<std::size_t>(j)];
      CHECK((v == 0 || v == 1));
      row_sum += v;
    }
    CHECK(row_sum == 4);  // floor(0.1 * 40)
  }
  const auto sys = inst.to_system();
  for (int k = 0; k < 3; ++k) {
    CHECK(sys.lower()[static_cast<std::size_t>(k)] == 2);
    CHECK(sys.upper()[static_cast<std::size_t>(k)] == 2);
  }

  const auto wide = gen_facility(40, 3, 10, 11);
  CHECK(wide.to_system().upper()[0] == 10);

  CHECK_THROWS_AS(gen_facility(15, 2, 2, 1), Error);
  CHECK(gen_facility(40, 3, 2, 11).a == inst.a);
}

TEST_CASE("brute_force_count fixtures") {
  CHECK(brute_force_count(gen_cardinality(3, 2, 2)) == 3);
  CHECK(brute_force_count(gen_cardinality(6, 2, 4)) == 50);
  const ConstraintSystem eq8(4, 2, {1, 2, -1, -2, -2, 3, -1, 1}, {-1, -1}, {2, 1});
  CHECK(brute_force_count(eq8) == 5);
  CHECK_THROWS_AS(brute_force_count(gen_cardinality(25, 0, 25)), BoundExceededError);
}

TEST_CASE("brute_force_solve") {
  const auto sys = gen_cardinality(4, 1, 3);
  const auto [x0, c0] = brute_force_solve(sys, [](const Bitstring&) { return 0.0; });
  CHECK(c0 == 0.0);
  CHECK(x0 == bits_from_string("0001"));  // lexicographically smallest feasible

  // identity Q, unit weights, capacity 1: the empty knapsack wins
  QKPInstance ident;
  ident.n = 6;
  ident.q.assign(36, 0);
  for (int i = 0; i < 6; ++i) {
    ident.q[static_cast<std::size_t>(i) * 6 + static_cast<std::size_t>(i)] = 1;
  }
  ident.w.assign(6, 1);
  ident.capacity = 1;
  const auto [xi, ci] = brute_force_solve(ident.to_system(), [&](const Bitstring& b) {
    return static_cast<double>(qkp_cost(ident, b));
  });
  CHECK(ci == 0.0);
  CHECK(xi == Bitstring(6, 0));

  // frozen reference for the seeded N=12 instance
  const auto inst = gen_qkp(12, 7);
  CHECK(inst.capacity == 3);
  const auto [xs, cs] = brute_force_solve(inst.to_system(), [&](const Bitstring& b) {
    return static_cast<double>(qkp_cost(inst, b));
  });
  CHECK(cs == -13.0);
  CHECK(bitstring_to_string(xs) == "000100000011");

  CHECK_THROWS_AS(
      brute_force_solve(gen_cardinality(3, 4, 5), [](const Bitstring&) { return 0.0; }),
      InfeasibleSystemError);
}

TEST_CASE("model count agrees with enumeration across generated families") {
  Rng rng(2);
  for (int trial = 0; trial < 8; ++trial) {
    const int n = 8 + static_cast<int>(rng.uniform_int(0, 8));
    const auto qkp = gen_qkp(n, rng.next_u64());
    const auto sys = qkp.to_system();
    CHECK(ConstrainedMPS::build(sys, sys.num_vars()).count_solutions() ==
          static_cast<double>(brute_force_count(sys)));
  }
  for (int m = 1; m <= 3; ++m) {
    const auto fac = gen_facility(20, m, 2, 5 + static_cast<std::uint64_t>(m));
    const auto sys = fac.to_system();
    CHECK(ConstrainedMPS::build(sys, sys.num_vars()).count_solutions() ==
          static_cast<double>(brute_force_count(sys)));
  }
  for (Coord delta = 0; delta <= 12; delta += 3) {
    const auto sys = gen_cardinality(12, (12 - delta) / 2, (12 - delta) / 2 + delta);
    for (int m = 1; m <= sys.num_vars(); m += 5) {
      CHECK(ConstrainedMPS::build(sys, m).count_solutions() ==
            static_cast<double>(brute_force_count(sys)));
    }
  }
}

TEST_CASE("argmin is stable under symmetrization of Q") {
  Rng rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    const auto inst = gen_qkp(10, rng.next_u64());
    QKPInstance sym = inst;
    for (int i = 0; i < 10; ++i) {
      for (int j = 0; j < 10; ++j) {
        sym.q[static_cast<std::size_t>(i) * 10 + static_cast<std::size_t>(j)] =
            inst.q[static_cast<std::size_t>(i) * 10 + static_cast<std::size_t>(j)] +
            inst.q[static_cast<std::size_t>(j) * 10 + static_cast<std::size_t>(i)];
      }
    }
    const auto sys = inst.to_system();
    const auto r1 = brute_force_solve(
        sys, [&](const Bitstring& b) { return static_cast<double>(qkp_cost(inst, b)); });
    const auto r2 = brute_force_solve(
        sys, [&](const Bitstring& b) { return static_cast<double>(qkp_cost(sym, b)); });
    CHECK(r2.second == 2 * r1.second);
    CHECK(r2.first == r1.first);
  }
}

TEST_CASE("instance files round trip and reject malformed input") {
  Instance inst = instance_from_qkp(gen_qkp(9, 123));
  std::stringstream ss;
  write_instance(ss, inst);
  const Instance back = read_instance(ss);
  CHECK(back.type == "qkp");
  CHECK(back.system.a_row_major() == inst.system.a_row_major());
  CHECK(back.qkp.has_value());
  CHECK(back.qkp->q == inst.qkp->q);
  CHECK(back.qkp->capacity == inst.qkp->capacity);
  CHECK(back.seed == 123);

  auto reject = [](const std::string& text, const std::string& needle) {
    std::stringstream in(text);
    try {
      read_instance(in);
      FAIL_CHECK("expected rejection: " << text);
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  reject("{", "instance:");
  reject(R"({"type":"card","N":2,"M":1,"A":[1,1],"l":[0],"u":[1]})", "unknown type");
  reject(R"({"type":"raw","N":2,"M":1,"A":[1],"l":[0],"u":[1]})", "field 'A' has 1 entries");
  reject(R"({"type":"raw","N":2,"M":1,"A":[1,"x"],"l":[0],"u":[1]})", "A[1] is not an integer");
  reject(R"({"type":"raw","N":2,"M":1,"A":[1,1],"l":[2],"u":[1]})", "lower bound exceeds");
  reject(R"({"type":"facility","N":2,"M":1,"A":[1,2],"l":[0],"u":[2]})", "A[1] must be 0/1");
  reject(R"({"type":"qkp","N":2,"M":1,"A":[1,1],"l":[0],"u":[1],"Q":[1,2,3,4],"w":[1,-1],"W":1})",
         "w[1] must be nonnegative");
}
