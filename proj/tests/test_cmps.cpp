#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "ctn/cmps.hpp"
#include "ctn/rng.hpp"
#include "helpers.hpp"

using namespace ctn;
using ctn::testing::Bits;
using ctn::testing::bits_from;
using ctn::testing::bits_from_string;

namespace {

constexpr int kNoCap = std::numeric_limits<int>::max();

ConstraintSystem two_inequalities() {
  return ConstraintSystem(4, 2, {1, 2, -1, -2, -2, 3, -1, 1}, {-1, -1}, {2, 1});
}

ConstraintSystem cardinality(int n, Coord lo, Coord hi) {
  return ConstraintSystem(n, 1, std::vector<Coord>(static_cast<std::size_t>(n), 1), {lo}, {hi});
}

std::vector<Bits> brute_support(const ConstraintSystem& sys) {
  std::vector<Bits> out;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << sys.num_vars()); ++mask) {
    Bits x = bits_from(mask, sys.num_vars());
    if (sys.satisfied(x)) out.push_back(std::move(x));
  }
  std::sort(out.begin(), out.end());
  return out;
}

double max_abs(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST_CASE("uniform MPS over a fixed-cardinality constraint") {
  const auto sys = cardinality(3, 2, 2);
  const auto mps = ConstrainedMPS::build(sys, 3);
  CHECK(mps.count_solutions() == doctest::Approx(3.0));
  CHECK(mps.norm_squared() == doctest::Approx(3.0));
  CHECK(mps.evaluate(bits_from_string("110")) == 1.0);
  CHECK(mps.evaluate(bits_from_string("101")) == 1.0);
  CHECK(mps.evaluate(bits_from_string("011")) == 1.0);
  CHECK(mps.evaluate(bits_from_string("111")) == 0.0);
  CHECK(mps.evaluate(bits_from_string("100")) == 0.0);
  const auto supp = mps.support();
  CHECK(supp == brute_support(sys));
}

TEST_CASE("uniform MPS over the two-inequality example") {
  const auto sys = two_inequalities();
  for (int m = 1; m <= 4; ++m) {
    const auto mps = ConstrainedMPS::build(sys, m);
    CHECK(mps.count_solutions() == doctest::Approx(5.0));
    CHECK(mps.evaluate(bits_from_string("1110")) == 1.0);
    CHECK(mps.evaluate(bits_from_string("0100")) == 0.0);
    CHECK(mps.support() == brute_support(sys));
  }
  // all admissible blocks are scalar ones on the fresh state
  const auto mps = ConstrainedMPS::build(sys, 4);
  for (int i = 0; i < 4; ++i) {
    for (const auto& [key, mat] : mps.tensor(i).blocks) {
      CHECK(mat.rows() == 1);
      CHECK(mat.cols() == 1);
      CHECK(mat(0, 0) == 1.0);
    }
  }
}

TEST_CASE("unconstrained system is a product state") {
  const auto sys = cardinality(5, 0, 5);
  const auto mps = ConstrainedMPS::build(sys, 5);
  for (int b = 1; b <= 4; ++b) CHECK(mps.left_links(b).size() == 1);
  CHECK(mps.max_bond_dimension() == 1);
  CHECK(mps.count_solutions() == doctest::Approx(32.0));
}

TEST_CASE("bounded cardinality count") {
  const auto mps = ConstrainedMPS::build(cardinality(6, 2, 4), 6);
  CHECK(mps.count_solutions() == doctest::Approx(50.0));
}

TEST_CASE("one-site MPS") {
  const ConstraintSystem sys(1, 1, {1}, {0}, {1});
  auto mps = ConstrainedMPS::build(sys, 1);
  CHECK(mps.count_solutions() == 2.0);
  mps.canonicalize(0, 0.0, kNoCap);
  CHECK(mps.evaluate({0}) == doctest::Approx(1.0));
  Rng rng(1);
  for (const auto& s : mps.sample(50, rng)) CHECK(sys.satisfied(s));
}

TEST_CASE("joint_block_svd: exact factorization of a single group") {
  Rng rng(3);
  Eigen::MatrixXd m(4, 3);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 3; ++c) m(r, c) = rng.normal();
  }
  const auto res = joint_block_svd({m}, 0.0, kNoCap);
  CHECK(res.discarded_weight == doctest::Approx(0.0).epsilon(1e-14));
  CHECK((m - res.isometries[0] * res.factors[0]).norm() < 1e-12);
  CHECK((res.isometries[0].transpose() * res.isometries[0] -
         Eigen::MatrixXd::Identity(3, 3))
            .norm() < 1e-12);
}

TEST_CASE("joint_block_svd: block-diagonal environment factorizes blockwise") {
  // W = (A 0 B 0; 0 C 0 0; 0 0 D E) with three row groups; the factor F must
  // reproduce each group's column footprint and U must stay group-diagonal.
  Rng rng(17);
  auto rnd = [&](int r, int c) {
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < c; ++j) m(i, j) = rng.normal();
    }
    return m;
  };
  const Eigen::MatrixXd a = rnd(2, 2), b = rnd(2, 2), cc = rnd(1, 3), d = rnd(2, 2), e = rnd(2, 1);

  Eigen::MatrixXd w1 = Eigen::MatrixXd::Zero(2, 8);
  w1.block(0, 0, 2, 2) = a;
  w1.block(0, 5, 2, 2) = b;
  Eigen::MatrixXd w2 = Eigen::MatrixXd::Zero(1, 8);
  w2.block(0, 2, 1, 3) = cc;
  Eigen::MatrixXd w3 = Eigen::MatrixXd::Zero(2, 8);
  w3.block(0, 5, 2, 2) = d;
  w3.block(0, 7, 2, 1) = e;

  const auto res = joint_block_svd({w1, w2, w3}, 0.0, kNoCap);
  for (int g = 0; g < 3; ++g) {
    const auto& u = res.isometries[static_cast<std::size_t>(g)];
    CHECK((u.transpose() * u - Eigen::MatrixXd::Identity(u.cols(), u.cols())).norm() < 1e-12);
  }
  CHECK((w1 - res.isometries[0] * res.factors[0]).norm() < 1e-12);
  CHECK((w2 - res.isometries[1] * res.factors[1]).norm() < 1e-12);
  CHECK((w3 - res.isometries[2] * res.factors[2]).norm() < 1e-12);
  // factors inherit the zero columns of their group
  CHECK(res.factors[0].middleCols(2, 3).norm() == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(res.factors[1].middleCols(0, 2).norm() == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(res.factors[2].middleCols(0, 5).norm() == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("joint_block_svd: global truncation discards the smallest values") {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Eigen::MatrixXd> groups;
    std::vector<double> all_sv;
    for (int g = 0; g < 3; ++g) {
      Eigen::MatrixXd m(2, 4);
      for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 4; ++c) m(r, c) = rng.normal();
      }
      groups.push_back(m);
      Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
      for (int k = 0; k < svd.singularValues().size(); ++k) {
        all_sv.push_back(svd.singularValues()(k));
      }
    }
    std::sort(all_sv.begin(), all_sv.end());
    const int chi = 2;
    double expect = 0;
    for (std::size_t k = 0; k + chi < all_sv.size(); ++k) expect += all_sv[k] * all_sv[k];
    const auto res = joint_block_svd(groups, 0.0, chi);
    CHECK(res.discarded_weight == doctest::Approx(expect).epsilon(1e-10));
    double err = 0;
    for (std::size_t g = 0; g < 3; ++g) {
      err += (groups[g] - res.isometries[g] * res.factors[g]).squaredNorm();
    }
    CHECK(err == doctest::Approx(res.discarded_weight).epsilon(1e-10));
  }
}

TEST_CASE("canonicalization preserves amplitudes and yields isometries") {
  Rng rng(7);
  for (int trial = 0; trial < 25; ++trial) {
    const auto sys = ctn::testing::random_feasible_system(rng, 2, 10, 2);
    const int n = sys.num_vars();
    const int m = 1 + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(n)));
    auto mps = ConstrainedMPS::build(sys, m);
    mps.randomize_blocks(rng);
    const auto before = mps.dense_amplitudes();
    const double scale = std::max(1.0, max_abs(before));

    mps.canonicalize(0, 0.0, kNoCap);
    const auto mid = mps.dense_amplitudes();
    for (std::size_t i = 0; i < before.size(); ++i) {
      CHECK(std::abs(before[i] - mid[i]) <= 1e-10 * scale);
    }
    for (int i = 0; i < n; ++i) CHECK(mps.right_isometry_residual(i) <= 1e-12);
    CHECK(std::abs(mps.norm_squared() - mps.center_matrix().norm_squared()) <=
          1e-10 * std::max(1.0, mps.norm_squared()));

    mps.canonicalize(n, 0.0, kNoCap);
    const auto after = mps.dense_amplitudes();
    for (std::size_t i = 0; i < before.size(); ++i) {
      CHECK(std::abs(before[i] - after[i]) <= 1e-10 * scale);
    }
    for (int i = 0; i < n; ++i) CHECK(mps.left_isometry_residual(i) <= 1e-12);
  }
}

TEST_CASE("worked canonical-shift structure on the two-inequality example") {
  const auto sys = two_inequalities();
  auto mps = ConstrainedMPS::build(sys, 4);
  Rng rng(11);
  mps.randomize_blocks(rng);
  const auto before = mps.dense_amplitudes();

  mps.canonicalize(1, 0.0, kNoCap);
  const double w = mps.shift_center_right(0.0, kNoCap);
  CHECK(w == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(mps.center_bond() == 2);

  // The new site-1 tensor keeps the block pattern of the worked example:
  // two x=0 blocks and one x=1 block, three distinct target regions, and one
  // structurally dead merged row.
  const BlockTensor& t2 = mps.tensor(1);
  int n0 = 0, n1 = 0;
  std::map<int, int> targets;
  for (const auto& [key, mat] : t2.blocks) {
    (key.x == 0 ? n0 : n1)++;
    targets[key.right]++;
  }
  CHECK(n0 == 2);
  CHECK(n1 == 1);
  CHECK(targets.size() == 3);
  CHECK(mps.left_isometry_residual(1) <= 1e-12);
  // the x=1 block comes from the left region holding the column of site 1
  for (const auto& [key, mat] : t2.blocks) {
    if (key.x == 1) {
      CHECK(mps.left_region(1, key.left).contains(sys.column(0)));
    }
  }

  const auto after = mps.dense_amplitudes();
  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(std::abs(before[i] - after[i]) <= 1e-10);
  }
}

TEST_CASE("single truncation error equals the discarded weight") {
  Rng rng(31);
  int exercised = 0;
  for (int trial = 0; trial < 40 && exercised < 15; ++trial) {
    const auto sys = ctn::testing::random_feasible_system(rng, 4, 10, 2);
    const int n = sys.num_vars();
    auto mps = ConstrainedMPS::build(sys, n);
    mps.randomize_blocks(rng);
    mps.canonicalize(n / 2, 0.0, kNoCap);
    const double z0 = mps.norm_squared();
    const auto before = mps.dense_amplitudes();

    auto trunc = mps;
    const double w = trunc.shift_center_right(0.0, 1);
    if (w <= 0) continue;  // bond was already rank one
    ++exercised;
    const auto after = trunc.dense_amplitudes();
    double err = 0;
    for (std::size_t i = 0; i < before.size(); ++i) {
      const double d = before[i] - after[i];
      err += d * d;
    }
    CHECK(err == doctest::Approx(w).epsilon(1e-8));
    CHECK(trunc.norm_squared() == doctest::Approx(z0 - w).epsilon(1e-8));

    auto trunc2 = mps;
    const double w2 = trunc2.shift_center_left(0.0, 1);
    if (w2 > 0) {
      const auto after2 = trunc2.dense_amplitudes();
      double err2 = 0;
      for (std::size_t i = 0; i < before.size(); ++i) {
        const double d = before[i] - after2[i];
        err2 += d * d;
      }
      CHECK(err2 == doctest::Approx(w2).epsilon(1e-8));
    }
  }
  CHECK(exercised > 0);
}

TEST_CASE("sampling the uniform superposition is uniform") {
  const auto sys = cardinality(3, 2, 2);
  const auto mps = ConstrainedMPS::build(sys, 3);
  Rng rng(5);
  const auto samples = mps.sample(30000, rng);
  std::map<std::string, int> freq;
  for (const auto& s : samples) freq[bitstring_to_string(s)]++;
  CHECK(freq.size() == 3);
  for (const auto& [key, cnt] : freq) {
    CHECK(std::abs(cnt / 30000.0 - 1.0 / 3.0) < 0.02);
  }
}

TEST_CASE("samples always satisfy the constraints") {
  const auto sys = two_inequalities();
  const auto mps = ConstrainedMPS::build(sys, 4);
  Rng rng(9);
  for (const auto& s : mps.sample(2000, rng)) CHECK(sys.satisfied(s));

  Rng rng2(77);
  for (int trial = 0; trial < 10; ++trial) {
    const auto rsys = ctn::testing::random_feasible_system(rng2, 3, 9, 2);
    auto rmps = ConstrainedMPS::build(rsys, rsys.num_vars());
    rmps.randomize_blocks(rng2);
    for (const auto& s : rmps.sample(300, rng2)) CHECK(rsys.satisfied(s));
  }
}

TEST_CASE("sampling matches the Born distribution") {
  Rng rng(2025);
  const int n_samples = 30000;
  for (int trial = 0; trial < 4; ++trial) {
    const auto sys = ctn::testing::random_feasible_system(rng, 8, 8, 2);
    auto mps = ConstrainedMPS::build(sys, sys.num_vars());
    // spread the block magnitudes so the state looks like a trained model
    for (int i = 0; i < sys.num_vars(); ++i) {
      for (auto& [key, mat] : mps.tensor(i).blocks) {
        for (Eigen::Index r = 0; r < mat.rows(); ++r) {
          for (Eigen::Index c = 0; c < mat.cols(); ++c) {
            mat(r, c) = std::exp(0.8 * rng.normal());
          }
        }
      }
    }
    const auto amp = mps.dense_amplitudes();
    double z = 0;
    for (double a : amp) z += a * a;
    const auto samples = mps.sample(n_samples, rng);
    std::map<std::size_t, int> freq;
    for (const auto& s : samples) {
      std::size_t mask = 0;
      for (std::size_t i = 0; i < s.size(); ++i) mask |= static_cast<std::size_t>(s[i]) << i;
      freq[mask]++;
    }
    double tv = 0;
    for (std::size_t mask = 0; mask < amp.size(); ++mask) {
      const double p = amp[mask] * amp[mask] / z;
      const double q = freq.count(mask) ? freq[mask] / static_cast<double>(n_samples) : 0.0;
      tv += std::abs(p - q);
    }
    tv /= 2;
    CHECK(tv <= 0.02);
  }
}

TEST_CASE("serialization round trip is exact") {
  const auto sys = two_inequalities();
  auto mps = ConstrainedMPS::build(sys, 4);
  Rng rng(13);
  mps.randomize_blocks(rng);
  mps.canonicalize(2, 0.0, kNoCap);

  std::stringstream ss;
  mps.save(ss);
  const auto loaded = ConstrainedMPS::load(ss);
  CHECK(loaded.center_bond() == mps.center_bond());
  CHECK(loaded.max_bond_dimension() == mps.max_bond_dimension());
  CHECK(loaded.total_blocks() == mps.total_blocks());
  const auto a = mps.dense_amplitudes();
  const auto b = loaded.dense_amplitudes();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);

  // site-centered round trip too
  auto fresh = ConstrainedMPS::build(sys, 2);
  std::stringstream s2;
  fresh.save(s2);
  const auto loaded2 = ConstrainedMPS::load(s2);
  CHECK(loaded2.count_solutions() == fresh.count_solutions());

  std::stringstream bad("ctn-cmps 2\n");
  CHECK_THROWS_AS(ConstrainedMPS::load(bad), ParseError);
}

TEST_CASE("support invariance survives truncation") {
  Rng rng(41);
  for (int trial = 0; trial < 15; ++trial) {
    const auto sys = ctn::testing::random_feasible_system(rng, 3, 10, 2);
    auto mps = ConstrainedMPS::build(sys, sys.num_vars());
    mps.randomize_blocks(rng);
    mps.canonicalize(0, 1e-2, 3);  // aggressive truncation
    const auto amp = mps.dense_amplitudes();
    for (std::size_t mask = 0; mask < amp.size(); ++mask) {
      if (amp[mask] == 0.0) continue;
      CHECK(sys.satisfied(bits_from(mask, sys.num_vars())));
    }
  }
}
