#pragma once

// Shared helpers for the test binaries.

#include <cstdint>
#include <vector>

#include "ctn/indexing.hpp"
#include "ctn/rng.hpp"

namespace ctn::testing {

using Bits = std::vector<std::uint8_t>;

inline Bits bits_from(std::uint64_t mask, int n) {
  Bits x(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = (mask >> i) & 1u;
  return x;
}

inline Bits bits_from_string(const std::string& s) {
  Bits x;
  for (char c : s) x.push_back(c == '1' ? 1 : 0);
  return x;
}

/// Random system that is feasible by construction: bounds are a window
/// around A x* for a random witness x*.
inline ConstraintSystem random_feasible_system(Rng& rng, int n_min, int n_max, int m_max,
                                               Coord entry_range = 3, Coord slack = 3) {
  const int n = static_cast<int>(rng.uniform_int(n_min, n_max));
  const int m = static_cast<int>(rng.uniform_int(1, m_max));
  std::vector<Coord> a(static_cast<std::size_t>(n) * static_cast<std::size_t>(m));
  for (auto& v : a) v = rng.uniform_int(-entry_range, entry_range);
  Bits witness(static_cast<std::size_t>(n));
  for (auto& b : witness) b = static_cast<std::uint8_t>(rng.uniform_int(0, 1));
  std::vector<Coord> lo(static_cast<std::size_t>(m)), hi(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) {
    Coord v = 0;
    for (int j = 0; j < n; ++j) {
      if (witness[static_cast<std::size_t>(j)]) {
        v += a[static_cast<std::size_t>(k) * static_cast<std::size_t>(n) +
               static_cast<std::size_t>(j)];
      }
    }
    lo[static_cast<std::size_t>(k)] = v - rng.uniform_int(0, slack);
    hi[static_cast<std::size_t>(k)] = v + rng.uniform_int(0, slack);
  }
  return ConstraintSystem(n, m, std::move(a), std::move(lo), std::move(hi));
}

}  // namespace ctn::testing
