#pragma once

#include <map>
#include <vector>

#include "ctn/cmps.hpp"
#include "ctn/problems.hpp"

namespace ctn {

/// Unique feasible bitstrings seen so far, each with its cost evaluated
/// exactly once.
struct SampleDictionary {
  std::map<Bitstring, double> entries;

  /// Inserts unseen samples, invoking cost only for new keys.
  void insert_unique(const std::vector<Bitstring>& samples, const CostFn& cost);
  double cost_of(const Bitstring& x, const CostFn& cost);
  std::size_t size() const { return entries.size(); }
};

struct OptimizerConfig {
  int t_max = 75;
  double cutoff = 1e-4;
  double learning_rate = 0.05;
  int n_samples = 400;
  /// Initial temperature; values <= 0 select the automatic rule (standard
  /// deviation of the initial batch costs).
  double t_init = -1.0;
  int replace_count = 40;
  std::uint64_t seed = 0;
  /// Soft wall-clock cap in seconds, checked between iterations; 0 disables.
  double time_limit_s = 0.0;

  void validate() const;
};

struct HistoryRow {
  int t = 0;
  double temperature = 0;
  double c_min = 0;
  double c_cum_min = 0;
  int max_bond = 0;
  std::size_t dict_size = 0;
  long long wall_ms = 0;
};

struct RunHistory {
  std::vector<HistoryRow> rows;
};

struct SolveResult {
  Bitstring best_x;
  double best_cost = 0;
  RunHistory history;
};

/// Normalized weights exp(-(C - C_min)/T) over the dictionary keys in their
/// map (lexicographic) order.
std::vector<double> boltzmann_weights(const SampleDictionary& dict, double temperature);

/// The schedule T_init / t for t >= 1.
double anneal_temperature(double t_init, int t);

/// Mean negative log-likelihood -(1/|B|) sum log(psi^2/Z) over the batch.
/// Samples the model assigns zero weight to are excluded from the mean.
double mean_nll(const ConstrainedMPS& mps, const std::vector<Bitstring>& batch);

/// Gradient of mean_nll with respect to the canonical-center matrix:
/// 2F/Z - (2/|B|) sum E(x)/psi(x), with E(x) the fixed-x environment.
/// The MPS must be bond-centered.
BondMatrix center_gradient(const ConstrainedMPS& mps, const std::vector<Bitstring>& batch);

/// One full forward-and-backward sweep of one-site gradient descent with the
/// joint-block truncation after every local update. Ends with the center at
/// bond 0 and a unit-norm center matrix.
void train_step(ConstrainedMPS& mps, const std::vector<Bitstring>& trainset, double cutoff,
                double learning_rate);

/// Replace `replace_count` uniformly-chosen distinct positions of `current`
/// with the leading entries of `fresh`.
std::vector<Bitstring> select(const std::vector<Bitstring>& current,
                              const std::vector<Bitstring>& fresh, int replace_count, Rng& rng);

/// The annealed generative optimizer over the feasible set of sys.
SolveResult solve(const CostFn& cost, const ConstraintSystem& sys, const OptimizerConfig& cfg);

}  // namespace ctn
