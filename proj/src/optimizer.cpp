#include "ctn/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "ctn/errors.hpp"

namespace ctn {

namespace {

constexpr int kNoCap = std::numeric_limits<int>::max();
// Relative probability below which a sample no longer contributes to the
// gradient; keeps 1/psi bounded when truncation has starved its amplitude.
constexpr double kSupportFloor = 1e-28;

}  // namespace

void SampleDictionary::insert_unique(const std::vector<Bitstring>& samples, const CostFn& cost) {
  for (const Bitstring& x : samples) {
    if (!entries.count(x)) entries.emplace(x, cost(x));
  }
}

double SampleDictionary::cost_of(const Bitstring& x, const CostFn& cost) {
  auto it = entries.find(x);
  if (it == entries.end()) it = entries.emplace(x, cost(x)).first;
  return it->second;
}

void OptimizerConfig::validate() const {
  if (t_max < 1) throw Error("optimizer: t_max must be >= 1");
  if (cutoff < 0) throw Error("optimizer: cutoff must be >= 0");
  if (learning_rate <= 0) throw Error("optimizer: learning rate must be positive");
  if (n_samples < 1) throw Error("optimizer: n_samples must be >= 1");
  if (replace_count < 1 || replace_count > n_samples) {
    throw Error("optimizer: replace_count must be in [1, n_samples]");
  }
}

std::vector<double> boltzmann_weights(const SampleDictionary& dict, double temperature) {
  if (dict.entries.empty()) throw Error("boltzmann_weights: empty dictionary");
  if (temperature <= 0) throw Error("boltzmann_weights: temperature must be positive");
  double cmin = std::numeric_limits<double>::infinity();
  for (const auto& [x, c] : dict.entries) cmin = std::min(cmin, c);
  std::vector<double> w;
  w.reserve(dict.entries.size());
  double total = 0;
  for (const auto& [x, c] : dict.entries) {
    const double v = std::exp(-(c - cmin) / temperature);
    w.push_back(v);
    total += v;
  }
  for (double& v : w) v /= total;
  return w;
}

double anneal_temperature(double t_init, int t) {
  if (t < 1) throw Error("anneal_temperature: t must be >= 1");
  return t_init / t;
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct Batch {
  std::vector<Bitstring> unique;
  std::vector<double> weight;  // multiplicity
  double total = 0;
};

Batch dedup(const std::vector<Bitstring>& samples) {
  std::map<Bitstring, double> mult;
  for (const auto& x : samples) mult[x] += 1.0;
  Batch b;
  for (auto& [x, w] : mult) {
    b.unique.push_back(x);
    b.weight.push_back(w);
    b.total += w;
  }
  return b;
}

// Left vectors over the row side of bond `bond` for every batch member.
std::vector<BondRowVector> left_vectors(const ConstrainedMPS& mps, const Batch& batch, int bond) {
  std::vector<BondRowVector> out(batch.unique.size());
  for (std::size_t s = 0; s < batch.unique.size(); ++s) {
    BondRowVector v{{0, Eigen::RowVectorXd::Ones(1)}};
    for (int i = 0; i < bond; ++i) {
      v = row_times_tensor(v, mps.tensor(i), batch.unique[s][static_cast<std::size_t>(i)]);
      if (v.empty()) break;
    }
    out[s] = std::move(v);
  }
  return out;
}

// Right vectors over the column side of every bond, for one batch member.
std::vector<BondColVector> right_vectors_all_bonds(const ConstrainedMPS& mps, const Bitstring& x) {
  const int n = mps.num_sites();
  std::vector<BondColVector> w(static_cast<std::size_t>(n) + 1);
  w[static_cast<std::size_t>(n)] = {{0, Eigen::VectorXd::Ones(1)}};
  for (int i = n - 1; i >= 0; --i) {
    w[static_cast<std::size_t>(i)] = tensor_times_col(
        mps.tensor(i), x[static_cast<std::size_t>(i)], w[static_cast<std::size_t>(i) + 1]);
  }
  return w;
}

double psi_at_center(const BondMatrix& f, const BondRowVector& u, const BondColVector& w) {
  double psi = 0;
  for (const auto& [key, mat] : f.blocks) {
    const auto iu = u.find(key.first);
    if (iu == u.end()) continue;
    const auto iw = w.find(key.second);
    if (iw == w.end()) continue;
    psi += (iu->second * mat * iw->second).value();
  }
  return psi;
}

// One gradient step on the center matrix: F -= lr * (2F/Z - (2/K) sum E/psi).
void update_center(ConstrainedMPS& mps, const Batch& batch,
                   const std::vector<BondRowVector>& us, const std::vector<BondColVector>& ws,
                   double learning_rate) {
  BondMatrix& f = mps.center_matrix();
  const double z = f.norm_squared();
  if (z < 1e-240) throw Error("training underflow: center norm vanished");

  std::map<std::pair<int, int>, Eigen::MatrixXd> push;
  double used = 0;
  for (std::size_t s = 0; s < batch.unique.size(); ++s) {
    const double psi = psi_at_center(f, us[s], ws[s]);
    if (psi * psi <= kSupportFloor * z) continue;
    used += batch.weight[s];
    for (const auto& [r, uvec] : us[s]) {
      for (const auto& [c, wvec] : ws[s]) {
        if (!f.blocks.count({r, c})) continue;
        auto slot = push.try_emplace({r, c}, Eigen::MatrixXd::Zero(uvec.cols(), wvec.rows())).first;
        slot->second.noalias() += (batch.weight[s] / psi) * (uvec.transpose() * wvec.transpose());
      }
    }
  }
  if (used == 0) return;  // the whole batch fell out of the model support
  for (auto& [key, mat] : f.blocks) {
    Eigen::MatrixXd grad = (2.0 / z) * mat;
    const auto it = push.find(key);
    if (it != push.end()) grad -= (2.0 / used) * it->second;
    mat -= learning_rate * grad;
  }
}

}  // namespace

double mean_nll(const ConstrainedMPS& mps, const std::vector<Bitstring>& batch) {
  const double z = mps.norm_squared();
  if (z <= 0) throw Error("mean_nll: zero-norm state");
  double total = 0;
  double used = 0;
  for (const Bitstring& x : batch) {
    const double psi = mps.evaluate(x);
    if (psi * psi <= kSupportFloor * z) continue;
    total += -std::log(psi * psi / z);
    used += 1;
  }
  if (used == 0) throw Error("mean_nll: batch has no support under the model");
  return total / used;
}

BondMatrix center_gradient(const ConstrainedMPS& mps, const std::vector<Bitstring>& batch) {
  const Batch b = dedup(batch);
  const int c = mps.center_bond();
  if (c < 0) throw Error("center_gradient: MPS is site-centered");
  const auto us = left_vectors(mps, b, c);
  std::vector<BondColVector> ws(b.unique.size());
  for (std::size_t s = 0; s < b.unique.size(); ++s) {
    BondColVector w{{0, Eigen::VectorXd::Ones(1)}};
    for (int i = mps.num_sites() - 1; i >= c; --i) {
      w = tensor_times_col(mps.tensor(i), b.unique[s][static_cast<std::size_t>(i)], w);
    }
    ws[s] = std::move(w);
  }

  const BondMatrix& f = mps.center_matrix();
  const double z = f.norm_squared();
  BondMatrix grad;
  grad.rows = f.rows;
  grad.cols = f.cols;
  double used = 0;
  std::map<std::pair<int, int>, Eigen::MatrixXd> push;
  for (std::size_t s = 0; s < b.unique.size(); ++s) {
    const double psi = psi_at_center(f, us[s], ws[s]);
    if (psi * psi <= kSupportFloor * z) continue;
    used += b.weight[s];
    for (const auto& [r, uvec] : us[s]) {
      for (const auto& [cc, wvec] : ws[s]) {
        if (!f.blocks.count({r, cc})) continue;
        auto slot = push.try_emplace({r, cc}, Eigen::MatrixXd::Zero(uvec.cols(), wvec.rows())).first;
        slot->second.noalias() += (b.weight[s] / psi) * (uvec.transpose() * wvec.transpose());
      }
    }
  }
  for (const auto& [key, mat] : f.blocks) {
    Eigen::MatrixXd g = (2.0 / z) * mat;
    const auto it = push.find(key);
    if (it != push.end() && used > 0) g -= (2.0 / used) * it->second;
    grad.blocks[key] = std::move(g);
  }
  return grad;
}

void train_step(ConstrainedMPS& mps, const std::vector<Bitstring>& trainset, double cutoff,
                double learning_rate) {
  if (trainset.empty()) throw Error("train_step: empty training set");
  const int n = mps.num_sites();
  if (mps.site_centered() || mps.center_bond() != 0) mps.canonicalize(0, 0.0, kNoCap);
  const Batch batch = dedup(trainset);
  const std::size_t k = batch.unique.size();

  // Forward sweep: right vectors are precomputed from the current (right
  // isometric) tensors and stay valid while the center passes them; left
  // vectors grow incrementally behind the center.
  std::vector<std::vector<BondColVector>> wall(k);
  for (std::size_t s = 0; s < k; ++s) wall[s] = right_vectors_all_bonds(mps, batch.unique[s]);
  std::vector<BondRowVector> us(k, BondRowVector{{0, Eigen::RowVectorXd::Ones(1)}});
  for (int c = 0; c < n; ++c) {
    std::vector<BondColVector> ws(k);
    for (std::size_t s = 0; s < k; ++s) ws[s] = wall[s][static_cast<std::size_t>(c)];
    update_center(mps, batch, us, ws, learning_rate);
    mps.shift_center_right(cutoff, kNoCap);
    for (std::size_t s = 0; s < k; ++s) {
      us[s] = row_times_tensor(us[s], mps.tensor(c),
                               batch.unique[s][static_cast<std::size_t>(c)]);
    }
  }

  // Backward sweep: mirror bookkeeping.
  std::vector<std::vector<BondRowVector>> uall(k);
  for (std::size_t s = 0; s < k; ++s) {
    uall[s].resize(static_cast<std::size_t>(n) + 1);
    BondRowVector v{{0, Eigen::RowVectorXd::Ones(1)}};
    uall[s][0] = v;
    for (int i = 0; i < n; ++i) {
      v = row_times_tensor(v, mps.tensor(i), batch.unique[s][static_cast<std::size_t>(i)]);
      uall[s][static_cast<std::size_t>(i) + 1] = v;
    }
  }
  std::vector<BondColVector> ws(k, BondColVector{{0, Eigen::VectorXd::Ones(1)}});
  for (int c = n; c >= 1; --c) {
    std::vector<BondRowVector> uc(k);
    for (std::size_t s = 0; s < k; ++s) uc[s] = uall[s][static_cast<std::size_t>(c)];
    update_center(mps, batch, uc, ws, learning_rate);
    mps.shift_center_left(cutoff, kNoCap);
    for (std::size_t s = 0; s < k; ++s) {
      ws[s] = tensor_times_col(mps.tensor(c - 1),
                               batch.unique[s][static_cast<std::size_t>(c - 1)], ws[s]);
    }
  }

  BondMatrix& f = mps.center_matrix();
  const double z = f.norm_squared();
  if (z < 1e-240) throw Error("training underflow: center norm vanished");
  f.scale(1.0 / std::sqrt(z));
}

std::vector<Bitstring> select(const std::vector<Bitstring>& current,
                              const std::vector<Bitstring>& fresh, int replace_count, Rng& rng) {
  if (replace_count < 0 || replace_count > static_cast<int>(current.size())) {
    throw Error("select: replace_count out of range");
  }
  if (static_cast<int>(fresh.size()) < replace_count) {
    throw Error("select: not enough fresh samples");
  }
  std::vector<Bitstring> out = current;
  std::vector<std::size_t> pos(current.size());
  std::iota(pos.begin(), pos.end(), 0);
  for (int i = 0; i < replace_count; ++i) {
    const std::size_t pick =
        static_cast<std::size_t>(i) + rng.uniform_index(pos.size() - static_cast<std::size_t>(i));
    std::swap(pos[static_cast<std::size_t>(i)], pos[pick]);
    out[pos[static_cast<std::size_t>(i)]] = fresh[static_cast<std::size_t>(i)];
  }
  return out;
}

SolveResult solve(const CostFn& cost, const ConstraintSystem& sys, const OptimizerConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const auto t_start = std::chrono::steady_clock::now();
  auto elapsed_s = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  };

  ConstrainedMPS psi0 = ConstrainedMPS::build(sys, sys.num_vars());
  psi0.canonicalize(0, 0.0, kNoCap);
  ConstrainedMPS psi = psi0;

  SampleDictionary dict;
  std::vector<Bitstring> model_out = psi.sample(cfg.n_samples, rng);
  dict.insert_unique(model_out, cost);

  auto batch_min = [&](const std::vector<Bitstring>& xs) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& x : xs) m = std::min(m, dict.cost_of(x, cost));
    return m;
  };

  double c_min_last = std::numeric_limits<double>::infinity();  // C_min(t-1)
  double c_min_curr = batch_min(model_out);                     // C_min(t)
  double c_cum = c_min_curr;

  double t_init = cfg.t_init;
  if (t_init <= 0) {
    // automatic rule: standard deviation of the initial batch costs
    double mean = 0;
    for (const auto& x : model_out) mean += dict.cost_of(x, cost);
    mean /= static_cast<double>(model_out.size());
    double var = 0;
    for (const auto& x : model_out) {
      const double d = dict.cost_of(x, cost) - mean;
      var += d * d;
    }
    var /= static_cast<double>(model_out.size());
    t_init = std::sqrt(var);
    if (t_init <= 0) t_init = 1.0;
  }

  SolveResult result;
  for (int t = 1; t <= cfg.t_max; ++t) {
    if (cfg.time_limit_s > 0 && elapsed_s() > cfg.time_limit_s) break;
    const auto iter_start = std::chrono::steady_clock::now();
    const double temperature = anneal_temperature(t_init, t);

    // training set: Boltzmann draw from the dictionary, with replacement
    const std::vector<double> weights = boltzmann_weights(dict, temperature);
    std::vector<double> cumulative(weights.size());
    std::partial_sum(weights.begin(), weights.end(), cumulative.begin());
    std::vector<const Bitstring*> keys;
    keys.reserve(dict.entries.size());
    for (const auto& [x, c] : dict.entries) keys.push_back(&x);
    std::vector<Bitstring> trainset;
    trainset.reserve(static_cast<std::size_t>(cfg.n_samples));
    for (int s = 0; s < cfg.n_samples; ++s) {
      const double u = rng.uniform01();
      const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
      const std::size_t idx = std::min(static_cast<std::size_t>(it - cumulative.begin()),
                                       keys.size() - 1);
      trainset.push_back(*keys[idx]);
    }

    if (c_min_curr < c_min_last) {
      c_cum = std::min(c_cum, c_min_curr);
    } else {
      // stagnation: rebuild the MPS and refresh part of the training set
      psi = psi0;
      const std::vector<Bitstring> fresh = psi.sample(cfg.replace_count, rng);
      dict.insert_unique(fresh, cost);
      trainset = select(trainset, fresh, cfg.replace_count, rng);
    }

    train_step(psi, trainset, cfg.cutoff, cfg.learning_rate);
    model_out = psi.sample(cfg.n_samples, rng);
    const double c_min_next = batch_min(model_out);
    dict.insert_unique(model_out, cost);

    HistoryRow row;
    row.t = t;
    row.temperature = temperature;
    row.c_min = c_min_curr;
    row.c_cum_min = c_cum;
    row.max_bond = psi.max_bond_dimension();
    row.dict_size = dict.size();
    row.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - iter_start)
                      .count();
    result.history.rows.push_back(row);

    c_min_last = c_min_curr;
    c_min_curr = c_min_next;
  }

  // best over everything ever seen; ties break to the lexicographically
  // smallest bitstring because the dictionary iterates in key order
  result.best_cost = std::numeric_limits<double>::infinity();
  for (const auto& [x, c] : dict.entries) {
    if (c < result.best_cost) {
      result.best_cost = c;
      result.best_x = x;
    }
  }
  return result;
}

}  // namespace ctn
