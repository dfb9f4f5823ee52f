#include "ctn/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>

#include "CLI11.hpp"
#include "ctn/cmps.hpp"
#include "ctn/errors.hpp"
#include "ctn/indexing.hpp"
#include "ctn/optimizer.hpp"
#include "ctn/problems.hpp"

namespace ctn {

namespace {

constexpr int kNoCap = std::numeric_limits<int>::max();

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void write_csv(const std::string& path, const std::vector<std::vector<std::string>>& rows) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write output file: " + path);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) f << ',';
      f << csv_quote(row[i]);
    }
    f << '\n';
  }
}

struct InstanceOptions {
  std::string instance_path;
  std::string family;
  int n = 0;
  int m = 1;
  Coord lower = 0;
  Coord upper = 0;
  bool upper_set = false;
  std::uint64_t seed = 0;
  std::string save_instance;

  void attach(CLI::App* cmd) {
    cmd->add_option("--instance", instance_path, "instance file (JSON)");
    cmd->add_option("--family", family, "generator family: cardinality | qkp | facility | raw");
    cmd->add_option("--n", n, "variable count for generators");
    cmd->add_option("--m", m, "constraint count (facility)");
    cmd->add_option("--l", lower, "lower bound (cardinality)");
    auto* u = cmd->add_option("--u", upper, "upper bound (cardinality, facility)");
    u->each([this](const std::string&) { upper_set = true; });
    cmd->add_option("--seed", seed, "random seed (echoed; defaults to 0)");
    cmd->add_option("--save-instance", save_instance, "write the resolved instance to a file");
  }

  Instance resolve() const {
    Instance inst = [&] {
      if (!instance_path.empty()) return read_instance_file(instance_path);
      if (family == "cardinality") {
        if (n < 1) throw ParseError("cardinality family needs --n");
        return instance_from_system("cardinality",
                                    gen_cardinality(n, lower, upper_set ? upper : n), seed);
      }
      if (family == "qkp") {
        if (n < 1) throw ParseError("qkp family needs --n");
        return instance_from_qkp(gen_qkp(n, seed));
      }
      if (family == "facility") {
        if (n < 1) throw ParseError("facility family needs --n");
        return instance_from_system("facility",
                                    gen_facility(n, m, upper_set ? upper : 2, seed).to_system(),
                                    seed);
      }
      throw ParseError("need --instance or a known --family");
    }();
    if (!save_instance.empty()) write_instance_file(save_instance, inst);
    return inst;
  }

  std::string describe() const {
    std::ostringstream os;
    if (!instance_path.empty()) {
      os << "instance=" << instance_path;
    } else {
      os << "family=" << family << " n=" << n << " m=" << m << " l=" << lower << " u="
         << (upper_set ? std::to_string(upper) : std::string("auto"));
    }
    os << " seed=" << seed;
    return os.str();
  }
};

struct SolverOptions {
  int iters = 75;
  double cutoff = 1e-4;
  double lr = 0.05;
  int samples = 400;
  double tinit = 0;
  bool tinit_set = false;
  int replace = 40;
  double time_limit = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--iters", iters, "annealing iterations");
    cmd->add_option("--cutoff", cutoff, "SVD discarded-weight cutoff");
    cmd->add_option("--lr", lr, "learning rate");
    cmd->add_option("--samples", samples, "training/output samples per iteration");
    auto* t = cmd->add_option("--tinit", tinit, "initial temperature (<=0: auto)");
    t->each([this](const std::string&) { tinit_set = true; });
    cmd->add_option("--replace", replace, "samples replaced on reset");
    cmd->add_option("--time-limit", time_limit, "soft wall-clock cap in seconds");
  }

  OptimizerConfig config(const Instance& inst) const {
    OptimizerConfig cfg;
    cfg.t_max = iters;
    cfg.cutoff = cutoff;
    cfg.learning_rate = lr;
    cfg.n_samples = samples;
    cfg.replace_count = std::min(replace, samples);
    cfg.seed = inst.seed;
    cfg.time_limit_s = time_limit;
    if (tinit_set) {
      cfg.t_init = tinit;
    } else if (inst.type == "qkp") {
      cfg.t_init = 2.5 * inst.system.num_vars();  // knapsack preset
    } else {
      cfg.t_init = -1;  // automatic
    }
    return cfg;
  }

  std::string describe(const OptimizerConfig& cfg) const {
    std::ostringstream os;
    os << "iters=" << cfg.t_max << " cutoff=" << fmt_double(cfg.cutoff) << " lr="
       << fmt_double(cfg.learning_rate) << " samples=" << cfg.n_samples << " tinit="
       << (cfg.t_init > 0 ? fmt_double(cfg.t_init) : std::string("auto")) << " replace="
       << cfg.replace_count << " time_limit=" << fmt_double(cfg.time_limit_s);
    return os.str();
  }
};

// ---------------------------------------------------------------------------
// embed

int cmd_embed(const InstanceOptions& iopt, int flux, const std::string& out,
              const std::string& save_mps) {
  const Instance inst = iopt.resolve();
  const ConstraintSystem& sys = inst.system;
  const int n = sys.num_vars();
  const int flux_site = flux > 0 ? flux : n;
  std::cout << "# command=embed " << iopt.describe() << " flux=" << flux_site << "\n";

  const auto mps = ConstrainedMPS::build(sys, flux_site);
  int q = 0;
  std::vector<std::vector<std::string>> rows{{"site", "n_qregions", "qregion_repr"}};
  for (int b = 1; b <= n; ++b) {
    const LinkIndex& l = mps.left_links(b);
    q = std::max(q, l.size());
    std::string repr;
    for (int i = 0; i < l.size(); ++i) {
      if (i) repr += ' ';
      repr += l.qregions[static_cast<std::size_t>(i)].to_string();
    }
    std::size_t site_blocks = b <= n ? mps.tensor(b - 1).blocks.size() : 0;
    std::cout << "l" << b << "  " << l.size() << "  " << site_blocks << "  " << repr << "\n";
    rows.push_back({"l" + std::to_string(b), std::to_string(l.size()), repr});
  }
  for (int b = 0; b < n; ++b) {
    const LinkIndex& l = mps.right_links(b);
    q = std::max(q, l.size());
    std::string repr;
    for (int i = 0; i < l.size(); ++i) {
      if (i) repr += ' ';
      repr += l.qregions[static_cast<std::size_t>(i)].to_string();
    }
    std::cout << "lt" << b << "  " << l.size() << "  " << repr << "\n";
    rows.push_back({"lt" + std::to_string(b), std::to_string(l.size()), repr});
  }
  std::cout << "charge_complexity " << q << "\n";
  std::cout << "total_blocks " << mps.total_blocks() << "\n";
  if (!out.empty()) write_csv(out, rows);
  if (!save_mps.empty()) {
    std::ofstream f(save_mps, std::ios::binary);
    if (!f) throw Error("cannot write mps file: " + save_mps);
    mps.save(f);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// count

int cmd_count(const InstanceOptions& iopt, bool verify) {
  const Instance inst = iopt.resolve();
  std::cout << "# command=count " << iopt.describe() << " verify=" << (verify ? 1 : 0) << "\n";
  const auto mps = ConstrainedMPS::build(inst.system, inst.system.num_vars());
  const double count = mps.count_solutions();
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.0f", count);
  std::cout << "count " << buf << "\n";
  if (verify) {
    const std::uint64_t oracle = brute_force_count(inst.system);
    if (count != static_cast<double>(oracle)) {
      std::cout << "verification failed: enumeration gives " << oracle << "\n";
      return 1;
    }
    std::cout << "verified against enumeration\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// complexity

int cmd_complexity(const std::string& family, const std::vector<int>& n_list,
                   const std::vector<int>& m_list, Coord u, int seeds, std::uint64_t seed,
                   const std::string& out) {
  std::cout << "# command=complexity family=" << family << " seeds=" << seeds << " seed=" << seed
            << "\n";
  std::vector<std::vector<std::string>> rows{
      {"family", "n", "m", "u", "delta", "seed", "q", "q_mean", "q_stderr"}};
  if (family == "cardinality") {
    for (int n : n_list) {
      for (int delta = 0; delta <= n; ++delta) {
        const Coord lo = (n - delta) / 2;
        const int q = charge_complexity(gen_cardinality(n, lo, lo + delta));
        rows.push_back({"cardinality", std::to_string(n), "1", std::to_string(lo + delta),
                        std::to_string(delta), "0", std::to_string(q), std::to_string(q), "0"});
      }
    }
  } else if (family == "facility") {
    for (int n : n_list) {
      for (int m : m_list) {
        std::vector<int> qs;
        for (int s = 0; s < seeds; ++s) {
          qs.push_back(charge_complexity(
              gen_facility(n, m, u, seed + static_cast<std::uint64_t>(s)).to_system()));
        }
        double mean = 0;
        for (int q : qs) mean += q;
        mean /= static_cast<double>(qs.size());
        double var = 0;
        for (int q : qs) var += (q - mean) * (q - mean);
        const double stderr_ =
            qs.size() > 1 ? std::sqrt(var / (static_cast<double>(qs.size()) - 1)) /
                                std::sqrt(static_cast<double>(qs.size()))
                          : 0.0;
        for (int s = 0; s < seeds; ++s) {
          rows.push_back({"facility", std::to_string(n), std::to_string(m), std::to_string(u),
                          std::to_string(u - 2), std::to_string(seed + static_cast<unsigned>(s)),
                          std::to_string(qs[static_cast<std::size_t>(s)]), fmt_double(mean),
                          fmt_double(stderr_)});
        }
      }
    }
  } else {
    throw ParseError("complexity: unknown family '" + family + "'");
  }
  if (out.empty()) throw ParseError("complexity: --out is required");
  write_csv(out, rows);
  std::cout << "rows " << rows.size() - 1 << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// solve

std::vector<std::vector<std::string>> history_rows(const RunHistory& history) {
  std::vector<std::vector<std::string>> rows{
      {"t", "T", "c_min", "c_cum_min", "max_bond", "dict_size", "wall_ms"}};
  for (const HistoryRow& r : history.rows) {
    // wall_ms is zeroed in the artifact so reruns are byte identical; real
    // timings go to stdout instead
    rows.push_back({std::to_string(r.t), fmt_double(r.temperature), fmt_double(r.c_min),
                    fmt_double(r.c_cum_min), std::to_string(r.max_bond),
                    std::to_string(r.dict_size), "0"});
  }
  return rows;
}

int cmd_solve(const InstanceOptions& iopt, const SolverOptions& sopt, const std::string& cost_name,
              const std::string& out) {
  const Instance inst = iopt.resolve();
  const OptimizerConfig cfg = sopt.config(inst);
  const std::string cname = cost_name.empty() ? (inst.qkp ? "qkp" : "zero") : cost_name;
  std::cout << "# command=solve " << iopt.describe() << " cost=" << cname << " "
            << sopt.describe(cfg) << "\n";
  const CostFn cost = cost_by_name(cname, inst);

  const auto start = std::chrono::steady_clock::now();
  const SolveResult res = solve(cost, inst.system, cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (!out.empty()) write_csv(out, history_rows(res.history));
  std::cout << "best_x " << bitstring_to_string(res.best_x) << "\n";
  std::cout << "best_cost " << fmt_double(res.best_cost) << "\n";
  std::cout << "iterations " << res.history.rows.size() << "\n";
  std::cout << "wall_s " << fmt_double(secs) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// bench

int cmd_bench(const SolverOptions& sopt, const std::vector<int>& sizes, int runs,
              std::uint64_t seed, const std::string& out) {
  std::cout << "# command=bench family=qkp sizes=" << sizes.size() << " runs=" << runs
            << " seed=" << seed << "\n";
  std::vector<std::vector<std::string>> rows{
      {"type", "n", "run", "seed", "best", "feasible", "mean_best", "min_best", "mean_wall_ms"}};
  for (int n : sizes) {
    double sum_best = 0;
    double min_best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < runs; ++r) {
      const std::uint64_t run_seed = seed + static_cast<std::uint64_t>(r);
      Instance inst = instance_from_qkp(gen_qkp(n, run_seed));
      OptimizerConfig cfg = sopt.config(inst);
      cfg.seed = run_seed;
      const auto start = std::chrono::steady_clock::now();
      const SolveResult res = solve(cost_by_name("qkp", inst), inst.system, cfg);
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      const bool feasible = inst.system.satisfied(res.best_x);
      if (!feasible) throw Error("bench: reported solution violates the constraints");
      std::cout << "run n=" << n << " run=" << r << " seed=" << run_seed << " best="
                << fmt_double(res.best_cost) << " wall_s=" << fmt_double(secs) << "\n";
      rows.push_back({"run", std::to_string(n), std::to_string(r), std::to_string(run_seed),
                      fmt_double(res.best_cost), "1", "", "", ""});
      sum_best += res.best_cost;
      min_best = std::min(min_best, res.best_cost);
    }
    rows.push_back({"summary", std::to_string(n), "", "", "", "",
                    fmt_double(sum_best / std::max(1, runs)), fmt_double(min_best), "0"});
  }
  if (!out.empty()) write_csv(out, rows);
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"constrained MPS embedding, counting and optimization"};
  app.require_subcommand(1);

  InstanceOptions embed_inst, count_inst, solve_inst;
  int flux = 0;
  std::string embed_out, save_mps;
  auto* embed = app.add_subcommand("embed", "build link indices and report block structure");
  embed_inst.attach(embed);
  embed->add_option("--flux", flux, "flux site (1-based; default: last site)");
  embed->add_option("--out", embed_out, "per-link CSV output path");
  embed->add_option("--save-mps", save_mps, "serialize the built MPS");

  bool verify = false;
  auto* count = app.add_subcommand("count", "count feasible solutions by MPS contraction");
  count_inst.attach(count);
  count->add_flag("--verify", verify, "cross-check against exhaustive enumeration");

  std::string cx_family = "cardinality";
  std::vector<int> cx_n, cx_m{2};
  Coord cx_u = 2;
  int cx_seeds = 5;
  std::uint64_t cx_seed = 0;
  std::string cx_out;
  auto* cx = app.add_subcommand("complexity", "charge-complexity sweeps");
  cx->add_option("--family", cx_family, "cardinality | facility");
  cx->add_option("--n-list", cx_n, "sizes")->delimiter(',');
  cx->add_option("--m-list", cx_m, "constraint counts (facility)")->delimiter(',');
  cx->add_option("--u", cx_u, "upper bound (facility)");
  cx->add_option("--seeds", cx_seeds, "matrices per tuple");
  cx->add_option("--seed", cx_seed, "base seed");
  cx->add_option("--out", cx_out, "CSV output path");

  SolverOptions solve_opt;
  std::string solve_cost, solve_out;
  auto* sv = app.add_subcommand("solve", "annealed generative optimization");
  solve_inst.attach(sv);
  solve_opt.attach(sv);
  sv->add_option("--cost", solve_cost, "cost callback name (default: qkp when available)");
  sv->add_option("--out", solve_out, "history CSV output path");

  SolverOptions bench_opt;
  std::vector<int> bench_sizes;
  int bench_runs = 10;
  std::uint64_t bench_seed = 0;
  std::string bench_out;
  auto* bench = app.add_subcommand("bench", "repeated QKP solves with summaries");
  bench_opt.attach(bench);
  bench->add_option("--sizes", bench_sizes, "problem sizes")->delimiter(',')->required();
  bench->add_option("--runs", bench_runs, "instances per size");
  bench->add_option("--seed", bench_seed, "base seed");
  bench->add_option("--out", bench_out, "aggregate CSV output path");

  std::vector<std::string> argv(args);
  try {
    app.parse(std::vector<std::string>(argv.rbegin(), argv.rend()));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (embed->parsed()) return cmd_embed(embed_inst, flux, embed_out, save_mps);
    if (count->parsed()) return cmd_count(count_inst, verify);
    if (cx->parsed()) return cmd_complexity(cx_family, cx_n, cx_m, cx_u, cx_seeds, cx_seed, cx_out);
    if (sv->parsed()) return cmd_solve(solve_inst, solve_opt, solve_cost, solve_out);
    if (bench->parsed()) return cmd_bench(bench_opt, bench_sizes, bench_runs, bench_seed, bench_out);
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const InfeasibleSystemError& e) {
    std::cerr << "error: infeasible system: " << e.what() << "\n";
    return 3;
  } catch (const BoundExceededError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace ctn
