#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "fbopt/baselines.hpp"
#include "fbopt/detail/format.hpp"
#include "fbopt/detail/rng.hpp"
#include "fbopt/ntra.hpp"
#include "fbopt/pgcl.hpp"
#include "fbopt/problems.hpp"
#include "fbopt/report.hpp"

namespace fbopt {

// Number of worker threads for sweeps: the FBOPT_THREADS environment
// variable when set, otherwise the hardware concurrency.
inline int sweep_thread_count() {
  if (const char* env = std::getenv("FBOPT_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

struct SweepOptions {
  std::vector<std::string> solvers = {"pgm", "panoc", "ntra", "pgcl"};
  std::uint64_t seed_begin = 1;
  std::uint64_t seed_count = 1;
  double sbar = 1.0;
  std::optional<double> gamma0;
  double tol_r = 1e-10;
  long long max_iter_first_order = 10000;
  long long max_iter_second_order = 2000;
  int threads = 0;  // 0: sweep_thread_count()
};

// Run one solver by name on a problem instance from a given start point.
inline RunReport run_one(const ProblemInstance& problem, const std::string& solver,
                         std::uint64_t seed, const SweepOptions& options,
                         std::optional<Vec> x0 = {}) {
  if (solver == "pgm" || solver == "panoc") {
    BaselineConfig config;
    config.gamma0 = options.gamma0;
    config.tol_r = options.tol_r;
    config.max_iter = options.max_iter_first_order;
    return solver == "pgm" ? pgm_solve(problem, config, seed, std::move(x0))
                           : panoc_solve(problem, config, seed, std::move(x0));
  }
  if (solver == "ntra") {
    NtraConfig config;
    config.gamma0 = options.gamma0;
    config.tol_r = options.tol_r;
    config.max_iter = options.max_iter_second_order;
    return ntra_solve(problem, config, seed, std::move(x0));
  }
  if (solver == "pgcl") {
    PgclConfig config;
    config.gamma0 = options.gamma0;
    config.sbar = options.sbar;
    config.tol_r = options.tol_r;
    config.max_iter = options.max_iter_second_order;
    return pgcl_solve(problem, config, seed, std::move(x0));
  }
  throw std::invalid_argument("unknown solver: " + solver);
}

// Run every (seed, solver) pair. Each seed gets one problem instance and one
// start point shared by all solvers, so per-seed comparisons are on equal
// footing. Reports come back ordered by seed, then by solver list position,
// independent of thread scheduling.
template <typename Factory>
std::vector<RunReport> run_sweep(Factory&& make_problem, const SweepOptions& options) {
  const std::size_t n_seeds = static_cast<std::size_t>(options.seed_count);
  const std::size_t n_solvers = options.solvers.size();

  std::vector<ProblemInstance> problems;
  std::vector<Vec> starts;
  problems.reserve(n_seeds);
  starts.reserve(n_seeds);
  for (std::size_t i = 0; i < n_seeds; ++i) {
    std::uint64_t seed = options.seed_begin + i;
    problems.push_back(make_problem(seed));
    auto rng = detail::make_rng(detail::mix_seed(seed, 0x78304e54ULL));
    starts.push_back(detail::ball_point(rng, problems.back().dim));
  }

  std::vector<RunReport> reports(n_seeds * n_solvers);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      std::size_t t = next.fetch_add(1);
      if (t >= reports.size()) return;
      std::size_t si = t / n_solvers;
      std::size_t vi = t % n_solvers;
      std::uint64_t seed = options.seed_begin + si;
      reports[t] =
          run_one(problems[si], options.solvers[vi], seed, options, starts[si]);
    }
  };

  int n_threads = options.threads > 0 ? options.threads : sweep_thread_count();
  n_threads = std::min<int>(n_threads, static_cast<int>(reports.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return reports;
}

struct AggregateRow {
  std::string solver;
  std::string metric;
  double value = 0.0;
};

struct Aggregate {
  std::vector<AggregateRow> rows;

  std::string to_csv() const {
    std::string out = "solver,metric,value\n";
    for (const auto& row : rows)
      out += row.solver + "," + row.metric + "," + detail::format_g17(row.value) + "\n";
    return out;
  }

  // Same rows as the CSV, as a JSON array.
  std::string to_json() const {
    std::string out = "[";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i) out += ',';
      out += "{\"solver\":\"" + rows[i].solver + "\",\"metric\":\"" + rows[i].metric +
             "\",\"value\":" + detail::format_g17(rows[i].value) + "}";
    }
    out += "]";
    return out;
  }

  double value(const std::string& solver, const std::string& metric) const {
    for (const auto& row : rows)
      if (row.solver == solver && row.metric == metric) return row.value;
    throw std::out_of_range("no aggregate row " + solver + "/" + metric);
  }
};

namespace detail {

// Lower-middle median of an unsorted sample; 0 for an empty sample.
inline double lower_median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::size_t mid = (values.size() - 1) / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid),
                   values.end());
  return values[static_cast<std::size_t>(mid)];
}

}  // namespace detail

// Summarize a sweep into per-solver rows. Medians are over runs that did not
// error. count_best counts runs whose objective is within 1e-3 of the best
// objective any solver reached from the same seed; count_global (emitted when
// phi_star is known) counts runs within 1e-3 of the reference optimal value.
inline Aggregate aggregate(const std::vector<RunReport>& reports,
                           std::optional<double> phi_star = {},
                           double objective_tol = 1e-3) {
  Aggregate out;
  if (reports.empty()) return out;

  const std::string key = reports.front().problem.config_key();
  for (const auto& r : reports)
    if (r.problem.config_key() != key)
      throw std::invalid_argument("inhomogeneous reports");

  std::vector<std::string> solvers;
  for (const auto& r : reports)
    if (std::find(solvers.begin(), solvers.end(), r.solver) == solvers.end())
      solvers.push_back(r.solver);

  std::vector<std::uint64_t> seeds;
  for (const auto& r : reports)
    if (std::find(seeds.begin(), seeds.end(), r.seed) == seeds.end())
      seeds.push_back(r.seed);

  // Best objective per seed across solvers, ignoring errored runs.
  std::vector<double> best(seeds.size(), std::numeric_limits<double>::infinity());
  for (const auto& r : reports) {
    if (r.status == RunStatus::error) continue;
    std::size_t si = static_cast<std::size_t>(
        std::find(seeds.begin(), seeds.end(), r.seed) - seeds.begin());
    best[si] = std::min(best[si], r.final_phi);
  }

  for (const auto& solver : solvers) {
    long long runs = 0, errors = 0, converged = 0, certified = 0;
    long long count_best = 0, count_global = 0;
    std::vector<double> iters, evf, evg, grads, proxes, jproxes, hvps, mvps, phis;
    for (const auto& r : reports) {
      if (r.solver != solver) continue;
      ++runs;
      if (r.status == RunStatus::error) {
        ++errors;
        continue;
      }
      if (r.status == RunStatus::first_order_stationary ||
          r.status == RunStatus::second_order_stationary)
        ++converged;
      if (r.status == RunStatus::second_order_stationary) ++certified;
      iters.push_back(static_cast<double>(r.iterations));
      evf.push_back(static_cast<double>(r.counters.eval_f));
      evg.push_back(static_cast<double>(r.counters.eval_g));
      grads.push_back(static_cast<double>(r.counters.grad_f));
      proxes.push_back(static_cast<double>(r.counters.prox_g));
      jproxes.push_back(static_cast<double>(r.counters.jprox_g));
      hvps.push_back(static_cast<double>(r.counters.hvp_f));
      mvps.push_back(static_cast<double>(r.counters.mvp));
      phis.push_back(r.final_phi);
      std::size_t si = static_cast<std::size_t>(
          std::find(seeds.begin(), seeds.end(), r.seed) - seeds.begin());
      if (std::isfinite(best[si]) && r.final_phi <= best[si] + objective_tol)
        ++count_best;
      if (phi_star && r.final_phi <= *phi_star + objective_tol) ++count_global;
    }
    auto push = [&](const std::string& metric, double value) {
      out.rows.push_back({solver, metric, value});
    };
    push("runs", static_cast<double>(runs));
    push("errors", static_cast<double>(errors));
    push("converged", static_cast<double>(converged));
    push("second_order_certified", static_cast<double>(certified));
    push("median_iterations", detail::lower_median(iters));
    push("median_eval_f", detail::lower_median(evf));
    push("median_eval_g", detail::lower_median(evg));
    push("median_grad_f", detail::lower_median(grads));
    push("median_prox_g", detail::lower_median(proxes));
    push("median_jprox_g", detail::lower_median(jproxes));
    push("median_hvp_f", detail::lower_median(hvps));
    push("median_mvp", detail::lower_median(mvps));
    push("median_phi", detail::lower_median(phis));
    push("count_best", static_cast<double>(count_best));
    if (phi_star) push("count_global", static_cast<double>(count_global));
  }
  return out;
}

inline void write_jsonl(const std::vector<RunReport>& reports, const std::string& path,
                        bool include_wall_time = true, bool include_point = true) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  for (const auto& r : reports) out << to_jsonl(r, include_wall_time, include_point) << "\n";
}

inline void write_text(const std::string& text, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << text;
}

}  // namespace fbopt
