#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "fbopt/detail/rng.hpp"
#include "fbopt/fbe.hpp"
#include "fbopt/oracles.hpp"
#include "fbopt/problems.hpp"
#include "fbopt/report.hpp"
#include "fbopt/subsolvers.hpp"

namespace fbopt {

// Shared configuration for the first-order baselines.
struct BaselineConfig {
  std::optional<double> gamma0;  // empty: 0.9 / Lipschitz estimate
  double sigma_factor = 0.7071067811865476;  // panoc only
  double tol_r = 1e-10;
  long long max_iter = 10000;
  int lbfgs_capacity = 5;        // panoc only
  int max_backtracks = 60;       // panoc only
  double alpha_gamma = 0.95;
  bool store_trajectory = false;
  bool store_iter_log = false;

  void validate() const {
    if (!(tol_r > 0.0)) throw std::invalid_argument("tol_r must be positive");
    if (gamma0 && !(*gamma0 > 0.0))
      throw std::invalid_argument("gamma0 must be positive");
    if (max_backtracks < 0) throw std::invalid_argument("max_backtracks negative");
  }
};

// Plain proximal gradient iteration: x <- prox(x - gamma grad f(x)).
inline RunReport pgm_solve(const ProblemInstance& problem, const BaselineConfig& config,
                           std::uint64_t seed, std::optional<Vec> x0_opt = {}) {
  config.validate();
  auto t0 = std::chrono::steady_clock::now();

  RunReport report;
  report.solver = "pgm";
  report.problem = problem.desc;
  report.seed = seed;

  CallCounters counters;
  SmoothOracle f = wrap_counting(problem.smooth, counters);
  NonsmoothOracle g = wrap_counting(problem.nonsmooth, counters);

  Vec x0;
  if (x0_opt) {
    x0 = *x0_opt;
  } else {
    auto rng = detail::make_rng(detail::mix_seed(seed, 0x78304e54ULL));
    x0 = detail::ball_point(rng, problem.dim);
  }

  try {
    double lhat = estimate_lipschitz(f, x0, seed);
    report.lipschitz_estimate = lhat;
    double gamma = config.gamma0.value_or(0.9 / lhat);
    AdaptResult ad = adapt_gamma(x0, gamma, f, g, config.alpha_gamma);
    gamma = ad.gamma;
    FbeState state = ad.state;

    report.status = RunStatus::budget_exhausted;
    if (config.store_trajectory)
      report.trajectory.push_back(
          {0, state.x, state.fbe, state.r.lpNorm<Eigen::Infinity>()});

    long long k = 0;
    for (; k < config.max_iter; ++k) {
      if (state.r.lpNorm<Eigen::Infinity>() <= config.tol_r) {
        report.status = RunStatus::first_order_stationary;
        break;
      }
      FbeState next = fbe_eval(state.xbar, gamma, f, g);
      if (config.store_iter_log) {
        IterRecord rec;
        rec.iter = k;
        rec.fbe_before = state.fbe;
        rec.fbe_after = next.fbe;
        rec.res_sq = state.r.squaredNorm();
        rec.res_inf = state.r.lpNorm<Eigen::Infinity>();
        rec.gamma = gamma;
        report.iter_log.push_back(rec);
      }
      AdaptResult ad2 = adapt_gamma(next, f, g, config.alpha_gamma);
      gamma = ad2.gamma;
      state = ad2.state;
      if (config.store_trajectory)
        report.trajectory.push_back(
            {k + 1, state.x, state.fbe, state.r.lpNorm<Eigen::Infinity>()});
    }
    report.iterations = k;

    report.final_point = state.xbar;
    report.final_fbe = state.fbe;
    report.final_phi = f.eval(state.xbar) + g.eval(state.xbar);
    report.residual_inf = state.r.lpNorm<Eigen::Infinity>();
    report.gamma_final = gamma;
  } catch (const std::exception& ex) {
    report.status = RunStatus::error;
    report.message = ex.what();
    if (report.final_point.size() == 0) report.final_point = x0;
  }

  report.counters = counters;
  report.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
          .count();
  return report;
}

// PANOC: accelerated proximal gradient that blends the proximal step with an
// L-BFGS step on the residual map, backtracking the blend weight until the
// envelope decreases by sigma * ||r||^2.
inline RunReport panoc_solve(const ProblemInstance& problem, const BaselineConfig& config,
                             std::uint64_t seed, std::optional<Vec> x0_opt = {}) {
  config.validate();
  auto t0 = std::chrono::steady_clock::now();

  RunReport report;
  report.solver = "panoc";
  report.problem = problem.desc;
  report.seed = seed;

  CallCounters counters;
  SmoothOracle f = wrap_counting(problem.smooth, counters);
  NonsmoothOracle g = wrap_counting(problem.nonsmooth, counters);

  Vec x0;
  if (x0_opt) {
    x0 = *x0_opt;
  } else {
    auto rng = detail::make_rng(detail::mix_seed(seed, 0x78304e54ULL));
    x0 = detail::ball_point(rng, problem.dim);
  }

  try {
    double lhat = estimate_lipschitz(f, x0, seed);
    report.lipschitz_estimate = lhat;
    double gamma = config.gamma0.value_or(0.9 / lhat);
    AdaptResult ad = adapt_gamma(x0, gamma, f, g, config.alpha_gamma);
    gamma = ad.gamma;
    FbeState state = ad.state;
    double sigma = config.sigma_factor * gamma * (1.0 - gamma * lhat) / 2.0;

    LbfgsBuffer buffer(config.lbfgs_capacity);
    Vec prev_x, prev_r;
    bool have_prev = false;

    report.status = RunStatus::budget_exhausted;
    if (config.store_trajectory)
      report.trajectory.push_back(
          {0, state.x, state.fbe, state.r.lpNorm<Eigen::Infinity>()});

    long long k = 0;
    for (; k < config.max_iter; ++k) {
      if (state.r.lpNorm<Eigen::Infinity>() <= config.tol_r) {
        report.status = RunStatus::first_order_stationary;
        break;
      }

      if (have_prev) buffer.push(state.x - prev_x, state.r - prev_r);
      prev_x = state.x;
      prev_r = state.r;
      have_prev = true;

      Vec d = buffer.size() == 0 ? Vec(-gamma * state.r) : buffer.direction(state.r);

      double target = state.fbe - sigma * state.r.squaredNorm();
      FbeState next;
      double tau = 1.0;
      bool accepted = false;
      for (int m = 0; m < config.max_backtracks; ++m, tau *= 0.5) {
        Vec xt = state.x - (1.0 - tau) * gamma * state.r + tau * d;
        FbeState st;
        try {
          st = fbe_eval(xt, gamma, f, g);
        } catch (const std::runtime_error&) {
          continue;  // objective not finite at this trial point
        }
        if (st.fbe <= target) {
          next = st;
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        next = fbe_eval(state.xbar, gamma, f, g);
        tau = 0.0;
      }

      if (config.store_iter_log) {
        IterRecord rec;
        rec.iter = k;
        rec.fbe_before = state.fbe;
        rec.fbe_after = next.fbe;
        rec.res_sq = state.r.squaredNorm();
        rec.res_inf = state.r.lpNorm<Eigen::Infinity>();
        rec.sigma = sigma;
        rec.tau = tau;
        rec.gamma = gamma;
        report.iter_log.push_back(rec);
      }

      AdaptResult ad2 = adapt_gamma(next, f, g, config.alpha_gamma);
      if (ad2.gamma != gamma) {
        gamma = ad2.gamma;
        sigma = config.sigma_factor * gamma * (1.0 - gamma * lhat) / 2.0;
        buffer.clear();
        have_prev = false;
      }
      state = ad2.state;

      if (config.store_trajectory)
        report.trajectory.push_back(
            {k + 1, state.x, state.fbe, state.r.lpNorm<Eigen::Infinity>()});
    }
    report.iterations = k;

    report.final_point = state.xbar;
    report.final_fbe = state.fbe;
    report.final_phi = f.eval(state.xbar) + g.eval(state.xbar);
    report.residual_inf = state.r.lpNorm<Eigen::Infinity>();
    report.gamma_final = gamma;
  } catch (const std::exception& ex) {
    report.status = RunStatus::error;
    report.message = ex.what();
    if (report.final_point.size() == 0) report.final_point = x0;
  }

  report.counters = counters;
  report.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
          .count();
  return report;
}

}  // namespace fbopt
