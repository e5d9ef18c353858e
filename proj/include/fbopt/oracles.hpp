#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>

#include <Eigen/Core>

#include "fbopt/detail/rng.hpp"

namespace fbopt {

using Vec = Eigen::VectorXd;

// Number of data-matrix products one oracle call costs, for problems whose
// dominant expense is products with a data matrix (zero for everything else).
struct MvpCost {
  int eval = 0;
  int grad = 0;
  int hvp = 0;
};

// Smooth term: value, gradient, and Hessian-vector product at a point.
// All algorithms touch f only through these three callbacks.
struct SmoothOracle {
  Eigen::Index dim = 0;
  std::function<double(const Vec&)> eval;
  std::function<Vec(const Vec&)> grad;
  std::function<Vec(const Vec&, const Vec&)> hvp;
  std::optional<double> lipschitz_hint;
  MvpCost mvp_cost{};
};

// Nonsmooth term: extended-real value, proximal map, and a Jacobian-vector
// product of the proximal map (a generalized Jacobian element at kinks).
struct NonsmoothOracle {
  Eigen::Index dim = 0;
  std::function<double(const Vec&)> eval;
  std::function<Vec(const Vec&, double)> prox;                 // (y, gamma)
  std::function<Vec(const Vec&, double, const Vec&)> prox_jvp; // (y, gamma, v)
  double weak_convexity = 0.0;
};

struct CallCounters {
  long long eval_f = 0;
  long long eval_g = 0;
  long long grad_f = 0;
  long long prox_g = 0;
  long long jprox_g = 0;
  long long hvp_f = 0;
  long long mvp = 0;
};

// Forwarding wrappers. Results are bit-identical to the wrapped oracle; the
// only side effect is bumping the counters, which live outside the oracle so
// one problem instance can be shared across solver runs.
inline SmoothOracle wrap_counting(const SmoothOracle& f, CallCounters& counters) {
  SmoothOracle w;
  w.dim = f.dim;
  w.lipschitz_hint = f.lipschitz_hint;
  w.mvp_cost = f.mvp_cost;
  CallCounters* c = &counters;
  const MvpCost mc = f.mvp_cost;
  w.eval = [fn = f.eval, c, mc](const Vec& x) {
    ++c->eval_f;
    c->mvp += mc.eval;
    return fn(x);
  };
  w.grad = [fn = f.grad, c, mc](const Vec& x) {
    ++c->grad_f;
    c->mvp += mc.grad;
    return fn(x);
  };
  w.hvp = [fn = f.hvp, c, mc](const Vec& x, const Vec& v) {
    ++c->hvp_f;
    c->mvp += mc.hvp;
    return fn(x, v);
  };
  return w;
}

inline NonsmoothOracle wrap_counting(const NonsmoothOracle& g, CallCounters& counters) {
  NonsmoothOracle w;
  w.dim = g.dim;
  w.weak_convexity = g.weak_convexity;
  CallCounters* c = &counters;
  w.eval = [fn = g.eval, c](const Vec& x) {
    ++c->eval_g;
    return fn(x);
  };
  w.prox = [fn = g.prox, c](const Vec& y, double gamma) {
    ++c->prox_g;
    return fn(y, gamma);
  };
  w.prox_jvp = [fn = g.prox_jvp, c](const Vec& y, double gamma, const Vec& v) {
    ++c->jprox_g;
    return fn(y, gamma, v);
  };
  return w;
}

// Gradient-Lipschitz estimate: the oracle's own hint, sharpened by finite
// difference probes along a few random unit directions. Never returns zero so
// step sizes derived from it stay finite.
inline double estimate_lipschitz(const SmoothOracle& f, const Vec& x0,
                                 std::uint64_t seed) {
  constexpr double kDelta = 1e-3;
  constexpr int kProbes = 5;
  double best = f.lipschitz_hint.value_or(0.0);
  Vec g0 = f.grad(x0);
  if (!g0.allFinite()) throw std::runtime_error("oracle returned non-finite value");
  auto rng = detail::make_rng(detail::mix_seed(seed, 0x4c697073ULL));
  for (int i = 0; i < kProbes; ++i) {
    Vec u = detail::unit_vector(rng, f.dim);
    Vec g1 = f.grad(x0 + kDelta * u);
    if (!g1.allFinite()) throw std::runtime_error("oracle returned non-finite value");
    best = std::max(best, (g1 - g0).norm() / kDelta);
  }
  return std::max(best, 1e-12);
}

}  // namespace fbopt
