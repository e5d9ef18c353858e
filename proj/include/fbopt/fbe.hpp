#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Core>

#include "fbopt/oracles.hpp"

namespace fbopt {

// Thrown when an objective or gradient evaluates to NaN/Inf at a probe
// point. Linesearches catch this type specifically to skip the trial, while
// genuine oracle failures keep their own exception types and surface as
// run errors.
struct NonFiniteObjective : std::runtime_error {
  NonFiniteObjective() : std::runtime_error("objective not finite along step") {}
};

// Everything the solvers need at one point x for one step size gamma:
// the forward point y, the backward (proximal) point xbar, the fixed-point
// residual r = (x - xbar)/gamma, and the forward-backward envelope value.
struct FbeState {
  Vec x;
  double gamma = 0.0;
  double fx = 0.0;
  Vec gradfx;
  Vec y;
  Vec xbar;
  double g_xbar = 0.0;
  Vec r;
  double fbe = 0.0;
};

inline FbeState fbe_eval(const Vec& x, double gamma, const SmoothOracle& f,
                         const NonsmoothOracle& g) {
  FbeState s;
  s.x = x;
  s.gamma = gamma;
  s.fx = f.eval(x);
  s.gradfx = f.grad(x);
  if (!std::isfinite(s.fx) || !s.gradfx.allFinite())
    throw NonFiniteObjective();
  s.y = x - gamma * s.gradfx;
  s.xbar = g.prox(s.y, gamma);
  s.g_xbar = g.eval(s.xbar);
  if (!std::isfinite(s.g_xbar))
    throw NonFiniteObjective();
  Vec diff = s.xbar - x;
  s.r = -diff / gamma;
  s.fbe = s.fx + s.g_xbar + s.gradfx.dot(diff) + diff.squaredNorm() / (2.0 * gamma);
  return s;
}

// Gradient of the envelope where f is twice differentiable:
// (I - gamma*H(x)) r, one Hessian-vector product.
inline Vec fbe_grad(const FbeState& s, const SmoothOracle& f) {
  return s.r - s.gamma * f.hvp(s.x, s.r);
}

// Matrix-free generalized Hessian of the envelope at the state's point:
//   B = gamma^{-1} Q (I - P Q),  Q = I - gamma*H(x),  P in dprox(y).
// One application costs exactly two Hessian-vector products and one
// prox Jacobian-vector product.
struct GenHessOp {
  const FbeState* state = nullptr;
  const SmoothOracle* f = nullptr;
  const NonsmoothOracle* g = nullptr;

  Vec apply(const Vec& v) const {
    const FbeState& s = *state;
    Vec w = v - s.gamma * f->hvp(s.x, v);
    Vec t = g->prox_jvp(s.y, s.gamma, w);
    Vec u = v - t;
    return (u - s.gamma * f->hvp(s.x, u)) / s.gamma;
  }
};

inline Vec genhess_vp(const GenHessOp& op, const Vec& v) { return op.apply(v); }

struct AdaptResult {
  double gamma = 0.0;
  FbeState state;
  bool changed = false;
};

namespace detail {

// Relative slack for the quadratic-bound test below. The default tolerates
// honest rounding away from the boundary; the strict scale only tolerates a
// few ulps and is used to detect iterates sitting essentially on the
// validity boundary, where the looser test passes but every nearby point
// fails it.
inline constexpr double kBoundSlack = 1e-12;
inline constexpr double kStrictBoundSlack =
    64.0 * std::numeric_limits<double>::epsilon();

// Quadratic upper-bound test along the proximal step. alpha < 1 leaves slack
// so that a passing gamma certifies strict envelope decrease for the step.
inline bool gamma_acceptable(const FbeState& s, const SmoothOracle& f, double alpha,
                             double slack_scale = kBoundSlack) {
  double fxbar = f.eval(s.xbar);
  Vec diff = s.xbar - s.x;
  double bound = s.fx + s.gradfx.dot(diff) +
                 alpha / (2.0 * s.gamma) * diff.squaredNorm();
  // Absolute slack keeps the exact-boundary case from flapping on rounding
  // noise.
  return fxbar <= bound + slack_scale * (1.0 + std::abs(s.fx));
}

}  // namespace detail

// Halve gamma until the quadratic bound holds along the proximal step from x.
// Returns the first passing gamma together with its state. gamma only ever
// decreases over a run.
inline AdaptResult adapt_gamma(const Vec& x, double gamma, const SmoothOracle& f,
                               const NonsmoothOracle& g, double alpha = 0.95) {
  constexpr int kMaxHalvings = 60;
  AdaptResult out;
  out.gamma = gamma;
  out.state = fbe_eval(x, gamma, f, g);
  for (int k = 0; k < kMaxHalvings; ++k) {
    if (detail::gamma_acceptable(out.state, f, alpha)) return out;
    out.gamma /= 2.0;
    out.changed = true;
    out.state = fbe_eval(x, out.gamma, f, g);
  }
  if (detail::gamma_acceptable(out.state, f, alpha)) return out;
  throw std::runtime_error("stepsize underflow");
}

// Same test applied to an already computed state, avoiding a duplicate
// envelope evaluation when the step size does not change.
inline AdaptResult adapt_gamma(const FbeState& state, const SmoothOracle& f,
                               const NonsmoothOracle& g, double alpha = 0.95) {
  if (detail::gamma_acceptable(state, f, alpha)) {
    AdaptResult out;
    out.gamma = state.gamma;
    out.state = state;
    return out;
  }
  AdaptResult out = adapt_gamma(state.x, state.gamma / 2.0, f, g, alpha);
  out.changed = true;
  return out;
}

}  // namespace fbopt
