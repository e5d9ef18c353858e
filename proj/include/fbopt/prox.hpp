#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include <Eigen/Core>

#include "fbopt/oracles.hpp"

namespace fbopt {

// Description of the supported nonsmooth terms: weighted l1 norms, box and
// Euclidean-ball indicators, and the two l1-plus-indicator composites whose
// proximal maps factor into soft-threshold followed by projection.
struct ProxSpec {
  enum class Kind { L1, Box, Ball, L1Ball, L1Box };

  Kind kind = Kind::Box;
  double kappa = 0.0;   // l1 weight
  double radius = 0.0;  // ball radius
  Vec lo, hi;           // box bounds
  // Optional per-coordinate scaling of the l1 term (empty means all ones);
  // a zero entry removes the l1 term from that coordinate.
  Vec l1_weight;

  static ProxSpec l1(double kappa, Vec weight = {}) {
    ProxSpec s;
    s.kind = Kind::L1;
    s.kappa = kappa;
    s.l1_weight = std::move(weight);
    s.validate();
    return s;
  }
  static ProxSpec box(Vec lo, Vec hi) {
    ProxSpec s;
    s.kind = Kind::Box;
    s.lo = std::move(lo);
    s.hi = std::move(hi);
    s.validate();
    return s;
  }
  static ProxSpec ball(double radius) {
    ProxSpec s;
    s.kind = Kind::Ball;
    s.radius = radius;
    s.validate();
    return s;
  }
  static ProxSpec l1_ball(double kappa, double radius) {
    ProxSpec s;
    s.kind = Kind::L1Ball;
    s.kappa = kappa;
    s.radius = radius;
    s.validate();
    return s;
  }
  static ProxSpec l1_box(double kappa, Vec lo, Vec hi, Vec weight = {}) {
    ProxSpec s;
    s.kind = Kind::L1Box;
    s.kappa = kappa;
    s.lo = std::move(lo);
    s.hi = std::move(hi);
    s.l1_weight = std::move(weight);
    s.validate();
    return s;
  }

  bool has_l1() const {
    return kind == Kind::L1 || kind == Kind::L1Ball || kind == Kind::L1Box;
  }
  bool has_box() const { return kind == Kind::Box || kind == Kind::L1Box; }
  bool has_ball() const { return kind == Kind::Ball || kind == Kind::L1Ball; }

  void validate() const {
    if (has_l1() && !(kappa >= 0.0)) throw std::invalid_argument("negative l1 weight");
    if (has_ball() && !(radius > 0.0)) throw std::invalid_argument("nonpositive radius");
    if (has_box()) {
      if (lo.size() != hi.size()) throw std::invalid_argument("empty box");
      for (Eigen::Index i = 0; i < lo.size(); ++i)
        if (!(lo[i] <= hi[i])) throw std::invalid_argument("empty box");
    }
    if (l1_weight.size() > 0)
      for (Eigen::Index i = 0; i < l1_weight.size(); ++i)
        if (!(l1_weight[i] >= 0.0)) throw std::invalid_argument("negative l1 weight");
  }

 private:
  ProxSpec() = default;
};

inline Vec soft_threshold(const Vec& x, double tau) {
  return x.array().sign() * (x.array().abs() - tau).max(0.0);
}

// Per-coordinate thresholds tau * weight_i; an empty weight means all ones.
inline Vec soft_threshold(const Vec& x, double tau, const Vec& weight) {
  if (weight.size() == 0) return soft_threshold(x, tau);
  return x.array().sign() * (x.array().abs() - tau * weight.array()).max(0.0);
}

inline Vec proj_box(const Vec& x, const Vec& lo, const Vec& hi) {
  if (lo.size() != x.size() || hi.size() != x.size())
    throw std::invalid_argument("empty box");
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (!(lo[i] <= hi[i])) throw std::invalid_argument("empty box");
  return x.array().max(lo.array()).min(hi.array());
}

inline Vec proj_ball(const Vec& x, double radius) {
  double n = x.norm();
  if (n <= radius) return x;
  return (radius / n) * x;
}

// Proximal map of kappa*||.||_1 + indicator of the radius-r ball. The
// composition soft-threshold-then-project is exact for this sum.
inline Vec prox_l1_ball(const Vec& x, double tau, double radius) {
  return proj_ball(soft_threshold(x, tau), radius);
}

namespace detail {

// Indicator membership with a tiny relative slack: projections computed in
// floating point can land a few ulp outside the set they project onto.
inline bool in_ball(const Vec& x, double radius) {
  return x.norm() <= radius + 1e-12 * (1.0 + radius);
}

inline bool in_box(const Vec& x, const Vec& lo, const Vec& hi) {
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x[i] < lo[i] || x[i] > hi[i]) return false;
  return true;
}

inline double l1_value(const ProxSpec& s, const Vec& x) {
  if (s.l1_weight.size() == 0) return s.kappa * x.lpNorm<1>();
  return s.kappa * (s.l1_weight.array() * x.array().abs()).sum();
}

// Diagonal mask of the soft-threshold Jacobian at y. At the kink
// |y_i| == tau_i the flatter (zero) branch is chosen.
inline Vec l1_mask(const ProxSpec& s, const Vec& y, double gamma) {
  Vec m(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    double tau = gamma * s.kappa * (s.l1_weight.size() ? s.l1_weight[i] : 1.0);
    m[i] = (tau == 0.0 || std::abs(y[i]) > tau) ? 1.0 : 0.0;
  }
  return m;
}

// Diagonal mask of the box-projection Jacobian at the point s entering the
// box stage. At an exact bound the clipped (zero) branch is chosen.
inline Vec box_mask(const ProxSpec& spec, const Vec& s) {
  Vec m(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    m[i] = (spec.lo[i] < s[i] && s[i] < spec.hi[i]) ? 1.0 : 0.0;
  return m;
}

// Ball-projection Jacobian applied to v at the point s entering the ball
// stage. On the sphere itself the projected (clipped) branch is chosen.
inline Vec ball_jvp(const Vec& s, double radius, const Vec& v) {
  double n = s.norm();
  if (n < radius) return v;
  Vec u = s / n;
  return (radius / n) * (v - u * u.dot(v));
}

}  // namespace detail

// Value of the nonsmooth term described by the spec (+inf outside the set).
inline double prox_eval(const ProxSpec& s, const Vec& x) {
  double v = s.has_l1() ? detail::l1_value(s, x) : 0.0;
  if (s.has_box() && !detail::in_box(x, s.lo, s.hi))
    return std::numeric_limits<double>::infinity();
  if (s.has_ball() && !detail::in_ball(x, s.radius))
    return std::numeric_limits<double>::infinity();
  return v;
}

inline Vec prox_apply(const ProxSpec& s, const Vec& y, double gamma) {
  switch (s.kind) {
    case ProxSpec::Kind::L1:
      return soft_threshold(y, gamma * s.kappa, s.l1_weight);
    case ProxSpec::Kind::Box:
      return proj_box(y, s.lo, s.hi);
    case ProxSpec::Kind::Ball:
      return proj_ball(y, s.radius);
    case ProxSpec::Kind::L1Ball:
      return proj_ball(soft_threshold(y, gamma * s.kappa, s.l1_weight), s.radius);
    case ProxSpec::Kind::L1Box:
      return proj_box(soft_threshold(y, gamma * s.kappa, s.l1_weight), s.lo, s.hi);
  }
  throw std::logic_error("unreachable");
}

// Jacobian-vector product of y -> prox(y, gamma). Stages chain at the
// intermediate points the forward evaluation visits; at every kink the most
// clipped generalized-Jacobian element is used, so the returned operator is
// always a contraction.
inline Vec prox_jvp(const ProxSpec& s, const Vec& y, double gamma, const Vec& v) {
  switch (s.kind) {
    case ProxSpec::Kind::L1:
      return (detail::l1_mask(s, y, gamma).array() * v.array()).matrix();
    case ProxSpec::Kind::Box:
      return (detail::box_mask(s, y).array() * v.array()).matrix();
    case ProxSpec::Kind::Ball:
      return detail::ball_jvp(y, s.radius, v);
    case ProxSpec::Kind::L1Ball: {
      Vec u = (detail::l1_mask(s, y, gamma).array() * v.array()).matrix();
      Vec mid = soft_threshold(y, gamma * s.kappa, s.l1_weight);
      return detail::ball_jvp(mid, s.radius, u);
    }
    case ProxSpec::Kind::L1Box: {
      Vec u = (detail::l1_mask(s, y, gamma).array() * v.array()).matrix();
      Vec mid = soft_threshold(y, gamma * s.kappa, s.l1_weight);
      return (detail::box_mask(s, mid).array() * u.array()).matrix();
    }
  }
  throw std::logic_error("unreachable");
}

// Distance from y to the nearest point where the chosen generalized Jacobian
// of prox(., gamma) changes branch. Finite-difference checks of prox_jvp are
// only meaningful at points with a positive margin.
inline double kink_margin(const ProxSpec& s, const Vec& y, double gamma) {
  double margin = std::numeric_limits<double>::infinity();
  if (s.has_l1()) {
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      double tau = gamma * s.kappa * (s.l1_weight.size() ? s.l1_weight[i] : 1.0);
      if (tau > 0.0) margin = std::min(margin, std::abs(std::abs(y[i]) - tau));
    }
  }
  Vec mid = s.has_l1() ? soft_threshold(y, gamma * s.kappa, s.l1_weight) : y;
  if (s.has_box()) {
    for (Eigen::Index i = 0; i < mid.size(); ++i) {
      margin = std::min(margin, std::abs(mid[i] - s.lo[i]));
      margin = std::min(margin, std::abs(mid[i] - s.hi[i]));
    }
  }
  if (s.has_ball()) margin = std::min(margin, std::abs(mid.norm() - s.radius));
  return margin;
}

inline NonsmoothOracle make_prox_oracle(const ProxSpec& spec, Eigen::Index dim) {
  spec.validate();
  NonsmoothOracle g;
  g.dim = dim;
  g.weak_convexity = 0.0;
  g.eval = [spec](const Vec& x) { return prox_eval(spec, x); };
  g.prox = [spec](const Vec& y, double gamma) { return prox_apply(spec, y, gamma); };
  g.prox_jvp = [spec](const Vec& y, double gamma, const Vec& v) {
    return prox_jvp(spec, y, gamma, v);
  };
  return g;
}

}  // namespace fbopt
