#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fbopt/baselines.hpp"
#include "fbopt/detail/rng.hpp"
#include "fbopt/fbe.hpp"
#include "fbopt/ntra.hpp"
#include "fbopt/oracles.hpp"
#include "fbopt/pgcl.hpp"
#include "fbopt/problems.hpp"
#include "fbopt/prox.hpp"
#include "fbopt/subsolvers.hpp"

namespace fbopt {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct CheckSuite {
  std::vector<CheckResult> results;

  bool all_passed() const {
    for (const auto& r : results)
      if (!r.passed) return false;
    return true;
  }
  int failures() const {
    int n = 0;
    for (const auto& r : results)
      if (!r.passed) ++n;
    return n;
  }
};

namespace detail {

struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string fmt3(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

// Operator norm of a symmetric operator by power iteration on H*H.
inline double opnorm_sym(const LinOp& H, Eigen::Index n, int iters,
                         std::mt19937_64& rng) {
  Vec v = unit_vector(rng, n);
  double est = 0.0;
  for (int i = 0; i < iters; ++i) {
    Vec w = H(H(v));
    double nw = w.norm();
    if (nw == 0.0) return 0.0;
    est = std::sqrt(nw);
    v = w / nw;
  }
  return est;
}

// Random point with finite nonsmooth value.
inline Vec sample_feasible(const ProxSpec& spec, std::mt19937_64& rng, Eigen::Index n) {
  switch (spec.kind) {
    case ProxSpec::Kind::L1:
      return gaussian_vector(rng, n);
    case ProxSpec::Kind::Ball:
    case ProxSpec::Kind::L1Ball:
      return ball_point(rng, n, spec.radius);
    case ProxSpec::Kind::Box:
    case ProxSpec::Kind::L1Box: {
      Vec z = gaussian_vector(rng, n);
      std::uniform_real_distribution<double> uni(0.0, 1.0);
      Vec x(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        double lo = spec.lo[i], hi = spec.hi[i];
        if (std::isfinite(lo) && std::isfinite(hi))
          x[i] = lo + uni(rng) * (hi - lo);
        else if (std::isfinite(lo))
          x[i] = lo + std::abs(z[i]);
        else if (std::isfinite(hi))
          x[i] = hi - std::abs(z[i]);
        else
          x[i] = z[i];
      }
      return x;
    }
  }
  return gaussian_vector(rng, n);
}

// Nearest feasible point, used to build meaningful prox-optimality candidates.
inline Vec project_feasible(const ProxSpec& spec, const Vec& z) {
  switch (spec.kind) {
    case ProxSpec::Kind::Box:
    case ProxSpec::Kind::L1Box:
      return proj_box(z, spec.lo, spec.hi);
    case ProxSpec::Kind::Ball:
    case ProxSpec::Kind::L1Ball:
      return proj_ball(z, spec.radius);
    case ProxSpec::Kind::L1:
      return z;
  }
  return z;
}

// Largest Hessian norm seen over a set of points, with a safety margin.
inline double curvature_bound(const SmoothOracle& f, const std::vector<Vec>& points,
                              std::mt19937_64& rng) {
  double lmax = 1e-12;
  for (const auto& x : points) {
    LinOp H = [&f, &x](const Vec& v) { return f.hvp(x, v); };
    lmax = std::max(lmax, opnorm_sym(H, f.dim, 30, rng));
  }
  return 1.05 * lmax;
}

// Envelope sandwich: the envelope lower-bounds the objective on feasible
// points, and the proximal point improves on the envelope by a quantified
// margin when the step respects the curvature bound.
inline std::string check_envelope_bounds(const ProblemInstance& p, std::uint64_t seed,
                                         int npoints) {
  auto rng = make_rng(seed);
  std::vector<Vec> xs;
  xs.reserve(static_cast<std::size_t>(npoints) + 1);
  for (int i = 0; i < npoints; ++i) xs.push_back(sample_feasible(p.spec, rng, p.dim));
  xs.push_back(Vec::Zero(p.dim));  // captures the curvature floor of quartic losses

  double lip = curvature_bound(p.smooth, xs, rng);
  double gamma = 0.45 / lip;
  for (int pass = 0; pass < 2; ++pass) {
    std::vector<Vec> segment_points = xs;
    for (const auto& x : xs) {
      FbeState st = fbe_eval(x, gamma, p.smooth, p.nonsmooth);
      segment_points.push_back(st.xbar);
      segment_points.push_back(0.5 * (x + st.xbar));
    }
    double lip2 = curvature_bound(p.smooth, segment_points, rng);
    if (lip2 <= lip) break;
    lip = lip2;
    gamma = 0.45 / lip;
    if (pass == 1) throw CheckFailure("curvature estimate did not stabilize");
  }

  double worst_lower = 0.0, worst_decrease = 0.0;
  for (const auto& x : xs) {
    FbeState st = fbe_eval(x, gamma, p.smooth, p.nonsmooth);
    double tol = 1e-9 * (1.0 + std::abs(st.fbe));
    double phi_x = phi_value(p, x);
    worst_lower = std::max(worst_lower, st.fbe - phi_x);
    if (st.fbe > phi_x + tol)
      throw CheckFailure("envelope exceeds objective by " + fmt3(st.fbe - phi_x));
    double phi_bar = phi_value(p, st.xbar);
    double margin = (1.0 - gamma * lip) / (2.0 * gamma) * (x - st.xbar).squaredNorm();
    worst_decrease = std::max(worst_decrease, phi_bar - (st.fbe - margin));
    if (phi_bar > st.fbe - margin + tol)
      throw CheckFailure("proximal decrease shortfall " + fmt3(phi_bar - st.fbe + margin));
  }
  return std::to_string(npoints) + " points, slack " + fmt3(worst_lower) + " / " +
         fmt3(worst_decrease);
}

// Envelope gradient against central differences, away from prox kinks.
inline std::string check_envelope_gradient(const ProblemInstance& p, std::uint64_t seed,
                                           int npoints) {
  auto rng = make_rng(seed);
  std::vector<Vec> probe;
  for (int i = 0; i < 8; ++i) probe.push_back(sample_feasible(p.spec, rng, p.dim));
  double lip = curvature_bound(p.smooth, probe, rng);
  double gamma = 0.45 / lip;

  int used = 0, attempts = 0;
  double worst = 0.0;
  while (used < npoints && attempts < 40 * npoints) {
    ++attempts;
    Vec x = sample_feasible(p.spec, rng, p.dim);
    FbeState st = fbe_eval(x, gamma, p.smooth, p.nonsmooth);
    if (kink_margin(p.spec, st.y, gamma) < 1e-3) continue;
    ++used;
    Vec grad = fbe_grad(st, p.smooth);
    double h = 1e-6 * (1.0 + x.norm());
    for (int k = 0; k < 3; ++k) {
      Vec u = unit_vector(rng, p.dim);
      double fp = fbe_eval(x + h * u, gamma, p.smooth, p.nonsmooth).fbe;
      double fm = fbe_eval(x - h * u, gamma, p.smooth, p.nonsmooth).fbe;
      double fd = (fp - fm) / (2.0 * h);
      double err = std::abs(fd - grad.dot(u)) / (1.0 + std::abs(grad.dot(u)) + grad.norm());
      worst = std::max(worst, err);
      if (err > 1e-5)
        throw CheckFailure("gradient mismatch " + fmt3(err) + " at point " +
                           std::to_string(used));
    }
  }
  if (used < npoints)
    throw CheckFailure("could not find enough kink-free points (" +
                       std::to_string(used) + ")");
  return std::to_string(used) + " points, max rel err " + fmt3(worst);
}

// For quadratic smooth parts the curvature operator is the exact envelope
// Hessian away from prox kinks; compare against differenced gradients.
inline std::string check_exact_hessian(const ProblemInstance& p, std::uint64_t seed,
                                       int npoints) {
  auto rng = make_rng(seed);
  double lip = p.smooth.lipschitz_hint.value_or(1.0);
  double gamma = 0.45 / lip;

  int used = 0, attempts = 0;
  double worst = 0.0;
  while (used < npoints && attempts < 40 * npoints) {
    ++attempts;
    Vec x = sample_feasible(p.spec, rng, p.dim);
    FbeState st = fbe_eval(x, gamma, p.smooth, p.nonsmooth);
    if (kink_margin(p.spec, st.y, gamma) < 1e-3) continue;
    ++used;
    GenHessOp B{&st, &p.smooth, &p.nonsmooth};
    double h = 1e-5;
    for (int k = 0; k < 3; ++k) {
      Vec v = unit_vector(rng, p.dim);
      Vec bv = B.apply(v);
      FbeState sp = fbe_eval(x + h * v, gamma, p.smooth, p.nonsmooth);
      FbeState sm = fbe_eval(x - h * v, gamma, p.smooth, p.nonsmooth);
      Vec fd = (fbe_grad(sp, p.smooth) - fbe_grad(sm, p.smooth)) / (2.0 * h);
      double err = (fd - bv).norm() / (1.0 + bv.norm());
      worst = std::max(worst, err);
      if (err > 1e-4)
        throw CheckFailure("curvature mismatch " + fmt3(err));
    }
  }
  if (used < npoints) throw CheckFailure("could not find enough kink-free points");
  return std::to_string(used) + " points, max rel err " + fmt3(worst);
}

// Norm bound gamma*||B|| <= 6 and symmetry of the curvature operator.
inline std::string check_hessian_bound_symmetry(const ProblemInstance& p,
                                                std::uint64_t seed, int npoints) {
  auto rng = make_rng(seed);
  std::vector<Vec> probe;
  for (int i = 0; i < 6; ++i) probe.push_back(sample_feasible(p.spec, rng, p.dim));
  double lip = curvature_bound(p.smooth, probe, rng);
  double gamma = 0.5 / lip;

  double worst_norm = 0.0, worst_sym = 0.0;
  for (int i = 0; i < npoints; ++i) {
    Vec x = sample_feasible(p.spec, rng, p.dim);
    FbeState st = fbe_eval(x, gamma, p.smooth, p.nonsmooth);
    GenHessOp Bop{&st, &p.smooth, &p.nonsmooth};
    LinOp B = [&Bop](const Vec& v) { return Bop.apply(v); };
    double nb = opnorm_sym(B, p.dim, 30, rng);
    worst_norm = std::max(worst_norm, gamma * nb);
    if (gamma * nb > 6.0 * (1.0 + 1e-9))
      throw CheckFailure("norm bound violated: gamma*||B|| = " + fmt3(gamma * nb));
    for (int k = 0; k < 2; ++k) {
      Vec u = gaussian_vector(rng, p.dim);
      Vec v = gaussian_vector(rng, p.dim);
      double a = B(u).dot(v), b = u.dot(B(v));
      double scale = (6.0 / gamma) * u.norm() * v.norm() + 1.0;
      double err = std::abs(a - b) / scale;
      worst_sym = std::max(worst_sym, err);
      if (err > 1e-8) throw CheckFailure("asymmetry " + fmt3(err));
    }
  }
  return std::to_string(npoints) + " points, max gamma*||B|| " + fmt3(worst_norm) +
         ", asym " + fmt3(worst_sym);
}

// The prox output must beat every candidate on the prox objective.
inline std::string check_prox_optimality(const ProxSpec& spec, Eigen::Index n,
                                         std::uint64_t seed, int ndraws) {
  auto rng = make_rng(seed);
  std::uniform_int_distribution<int> pick(0, 3);
  const double gammas[4] = {0.05, 0.3, 1.0, 2.5};
  const double scales[4] = {1e-3, 1e-2, 0.1, 1.0};
  double worst = 0.0;
  for (int i = 0; i < ndraws; ++i) {
    double gamma = gammas[i % 4];
    Vec y = 2.0 * gaussian_vector(rng, n);
    Vec p = prox_apply(spec, y, gamma);
    double base = prox_eval(spec, p) + (p - y).squaredNorm() / (2.0 * gamma);
    if (!std::isfinite(base)) throw CheckFailure("prox output infeasible");
    for (int k = 0; k < 10; ++k) {
      Vec z = p + scales[pick(rng)] * gaussian_vector(rng, n);
      if (k % 2 == 0) z = project_feasible(spec, z);
      double val = prox_eval(spec, z) + (z - y).squaredNorm() / (2.0 * gamma);
      if (!std::isfinite(val)) continue;
      double slack = base - val;
      worst = std::max(worst, slack);
      if (slack > 1e-10 * (1.0 + std::abs(val)))
        throw CheckFailure("candidate beats prox output by " + fmt3(slack));
    }
  }
  return std::to_string(ndraws) + " draws, worst slack " + fmt3(worst);
}

// Prox directional derivatives against central differences, away from kinks.
inline std::string check_prox_jacobian(const ProxSpec& spec, Eigen::Index n,
                                       std::uint64_t seed, int npoints) {
  auto rng = make_rng(seed);
  const double gammas[4] = {0.05, 0.3, 1.0, 2.5};
  int used = 0, attempts = 0;
  double worst = 0.0;
  while (used < npoints && attempts < 60 * npoints) {
    ++attempts;
    double gamma = gammas[attempts % 4];
    Vec y = 2.0 * gaussian_vector(rng, n);
    if (kink_margin(spec, y, gamma) < 1e-3) continue;
    ++used;
    double h = 1e-6;
    for (int k = 0; k < 2; ++k) {
      Vec v = unit_vector(rng, n);
      Vec jv = prox_jvp(spec, y, gamma, v);
      Vec fd = (prox_apply(spec, y + h * v, gamma) - prox_apply(spec, y - h * v, gamma)) /
               (2.0 * h);
      double err = (jv - fd).norm();
      worst = std::max(worst, err);
      if (err > 1e-4) throw CheckFailure("jacobian mismatch " + fmt3(err));
    }
  }
  if (used < npoints) throw CheckFailure("could not find enough kink-free points");
  return std::to_string(used) + " points, max err " + fmt3(worst);
}

inline std::string check_prox_regularity(std::uint64_t seed) {
  auto rng = make_rng(seed);
  const Eigen::Index n = 6;
  Vec lo = -Vec::Ones(n), hi = Vec::Ones(n);
  hi[1] = 0.5;
  lo[2] = 0.0;
  hi[2] = 2.0;
  std::vector<ProxSpec> specs = {ProxSpec::l1(0.7), ProxSpec::box(lo, hi),
                                 ProxSpec::ball(1.3), ProxSpec::l1_ball(0.4, 1.1),
                                 ProxSpec::l1_box(0.6, lo, hi)};
  double worst_idem = 0.0, worst_exp = 0.0;
  for (const auto& spec : specs) {
    bool projection = spec.kind == ProxSpec::Kind::Box || spec.kind == ProxSpec::Kind::Ball;
    for (int i = 0; i < 40; ++i) {
      double gamma = 0.1 + 0.5 * (i % 5);
      Vec y = 3.0 * gaussian_vector(rng, n);
      if (projection) {
        Vec p = prox_apply(spec, y, gamma);
        double drift = (prox_apply(spec, p, gamma) - p).norm();
        worst_idem = std::max(worst_idem, drift);
        if (drift > 1e-12) throw CheckFailure("projection not idempotent: " + fmt3(drift));
      }
      Vec v = gaussian_vector(rng, n);
      double expansion = prox_jvp(spec, y, gamma, v).norm() - v.norm();
      worst_exp = std::max(worst_exp, expansion);
      if (expansion > 1e-12 * v.norm())
        throw CheckFailure("prox derivative expansive by " + fmt3(expansion));
    }
  }
  return "idempotence drift " + fmt3(worst_idem) + ", expansion " + fmt3(worst_exp);
}

// Trust-region subsolver against dense linear algebra on small problems.
inline std::string check_tr_subsolver(std::uint64_t seed) {
  auto rng = make_rng(seed);
  const Eigen::Index n = 5;
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::MatrixXd M(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) M(i, j) = normal(rng);
    Eigen::MatrixXd A = 0.5 * (M + M.transpose());
    if (rep % 2 == 0) A += (n + 1.0) * Eigen::MatrixXd::Identity(n, n);  // SPD half
    Vec grad = gaussian_vector(rng, n);
    LinOp B = [&A](const Vec& v) { return Vec(A * v); };

    auto model = [&](const Vec& d) { return grad.dot(d) + 0.5 * d.dot(A * d); };
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    bool spd = es.eigenvalues().minCoeff() > 1e-9;

    // Cauchy point decrease along -grad within the radius.
    auto cauchy_decrease = [&](double delta) {
      double gn = grad.norm();
      if (gn == 0.0) return 0.0;
      double curv = grad.dot(A * grad);
      double t = delta / gn;
      if (curv > 0.0) t = std::min(t, gn * gn / curv);
      return -(model(Vec(-t * grad)));
    };

    for (double delta : {1e-2, 1.0, 1e3}) {
      TrStep step = steihaug_cg(grad, B, delta, 1e-14, 200);
      double md = -model(step.d);
      worst = std::max(worst, std::abs(md - step.model_decrease) / (1.0 + std::abs(md)));
      if (std::abs(md - step.model_decrease) > 1e-9 * (1.0 + std::abs(md)))
        throw CheckFailure("model decrease bookkeeping off by " +
                           fmt3(md - step.model_decrease));
      double cd = cauchy_decrease(delta);
      if (step.model_decrease < cd - 1e-12 * (1.0 + std::abs(cd)))
        throw CheckFailure("below Cauchy decrease at delta " + fmt3(delta));
      if (step.d.norm() > delta * (1.0 + 1e-9))
        throw CheckFailure("step leaves the region: " + fmt3(step.d.norm() - delta));
      if (spd && delta >= 1e3) {
        Vec newton = A.ldlt().solve(-grad);
        if (newton.norm() < delta) {
          double err = (step.d - newton).norm() / (1.0 + newton.norm());
          worst = std::max(worst, err);
          if (err > 1e-6) throw CheckFailure("interior solve mismatch " + fmt3(err));
          if (step.status != TrStep::Status::interior_newton)
            throw CheckFailure("interior status misreported");
        }
      }
    }
  }
  return "20 models x 3 radii, worst rel err " + fmt3(worst);
}

// Smallest-eigenvalue estimator against dense eigensolves, including a
// repeated eigenvalue and a known spectrum.
inline std::string check_eig_estimator(std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (Eigen::Index n : {4, 8, 16}) {
    for (int rep = 0; rep < 3; ++rep) {
      Eigen::MatrixXd M(n, n);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) M(i, j) = normal(rng);
      Eigen::MatrixXd A = 1.5 * (M + M.transpose());
      LinOp B = [&A](const Vec& v) { return Vec(A * v); };
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
      double truth = es.eigenvalues().minCoeff();
      double scale = 1.0 + A.operatorNorm();
      EigEstimate est = lanczos_min_eig(B, n, 50, 1e-10, splitmix64(seed));
      double err = std::abs(est.lambda_min - truth) / scale;
      worst = std::max(worst, err);
      if (err > 1e-8) throw CheckFailure("eigenvalue off by " + fmt3(err));
      if (est.residual > 1e-6 * scale)
        throw CheckFailure("reported residual too large: " + fmt3(est.residual));
      if (std::abs(est.v.norm() - 1.0) > 1e-10)
        throw CheckFailure("eigenvector not unit norm");
      double vres = (A * est.v - est.lambda_min * est.v).norm();
      if (std::abs(vres - est.residual) > 1e-9 * scale)
        throw CheckFailure("residual bookkeeping off by " + fmt3(vres - est.residual));
    }
  }
  {
    const Eigen::Index n = 6;
    Eigen::MatrixXd A = -3.0 * Eigen::MatrixXd::Identity(n, n);
    LinOp B = [&A](const Vec& v) { return Vec(A * v); };
    EigEstimate est = lanczos_min_eig(B, n, 50, 1e-10, splitmix64(seed));
    if (std::abs(est.lambda_min + 3.0) > 1e-12)
      throw CheckFailure("repeated eigenvalue missed: " + fmt3(est.lambda_min));
  }
  return "3 sizes x 3 draws + multiplicity, worst rel err " + fmt3(worst);
}

// Two-loop recursion against the densely accumulated inverse Hessian.
inline std::string check_lbfgs(std::uint64_t seed) {
  auto rng = make_rng(seed);
  const Eigen::Index n = 7;
  const int capacity = 5;
  LbfgsBuffer buffer(capacity);
  std::vector<std::pair<Vec, Vec>> window;
  double worst = 0.0;
  for (int k = 0; k < 9; ++k) {
    Vec s = gaussian_vector(rng, n);
    Vec y = gaussian_vector(rng, n);
    if (s.dot(y) <= 1e-8) {
      y += (1e-8 - s.dot(y) + 1.0) / s.squaredNorm() * s;
    }
    buffer.push(s, y);
    window.emplace_back(s, y);
    if (static_cast<int>(window.size()) > capacity) window.erase(window.begin());

    const auto& newest = window.back();
    double h0 = newest.first.dot(newest.second) / newest.second.squaredNorm();
    Eigen::MatrixXd H = h0 * Eigen::MatrixXd::Identity(n, n);
    for (const auto& [si, yi] : window) {
      double rho = 1.0 / si.dot(yi);
      Eigen::MatrixXd V = Eigen::MatrixXd::Identity(n, n) - rho * si * yi.transpose();
      H = V * H * V.transpose() + rho * si * si.transpose();
    }
    for (int t = 0; t < 3; ++t) {
      Vec grad = gaussian_vector(rng, n);
      Vec d = buffer.direction(grad);
      Vec dense = -(H * grad);
      double err = (d - dense).norm() / (1.0 + dense.norm());
      worst = std::max(worst, err);
      if (err > 1e-10) throw CheckFailure("two-loop mismatch " + fmt3(err));
    }
    Vec secant = buffer.direction(Vec(-window.back().second));
    double serr = (secant - window.back().first).norm() /
                  (1.0 + window.back().first.norm());
    worst = std::max(worst, serr);
    if (serr > 1e-10) throw CheckFailure("secant property violated " + fmt3(serr));
  }
  return "9 updates, worst rel err " + fmt3(worst);
}

// Re-verify the per-iteration decrease guarantees from solver logs.
inline std::string check_solver_decrease_ntra() {
  ProblemInstance p = toy_box(ToyVariant::quadratic_box);
  NtraConfig config;
  config.store_iter_log = true;
  Vec x0 = detail::vec2(0.1, 0.0);
  RunReport rep = ntra_solve(p, config, 11, x0);
  if (rep.status != RunStatus::second_order_stationary)
    throw CheckFailure("run did not certify: " + std::string(to_string(rep.status)) + " " + rep.message);
  int accepted = 0;
  for (std::size_t i = 0; i < rep.iter_log.size(); ++i) {
    const auto& rec = rep.iter_log[i];
    double slack = 1e-12 * (1.0 + std::abs(rec.fbe_before));
    if (rec.accepted) {
      ++accepted;
      if (rec.model_decrease <= 0.0)
        throw CheckFailure("accepted step without model decrease");
      if (rec.fbe_after > rec.fbe_before - 0.5 * rec.ratio * rec.model_decrease + slack)
        throw CheckFailure("acceptance bookkeeping inconsistent at iter " +
                           std::to_string(rec.iter));
      if (rec.fbe_after > rec.fbe_before + slack)
        throw CheckFailure("accepted step increased the envelope");
    } else if (rec.fbe_after != rec.fbe_before) {
      throw CheckFailure("rejected step moved the iterate");
    }
    if (i + 1 < rep.iter_log.size()) {
      const auto& next = rep.iter_log[i + 1];
      double expect = ntra_radius_update(rec.ratio, rec.delta, config);
      if (std::abs(next.delta - expect) > 1e-15 * (1.0 + expect))
        throw CheckFailure("radius update mismatch at iter " + std::to_string(rec.iter));
    }
  }
  if (accepted == 0) throw CheckFailure("no accepted steps recorded");
  return std::to_string(rep.iterations) + " iterations, " + std::to_string(accepted) +
         " accepted";
}

inline std::string check_solver_decrease_pgcl() {
  ProblemInstance p = toy_box(ToyVariant::l1_box);
  PgclConfig config;
  config.store_iter_log = true;
  Vec x0 = detail::vec2(-0.4, 0.0);
  RunReport rep = pgcl_solve(p, config, 11, x0);
  if (rep.status != RunStatus::second_order_stationary)
    throw CheckFailure("run did not certify: " + std::string(to_string(rep.status)) + " " + rep.message);
  for (const auto& rec : rep.iter_log) {
    double slack = 1e-12 * (1.0 + std::abs(rec.fbe_before));
    double bound = rec.fbe_before - rec.sigma * rec.res_sq +
                   0.5 * 0.1 * rec.tau * rec.tau * rec.curvature;
    if (rec.fbe_after > bound + slack)
      throw CheckFailure("decrease target missed at iter " + std::to_string(rec.iter));
    if (rec.curvature > 1e-12)
      throw CheckFailure("curvature direction with positive curvature");
  }
  return std::to_string(rep.iterations) + " iterations, all targets met";
}

inline std::string check_solver_decrease_panoc() {
  ProblemInstance p = toy_box(ToyVariant::quadratic_box);
  BaselineConfig config;
  config.store_iter_log = true;
  Vec x0 = detail::vec2(0.7, -0.4);
  RunReport rep = panoc_solve(p, config, 11, x0);
  if (rep.status != RunStatus::first_order_stationary)
    throw CheckFailure("run did not converge: " + std::string(to_string(rep.status)) + " " + rep.message);
  for (const auto& rec : rep.iter_log) {
    double slack = 1e-12 * (1.0 + std::abs(rec.fbe_before));
    if (rec.fbe_after > rec.fbe_before - rec.sigma * rec.res_sq + slack)
      throw CheckFailure("decrease target missed at iter " + std::to_string(rec.iter));
  }
  return std::to_string(rep.iterations) + " iterations, all targets met";
}

inline std::string check_problem_references() {
  for (ToyVariant variant : {ToyVariant::quadratic_box, ToyVariant::l1_box}) {
    ProblemInstance p = toy_box(variant);  // construction runs fixed-point checks
    if (!p.reference || !p.reference->phi_star)
      throw CheckFailure("toy problem missing reference data");
    for (const auto& m : p.reference->minimizers) {
      double phi = phi_value(p, m);
      if (std::abs(phi - *p.reference->phi_star) > 1e-12)
        throw CheckFailure("minimizer value off by " + fmt3(phi - *p.reference->phi_star));
    }
  }
  ProblemInstance pr = phase_retrieval(16, 96, 7);
  if (!pr.reference || !pr.reference->phi_star)
    throw CheckFailure("phase retrieval missing reference data");
  for (const auto& m : pr.reference->minimizers) {
    double phi = phi_value(pr, m);
    if (std::abs(phi - *pr.reference->phi_star) > 1e-9)
      throw CheckFailure("signal value off by " + fmt3(phi));
  }
  sparse_pca(24, 0.05, 0.3, 7);  // construction runs gradient checks
  return "toy references exact, instances self-checked";
}

template <typename Fn>
inline void run_named_check(std::vector<CheckResult>& out, std::ostream* log,
                            const std::string& name, Fn&& fn) {
  CheckResult res;
  res.name = name;
  try {
    res.detail = fn();
    res.passed = true;
  } catch (const std::exception& ex) {
    res.passed = false;
    res.detail = ex.what();
  }
  if (log) {
    (*log) << (res.passed ? "[ok]   " : "[FAIL] ") << name
           << (res.detail.empty() ? "" : ": " + res.detail) << "\n";
    log->flush();
  }
  out.push_back(std::move(res));
}

}  // namespace detail

// Full invariant suite over prox rules, envelope calculus, subsolvers, and
// solver logs. Writes one line per check to `log` when given.
inline CheckSuite run_checks(std::ostream* log = nullptr) {
  using namespace detail;
  CheckSuite suite;
  auto& out = suite.results;
  const std::uint64_t seed = 0xC0FFEEULL;

  std::vector<std::pair<std::string, ProblemInstance>> problems;
  try {
    problems.emplace_back("toy-quadratic-box", toy_box(ToyVariant::quadratic_box));
    problems.emplace_back("toy-l1-box", toy_box(ToyVariant::l1_box));
    problems.emplace_back("sparse-pca", sparse_pca(24, 0.05, 0.3, 7));
    problems.emplace_back("phase-retrieval", phase_retrieval(16, 96, 7));
  } catch (const std::exception& ex) {
    out.push_back({"problem-construction", false, ex.what()});
    return suite;
  }

  int tag = 0;
  for (const auto& [name, p] : problems) {
    ++tag;
    run_named_check(out, log, "envelope-bounds/" + name, [&] {
      return check_envelope_bounds(p, mix_seed(seed, 100 + tag), 200);
    });
    run_named_check(out, log, "envelope-gradient/" + name, [&] {
      return check_envelope_gradient(p, mix_seed(seed, 200 + tag), 50);
    });
    run_named_check(out, log, "hessian-bound-symmetry/" + name, [&] {
      return check_hessian_bound_symmetry(p, mix_seed(seed, 300 + tag), 20);
    });
  }
  run_named_check(out, log, "exact-hessian-quadratic/sparse-pca", [&] {
    return check_exact_hessian(problems[2].second, mix_seed(seed, 400), 10);
  });

  {
    const Eigen::Index n = 6;
    Vec lo = -Vec::Ones(n), hi = Vec::Ones(n);
    hi[1] = 0.5;
    lo[2] = 0.0;
    hi[2] = 2.0;
    Vec w = Vec::Ones(n);
    w[0] = 0.0;
    w[4] = 0.0;
    std::vector<std::pair<std::string, ProxSpec>> specs = {
        {"l1", ProxSpec::l1(0.7)},
        {"box", ProxSpec::box(lo, hi)},
        {"ball", ProxSpec::ball(1.3)},
        {"l1-ball", ProxSpec::l1_ball(0.4, 1.1)},
        {"l1-box", ProxSpec::l1_box(0.6, lo, hi, w)}};
    int stag = 0;
    for (const auto& [name, spec] : specs) {
      ++stag;
      run_named_check(out, log, "prox-optimality/" + name, [&] {
        return check_prox_optimality(spec, n, mix_seed(seed, 500 + stag), 100);
      });
      run_named_check(out, log, "prox-jacobian/" + name, [&] {
        return check_prox_jacobian(spec, n, mix_seed(seed, 600 + stag), 30);
      });
    }
    run_named_check(out, log, "prox-regularity",
                    [&] { return check_prox_regularity(mix_seed(seed, 700)); });
  }

  run_named_check(out, log, "tr-subsolver-dense",
                  [&] { return check_tr_subsolver(mix_seed(seed, 800)); });
  run_named_check(out, log, "eig-estimator-dense",
                  [&] { return check_eig_estimator(mix_seed(seed, 900)); });
  run_named_check(out, log, "lbfgs-two-loop",
                  [&] { return check_lbfgs(mix_seed(seed, 1000)); });
  run_named_check(out, log, "solver-decrease/ntra",
                  [&] { return check_solver_decrease_ntra(); });
  run_named_check(out, log, "solver-decrease/pgcl",
                  [&] { return check_solver_decrease_pgcl(); });
  run_named_check(out, log, "solver-decrease/panoc",
                  [&] { return check_solver_decrease_panoc(); });
  run_named_check(out, log, "problem-references",
                  [&] { return check_problem_references(); });

  return suite;
}

}  // namespace fbopt
