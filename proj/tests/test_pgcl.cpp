#include <catch_amalgamated.hpp>

#include <cmath>

#include "fbopt/fbe.hpp"
#include "fbopt/pgcl.hpp"
#include "fbopt/problems.hpp"
#include "fbopt/report.hpp"

using fbopt::DirectionPair;
using fbopt::EigEstimate;
using fbopt::FbeState;
using fbopt::LinOp;
using fbopt::PgclConfig;
using fbopt::RunReport;
using fbopt::RunStatus;
using fbopt::Vec;

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

PgclConfig toy_config() {
  PgclConfig c;
  c.gamma0 = 0.25;
  c.store_iter_log = true;
  c.store_trajectory = true;
  return c;
}

bool near_any(const Vec& x, std::initializer_list<Vec> points, double tol) {
  for (const Vec& p : points)
    if ((x - p).norm() <= tol) return true;
  return false;
}

}  // namespace

TEST_CASE("curvilinear directions at an exact saddle of the box toy") {
  auto p = fbopt::toy_box(fbopt::ToyVariant::quadratic_box);
  FbeState s = fbopt::fbe_eval(vec2(1.0, 0.0), 0.25, p.smooth, p.nonsmooth);
  REQUIRE(s.r.norm() == 0.0);  // fixed point of the proximal map
  LinOp B = [&](const Vec& v) {
    return fbopt::GenHessOp{&s, &p.smooth, &p.nonsmooth}.apply(v);
  };
  Vec grad = fbopt::fbe_grad(s, p.smooth);
  REQUIRE(grad.norm() == 0.0);

  // Hand the known eigenpair of B = diag(6, -3) to isolate the direction
  // logic from the eigensolver.
  EigEstimate eig;
  eig.lambda_min = -3.0;
  eig.v = vec2(0.0, 1.0);
  eig.residual = 0.0;

  PgclConfig c = toy_config();
  DirectionPair pair = fbopt::pgcl_directions(s, B, eig, grad, c);
  // Zero gradient: no Newton direction, curvature direction sqrt(3)*e2 with
  // the positive tie sign, curvature <Bs,s> = -9.
  REQUIRE(pair.d.norm() == 0.0);
  REQUIRE((pair.s - vec2(0.0, std::sqrt(3.0))).norm() <= 1e-15);
  REQUIRE(pair.curvature == Catch::Approx(-9.0).margin(1e-12));
  REQUIRE(pair.descent_s);

  // First backtrack lands: tau = 1 overshoots the decrease target, one
  // halving of tau^2 meets it.
  auto ls = fbopt::pgcl_linesearch(s, s, pair, 0.08838834764831843, c.mu, c.beta,
                                   c.max_backtracks, c.alpha_gamma, p.smooth,
                                   p.nonsmooth);
  REQUIRE(ls.tau == c.beta);
  REQUIRE(ls.backtracks == 1);
  REQUIRE((ls.state_next.x - vec2(1.0, c.beta * std::sqrt(3.0))).norm() <= 1e-14);
  REQUIRE(ls.state_next.fbe == Catch::Approx(-1.84846922834953).margin(1e-10));
}

TEST_CASE("linesearch with no direction returns the proximal point") {
  auto p = fbopt::toy_box(fbopt::ToyVariant::quadratic_box);
  FbeState s = fbopt::fbe_eval(vec2(1.0, 1.0), 0.25, p.smooth, p.nonsmooth);
  DirectionPair pair;
  pair.d = Vec::Zero(2);
  pair.s = Vec::Zero(2);
  auto ls = fbopt::pgcl_linesearch(s, s, pair, 0.1, 0.1, 0.5, 60, 0.95, p.smooth,
                                   p.nonsmooth);
  REQUIRE(ls.tau == 1.0);
  REQUIRE((ls.state_next.x - s.x).norm() == 0.0);
}

TEST_CASE("curvilinear solver certifies a minimizer of the box toy") {
  auto p = fbopt::toy_box(fbopt::ToyVariant::quadratic_box);
  RunReport r = fbopt::pgcl_solve(p, toy_config(), 1, vec2(0.1, 0.0));
  REQUIRE(r.status == RunStatus::second_order_stationary);
  REQUIRE(near_any(r.final_point, {vec2(1, 1), vec2(1, -1)}, 1e-6));
  REQUIRE(r.residual_inf <= 1e-10);
  REQUIRE(*r.lambda_min_estimate >= -1e-10);
  REQUIRE(r.final_phi == Catch::Approx(-2.0).margin(1e-9));
}

TEST_CASE("curvilinear solver escapes the l1 toy saddle to a minimizer") {
  auto p = fbopt::toy_box(fbopt::ToyVariant::l1_box);
  RunReport r = fbopt::pgcl_solve(p, toy_config(), 1, vec2(-0.4, 0.0));
  REQUIRE(r.status == RunStatus::second_order_stationary);
  REQUIRE(near_any(r.final_point,
                   {vec2(1, 1), vec2(1, -1), vec2(-1, 1), vec2(-1, -1),
                    vec2(0, 1), vec2(0, -1)},
                   1e-6));
  REQUIRE(r.final_phi == Catch::Approx(-1.0).margin(1e-9));
  REQUIRE(*r.lambda_min_estimate >= -1e-10);
}

TEST_CASE("curvilinear solver reports an exhausted budget with fresh certificate data") {
  auto p = fbopt::toy_box(fbopt::ToyVariant::quadratic_box);
  PgclConfig c = toy_config();
  c.max_iter = 0;
  RunReport r = fbopt::pgcl_solve(p, c, 1, vec2(0.1, 0.0));
  REQUIRE(r.status == RunStatus::budget_exhausted);
  REQUIRE(r.iterations == 0);
  REQUIRE(r.lambda_min_estimate.has_value());
  REQUIRE(r.eig_residual.has_value());
  REQUIRE(r.final_point.allFinite());
}

TEST_CASE("curvilinear solver converges in bounded-memory direction mode") {
  auto p = fbopt::toy_box(fbopt::ToyVariant::quadratic_box);
  PgclConfig c = toy_config();
  c.direction_mode = PgclConfig::DirectionMode::lbfgs;
  RunReport r = fbopt::pgcl_solve(p, c, 1, vec2(0.5, 0.2));
  REQUIRE(r.status == RunStatus::second_order_stationary);
  REQUIRE(near_any(r.final_point, {vec2(1, 1), vec2(1, -1)}, 1e-6));
}

TEST_CASE("logged decrease coefficient tracks the logged step size") {
  auto p = fbopt::phase_retrieval(12, 72, 3);
  PgclConfig c;
  c.store_iter_log = true;
  RunReport r = fbopt::pgcl_solve(p, c, 2);
  REQUIRE_FALSE(r.iter_log.empty());
  const double lhat = r.lipschitz_estimate;
  const double factor = 0.7071067811865476;
  for (const auto& rec : r.iter_log) {
    double expect = factor * rec.gamma * (1.0 - rec.gamma * lhat) / 2.0;
    REQUIRE(rec.sigma == Catch::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("curvilinear runs are reproducible for a fixed seed") {
  auto p = fbopt::sparse_pca(12, 0.05, 0.4, 5);
  PgclConfig c;
  RunReport a = fbopt::pgcl_solve(p, c, 9);
  RunReport b = fbopt::pgcl_solve(p, c, 9);
  REQUIRE(fbopt::to_jsonl(a, false) == fbopt::to_jsonl(b, false));
}
