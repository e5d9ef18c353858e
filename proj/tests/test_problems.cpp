#include <catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "fbopt/oracles.hpp"
#include "fbopt/problems.hpp"

using fbopt::ProblemInstance;
using fbopt::Vec;

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

// Recover the dense Hessian of a state-independent quadratic through its
// Hessian-vector products.
Eigen::MatrixXd densify_hessian(const fbopt::SmoothOracle& f) {
  const int n = f.dim;
  Eigen::MatrixXd H(n, n);
  for (int j = 0; j < n; ++j) {
    Vec e = Vec::Zero(n);
    e[j] = 1.0;
    H.col(j) = f.hvp(Vec::Zero(n), e);
  }
  return H;
}

}  // namespace

TEST_CASE("box toy reference values") {
  auto p = fbopt::toy_box(fbopt::ToyVariant::quadratic_box);
  REQUIRE(p.reference.has_value());
  REQUIRE(p.reference->phi_star == -2.0);
  REQUIRE(p.reference->minimizers.size() == 4);
  REQUIRE(p.reference->saddles.size() == 4);
  for (const Vec& m : p.reference->minimizers)
    REQUIRE(fbopt::phi_value(p, m) == -2.0);
  for (const Vec& s : p.reference->saddles)
    REQUIRE(fbopt::phi_value(p, s) == -1.0);
  REQUIRE(fbopt::phi_value(p, vec2(0, 0)) == 0.0);
}

TEST_CASE("l1 box toy reference values") {
  auto p = fbopt::toy_box(fbopt::ToyVariant::l1_box);
  REQUIRE(p.reference.has_value());
  REQUIRE(p.reference->phi_star == -1.0);
  REQUIRE(p.reference->minimizers.size() == 6);
  for (const Vec& m : p.reference->minimizers)
    REQUIRE(fbopt::phi_value(p, m) == -1.0);
  // phi(x, y) = -x^2 - y^2 + |x|: corners with x = 0 tie the corners with
  // |x| = 1, and the pure-y corners have no l1 contribution.
  REQUIRE(fbopt::phi_value(p, vec2(0, 1)) == -1.0);
  REQUIRE(fbopt::phi_value(p, vec2(0.5, 0)) == 0.25);
  REQUIRE(fbopt::phi_value(p, vec2(1, 0)) == 0.0);
}

TEST_CASE("sparse dictionary problem is reproducible and matches its spectrum") {
  const int n = 32;
  auto p1 = fbopt::sparse_pca(n, 0.05, 0.3, 7);
  auto p2 = fbopt::sparse_pca(n, 0.05, 0.3, 7);
  auto p3 = fbopt::sparse_pca(n, 0.05, 0.3, 8);

  Vec probe = Vec::Ones(n);
  REQUIRE(p1.smooth.eval(probe) == p2.smooth.eval(probe));
  REQUIRE((p1.smooth.grad(probe).array() == p2.smooth.grad(probe).array()).all());
  REQUIRE(p1.smooth.eval(probe) != p3.smooth.eval(probe));
  REQUIRE(p1.smooth.lipschitz_hint.has_value());
  REQUIRE(*p1.smooth.lipschitz_hint == *p2.smooth.lipschitz_hint);

  // f(0) = 0 with zero gradient, and the Hessian does not depend on x.
  REQUIRE(p1.smooth.eval(Vec::Zero(n)) == 0.0);
  REQUIRE(p1.smooth.grad(Vec::Zero(n)).norm() == 0.0);
  Vec v = probe / std::sqrt(double(n));
  REQUIRE((p1.smooth.hvp(Vec::Zero(n), v) - p1.smooth.hvp(probe, v)).norm() == 0.0);

  // The curvature hint tracks the top eigenvalue of the dense Hessian.
  Eigen::MatrixXd H = densify_hessian(p1.smooth);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  double top = es.eigenvalues().cwiseAbs().maxCoeff();
  REQUIRE(*p1.smooth.lipschitz_hint == Catch::Approx(top).epsilon(0.05));

  REQUIRE(p1.smooth.mvp_cost.eval == 1);
  REQUIRE(p1.smooth.mvp_cost.grad == 2);
  REQUIRE(p1.smooth.mvp_cost.hvp == 2);
}

TEST_CASE("phase retrieval vanishes exactly at the planted signal") {
  auto p = fbopt::phase_retrieval(16, 96, 7);
  REQUIRE(p.reference.has_value());
  REQUIRE(p.reference->minimizers.size() == 2);
  const Vec& xstar = p.reference->minimizers[0];
  REQUIRE(std::abs(xstar.norm() - 1.0) <= 1e-12);
  REQUIRE(p.smooth.eval(xstar) == 0.0);
  REQUIRE(p.smooth.eval(-xstar) == 0.0);
  REQUIRE(p.smooth.grad(xstar).norm() == 0.0);
  REQUIRE(fbopt::phi_value(p, xstar) == 0.0);
  // Away from the signal the objective is positive.
  Vec off = xstar;
  off[0] += 0.3;
  off /= off.norm();
  REQUIRE(p.smooth.eval(off) > 0.0);
}

TEST_CASE("problem descriptors serialize their configuration") {
  auto p = fbopt::sparse_pca(8, 0.05, 0.5, 3);
  std::string key = p.desc.config_key();
  REQUIRE(key.find("sparse_pca") != std::string::npos);
  auto q = fbopt::sparse_pca(8, 0.05, 0.5, 4);
  // Instance seed is part of the identity of a problem family member but
  // not of the sweep configuration: both keys must match.
  REQUIRE(q.desc.config_key() == key);
  auto r = fbopt::sparse_pca(9, 0.05, 0.5, 3);
  REQUIRE(r.desc.config_key() != key);
}
