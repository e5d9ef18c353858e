#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "fbopt/detail/format.hpp"
#include "fbopt/detail/rng.hpp"
#include "fbopt/oracles.hpp"
#include "fbopt/prox.hpp"

namespace fbopt {

enum class ToyVariant { quadratic_box, l1_box };

// Identifying parameters of a generated instance. Serialized into every run
// report so results can be regenerated exactly.
struct ProblemDesc {
  std::string name;            // "toy", "sparse_pca", "phase_retrieval"
  std::string variant;         // toy only
  int n = 0;
  int m = 0;
  double kappa = 0.0;
  double density = 0.0;
  std::uint64_t seed = 0;

  std::string to_json() const {
    std::string j = "{\"name\":\"" + name + "\"";
    if (!variant.empty()) j += ",\"variant\":\"" + variant + "\"";
    if (n > 0) j += ",\"n\":" + std::to_string(n);
    if (m > 0) j += ",\"m\":" + std::to_string(m);
    if (kappa > 0.0) j += ",\"kappa\":" + detail::format_g17(kappa);
    if (density > 0.0) j += ",\"density\":" + detail::format_g17(density);
    j += ",\"seed\":" + std::to_string(seed) + "}";
    return j;
  }

  // Everything except the seed; sweeps vary the seed over one configuration.
  std::string config_key() const {
    std::string k = name;
    if (!variant.empty()) k += "/" + variant;
    if (n > 0) k += "/n" + std::to_string(n);
    if (m > 0) k += "/m" + std::to_string(m);
    if (kappa > 0.0) k += "/k" + detail::format_g17(kappa);
    if (density > 0.0) k += "/d" + detail::format_g17(density);
    return k;
  }
};

struct KnownReference {
  std::vector<Vec> minimizers;
  std::vector<Vec> saddles;
  std::vector<Vec> maximizers;
  std::optional<double> phi_star;
};

struct ProblemInstance {
  ProblemDesc desc;
  Eigen::Index dim = 0;
  SmoothOracle smooth;
  NonsmoothOracle nonsmooth;
  ProxSpec spec = ProxSpec::ball(1.0);
  std::optional<KnownReference> reference;
};

inline double phi_value(const ProblemInstance& p, const Vec& x) {
  return p.smooth.eval(x) + p.nonsmooth.eval(x);
}

namespace detail {

// Construction-time self checks, cheap enough to run on every instance.

// Directional derivative of f against a central difference at a few points.
inline void check_gradient(const SmoothOracle& f, std::mt19937_64& rng,
                           double scale, double tol) {
  for (int k = 0; k < 5; ++k) {
    Vec x = scale * gaussian_vector(rng, f.dim);
    Vec u = unit_vector(rng, f.dim);
    double h = 1e-6 * std::max(1.0, x.norm());
    double fd = (f.eval(x + h * u) - f.eval(x - h * u)) / (2.0 * h);
    double an = f.grad(x).dot(u);
    if (std::abs(fd - an) > tol * std::max(1.0, std::abs(an)))
      throw std::logic_error("gradient oracle disagrees with finite differences");
    Vec hv = f.hvp(x, u);
    Vec gfd = (f.grad(x + h * u) - f.grad(x - h * u)) / (2.0 * h);
    if ((hv - gfd).norm() > tol * std::max(1.0, hv.norm()))
      throw std::logic_error("hvp oracle disagrees with finite differences");
  }
}

// Reference points must be fixed points of the forward-backward map.
inline void check_fixed_points(const ProblemInstance& p, double gamma) {
  if (!p.reference) return;
  auto check = [&](const Vec& x) {
    Vec xbar = p.nonsmooth.prox(x - gamma * p.smooth.grad(x), gamma);
    if (((x - xbar) / gamma).lpNorm<Eigen::Infinity>() > 1e-12)
      throw std::logic_error("reference point is not a fixed point");
  };
  for (const auto& x : p.reference->minimizers) check(x);
  for (const auto& x : p.reference->saddles) check(x);
  for (const auto& x : p.reference->maximizers) check(x);
}

inline Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

// Matrix-free largest eigenvalue of A^T A by power iteration.
template <class Mat>
double power_norm_sq(const Mat& A, Eigen::Index n, std::uint64_t seed) {
  auto rng = make_rng(seed);
  Vec v = unit_vector(rng, n);
  double lam = 0.0;
  for (int it = 0; it < 500; ++it) {
    Vec w = A.transpose() * (A * v);
    double nw = w.norm();
    if (nw == 0.0) return 0.0;
    v = w / nw;
    double lam_new = v.dot(A.transpose() * (A * v));
    if (it > 4 && std::abs(lam_new - lam) <= 1e-9 * std::abs(lam_new)) {
      lam = lam_new;
      break;
    }
    lam = lam_new;
  }
  return lam;
}

}  // namespace detail

// Two-dimensional concave quadratic over the unit box, optionally with an
// l1 term on the first coordinate:
//   f(x, y) = -x^2 - y^2
//   g = indicator of [-1,1]^2             (quadratic_box)
//   g = |x| + indicator of [-1,1]^2       (l1_box)
inline ProblemInstance toy_box(ToyVariant variant) {
  ProblemInstance p;
  p.dim = 2;
  p.desc.name = "toy";
  p.desc.variant = variant == ToyVariant::quadratic_box ? "quadratic_box" : "l1_box";
  p.desc.n = 2;

  p.smooth.dim = 2;
  p.smooth.eval = [](const Vec& x) { return -x.squaredNorm(); };
  p.smooth.grad = [](const Vec& x) { return Vec(-2.0 * x); };
  p.smooth.hvp = [](const Vec&, const Vec& v) { return Vec(-2.0 * v); };
  p.smooth.lipschitz_hint = 2.0;

  Vec lo = detail::vec2(-1.0, -1.0);
  Vec hi = detail::vec2(1.0, 1.0);
  KnownReference ref;
  if (variant == ToyVariant::quadratic_box) {
    p.spec = ProxSpec::box(lo, hi);
    ref.minimizers = {detail::vec2(1, 1), detail::vec2(1, -1), detail::vec2(-1, 1),
                      detail::vec2(-1, -1)};
    ref.saddles = {detail::vec2(1, 0), detail::vec2(-1, 0), detail::vec2(0, 1),
                   detail::vec2(0, -1)};
    ref.maximizers = {detail::vec2(0, 0)};
    ref.phi_star = -2.0;
  } else {
    p.spec = ProxSpec::l1_box(1.0, lo, hi, detail::vec2(1.0, 0.0));
    ref.minimizers = {detail::vec2(1, 1), detail::vec2(1, -1), detail::vec2(-1, 1),
                      detail::vec2(-1, -1), detail::vec2(0, 1), detail::vec2(0, -1)};
    ref.saddles = {detail::vec2(0, 0), detail::vec2(1, 0), detail::vec2(-1, 0)};
    ref.maximizers = {detail::vec2(0.5, 0), detail::vec2(-0.5, 0)};
    ref.phi_star = -1.0;
  }
  p.nonsmooth = make_prox_oracle(p.spec, 2);
  p.reference = std::move(ref);
  detail::check_fixed_points(p, 0.25);
  return p;
}

// Sparse-dictionary quadratic: f(x) = -1/2 ||A x||^2 with A a (20n x n)
// sparse random matrix, g = kappa*||.||_1 + indicator of the unit ball.
// The Gram matrix is never formed; every oracle works through products with
// A, and the mvp counter tracks them (1 per eval, 2 per grad, 2 per hvp).
inline ProblemInstance sparse_pca(int n, double kappa, double density,
                                  std::uint64_t seed) {
  if (n <= 0) throw std::invalid_argument("n must be positive");
  ProblemInstance p;
  p.dim = n;
  p.desc.name = "sparse_pca";
  p.desc.n = n;
  p.desc.kappa = kappa;
  p.desc.density = density;
  p.desc.seed = seed;

  const int rows = 20 * n;
  auto rng = detail::make_rng(detail::mix_seed(seed, 0x73706361ULL));
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(rows * n * density * 1.2) + 16);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < n; ++j) {
      // One uniform and one normal draw per entry keeps the pattern and the
      // values reproducible independent of how many entries survive.
      double keep = uni(rng);
      double val = normal(rng);
      if (keep < density) trips.emplace_back(i, j, val);
    }
  auto A = std::make_shared<Eigen::SparseMatrix<double>>(rows, n);
  A->setFromTriplets(trips.begin(), trips.end());
  A->makeCompressed();

  p.smooth.dim = n;
  p.smooth.mvp_cost = {1, 2, 2};
  p.smooth.eval = [A](const Vec& x) { return -0.5 * (*A * x).squaredNorm(); };
  p.smooth.grad = [A](const Vec& x) { return Vec(-(A->transpose() * (*A * x))); };
  p.smooth.hvp = [A](const Vec&, const Vec& v) {
    return Vec(-(A->transpose() * (*A * v)));
  };
  p.smooth.lipschitz_hint =
      detail::power_norm_sq(*A, n, detail::mix_seed(seed, 0x706f77ULL));

  p.spec = ProxSpec::l1_ball(kappa, 1.0);
  p.nonsmooth = make_prox_oracle(p.spec, n);

  auto check_rng = detail::make_rng(detail::mix_seed(seed, 0x636865636bULL));
  detail::check_gradient(p.smooth, check_rng, 1.0 / std::sqrt(double(n)), 1e-5);
  return p;
}

// Quartic phase-retrieval objective from squared linear measurements of a
// hidden unit vector xstar:
//   f(x) = 1/(2m) sum_i ((a_i'xstar)^2 - (a_i'x)^2)^2,
// g = indicator of the unit ball. f vanishes exactly at +-xstar.
inline ProblemInstance phase_retrieval(int n, int m, std::uint64_t seed) {
  if (n <= 0 || m <= 0) throw std::invalid_argument("sizes must be positive");
  ProblemInstance p;
  p.dim = n;
  p.desc.name = "phase_retrieval";
  p.desc.n = n;
  p.desc.m = m;
  p.desc.seed = seed;

  auto rng = detail::make_rng(detail::mix_seed(seed, 0x70686173ULL));
  std::normal_distribution<double> normal(0.0, 1.0);
  auto A = std::make_shared<Eigen::MatrixXd>(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) (*A)(i, j) = normal(rng);
  Vec xstar = detail::unit_vector(rng, n);
  auto ysq = std::make_shared<Vec>(((*A) * xstar).array().square().matrix());

  const double inv_m = 1.0 / static_cast<double>(m);
  p.smooth.dim = n;
  p.smooth.eval = [A, ysq, inv_m](const Vec& x) {
    Vec z = *A * x;
    return 0.5 * inv_m * (ysq->array() - z.array().square()).matrix().squaredNorm();
  };
  p.smooth.grad = [A, ysq, inv_m](const Vec& x) {
    Vec z = *A * x;
    Vec w = ((z.array().square() - ysq->array()) * z.array()).matrix();
    return Vec(2.0 * inv_m * (A->transpose() * w));
  };
  p.smooth.hvp = [A, ysq, inv_m](const Vec& x, const Vec& v) {
    Vec z = *A * x;
    Vec zv = *A * v;
    Vec w = ((3.0 * z.array().square() - ysq->array()) * zv.array()).matrix();
    return Vec(2.0 * inv_m * (A->transpose() * w));
  };

  p.spec = ProxSpec::ball(1.0);
  p.nonsmooth = make_prox_oracle(p.spec, n);

  KnownReference ref;
  ref.minimizers = {xstar, Vec(-xstar)};
  ref.phi_star = 0.0;
  p.reference = std::move(ref);

  detail::check_fixed_points(p, 0.1);
  auto check_rng = detail::make_rng(detail::mix_seed(seed, 0x636865636bULL));
  detail::check_gradient(p.smooth, check_rng, 0.5 / std::sqrt(double(n)), 1e-4);
  return p;
}

}  // namespace fbopt
