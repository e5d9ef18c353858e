// Acceptance harness: runs every shipped guarantee end to end and prints one
// PASS/FAIL line per criterion. Exit status is the number of failures.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "fbopt/fbopt.hpp"

namespace {

using fbopt::RunReport;
using fbopt::RunStatus;
using fbopt::Vec;

constexpr std::uint64_t kToySeed = 3;

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

std::string point_str(const Vec& x) {
  std::ostringstream os;
  os << "(";
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (i) os << ", ";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", x[i]);
    os << buf;
  }
  os << ")";
  return os.str();
}

bool near(const Vec& x, const Vec& target, double tol) {
  return (x - target).norm() <= tol;
}

bool near_any(const Vec& x, const std::vector<Vec>& targets, double tol) {
  for (const Vec& t : targets)
    if (near(x, t, tol)) return true;
  return false;
}

struct Clock {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

// Collects sub-check failures so one bad solver does not mask the others.
struct Criterion {
  std::vector<std::string> failures;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  void note(const std::string& text) { notes.push_back(text); }

  std::string finish(const Clock& clock, double time_limit_s) {
    double t = clock.seconds();
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1fs", t);
    if (t >= time_limit_s)
      failures.push_back(std::string("runtime ") + buf + " exceeded limit");
    std::string detail;
    for (const auto& n : notes) detail += n + "; ";
    detail += buf;
    if (!failures.empty()) {
      std::string msg;
      for (const auto& f : failures) msg += (msg.empty() ? "" : " | ") + f;
      throw std::runtime_error(msg + " [" + detail + "]");
    }
    return detail;
  }
};

bool certified(const RunReport& r, double tol_lambda = 1e-10) {
  return r.status == RunStatus::second_order_stationary &&
         r.lambda_min_estimate.has_value() && *r.lambda_min_estimate >= -tol_lambda;
}

RunReport run_toy(const fbopt::ProblemInstance& p, const std::string& solver,
                  const Vec& x0) {
  fbopt::SweepOptions opt;
  return fbopt::run_one(p, solver, kToySeed, opt, x0);
}

std::string criterion1_box_toy() {
  Clock clock;
  Criterion c;
  auto p = fbopt::toy_box(fbopt::ToyVariant::quadratic_box);
  Vec x0 = vec2(0.1, 0.0);

  RunReport pgm = run_toy(p, "pgm", x0);
  c.require(near(pgm.final_point, vec2(1, 0), 1e-6),
            "pgm expected (1, 0), got " + point_str(pgm.final_point));
  c.require(pgm.wall_time_ms < 1000.0, "pgm run exceeded 1s");

  for (const char* solver : {"ntra", "pgcl"}) {
    RunReport r = run_toy(p, solver, x0);
    c.require(near(r.final_point, vec2(1, 1), 1e-6),
              std::string(solver) + " expected (1, 1), got " + point_str(r.final_point));
    c.require(certified(r), std::string(solver) + " missing second-order certificate");
    c.require(r.wall_time_ms < 1000.0, std::string(solver) + " run exceeded 1s");
  }
  return c.finish(clock, 3.0);
}

std::string criterion2_l1_toy() {
  Clock clock;
  Criterion c;
  auto p = fbopt::toy_box(fbopt::ToyVariant::l1_box);
  Vec x0 = vec2(-0.4, 0.0);

  RunReport pgm = run_toy(p, "pgm", x0);
  c.require(near(pgm.final_point, vec2(-1, 0), 1e-6),
            "pgm expected (-1, 0), got " + point_str(pgm.final_point));
  c.require(pgm.wall_time_ms < 1000.0, "pgm run exceeded 1s");

  std::vector<Vec> minimizers = {vec2(1, 1),  vec2(1, -1), vec2(-1, 1),
                                 vec2(-1, -1), vec2(0, 1),  vec2(0, -1)};
  for (const char* solver : {"ntra", "pgcl"}) {
    RunReport r = run_toy(p, solver, x0);
    c.require(near_any(r.final_point, minimizers, 1e-6),
              std::string(solver) + " expected a minimizer, got " +
                  point_str(r.final_point));
    c.require(certified(r), std::string(solver) + " missing second-order certificate");
    c.require(r.wall_time_ms < 1000.0, std::string(solver) + " run exceeded 1s");
  }
  return c.finish(clock, 3.0);
}

std::string criterion3_phase_benign() {
  Clock clock;
  Criterion c;
  fbopt::SweepOptions opt;
  opt.solvers = {"pgm", "panoc", "ntra", "pgcl"};
  opt.seed_begin = 1;
  opt.seed_count = 20;
  auto reports = fbopt::run_sweep(
      [](std::uint64_t seed) { return fbopt::phase_retrieval(100, 3000, seed); }, opt);

  for (const auto& solver : opt.solvers) {
    int hits = 0, runs = 0;
    for (const auto& r : reports) {
      if (r.solver != solver) continue;
      ++runs;
      if (r.status != RunStatus::error && r.final_phi <= 1e-3) ++hits;
    }
    c.note(solver + " " + std::to_string(hits) + "/" + std::to_string(runs));
    c.require(hits >= 18, solver + " reached the global value only " +
                              std::to_string(hits) + "/20 times");
  }
  return c.finish(clock, 300.0);
}

std::string criterion4_phase_scarce() {
  Clock clock;
  Criterion c;
  fbopt::SweepOptions opt;
  opt.solvers = {"panoc", "ntra", "pgcl"};
  opt.seed_begin = 1;
  opt.seed_count = 50;
  opt.sbar = 1.0;
  auto reports = fbopt::run_sweep(
      [](std::uint64_t seed) { return fbopt::phase_retrieval(100, 300, seed); }, opt);

  fbopt::Aggregate agg = fbopt::aggregate(reports, 0.0);
  double pgcl_global = agg.value("pgcl", "count_global");
  double panoc_global = agg.value("panoc", "count_global");
  c.note("global hits pgcl " + std::to_string(static_cast<int>(pgcl_global)) +
         ", panoc " + std::to_string(static_cast<int>(panoc_global)));
  c.require(pgcl_global >= panoc_global,
            "pgcl found the global value less often than panoc");

  for (const auto& r : reports) {
    if (r.solver != "ntra" && r.solver != "pgcl") continue;
    if (r.status != RunStatus::second_order_stationary) {
      c.require(false, r.solver + " seed " + std::to_string(r.seed) +
                           " ended without certificate: " + to_string(r.status));
      break;
    }
  }
  return c.finish(clock, 600.0);
}

std::string criterion5_sparse_dictionary() {
  Clock clock;
  Criterion c;
  fbopt::SweepOptions opt;
  opt.solvers = {"panoc", "ntra", "pgcl"};
  opt.seed_begin = 1;
  opt.seed_count = 20;
  auto reports = fbopt::run_sweep(
      [](std::uint64_t seed) { return fbopt::sparse_pca(200, 1e-2, 0.1, seed); }, opt);

  for (const auto& r : reports) {
    bool done = r.status == RunStatus::first_order_stationary ||
                r.status == RunStatus::second_order_stationary;
    if (!done || r.residual_inf > 1e-10) {
      c.require(false, r.solver + " seed " + std::to_string(r.seed) +
                           " did not converge within budget (status " +
                           to_string(r.status) + ")");
      break;
    }
  }

  fbopt::Aggregate agg = fbopt::aggregate(reports);
  double ntra_iters = agg.value("ntra", "median_iterations");
  double panoc_iters = agg.value("panoc", "median_iterations");
  double pgcl_hvp = agg.value("pgcl", "median_hvp_f");
  double ntra_hvp = agg.value("ntra", "median_hvp_f");
  c.note("median iterations ntra " + std::to_string(static_cast<long long>(ntra_iters)) +
         ", panoc " + std::to_string(static_cast<long long>(panoc_iters)));
  c.note("median hvp pgcl " + std::to_string(static_cast<long long>(pgcl_hvp)) +
         ", ntra " + std::to_string(static_cast<long long>(ntra_hvp)));
  c.require(ntra_iters <= panoc_iters,
            "trust-region median iterations exceed the accelerated baseline's");
  c.require(pgcl_hvp >= ntra_hvp,
            "curvilinear method used fewer Hessian products than the trust region");
  return c.finish(clock, 600.0);
}

std::string criterion6_invariants() {
  Clock clock;
  Criterion c;
  fbopt::CheckSuite suite = fbopt::run_checks(nullptr);
  for (const auto& res : suite.results)
    if (!res.passed) c.require(false, res.name + ": " + res.detail);
  c.note(std::to_string(suite.results.size()) + " checks");
  return c.finish(clock, 120.0);
}

}  // namespace

int main() {
  struct Entry {
    const char* name;
    std::function<std::string()> fn;
  };
  std::vector<Entry> criteria = {
      {"criterion 1: box toy saddle escape", criterion1_box_toy},
      {"criterion 2: l1 toy saddle escape", criterion2_l1_toy},
      {"criterion 3: phase retrieval, many measurements", criterion3_phase_benign},
      {"criterion 4: phase retrieval, scarce measurements", criterion4_phase_scarce},
      {"criterion 5: sparse dictionary sweep", criterion5_sparse_dictionary},
      {"criterion 6: invariant suite", criterion6_invariants},
  };

  int failures = 0;
  for (const auto& entry : criteria) {
    try {
      std::string detail = entry.fn();
      std::printf("[PASS] %s (%s)\n", entry.name, detail.c_str());
    } catch (const std::exception& ex) {
      ++failures;
      std::printf("[FAIL] %s: %s\n", entry.name, ex.what());
    }
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n",
              static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures;
}
