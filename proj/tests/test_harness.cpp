#include <catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "fbopt/harness.hpp"

using fbopt::Aggregate;
using fbopt::RunReport;
using fbopt::RunStatus;
using fbopt::SweepOptions;
using fbopt::Vec;

namespace {

RunReport make_report(const std::string& solver, std::uint64_t seed, double phi,
                      long long iters = 0,
                      RunStatus status = RunStatus::first_order_stationary) {
  RunReport r;
  r.solver = solver;
  r.problem.name = "toy";
  r.problem.variant = "quadratic_box";
  r.problem.n = 2;
  r.problem.seed = seed;
  r.seed = seed;
  r.status = status;
  r.final_phi = phi;
  r.iterations = iters;
  r.final_point = Vec::Zero(2);
  return r;
}

}  // namespace

TEST_CASE("aggregate medians use the lower middle element") {
  std::vector<RunReport> reports = {make_report("a", 1, 0.0, 3),
                                    make_report("a", 2, 0.0, 5)};
  Aggregate agg = fbopt::aggregate(reports);
  REQUIRE(agg.value("a", "median_iterations") == 3.0);

  reports.push_back(make_report("a", 3, 0.0, 9));
  agg = fbopt::aggregate(reports);
  REQUIRE(agg.value("a", "median_iterations") == 5.0);
}

TEST_CASE("aggregate counts runs near the reference objective") {
  std::vector<RunReport> reports = {make_report("a", 1, 0.0),
                                    make_report("a", 2, 5e-4),
                                    make_report("a", 3, 0.2)};
  Aggregate agg = fbopt::aggregate(reports, 0.0);
  REQUIRE(agg.value("a", "count_global") == 2.0);
  REQUIRE(agg.value("a", "runs") == 3.0);
  // Without a reference value the row is absent.
  Aggregate agg2 = fbopt::aggregate(reports);
  REQUIRE_THROWS_AS(agg2.value("a", "count_global"), std::out_of_range);
}

TEST_CASE("aggregate counts per-seed winners within tolerance") {
  std::vector<RunReport> reports = {
      make_report("a", 1, 0.0),    make_report("b", 1, 0.5),
      make_report("a", 2, 1.0),    make_report("b", 2, 1.0001)};
  Aggregate agg = fbopt::aggregate(reports);
  REQUIRE(agg.value("a", "count_best") == 2.0);
  REQUIRE(agg.value("b", "count_best") == 1.0);
  // Solvers appear in first-appearance order.
  REQUIRE(agg.rows.front().solver == "a");
}

TEST_CASE("aggregate rejects reports from different configurations") {
  std::vector<RunReport> reports = {make_report("a", 1, 0.0)};
  RunReport other = make_report("a", 2, 0.0);
  other.problem.variant = "l1_box";
  reports.push_back(other);
  REQUIRE_THROWS_WITH(fbopt::aggregate(reports),
                      Catch::Matchers::ContainsSubstring("inhomogeneous"));
}

TEST_CASE("aggregate excludes errored runs from medians but counts them") {
  std::vector<RunReport> reports = {
      make_report("a", 1, 0.0, 3),
      make_report("a", 2, 0.0, 5),
      make_report("a", 3, 7.0, 999, RunStatus::error)};
  Aggregate agg = fbopt::aggregate(reports);
  REQUIRE(agg.value("a", "runs") == 3.0);
  REQUIRE(agg.value("a", "errors") == 1.0);
  REQUIRE(agg.value("a", "converged") == 2.0);
  REQUIRE(agg.value("a", "median_iterations") == 3.0);
}

TEST_CASE("aggregate serializes to CSV and JSON rows") {
  std::vector<RunReport> reports = {make_report("a", 1, 0.25, 3)};
  Aggregate agg = fbopt::aggregate(reports);
  std::string csv = agg.to_csv();
  REQUIRE(csv.rfind("solver,metric,value\n", 0) == 0);
  REQUIRE(csv.find("a,median_phi,0.25\n") != std::string::npos);
  std::string json = agg.to_json();
  REQUIRE(json.front() == '[');
  REQUIRE(json.find("\"metric\":\"median_phi\",\"value\":0.25") != std::string::npos);
}

TEST_CASE("sweeps hand every solver the same start point per seed") {
  SweepOptions opt;
  opt.solvers = {"pgm"};
  opt.seed_begin = 5;
  opt.seed_count = 1;
  opt.threads = 1;
  auto factory = [](std::uint64_t) {
    return fbopt::toy_box(fbopt::ToyVariant::quadratic_box);
  };
  auto reports = fbopt::run_sweep(factory, opt);
  REQUIRE(reports.size() == 1);

  auto p = fbopt::toy_box(fbopt::ToyVariant::quadratic_box);
  auto rng = fbopt::detail::make_rng(fbopt::detail::mix_seed(5, 0x78304e54ULL));
  Vec x0 = fbopt::detail::ball_point(rng, 2);
  fbopt::BaselineConfig c;
  RunReport direct = fbopt::pgm_solve(p, c, 5, x0);
  REQUIRE(fbopt::to_jsonl(reports[0], false) == fbopt::to_jsonl(direct, false));
}

TEST_CASE("sweep outputs are identical across repeats and thread counts") {
  SweepOptions opt;
  opt.solvers = {"pgm", "ntra"};
  opt.seed_begin = 1;
  opt.seed_count = 2;
  opt.threads = 1;
  auto factory = [](std::uint64_t seed) { return fbopt::sparse_pca(10, 0.05, 0.4, seed); };
  auto a = fbopt::run_sweep(factory, opt);
  auto b = fbopt::run_sweep(factory, opt);
  opt.threads = 2;
  auto c = fbopt::run_sweep(factory, opt);
  REQUIRE(a.size() == 4);
  REQUIRE(b.size() == 4);
  REQUIRE(c.size() == 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(fbopt::to_jsonl(a[i], false) == fbopt::to_jsonl(b[i], false));
    REQUIRE(fbopt::to_jsonl(a[i], false) == fbopt::to_jsonl(c[i], false));
  }
}

TEST_CASE("unknown solver names are rejected") {
  auto p = fbopt::toy_box(fbopt::ToyVariant::quadratic_box);
  SweepOptions opt;
  REQUIRE_THROWS_WITH(fbopt::run_one(p, "sgd", 1, opt),
                      Catch::Matchers::ContainsSubstring("unknown solver"));
}

TEST_CASE("result files round-trip through the filesystem") {
  std::vector<RunReport> reports = {make_report("a", 1, 0.25, 3)};
  std::string path = "harness_test_roundtrip.jsonl";
  fbopt::write_jsonl(reports, path, false);
  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  REQUIRE(line == fbopt::to_jsonl(reports[0], false));
  in.close();
  std::remove(path.c_str());

  REQUIRE_THROWS_WITH(fbopt::write_text("x", "no_such_dir/out.txt"),
                      Catch::Matchers::ContainsSubstring("cannot open output file"));
}
