#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fbopt/fbopt.hpp"

namespace {

using fbopt::RunReport;
using fbopt::RunStatus;
using fbopt::Vec;

RunStatus status_from_string(const std::string& s) {
  if (s == "second_order_stationary") return RunStatus::second_order_stationary;
  if (s == "first_order_stationary") return RunStatus::first_order_stationary;
  if (s == "budget_exhausted") return RunStatus::budget_exhausted;
  return RunStatus::error;
}

// Minimal read-back of the fields the aggregator uses.
RunReport parse_report_line(const std::string& line) {
  auto j = nlohmann::json::parse(line);
  RunReport r;
  r.solver = j.value("solver", std::string{});
  if (j.contains("problem")) {
    const auto& jp = j["problem"];
    r.problem.name = jp.value("name", std::string{});
    r.problem.variant = jp.value("variant", std::string{});
    r.problem.n = jp.value("n", 0);
    r.problem.m = jp.value("m", 0);
    r.problem.kappa = jp.value("kappa", 0.0);
    r.problem.density = jp.value("density", 0.0);
    r.problem.seed = jp.value("seed", std::uint64_t{0});
  }
  r.seed = j.value("seed", std::uint64_t{0});
  r.status = status_from_string(j.value("status", std::string{"error"}));
  r.final_fbe = j.value("final_fbe", 0.0);
  r.final_phi = j.value("final_phi", 0.0);
  r.residual_inf = j.value("residual_inf", 0.0);
  if (j.contains("lambda_min_estimate"))
    r.lambda_min_estimate = j["lambda_min_estimate"].get<double>();
  r.iterations = j.value("iterations", static_cast<long long>(0));
  r.gamma_final = j.value("gamma_final", 0.0);
  r.lipschitz_estimate = j.value("lipschitz_estimate", 0.0);
  if (j.contains("counters")) {
    const auto& jc = j["counters"];
    auto get = [&](const char* key) {
      return jc.value(key, static_cast<long long>(0));
    };
    r.counters.eval_f = get("eval_f");
    r.counters.eval_g = get("eval_g");
    r.counters.grad_f = get("grad_f");
    r.counters.prox_g = get("prox_g");
    r.counters.jprox_g = get("jprox_g");
    r.counters.hvp_f = get("hvp_f");
    r.counters.mvp = get("mvp");
  }
  r.message = j.value("message", std::string{});
  return r;
}

RunReport run_toy(const fbopt::ProblemInstance& problem, const std::string& solver,
                  std::uint64_t seed, std::optional<double> gamma,
                  std::optional<long long> max_iter, std::optional<Vec> x0) {
  if (solver == "pgm" || solver == "panoc") {
    fbopt::BaselineConfig config;
    config.gamma0 = gamma;
    if (max_iter) config.max_iter = *max_iter;
    config.store_trajectory = true;
    config.store_iter_log = true;
    return solver == "pgm" ? fbopt::pgm_solve(problem, config, seed, std::move(x0))
                           : fbopt::panoc_solve(problem, config, seed, std::move(x0));
  }
  if (solver == "ntra") {
    fbopt::NtraConfig config;
    config.gamma0 = gamma;
    if (max_iter) config.max_iter = *max_iter;
    config.store_trajectory = true;
    config.store_iter_log = true;
    return fbopt::ntra_solve(problem, config, seed, std::move(x0));
  }
  fbopt::PgclConfig config;
  config.gamma0 = gamma;
  if (max_iter) config.max_iter = *max_iter;
  config.store_trajectory = true;
  config.store_iter_log = true;
  return fbopt::pgcl_solve(problem, config, seed, std::move(x0));
}

std::string point_to_text(const Vec& x) {
  std::string out = "(";
  char buf[40];
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (i) out += ", ";
    std::snprintf(buf, sizeof buf, "%.12g", x[i]);
    out += buf;
  }
  return out + ")";
}

void print_report_summary(const RunReport& r) {
  std::cout << "solver=" << r.solver << " status=" << fbopt::to_string(r.status)
            << " iterations=" << r.iterations << "\n";
  if (r.final_point.size() <= 16)
    std::cout << "final point " << point_to_text(r.final_point) << "\n";
  std::cout << "phi=" << fbopt::detail::format_g17(r.final_phi)
            << " fbe=" << fbopt::detail::format_g17(r.final_fbe)
            << " residual_inf=" << fbopt::detail::format_g17(r.residual_inf);
  if (r.lambda_min_estimate)
    std::cout << " lambda_min=" << fbopt::detail::format_g17(*r.lambda_min_estimate);
  std::cout << "\n";
  if (!r.message.empty()) std::cout << "message: " << r.message << "\n";
}

int emit_sweep(const std::vector<RunReport>& reports, std::optional<double> phi_star,
               const std::string& out_base) {
  fbopt::Aggregate agg = fbopt::aggregate(reports, phi_star);
  fbopt::write_jsonl(reports, out_base + ".jsonl");
  fbopt::write_text(agg.to_csv(), out_base + "_aggregate.csv");
  fbopt::write_text(agg.to_json(), out_base + "_aggregate.json");
  std::cout << agg.to_csv();
  std::cout << "wrote " << out_base << ".jsonl, " << out_base << "_aggregate.csv, "
            << out_base << "_aggregate.json\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Matrix-free proximal-gradient solvers with second-order certificates"};
  app.require_subcommand(1);
  const std::vector<std::string> solver_names = {"pgm", "panoc", "ntra", "pgcl"};

  // toy
  auto* toy = app.add_subcommand("toy", "Run one solver on a 2-d benchmark and dump its path");
  std::string toy_variant = "quadratic_box";
  std::string toy_solver = "ntra";
  std::vector<double> toy_x0;
  double toy_gamma = 0.0;
  std::uint64_t toy_seed = 3;
  long long toy_max_iter = 0;
  std::string toy_out;
  toy->add_option("--variant", toy_variant, "problem variant")
      ->check(CLI::IsMember({"quadratic_box", "l1_box"}));
  toy->add_option("--solver", toy_solver, "solver to run")
      ->check(CLI::IsMember(solver_names));
  toy->add_option("--x0", toy_x0, "start point, e.g. 0.1,0")->delimiter(',');
  auto* toy_gamma_opt = toy->add_option("--gamma", toy_gamma, "fixed initial stepsize");
  toy->add_option("--seed", toy_seed, "run seed (used when --x0 is absent)");
  toy->add_option("--max-iter", toy_max_iter, "iteration budget override")
      ->check(CLI::PositiveNumber);
  toy->add_option("--out", toy_out, "output base path (default toy_<variant>_<solver>)");

  // sweeps
  auto* spca = app.add_subcommand("sparse-pca", "Sweep solvers over sparse PCA instances");
  int spca_n = 200;
  double spca_kappa = 1e-2, spca_density = 0.1;
  std::uint64_t spca_seeds = 20;
  std::vector<std::string> spca_solvers = solver_names;
  double spca_gamma = 0.0;
  int spca_threads = 0;
  std::string spca_out = "sparse_pca";
  spca->add_option("--n", spca_n, "dimension")->check(CLI::PositiveNumber);
  spca->add_option("--kappa", spca_kappa, "l1 weight");
  spca->add_option("--density", spca_density, "nonzero fraction of the data matrix");
  spca->add_option("--seeds", spca_seeds, "run seeds 1..N")->check(CLI::PositiveNumber);
  spca->add_option("--solvers", spca_solvers, "comma-separated solver list")
      ->delimiter(',')
      ->check(CLI::IsMember(solver_names));
  auto* spca_gamma_opt = spca->add_option("--gamma", spca_gamma, "fixed initial stepsize");
  spca->add_option("--threads", spca_threads, "worker threads (default: FBOPT_THREADS)");
  spca->add_option("--out", spca_out, "output base path");

  auto* phr = app.add_subcommand("phase-retrieval",
                                 "Sweep solvers over phase retrieval instances");
  int phr_n = 100, phr_m = 3000;
  std::uint64_t phr_seeds = 20;
  std::vector<std::string> phr_solvers = solver_names;
  double phr_sbar = 1.0, phr_gamma = 0.0;
  int phr_threads = 0;
  std::string phr_out = "phase_retrieval";
  phr->add_option("--n", phr_n, "signal dimension")->check(CLI::PositiveNumber);
  phr->add_option("--m", phr_m, "measurement count")->check(CLI::PositiveNumber);
  phr->add_option("--seeds", phr_seeds, "run seeds 1..N")->check(CLI::PositiveNumber);
  phr->add_option("--solvers", phr_solvers, "comma-separated solver list")
      ->delimiter(',')
      ->check(CLI::IsMember(solver_names));
  phr->add_option("--sbar", phr_sbar, "curvature direction scale");
  auto* phr_gamma_opt = phr->add_option("--gamma", phr_gamma, "fixed initial stepsize");
  phr->add_option("--threads", phr_threads, "worker threads (default: FBOPT_THREADS)");
  phr->add_option("--out", phr_out, "output base path");

  auto* check = app.add_subcommand("check", "Run the numerical invariant suite");

  auto* agg_cmd = app.add_subcommand("aggregate", "Summarize a runs JSONL file");
  std::string agg_in, agg_out;
  double agg_phi_star = 0.0;
  agg_cmd->add_option("--in", agg_in, "runs JSONL file")
      ->required()
      ->check(CLI::ExistingFile);
  agg_cmd->add_option("--out", agg_out, "output base path (default: stdout only)");
  auto* agg_phi_opt = agg_cmd->add_option(
      "--phi-star", agg_phi_star,
      "reference optimal value (default: 0 for phase retrieval runs)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (toy->parsed()) {
      fbopt::ToyVariant variant = toy_variant == "l1_box" ? fbopt::ToyVariant::l1_box
                                                          : fbopt::ToyVariant::quadratic_box;
      fbopt::ProblemInstance problem = fbopt::toy_box(variant);
      std::optional<Vec> x0;
      if (!toy_x0.empty()) {
        if (toy_x0.size() != 2) {
          std::cerr << "--x0 needs exactly two coordinates\n";
          return 2;
        }
        Vec v(2);
        v << toy_x0[0], toy_x0[1];
        x0 = v;
      }
      std::optional<double> gamma;
      if (toy_gamma_opt->count()) gamma = toy_gamma;
      std::optional<long long> max_iter;
      if (toy_max_iter > 0) max_iter = toy_max_iter;
      RunReport report = run_toy(problem, toy_solver, toy_seed, gamma, max_iter, x0);
      print_report_summary(report);
      std::string base =
          toy_out.empty() ? "toy_" + toy_variant + "_" + toy_solver : toy_out;
      fbopt::write_jsonl({report}, base + ".jsonl");
      {
        std::ofstream traj(base + "_traj.csv");
        if (!traj) throw std::runtime_error("cannot open output file: " + base + "_traj.csv");
        fbopt::write_trajectory_csv(traj, report);
      }
      std::cout << "wrote " << base << ".jsonl, " << base << "_traj.csv\n";
      return 0;
    }

    if (spca->parsed()) {
      fbopt::SweepOptions options;
      options.solvers = spca_solvers;
      options.seed_begin = 1;
      options.seed_count = spca_seeds;
      if (spca_gamma_opt->count()) options.gamma0 = spca_gamma;
      options.threads = spca_threads;
      auto factory = [&](std::uint64_t seed) {
        return fbopt::sparse_pca(spca_n, spca_kappa, spca_density, seed);
      };
      auto reports = fbopt::run_sweep(factory, options);
      return emit_sweep(reports, std::nullopt, spca_out);
    }

    if (phr->parsed()) {
      fbopt::SweepOptions options;
      options.solvers = phr_solvers;
      options.seed_begin = 1;
      options.seed_count = phr_seeds;
      options.sbar = phr_sbar;
      if (phr_gamma_opt->count()) options.gamma0 = phr_gamma;
      options.threads = phr_threads;
      auto factory = [&](std::uint64_t seed) {
        return fbopt::phase_retrieval(phr_n, phr_m, seed);
      };
      auto reports = fbopt::run_sweep(factory, options);
      return emit_sweep(reports, 0.0, phr_out);
    }

    if (check->parsed()) {
      fbopt::CheckSuite suite = fbopt::run_checks(&std::cout);
      std::cout << suite.results.size() << " checks, " << suite.failures()
                << " failures\n";
      return suite.all_passed() ? 0 : 1;
    }

    if (agg_cmd->parsed()) {
      std::ifstream in(agg_in);
      std::vector<RunReport> reports;
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        reports.push_back(parse_report_line(line));
      }
      if (reports.empty()) {
        std::cerr << "no reports in " << agg_in << "\n";
        return 2;
      }
      std::optional<double> phi_star;
      if (agg_phi_opt->count())
        phi_star = agg_phi_star;
      else if (reports.front().problem.name == "phase_retrieval")
        phi_star = 0.0;
      fbopt::Aggregate agg = fbopt::aggregate(reports, phi_star);
      std::cout << agg.to_csv();
      if (!agg_out.empty()) {
        fbopt::write_text(agg.to_csv(), agg_out + "_aggregate.csv");
        fbopt::write_text(agg.to_json(), agg_out + "_aggregate.json");
        std::cout << "wrote " << agg_out << "_aggregate.csv, " << agg_out
                  << "_aggregate.json\n";
      }
      return 0;
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }
  return 0;
}
