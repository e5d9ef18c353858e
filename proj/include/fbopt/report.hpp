#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fbopt/detail/format.hpp"
#include "fbopt/oracles.hpp"
#include "fbopt/problems.hpp"

namespace fbopt {

enum class RunStatus { second_order_stationary, first_order_stationary, budget_exhausted, error };

inline const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::second_order_stationary: return "second_order_stationary";
    case RunStatus::first_order_stationary: return "first_order_stationary";
    case RunStatus::budget_exhausted: return "budget_exhausted";
    case RunStatus::error: return "error";
  }
  return "error";
}

struct TrajPoint {
  long long iter = 0;
  Vec x;
  double fbe = 0.0;
  double res_inf = 0.0;
};

// Per-iteration diagnostics kept in memory so decrease conditions can be
// re-verified from actual run data. Fields not meaningful for a given solver
// stay at their defaults.
struct IterRecord {
  long long iter = 0;
  double fbe_before = 0.0;
  double fbe_after = 0.0;
  double res_sq = 0.0;      // ||r||_2^2 at the iterate the step left from
  double res_inf = 0.0;
  double sigma = 0.0;       // decrease coefficient in force at this iteration
  double tau = 0.0;         // accepted curvilinear/backtracking parameter
  double curvature = 0.0;   // <B s, s> of the negative-curvature direction
  double ratio = 0.0;       // trust-region actual/model decrease
  double model_decrease = 0.0;
  double delta = 0.0;       // trust-region radius the step was solved under
  double gamma = 0.0;
  bool accepted = true;
};

struct RunReport {
  std::string solver;
  ProblemDesc problem;
  std::uint64_t seed = 0;
  RunStatus status = RunStatus::error;
  // The backward (proximal) point of the final state: always feasible, and
  // within gamma*||r|| of the final iterate itself.
  Vec final_point;
  double final_fbe = 0.0;
  double final_phi = 0.0;
  double residual_inf = 0.0;
  std::optional<double> lambda_min_estimate;
  std::optional<double> eig_residual;
  long long iterations = 0;
  double gamma_final = 0.0;
  double lipschitz_estimate = 0.0;
  CallCounters counters;
  double wall_time_ms = 0.0;
  std::string message;  // diagnostic text when status == error
  std::vector<TrajPoint> trajectory;
  std::vector<IterRecord> iter_log;
};

namespace detail {

inline void json_kv(std::string& out, const char* key, const std::string& raw,
                    bool quote) {
  out += '"';
  out += key;
  out += "\":";
  if (quote) out += '"';
  out += raw;
  if (quote) out += '"';
}

}  // namespace detail

// One self-contained JSON object per run, emitted as a single line. Key
// order is fixed and floats use 17 significant digits, so two identical runs
// serialize to identical bytes; wall_time_ms is the only field that varies
// between repeats, and canonical comparisons omit it.
inline std::string to_jsonl(const RunReport& r, bool include_wall_time = true,
                            bool include_point = true) {
  using detail::format_g17;
  std::string j = "{";
  detail::json_kv(j, "solver", r.solver, true);
  j += ",\"problem\":" + r.problem.to_json();
  j += ",\"seed\":" + std::to_string(r.seed);
  j += ",";
  detail::json_kv(j, "status", to_string(r.status), true);
  j += ",";
  detail::json_kv(j, "final_point_hash", detail::point_hash(r.final_point), true);
  if (include_point && r.final_point.size() <= 16) {
    j += ",\"final_point\":[";
    for (Eigen::Index i = 0; i < r.final_point.size(); ++i) {
      if (i) j += ',';
      j += format_g17(r.final_point[i]);
    }
    j += "]";
  }
  j += ",\"final_fbe\":" + format_g17(r.final_fbe);
  j += ",\"final_phi\":" + format_g17(r.final_phi);
  j += ",\"residual_inf\":" + format_g17(r.residual_inf);
  if (r.lambda_min_estimate)
    j += ",\"lambda_min_estimate\":" + format_g17(*r.lambda_min_estimate);
  if (r.eig_residual) j += ",\"eig_residual\":" + format_g17(*r.eig_residual);
  j += ",\"iterations\":" + std::to_string(r.iterations);
  j += ",\"gamma_final\":" + format_g17(r.gamma_final);
  j += ",\"lipschitz_estimate\":" + format_g17(r.lipschitz_estimate);
  j += ",\"counters\":{";
  j += "\"eval_f\":" + std::to_string(r.counters.eval_f);
  j += ",\"eval_g\":" + std::to_string(r.counters.eval_g);
  j += ",\"grad_f\":" + std::to_string(r.counters.grad_f);
  j += ",\"prox_g\":" + std::to_string(r.counters.prox_g);
  j += ",\"jprox_g\":" + std::to_string(r.counters.jprox_g);
  j += ",\"hvp_f\":" + std::to_string(r.counters.hvp_f);
  j += ",\"mvp\":" + std::to_string(r.counters.mvp);
  j += "}";
  if (include_wall_time) j += ",\"wall_time_ms\":" + format_g17(r.wall_time_ms);
  if (!r.message.empty()) {
    std::string esc;
    for (char c : r.message) {
      if (c == '"' || c == '\\') esc += '\\';
      if (c == '\n') {
        esc += "\\n";
        continue;
      }
      esc += c;
    }
    j += ",";
    detail::json_kv(j, "message", esc, true);
  }
  j += "}";
  return j;
}

// Trajectory CSV: iteration, coordinates, envelope value, residual norm.
inline void write_trajectory_csv(std::ostream& os, const RunReport& r) {
  const Eigen::Index dim = r.final_point.size();
  os << "iter";
  for (Eigen::Index i = 0; i < dim; ++i) os << ",x" << (i + 1);
  os << ",fbe,res_inf\n";
  for (const auto& t : r.trajectory) {
    os << t.iter;
    for (Eigen::Index i = 0; i < dim; ++i)
      os << ',' << detail::format_g17(t.x[i]);
    os << ',' << detail::format_g17(t.fbe) << ','
       << detail::format_g17(t.res_inf) << '\n';
  }
}

}  // namespace fbopt
