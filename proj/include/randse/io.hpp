#pragma once

#include <string>
#include <vector>

#include "randse/dgp.hpp"
#include "randse/diagnostics.hpp"
#include "randse/montecarlo.hpp"

namespace randse::io {

struct EstimateRow {
  std::string method;
  double beta_hat = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

/// Full-precision value rendering used in every machine output.
std::string format_value(double x);

std::string scenario_result_csv(const mc::ScenarioResult& result);
std::string scenario_result_json(const mc::ScenarioResult& result,
                                 const dgp::ScenarioSpec& spec);
std::string replications_csv(const std::vector<mc::ReplicationRecord>& records);

std::string estimates_csv(const std::vector<EstimateRow>& rows);
std::string estimates_json(const std::vector<EstimateRow>& rows, Eigen::Index n);

std::string diagnostics_json(const DiagnosticsReport& report);

/// Aligned text table for terminal output.
std::string render_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows);

void write_file(const std::string& path, const std::string& content);

}  // namespace randse::io
