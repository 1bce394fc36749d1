#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "randse/dgp.hpp"
#include "randse/method.hpp"
#include "randse/variance.hpp"

namespace randse::mc {

struct MethodOutcome {
  Method method = Method::Classic;
  double beta_hat = 0.0;  // point estimate this method's interval centers on
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  bool covered = false;
  bool rejected_at_5pct = false;
  bool degenerate = false;  // zero-variance standard error
};

struct ReplicationRecord {
  std::uint64_t rep_index = 0;
  double beta_hat = 0.0;  // primary estimator (2SLS when instrumented, else OLS)
  std::vector<MethodOutcome> methods;
  bool failed = false;
  bool degenerate = false;
  std::string error;
};

struct MethodSummary {
  Method method = Method::Classic;
  double mean_se = 0.0;
  double mean_var = 0.0;  // mean of se^2
  double coverage = 0.0;
  double rejection_rate = 0.0;
  double mc_se_of_coverage = 0.0;
  double variance_ratio = 0.0;  // mean_se^2 * n / oracle_asy_var
};

struct ScenarioResult {
  std::uint64_t requested = 0;  // R
  std::uint64_t included = 0;   // after exclusions
  std::uint64_t failed = 0;
  std::uint64_t degenerate = 0;
  Eigen::Index n = 0;
  double beta_mean = 0.0;
  double beta_sd = 0.0;
  std::vector<MethodSummary> methods;
  Theorem oracle_theorem = Theorem::T1_StrongExog;
  double oracle_asy_var = 0.0;
  double empirical_asy_var = 0.0;        // n * beta_sd^2
  double empirical_asy_var_mc_se = 0.0;  // fourth-moment formula
  double variance_ratio = 0.0;           // first method in the scenario's list
  std::uint64_t base_seed = 0;
  std::uint64_t spec_hash = 0;
};

/// One replication with its stream derived from (base_seed, rep_index);
/// identical inputs give an identical record regardless of scheduling.
ReplicationRecord run_replication(const dgp::ScenarioSpec& spec, std::uint64_t base_seed,
                                  std::uint64_t rep_index);

/// Runs R replications across `parallelism` threads (0 = default) and
/// aggregates. Output is a pure function of (spec, R, base_seed). Replications
/// that fail or produce a degenerate SE are excluded with a count; more than
/// 1% exclusions aborts the run.
ScenarioResult run_scenario(const dgp::ScenarioSpec& spec, std::uint64_t R,
                            std::uint64_t base_seed, int parallelism);

/// Fraction of usable records whose interval for `method` contains beta_true.
double coverage(const std::vector<ReplicationRecord>& records, double beta_true,
                Method method);

/// RANDSE_THREADS environment variable, else hardware concurrency.
int default_parallelism();

}  // namespace randse::mc
