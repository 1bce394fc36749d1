#include "randse/montecarlo.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "randse/config.hpp"
#include "randse/errors.hpp"
#include "randse/linmodel.hpp"
#include "randse/rng.hpp"

namespace randse::mc {

namespace {

constexpr double kLevel = 0.95;

MethodOutcome outcome_for(Method method, double beta, const VarianceEstimate& est,
                          double beta_true) {
  MethodOutcome out;
  out.method = method;
  out.beta_hat = beta;
  out.se = est.se;
  const Interval interval = ci(beta, est, kLevel);
  out.ci_lo = interval.lo;
  out.ci_hi = interval.hi;
  out.covered = interval.lo <= beta_true && beta_true <= interval.hi;
  out.rejected_at_5pct = !out.covered;
  // Zero-variance SEs up to factorization noise make the interval meaningless.
  out.degenerate = est.se <= 1e-14 * (1.0 + std::abs(beta));
  return out;
}

}  // namespace

ReplicationRecord run_replication(const dgp::ScenarioSpec& spec, std::uint64_t base_seed,
                                  std::uint64_t rep_index) {
  ReplicationRecord record;
  record.rep_index = rep_index;

  const std::uint64_t rep_seed = derive_stream_seed(base_seed, rep_index, 0);
  const dgp::AssembledData assembled = dgp::assemble(spec, rep_seed);
  const Dataset& data = assembled.data;
  const double beta_true = assembled.truth.beta_true;

  bool need_ols = false;
  bool need_tsls = false;
  for (Method m : spec.methods) (m == Method::Tsls ? need_tsls : need_ols) = true;

  OlsFit ols;
  if (need_ols) ols = fit_ols(data);
  TslsFit tsls;
  if (need_tsls) tsls = fit_2sls(data);

  record.beta_hat = spec.iv && need_tsls ? tsls.beta_2sls
                    : need_ols           ? ols.beta_hat()
                                         : tsls.beta_2sls;

  std::optional<std::vector<int>> lz_clusters;
  for (Method m : spec.methods) {
    switch (m) {
      case Method::Classic:
        record.methods.push_back(
            outcome_for(m, ols.beta_hat(), var_classic(ols), beta_true));
        break;
      case Method::HC0:
      case Method::HC1:
        record.methods.push_back(
            outcome_for(m, ols.beta_hat(), var_hc(ols, data, m), beta_true));
        break;
      case Method::ClusterLZ: {
        if (!lz_clusters) lz_clusters = dgp::clusters_for_lz(spec);
        record.methods.push_back(outcome_for(
            m, ols.beta_hat(), var_cluster(ols, data, *lz_clusters), beta_true));
        break;
      }
      case Method::HacNW:
        record.methods.push_back(outcome_for(
            m, ols.beta_hat(), var_hac_nw(ols, data, default_nw_bandwidth(data.n())),
            beta_true));
        break;
      case Method::Tsls:
        record.methods.push_back(
            outcome_for(m, tsls.beta_2sls, var_2sls(tsls), beta_true));
        break;
    }
    if (record.methods.back().degenerate) record.degenerate = true;
  }
  return record;
}

double coverage(const std::vector<ReplicationRecord>& records, double beta_true,
                Method method) {
  std::uint64_t hits = 0;
  std::uint64_t total = 0;
  for (const auto& record : records) {
    if (record.failed || record.degenerate) continue;
    for (const auto& outcome : record.methods) {
      if (outcome.method != method) continue;
      ++total;
      if (outcome.ci_lo <= beta_true && beta_true <= outcome.ci_hi) ++hits;
    }
  }
  if (total == 0) throw EmptyRecordsError("coverage: no usable records for the method");
  return static_cast<double>(hits) / static_cast<double>(total);
}

int default_parallelism() {
  if (const char* env = std::getenv("RANDSE_THREADS")) {
    const int parsed = std::atoi(env);
    if (parsed >= 1) return parsed;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

ScenarioResult run_scenario(const dgp::ScenarioSpec& spec, std::uint64_t R,
                            std::uint64_t base_seed, int parallelism) {
  if (R < 1) throw Error("run_scenario: need R >= 1");
  spec.validate();
  if (parallelism <= 0) parallelism = default_parallelism();
  const auto thread_count =
      static_cast<std::uint64_t>(parallelism) < R ? static_cast<std::uint64_t>(parallelism) : R;

  std::vector<ReplicationRecord> records(R);
  std::atomic<std::uint64_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::uint64_t i = next.fetch_add(1);
      if (i >= R) break;
      try {
        records[i] = run_replication(spec, base_seed, i);
      } catch (const std::exception& ex) {
        records[i].rep_index = i;
        records[i].failed = true;
        records[i].error = ex.what();
      }
    }
  };
  if (thread_count <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(thread_count);
    for (std::uint64_t t = 0; t < thread_count; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  ScenarioResult result;
  result.requested = R;
  result.n = spec.n;
  result.base_seed = base_seed;
  result.spec_hash = config::scenario_hash(spec);

  const dgp::TruthRecord truth = dgp::compute_truth(spec);
  const OracleVariance oracle = scenario_oracle(truth);
  result.oracle_theorem = oracle.theorem;
  result.oracle_asy_var = oracle.asy_var;

  for (const auto& record : records) {
    if (record.failed) {
      ++result.failed;
    } else if (record.degenerate) {
      ++result.degenerate;
    }
  }
  result.included = R - result.failed - result.degenerate;
  if (result.included == 0) {
    throw AllReplicationsFailedError("run_scenario: every replication was excluded");
  }
  const double excluded_frac =
      static_cast<double>(result.failed + result.degenerate) / static_cast<double>(R);
  if (excluded_frac > 0.01) {
    throw ExcessiveFailuresError(
        "run_scenario: more than 1% of replications were excluded (" +
        std::to_string(result.failed + result.degenerate) + " of " + std::to_string(R) + ")");
  }

  const auto m = static_cast<double>(result.included);
  double beta_sum = 0.0;
  for (const auto& record : records) {
    if (record.failed || record.degenerate) continue;
    beta_sum += record.beta_hat;
  }
  result.beta_mean = beta_sum / m;
  double ss2 = 0.0;
  double ss4 = 0.0;
  for (const auto& record : records) {
    if (record.failed || record.degenerate) continue;
    const double dev = record.beta_hat - result.beta_mean;
    ss2 += dev * dev;
    ss4 += dev * dev * dev * dev;
  }
  const double var_beta = m > 1 ? ss2 / (m - 1.0) : 0.0;
  result.beta_sd = std::sqrt(var_beta);
  result.empirical_asy_var = static_cast<double>(spec.n) * var_beta;
  // Sampling noise of a variance estimate from the fourth central moment.
  const double m4 = ss4 / m;
  const double var_of_var =
      m > 3 ? (m4 - var_beta * var_beta * (m - 3.0) / (m - 1.0)) / m : 0.0;
  result.empirical_asy_var_mc_se =
      static_cast<double>(spec.n) * std::sqrt(std::max(0.0, var_of_var));

  for (Method method : spec.methods) {
    MethodSummary summary;
    summary.method = method;
    double se_sum = 0.0;
    double var_sum = 0.0;
    std::uint64_t hits = 0;
    std::uint64_t rejects = 0;
    for (const auto& record : records) {
      if (record.failed || record.degenerate) continue;
      for (const auto& outcome : record.methods) {
        if (outcome.method != method) continue;
        se_sum += outcome.se;
        var_sum += outcome.se * outcome.se;
        hits += outcome.covered ? 1 : 0;
        rejects += outcome.rejected_at_5pct ? 1 : 0;
      }
    }
    summary.mean_se = se_sum / m;
    summary.mean_var = var_sum / m;
    summary.coverage = static_cast<double>(hits) / m;
    summary.rejection_rate = static_cast<double>(rejects) / m;
    summary.mc_se_of_coverage = std::sqrt(summary.coverage * (1.0 - summary.coverage) / m);
    summary.variance_ratio =
        summary.mean_se * summary.mean_se * static_cast<double>(spec.n) / oracle.asy_var;
    result.methods.push_back(summary);
  }
  result.variance_ratio = result.methods.front().variance_ratio;
  return result;
}

}  // namespace randse::mc
