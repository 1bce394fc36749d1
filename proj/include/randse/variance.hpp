#pragma once

#include <Eigen/Dense>
#include <vector>

#include "randse/dataset.hpp"
#include "randse/dgp.hpp"
#include "randse/linmodel.hpp"
#include "randse/method.hpp"

namespace randse {

/// One standard-error method's output for the coefficient on d.
/// `value` is the finite-sample Var(beta_hat); multiply by n for the
/// asymptotic scale.
struct VarianceEstimate {
  Method method = Method::Classic;
  double value = 0.0;
  double se = 0.0;
};

enum class Theorem {
  T1_StrongExog,
  T2_CondHetero,
  T3_GroupStrongExog,
  T4_GroupHetero,
  TE_PotentialOutcomes,
};

/// Theorem-level asymptotic variance of sqrt(n)*(beta_hat - beta).
struct OracleVariance {
  Theorem theorem = Theorem::T1_StrongExog;
  double asy_var = 0.0;
  double component_e1 = 0.0;  // centered-score part, when a decomposition exists
  double component_e2 = 0.0;  // long-run part
};

/// s^2 / (dbreve' dbreve), identically s^2 * [xtx_inv]_00.
VarianceEstimate var_classic(const OlsFit& fit);

/// Heteroscedasticity-robust sandwich, element [0][0]. HC1 rescales HC0 by
/// n / (n - 1 - d_w).
VarianceEstimate var_hc(const OlsFit& fit, const Dataset& data, Method variant);

struct ClusterOptions {
  /// G/(G-1) * (n-1)/(n-1-d_w) small-sample factor; off by default.
  bool small_sample = false;
};

/// Cluster-robust sandwich with scores summed within clusters. Requires
/// contiguous labels 0..G-1 with G >= 2.
VarianceEstimate var_cluster(const OlsFit& fit, const Dataset& data,
                             const std::vector<int>& cluster_ids,
                             const ClusterOptions& opts = {});

/// Long-run sandwich with Bartlett-weighted lag covariances of the score;
/// bandwidth 0 reduces exactly to HC0. Rows must be in temporal order.
VarianceEstimate var_hac_nw(const OlsFit& fit, const Dataset& data, int bandwidth);

/// Conventional bandwidth floor(4 * (n/100)^(2/9)).
int default_nw_bandwidth(Eigen::Index n);

/// s^2 / (rho_hat^2 * sigma2_v_hat * n).
VarianceEstimate var_2sls(const TslsFit& fit);

// --- oracles -----------------------------------------------------------

OracleVariance oracle_t1(double sigma2_eps, double sigma2_d);

/// (var_Ae_avg + longrun_mu_e) / sigma2_d^2; the long-run term is dropped
/// when mu_A is exactly zero.
OracleVariance oracle_t2(const Eigen::VectorXd& mu_A, double var_Ae_avg,
                         double longrun_mu_e, double sigma2_d);

/// Potential-outcomes variance: heteroscedastic first term plus the effect
/// correlation adjustment. Requires binary unit-level treatment.
OracleVariance oracle_te(const dgp::ScenarioSpec& spec);

/// Group-sum error variance over sigma2_d, from per-group covariance blocks.
OracleVariance oracle_t3(const std::vector<Eigen::MatrixXd>& within_group_error_cov,
                         double sigma2_d);

/// Same, with the group-sum variance already aggregated.
OracleVariance oracle_t3_closed(double s2_eps, double sigma2_d);

/// Group-level conditional-heteroscedasticity variance. Requires group-level
/// assignment; reduces to oracle_t2 with singleton groups and to oracle_t3
/// under constant effects.
OracleVariance oracle_t4(const dgp::ScenarioSpec& spec);

/// Theorem-appropriate oracle for a scenario's closed-form truth.
OracleVariance scenario_oracle(const dgp::TruthRecord& truth);

// --- intervals ----------------------------------------------------------

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Normal-quantile confidence interval beta_hat +/- z * se.
Interval ci(double beta_hat, const VarianceEstimate& est, double level);

/// Same with Student-t quantiles (dof degrees of freedom), for the CLI option.
Interval ci_student_t(double beta_hat, const VarianceEstimate& est, double level, int dof);

}  // namespace randse
