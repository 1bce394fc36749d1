#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "randse/dataset.hpp"

namespace randse {

struct MartingaleStat {
  int lag = 0;
  double statistic = 0.0;
  double se = 0.0;
};

/// Report-only evidence on the design: conditions are surfaced, never
/// enforced, except for exact algebraic failures caught elsewhere.
struct DiagnosticsReport {
  double lambda_min_w = 0.0;  // smallest eigenvalue of n^{-1} W'W
  bool has_constant = false;
  double d_mean = 0.0;
  double d_variance = 0.0;
  double d_fourth_central = 0.0;
  std::vector<MartingaleStat> martingale_stats;
  std::vector<std::string> notes;
};

DiagnosticsReport check_assumptions(const Dataset& data);

/// Lagged products of centered-d-times-residual; each statistic should sit
/// within a few standard errors of zero when d is iid and independent of the
/// errors. Judgement is left to the caller.
std::vector<MartingaleStat> martingale_check(const Eigen::VectorXd& d,
                                             const Eigen::VectorXd& residuals, int max_lag);

/// Exact finite-n ratio d'Omega d / (Gamma(0) d'd) with Omega banded from the
/// supplied autocovariances gamma(0..H); O(n*H) via the band structure.
/// d is used as passed (no demeaning).
double lemma_ratio(const Eigen::VectorXd& d, const std::vector<double>& gamma);

/// Exact additive split of the score sum: M1 centers the per-unit loadings at
/// mu_A, M2 carries the common loading. M1 + M2 equals the direct score sum.
std::pair<double, double> score_decomposition(const std::vector<Eigen::VectorXd>& A,
                                              const std::vector<Eigen::VectorXd>& e,
                                              const Eigen::VectorXd& mu_A);

}  // namespace randse
