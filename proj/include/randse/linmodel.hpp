#pragma once

#include <Eigen/Dense>

#include "randse/dataset.hpp"

namespace randse {

struct OlsOptions {
  /// When set, s2 divides by n - 1 - d_w instead of n.
  bool dof_adjust_s2 = false;
};

/// OLS fit of y on (d, W). theta_hat(0) is the coefficient on d.
struct OlsFit {
  Eigen::VectorXd theta_hat;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd xtx_inv;
  double s2 = 0.0;
  double dbreve_ss = 0.0;  // squared norm of d residualized on W
  Eigen::Index n = 0;

  double beta_hat() const { return theta_hat(0); }
};

struct FirstStageFit {
  double rho_hat = 0.0;            // coefficient on the instrument
  Eigen::VectorXd alpha_hat;       // coefficients on W
  Eigen::VectorXd eta_residuals;
};

struct TslsFit {
  double beta_2sls = 0.0;
  double rho_hat = 0.0;
  double sigma2_v_hat = 0.0;  // sample variance of v, divisor n
  double s2 = 0.0;            // mean squared second-stage residual, divisor n
  Eigen::Index n = 0;
};

/// Least squares via column-pivoted QR of X = (d, W); xtx_inv is
/// reconstructed from the triangular factor. Throws RankDeficientError when
/// the smallest pivot falls at or below 1e-12 * trace(X'X).
OlsFit fit_ols(const Dataset& data, const OlsOptions& opts = {});

/// d residualized against W (annihilator applied to d). The returned vector
/// is orthogonal to every column of W; regressing y on it alone reproduces
/// the coefficient on d from the full fit.
Eigen::VectorXd residualize_fwl(const Dataset& data);

/// OLS of d on (v, W). Requires an instrument column.
FirstStageFit fit_first_stage(const Dataset& data);

/// Just-identified two-stage least squares of y on d instrumented by v,
/// controls W. Throws WeakInstrumentError when |rho_hat|*sd(v) <= 1e-8*sd(d).
TslsFit fit_2sls(const Dataset& data, const OlsOptions& opts = {});

}  // namespace randse
