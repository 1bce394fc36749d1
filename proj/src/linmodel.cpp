#include "randse/linmodel.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "randse/errors.hpp"

namespace randse {

namespace {

struct LsSolution {
  Eigen::VectorXd coef;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd xtx_inv;
};

// Column-pivoted QR solve with the shared rank gate: every pivot must exceed
// 1e-12 * trace(X'X), otherwise the design is treated as multicollinear.
LsSolution solve_ls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const char* what) {
  const Eigen::Index k = X.cols();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  const double tol = 1e-12 * X.squaredNorm();
  double min_pivot = std::numeric_limits<double>::infinity();
  const auto& R = qr.matrixR();
  for (Eigen::Index i = 0; i < k; ++i) min_pivot = std::min(min_pivot, std::abs(R(i, i)));
  if (!(min_pivot > tol)) {
    throw RankDeficientError(std::string(what) +
                             ": design matrix singular within tolerance (min pivot " +
                             std::to_string(min_pivot) + ")");
  }

  LsSolution out;
  out.coef = qr.solve(y);
  out.residuals = y - X * out.coef;

  Eigen::MatrixXd r_inv = R.topLeftCorner(k, k)
                              .template triangularView<Eigen::Upper>()
                              .solve(Eigen::MatrixXd::Identity(k, k));
  const Eigen::MatrixXd unpermuted = r_inv * r_inv.transpose();
  const auto& perm = qr.colsPermutation();
  out.xtx_inv = perm * unpermuted * perm.transpose();
  return out;
}

}  // namespace

OlsFit fit_ols(const Dataset& data, const OlsOptions& opts) {
  data.validate();
  const Eigen::Index n = data.n();
  const Eigen::Index dw = data.w.cols();

  Eigen::MatrixXd X(n, 1 + dw);
  X.col(0) = data.d;
  X.rightCols(dw) = data.w;

  LsSolution sol = solve_ls(X, data.y, "fit_ols");
  const Eigen::VectorXd dbreve = residualize_fwl(data);

  OlsFit fit;
  fit.theta_hat = std::move(sol.coef);
  fit.residuals = std::move(sol.residuals);
  fit.xtx_inv = std::move(sol.xtx_inv);
  fit.dbreve_ss = dbreve.squaredNorm();
  fit.n = n;
  const double denom = opts.dof_adjust_s2 ? static_cast<double>(n - 1 - dw)
                                          : static_cast<double>(n);
  fit.s2 = fit.residuals.squaredNorm() / denom;
  return fit;
}

Eigen::VectorXd residualize_fwl(const Dataset& data) {
  return solve_ls(data.w, data.d, "residualize_fwl").residuals;
}

FirstStageFit fit_first_stage(const Dataset& data) {
  if (!data.v) throw MissingInstrumentError("fit_first_stage: no instrument column");
  const Eigen::Index n = data.n();
  const Eigen::Index dw = data.w.cols();

  Eigen::MatrixXd Z(n, 1 + dw);
  Z.col(0) = *data.v;
  Z.rightCols(dw) = data.w;

  LsSolution sol = solve_ls(Z, data.d, "fit_first_stage");
  FirstStageFit fs;
  fs.rho_hat = sol.coef(0);
  fs.alpha_hat = sol.coef.tail(dw);
  fs.eta_residuals = std::move(sol.residuals);
  return fs;
}

TslsFit fit_2sls(const Dataset& data, const OlsOptions& opts) {
  if (!data.v) throw MissingInstrumentError("fit_2sls: no instrument column");
  data.validate();
  const Eigen::Index n = data.n();
  const Eigen::Index dw = data.w.cols();
  const Eigen::VectorXd& v = *data.v;

  const FirstStageFit fs = fit_first_stage(data);
  const double sd_v = std::sqrt((v.array() - v.mean()).square().sum() / static_cast<double>(n));
  const double sd_d =
      std::sqrt((data.d.array() - data.d.mean()).square().sum() / static_cast<double>(n));
  if (!(std::abs(fs.rho_hat) * sd_v > 1e-8 * sd_d)) {
    throw WeakInstrumentError("fit_2sls: first stage fails the relevance gate");
  }

  // With one instrument the estimator reduces to the ratio of cross products
  // against v residualized on W.
  Eigen::MatrixXd wmat = data.w;
  LsSolution vw = solve_ls(wmat, v, "fit_2sls");
  const Eigen::VectorXd& vbreve = vw.residuals;
  const double beta = vbreve.dot(data.y) / vbreve.dot(data.d);

  const Eigen::VectorXd partial = data.y - data.d * beta;
  LsSolution gw = solve_ls(wmat, partial, "fit_2sls");
  const Eigen::VectorXd resid = partial - wmat * gw.coef;

  TslsFit fit;
  fit.beta_2sls = beta;
  fit.rho_hat = fs.rho_hat;
  fit.sigma2_v_hat = (v.array() - v.mean()).square().sum() / static_cast<double>(n);
  fit.n = n;
  const double denom = opts.dof_adjust_s2 ? static_cast<double>(n - 1 - dw)
                                          : static_cast<double>(n);
  fit.s2 = resid.squaredNorm() / denom;
  return fit;
}

}  // namespace randse
