#include "randse/diagnostics.hpp"

#include <cmath>

#include "randse/errors.hpp"

namespace randse {

DiagnosticsReport check_assumptions(const Dataset& data) {
  const Eigen::Index n = data.n();
  DiagnosticsReport report;

  const Eigen::MatrixXd wtw = data.w.transpose() * data.w / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(wtw);
  report.lambda_min_w = eig.eigenvalues().minCoeff();
  if (report.lambda_min_w < 1e-10 * wtw.trace()) {
    report.notes.push_back("multicollinearity: smallest eigenvalue of W'W/n is ~0");
  }

  for (Eigen::Index j = 0; j < data.w.cols(); ++j) {
    const double c = data.w(0, j);
    if (c != 0.0 && (data.w.col(j).array() == c).all()) {
      report.has_constant = true;
      break;
    }
  }
  if (!report.has_constant) report.notes.push_back("no constant column among controls");

  report.d_mean = data.d.mean();
  const Eigen::ArrayXd centered = data.d.array() - report.d_mean;
  report.d_variance = centered.square().sum() / static_cast<double>(n);
  report.d_fourth_central = centered.pow(4).sum() / static_cast<double>(n);
  if (report.d_variance < 1e-12) {
    report.notes.push_back("treatment variance is numerically zero");
  }
  return report;
}

std::vector<MartingaleStat> martingale_check(const Eigen::VectorXd& d,
                                             const Eigen::VectorXd& residuals, int max_lag) {
  const Eigen::Index n = d.size();
  if (residuals.size() != n) {
    throw DimensionMismatchError("martingale_check: d and residuals lengths disagree");
  }
  if (max_lag < 1 || max_lag >= n / 2) {
    throw Error("martingale_check: need 1 <= max_lag < n/2");
  }
  const Eigen::VectorXd score = (d.array() - d.mean()).matrix().cwiseProduct(residuals);

  std::vector<MartingaleStat> stats;
  stats.reserve(static_cast<std::size_t>(max_lag));
  for (int h = 1; h <= max_lag; ++h) {
    const Eigen::Index m = n - h;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) sum += score(i) * score(i + h);
    const double stat = sum / static_cast<double>(n);
    const double mean_product = sum / static_cast<double>(m);
    double ss = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double dev = score(i) * score(i + h) - mean_product;
      ss += dev * dev;
    }
    const double sd = m > 1 ? std::sqrt(ss / static_cast<double>(m - 1)) : 0.0;
    stats.push_back({h, stat, sd / std::sqrt(static_cast<double>(m))});
  }
  return stats;
}

double lemma_ratio(const Eigen::VectorXd& d, const std::vector<double>& gamma) {
  if (gamma.empty() || !(gamma[0] > 0.0)) {
    throw InvalidGammaError("lemma_ratio: gamma(0) must be positive");
  }
  const Eigen::Index n = d.size();
  if (n < 1) throw Error("lemma_ratio: empty d");
  const auto horizon = static_cast<Eigen::Index>(gamma.size()) - 1;

  double quad = gamma[0] * d.squaredNorm();
  for (Eigen::Index h = 1; h <= std::min(horizon, n - 1); ++h) {
    double lag_sum = 0.0;
    for (Eigen::Index i = 0; i + h < n; ++i) lag_sum += d(i) * d(i + h);
    quad += 2.0 * gamma[static_cast<std::size_t>(h)] * lag_sum;
  }
  return quad / (gamma[0] * d.squaredNorm());
}

std::pair<double, double> score_decomposition(const std::vector<Eigen::VectorXd>& A,
                                              const std::vector<Eigen::VectorXd>& e,
                                              const Eigen::VectorXd& mu_A) {
  if (A.size() != e.size() || A.empty()) {
    throw DimensionMismatchError("score_decomposition: A and e must have equal nonzero length");
  }
  const double root_n = std::sqrt(static_cast<double>(A.size()));
  double m1 = 0.0;
  double m2 = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) {
    if (A[i].size() != mu_A.size() || e[i].size() != mu_A.size()) {
      throw DimensionMismatchError("score_decomposition: loading dimensions disagree");
    }
    m1 += (A[i] - mu_A).dot(e[i]);
    m2 += mu_A.dot(e[i]);
  }
  return {m1 / root_n, m2 / root_n};
}

}  // namespace randse
