#include "randse/variance.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "randse/errors.hpp"
#include "randse/mathutil.hpp"

namespace randse {

const char* method_name(Method m) {
  switch (m) {
    case Method::Classic: return "classic";
    case Method::HC0: return "hc0";
    case Method::HC1: return "hc1";
    case Method::ClusterLZ: return "cluster";
    case Method::HacNW: return "hac";
    case Method::Tsls: return "tsls";
  }
  return "?";
}

std::optional<Method> parse_method(std::string_view name) {
  if (name == "classic") return Method::Classic;
  if (name == "hc0") return Method::HC0;
  if (name == "hc1") return Method::HC1;
  if (name == "cluster") return Method::ClusterLZ;
  if (name == "hac") return Method::HacNW;
  if (name == "tsls") return Method::Tsls;
  return std::nullopt;
}

namespace {

VarianceEstimate make_estimate(Method m, double value) {
  // value is renormalized to se^2 so the pair is exactly consistent.
  const double se = std::sqrt(value);
  return {m, se * se, se};
}

// Per-unit sandwich contributions u_i = (a' x_i) * e_i with a the first row
// of (X'X)^{-1}; every robust estimator here is a quadratic form in u.
Eigen::VectorXd score_influence(const OlsFit& fit, const Dataset& data) {
  if (data.n() != fit.n) throw DimensionMismatchError("fit and data disagree on n");
  const Eigen::VectorXd a = fit.xtx_inv.row(0);
  Eigen::VectorXd ax = data.d * a(0);
  ax.noalias() += data.w * a.tail(a.size() - 1);
  return ax.cwiseProduct(fit.residuals);
}

}  // namespace

VarianceEstimate var_classic(const OlsFit& fit) {
  return make_estimate(Method::Classic, fit.s2 / fit.dbreve_ss);
}

VarianceEstimate var_hc(const OlsFit& fit, const Dataset& data, Method variant) {
  if (variant != Method::HC0 && variant != Method::HC1) {
    throw Error("var_hc: variant must be HC0 or HC1");
  }
  const Eigen::VectorXd u = score_influence(fit, data);
  double value = u.squaredNorm();
  if (variant == Method::HC1) {
    const auto n = static_cast<double>(fit.n);
    value *= n / (n - 1.0 - static_cast<double>(data.w.cols()));
  }
  return make_estimate(variant, value);
}

VarianceEstimate var_cluster(const OlsFit& fit, const Dataset& data,
                             const std::vector<int>& cluster_ids, const ClusterOptions& opts) {
  if (static_cast<Eigen::Index>(cluster_ids.size()) != fit.n) {
    throw DimensionMismatchError("var_cluster: cluster labels must cover every row");
  }
  const int n_clusters = count_groups(cluster_ids);
  if (n_clusters < 2) {
    throw SingleClusterError("var_cluster: a single cluster collapses the meat matrix");
  }
  const Eigen::VectorXd u = score_influence(fit, data);
  Eigen::VectorXd cluster_sums = Eigen::VectorXd::Zero(n_clusters);
  for (Eigen::Index i = 0; i < fit.n; ++i) {
    cluster_sums(cluster_ids[static_cast<std::size_t>(i)]) += u(i);
  }
  double value = cluster_sums.squaredNorm();
  if (opts.small_sample) {
    const auto n = static_cast<double>(fit.n);
    const auto g = static_cast<double>(n_clusters);
    value *= g / (g - 1.0) * (n - 1.0) / (n - 1.0 - static_cast<double>(data.w.cols()));
  }
  return make_estimate(Method::ClusterLZ, value);
}

VarianceEstimate var_hac_nw(const OlsFit& fit, const Dataset& data, int bandwidth) {
  if (bandwidth < 0) throw Error("var_hac_nw: bandwidth must be nonnegative");
  const Eigen::VectorXd u = score_influence(fit, data);
  double value = u.squaredNorm();
  for (int h = 1; h <= bandwidth && h < fit.n; ++h) {
    const double weight = 1.0 - static_cast<double>(h) / (static_cast<double>(bandwidth) + 1.0);
    double lag_sum = 0.0;
    for (Eigen::Index i = 0; i + h < fit.n; ++i) lag_sum += u(i) * u(i + h);
    value += 2.0 * weight * lag_sum;
  }
  return make_estimate(Method::HacNW, value);
}

int default_nw_bandwidth(Eigen::Index n) {
  return static_cast<int>(
      std::floor(4.0 * std::pow(static_cast<double>(n) / 100.0, 2.0 / 9.0)));
}

VarianceEstimate var_2sls(const TslsFit& fit) {
  const double value =
      fit.s2 / (fit.rho_hat * fit.rho_hat * fit.sigma2_v_hat * static_cast<double>(fit.n));
  return make_estimate(Method::Tsls, value);
}

// --- oracles -----------------------------------------------------------

OracleVariance oracle_t1(double sigma2_eps, double sigma2_d) {
  if (!(sigma2_eps > 0.0) || !(sigma2_d > 0.0)) {
    throw NonpositiveVarianceError("oracle_t1: variances must be positive");
  }
  return {Theorem::T1_StrongExog, sigma2_eps / sigma2_d, 0.0, 0.0};
}

OracleVariance oracle_t2(const Eigen::VectorXd& mu_A, double var_Ae_avg, double longrun_mu_e,
                         double sigma2_d) {
  if (!(sigma2_d > 0.0)) throw NonpositiveVarianceError("oracle_t2: sigma2_d must be positive");
  if (var_Ae_avg < 0.0 || longrun_mu_e < 0.0) {
    throw NonpositiveVarianceError("oracle_t2: variance components must be nonnegative");
  }
  const double e2 = mu_A.isZero(0.0) ? 0.0 : longrun_mu_e;
  OracleVariance out;
  out.theorem = Theorem::T2_CondHetero;
  out.component_e1 = var_Ae_avg;
  out.component_e2 = e2;
  out.asy_var = (var_Ae_avg + e2) / (sigma2_d * sigma2_d);
  return out;
}

OracleVariance oracle_te(const dgp::ScenarioSpec& spec) {
  if (!spec.treatment.is_binary() || spec.treatment.level != dgp::AssignLevel::Unit) {
    throw UnsupportedSpecError("oracle_te: needs binary unit-level treatment");
  }
  const dgp::TruthRecord t = dgp::compute_truth(spec);
  const double p = t.mu_d;
  const double q = 1.0 - p;
  const double sigma2_0 = t.sigma2_eps - p * t.sigma2_tau;
  // n^{-1} sum E[(d_i - p)^2 eps_i^2] for the potential-outcomes error form,
  // with baseline noise independent of the effects.
  const double het_term = p * q * (sigma2_0 + q * t.sigma2_tau);
  const double first = het_term / (t.sigma2_d * t.sigma2_d);
  const double adjustment = t.heterogeneous ? t.te_adjustment : 0.0;
  OracleVariance out;
  out.theorem = Theorem::TE_PotentialOutcomes;
  out.component_e1 = first;
  out.component_e2 = adjustment;
  out.asy_var = first + adjustment;
  return out;
}

OracleVariance oracle_t3(const std::vector<Eigen::MatrixXd>& within_group_error_cov,
                         double sigma2_d) {
  if (within_group_error_cov.empty()) throw DegenerateSpecError("oracle_t3: no groups");
  double total = 0.0;
  double n = 0.0;
  for (const auto& cov : within_group_error_cov) {
    if (cov.rows() != cov.cols()) {
      throw DimensionMismatchError("oracle_t3: covariance blocks must be square");
    }
    total += cov.sum();
    n += static_cast<double>(cov.rows());
  }
  return oracle_t3_closed(total / n, sigma2_d);
}

OracleVariance oracle_t3_closed(double s2_eps, double sigma2_d) {
  if (!(sigma2_d > 0.0)) throw NonpositiveVarianceError("oracle_t3: sigma2_d must be positive");
  if (!(s2_eps > 0.0)) {
    throw DegenerateSpecError("oracle_t3: group-sum error variance must be positive");
  }
  return {Theorem::T3_GroupStrongExog, s2_eps / sigma2_d, 0.0, 0.0};
}

OracleVariance oracle_t4(const dgp::ScenarioSpec& spec) {
  if (spec.treatment.level != dgp::AssignLevel::Group || !spec.treatment.is_binary()) {
    throw UnsupportedSpecError("oracle_t4: needs binary group-level treatment");
  }
  const dgp::TruthRecord t = dgp::compute_truth(spec);
  OracleVariance out;
  out.theorem = Theorem::T4_GroupHetero;
  if (t.heterogeneous) {
    out.component_e1 = t.s2_e1;
    out.component_e2 = t.s2_e2;
  } else {
    const double p = t.mu_d;
    out.component_e1 = p * (1.0 - p) * t.s2_eps;
    out.component_e2 = 0.0;
  }
  out.asy_var = (out.component_e1 + out.component_e2) / (t.sigma2_d * t.sigma2_d);
  return out;
}

OracleVariance scenario_oracle(const dgp::TruthRecord& t) {
  if (t.has_iv) {
    if (!(t.rho != 0.0) || !(t.sigma2_v > 0.0)) {
      throw NonpositiveVarianceError("scenario_oracle: degenerate first stage");
    }
    return {Theorem::T1_StrongExog, t.sigma2_eps / (t.rho * t.rho * t.sigma2_v), 0.0, 0.0};
  }
  if (t.group_level) {
    if (t.heterogeneous) {
      OracleVariance out;
      out.theorem = Theorem::T4_GroupHetero;
      out.component_e1 = t.s2_e1;
      out.component_e2 = t.s2_e2;
      out.asy_var = (t.s2_e1 + t.s2_e2) / (t.sigma2_d * t.sigma2_d);
      return out;
    }
    return oracle_t3_closed(t.s2_eps, t.sigma2_d);
  }
  if (t.heterogeneous) {
    return oracle_t2(t.mu_A, t.sigma2_e1, t.sigma2_e2, t.sigma2_d);
  }
  return oracle_t1(t.sigma2_eps, t.sigma2_d);
}

// --- intervals ----------------------------------------------------------

Interval ci(double beta_hat, const VarianceEstimate& est, double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw InvalidLevelError("ci: level must lie strictly inside (0,1)");
  }
  const double z = normal_quantile(0.5 * (1.0 + level));
  return {beta_hat - z * est.se, beta_hat + z * est.se};
}

Interval ci_student_t(double beta_hat, const VarianceEstimate& est, double level, int dof) {
  if (!(level > 0.0 && level < 1.0)) {
    throw InvalidLevelError("ci: level must lie strictly inside (0,1)");
  }
  if (dof < 1) throw Error("ci_student_t: dof must be positive");
  // Cornish-Fisher expansion of the t quantile around the normal one.
  const double z = normal_quantile(0.5 * (1.0 + level));
  const double v = static_cast<double>(dof);
  const double z3 = z * z * z, z5 = z3 * z * z, z7 = z5 * z * z, z9 = z7 * z * z;
  double t = z + (z3 + z) / (4.0 * v) + (5.0 * z5 + 16.0 * z3 + 3.0 * z) / (96.0 * v * v) +
             (3.0 * z7 + 19.0 * z5 + 17.0 * z3 - 15.0 * z) / (384.0 * v * v * v) +
             (79.0 * z9 + 776.0 * z7 + 1482.0 * z5 - 1920.0 * z3 - 945.0 * z) /
                 (92160.0 * v * v * v * v);
  return {beta_hat - t * est.se, beta_hat + t * est.se};
}

}  // namespace randse
