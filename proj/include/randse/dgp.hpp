#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "randse/dataset.hpp"
#include "randse/method.hpp"
#include "randse/rng.hpp"

namespace randse::dgp {

// ---------------------------------------------------------------------------
// Error processes
// ---------------------------------------------------------------------------

struct IID {
  double sigma = 1.0;
};

/// Stationary AR(1): each draw starts from the marginal distribution.
struct AR1 {
  double rho = 0.0;
  double sigma = 1.0;
};

/// Moving average over standard-normal innovations; implicit lag-0 weight 1.
struct MAq {
  std::vector<double> coefficients;
};

/// One shared normal per consecutive block of `cluster_size` units plus an
/// idiosyncratic normal per unit. The last block may be partial.
struct ClusterRE {
  double sigma_between = 0.0;
  double sigma_within = 1.0;
  int cluster_size = 1;
};

/// e_i = u_i + weight * sum over neighbors of u_j, with iid standard-normal u
/// and undirected edges.
struct NetworkMA {
  std::vector<std::pair<int, int>> edges;
  double weight = 0.0;
};

struct ErrorProcessSpec {
  std::variant<IID, AR1, MAq, ClusterRE, NetworkMA> process;

  void validate() const;  // throws InvalidSpecError

  /// n^{-1} sum of Var(e_i).
  double avg_variance(Eigen::Index n) const;

  /// Cov(e_i, e_j); exact for every variant.
  double cov(Eigen::Index i, Eigen::Index j) const;

  /// Sum of Cov(e_i, e_j) over all pairs i,j in [lo, hi).
  double block_sum_variance(Eigen::Index lo, Eigen::Index hi) const;

  /// E[(n^{-1/2} sum e_i)^2] = n^{-1} * sum of all pairwise covariances.
  double longrun_mean_square(Eigen::Index n) const;
};

Eigen::VectorXd gen_errors(const ErrorProcessSpec& spec, Eigen::Index n, Stream& rng);

// ---------------------------------------------------------------------------
// Treatment assignment
// ---------------------------------------------------------------------------

enum class AssignLevel { Unit, Group };

struct Bernoulli {
  double p = 0.5;
};
struct NormalDist {
  double mu = 0.0;
  double sigma = 1.0;
};
struct Discrete {
  std::vector<double> values;
  std::vector<double> probs;
};

struct TreatmentSpec {
  AssignLevel level = AssignLevel::Unit;
  std::variant<Bernoulli, NormalDist, Discrete> dist;

  void validate() const;  // rejects degenerate (zero-variance) distributions
  double mean() const;
  double variance() const;
  bool is_binary() const;  // support contained in {0,1}
  double draw(Stream& rng) const;
};

/// Unit level: n iid draws. Group level: one draw per group, replicated
/// across that group's units (requires group_sizes).
Eigen::VectorXd gen_treatment(const TreatmentSpec& spec, Eigen::Index n,
                              const std::optional<std::vector<int>>& group_sizes,
                              Stream& rng);

// ---------------------------------------------------------------------------
// Treatment effects
// ---------------------------------------------------------------------------

struct ConstantEffect {
  double tau = 0.0;
};
struct HeterogeneousIID {
  double mean_tau = 0.0;
  double var_tau = 0.0;
};
/// tau_i = mean + b_c(i) + u_i over consecutive blocks of `cluster_size`.
struct HeterogeneousClustered {
  double mean_tau = 0.0;
  double var_between = 0.0;
  double var_within = 0.0;
  int cluster_size = 1;
};

struct EffectSpec {
  std::variant<ConstantEffect, HeterogeneousIID, HeterogeneousClustered> effect;

  void validate() const;
  double mean() const;
  double variance() const;          // Var(tau_i)
  bool heterogeneous() const;       // variance > 0
  int cluster_size() const;         // 1 unless clustered

  /// Covariance structure of tau as an error process (for closed-form truth).
  ErrorProcessSpec as_error_process() const;
};

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

struct IvSpec {
  double rho = 0.0;
  ErrorProcessSpec eta;  // first-stage error process
};

/// Complete description of one data-generating process.
struct ScenarioSpec {
  Eigen::Index n = 0;
  std::optional<std::vector<int>> group_sizes;  // required iff group-level assignment
  ErrorProcessSpec error0;                      // baseline outcome noise
  TreatmentSpec treatment;                      // distribution of d (or eta / v, see below)
  EffectSpec effect;
  std::vector<ErrorProcessSpec> controls;  // non-constant controls, one process each
  std::optional<Eigen::VectorXd> alpha_dw;  // d = W*alpha + eta; eta drawn from `treatment`
  std::optional<IvSpec> iv;                 // d = rho*v + W*alpha + eta; v drawn from `treatment`
  double beta_true = 0.0;                   // equals the effect mean
  Eigen::VectorXd gamma_true;               // length 1 + controls.size(), intercept first
  std::vector<Method> methods{Method::Classic};

  Eigen::Index n_groups() const;
  double kappa_ratio() const;  // sqrt(sum n_j^2) / n, 0 when unit level
  void validate() const;
};

/// Closed-form moments of a scenario, used as Monte Carlo ground truth.
struct TruthRecord {
  double beta_true = 0.0;
  Eigen::VectorXd gamma_true;
  double mu_d = 0.0;
  double sigma2_d = 0.0;   // variance of the exogenous draws (d, eta, or v)
  double sigma2_eps = 0.0;  // n^{-1} sum Var(eps_i)
  double sigma2_tau = 0.0;
  double lrv_tau = 0.0;        // E[(n^{-1/2} sum (tau_i - E tau))^2]
  double te_adjustment = 0.0;  // lrv_tau - sigma2_tau
  Eigen::Vector2d mu_A = Eigen::Vector2d::Zero();
  double sigma2_e1 = 0.0;  // unit-level score decomposition, centered part
  double sigma2_e2 = 0.0;  // unit-level score decomposition, long-run part
  double s2_eps = 0.0;     // n^{-1} sum_j E[(sum_i eps_ij)^2] over assignment groups
  double s2_e1 = 0.0;      // group-level analogues
  double s2_e2 = 0.0;
  double rho = 0.0;  // instrument strength and moments, when present
  double mu_v = 0.0;
  double sigma2_v = 0.0;
  bool group_level = false;
  bool heterogeneous = false;
  bool has_iv = false;
};

TruthRecord compute_truth(const ScenarioSpec& spec);

struct PotentialOutcomes {
  Eigen::VectorXd y0;
  Eigen::VectorXd y1;
  Eigen::VectorXd y;
  Eigen::VectorXd epsilon;
  Eigen::VectorXd tau;
};

/// Builds (y(0), y(1), y, eps) from realized controls, treatment, and baseline
/// noise. Heterogeneous effects require binary treatment values.
PotentialOutcomes gen_potential_outcomes(const ScenarioSpec& spec, const Eigen::MatrixXd& w,
                                         const Eigen::VectorXd& d,
                                         const Eigen::VectorXd& baseline, Stream& rng);

struct AssembledData {
  Dataset data;
  TruthRecord truth;
};

/// Deterministic end-to-end generation: same (spec, seed) gives a bit-identical
/// dataset. Generator sub-streams are derived, never shared.
AssembledData assemble(const ScenarioSpec& spec, std::uint64_t seed);

/// Cluster labels the cluster-robust estimator should key to: assignment
/// groups under group-level treatment, effect clusters under clustered
/// effects, otherwise nothing.
std::optional<std::vector<int>> clusters_for_lz(const ScenarioSpec& spec);

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

std::vector<std::string> preset_names();
ScenarioSpec scenario_preset(const std::string& name);
std::string preset_description(const std::string& name);

}  // namespace randse::dgp
