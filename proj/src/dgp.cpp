#include "randse/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "randse/errors.hpp"

namespace randse::dgp {

namespace {

// Sorted neighbor lists for the moving-average network process.
struct AdjView {
  std::vector<std::vector<int>> nbrs;

  static AdjView build(const NetworkMA& net, Eigen::Index n) {
    AdjView view;
    view.nbrs.resize(static_cast<std::size_t>(n));
    for (const auto& [a, b] : net.edges) {
      if (a < 0 || b < 0 || a >= n || b >= n) {
        throw InvalidSpecError("network edge endpoint out of range");
      }
      if (a == b) throw InvalidSpecError("network self-loop");
      view.nbrs[static_cast<std::size_t>(a)].push_back(b);
      view.nbrs[static_cast<std::size_t>(b)].push_back(a);
    }
    for (auto& list : view.nbrs) {
      std::sort(list.begin(), list.end());
      list.erase(std::unique(list.begin(), list.end()), list.end());
    }
    return view;
  }

  bool connected(int i, int j) const {
    const auto& list = nbrs[static_cast<std::size_t>(i)];
    return std::binary_search(list.begin(), list.end(), j);
  }

  int common_neighbors(int i, int j) const {
    const auto& a = nbrs[static_cast<std::size_t>(i)];
    const auto& b = nbrs[static_cast<std::size_t>(j)];
    int count = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
      if (*ia < *ib) {
        ++ia;
      } else if (*ib < *ia) {
        ++ib;
      } else {
        ++count;
        ++ia;
        ++ib;
      }
    }
    return count;
  }

  Eigen::Index size() const { return static_cast<Eigen::Index>(nbrs.size()); }
};

Eigen::Index max_node(const NetworkMA& net) {
  Eigen::Index m = -1;
  for (const auto& [a, b] : net.edges) m = std::max<Eigen::Index>(m, std::max(a, b));
  return m;
}

// Lag autocovariance for the stationary variants.
double stationary_gamma(const ErrorProcessSpec& spec, Eigen::Index h) {
  if (const auto* iid = std::get_if<IID>(&spec.process)) {
    return h == 0 ? iid->sigma * iid->sigma : 0.0;
  }
  if (const auto* ar = std::get_if<AR1>(&spec.process)) {
    const double g0 = ar->sigma * ar->sigma / (1.0 - ar->rho * ar->rho);
    return g0 * std::pow(ar->rho, static_cast<double>(h));
  }
  if (const auto* ma = std::get_if<MAq>(&spec.process)) {
    const auto& th = ma->coefficients;
    const auto q = static_cast<Eigen::Index>(th.size());
    if (h > q) return 0.0;
    auto theta = [&](Eigen::Index k) {
      return k == 0 ? 1.0 : th[static_cast<std::size_t>(k - 1)];
    };
    double g = 0.0;
    for (Eigen::Index k = 0; k + h <= q; ++k) g += theta(k) * theta(k + h);
    return g;
  }
  throw InvalidSpecError("process has no scalar autocovariance");
}

bool is_stationary(const ErrorProcessSpec& spec) {
  return std::holds_alternative<IID>(spec.process) ||
         std::holds_alternative<AR1>(spec.process) ||
         std::holds_alternative<MAq>(spec.process);
}

// Lag beyond which autocovariances are numerically zero.
Eigen::Index gamma_horizon(const ErrorProcessSpec& spec) {
  if (std::holds_alternative<IID>(spec.process)) return 0;
  if (const auto* ar = std::get_if<AR1>(&spec.process)) {
    if (ar->rho == 0.0) return 0;
    return static_cast<Eigen::Index>(
        std::ceil(std::log(1e-18) / std::log(std::abs(ar->rho))));
  }
  if (const auto* ma = std::get_if<MAq>(&spec.process)) {
    return static_cast<Eigen::Index>(ma->coefficients.size());
  }
  return 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// ErrorProcessSpec
// ---------------------------------------------------------------------------

void ErrorProcessSpec::validate() const {
  std::visit(
      [](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, IID>) {
          if (!(p.sigma >= 0.0)) throw InvalidSpecError("iid: sigma must be nonnegative");
        } else if constexpr (std::is_same_v<T, AR1>) {
          if (!(std::abs(p.rho) < 1.0)) throw InvalidSpecError("ar1: need |rho| < 1");
          if (!(p.sigma >= 0.0)) throw InvalidSpecError("ar1: sigma must be nonnegative");
        } else if constexpr (std::is_same_v<T, MAq>) {
          for (double c : p.coefficients) {
            if (!std::isfinite(c)) throw InvalidSpecError("ma: non-finite coefficient");
          }
        } else if constexpr (std::is_same_v<T, ClusterRE>) {
          if (!(p.sigma_between >= 0.0) || !(p.sigma_within >= 0.0)) {
            throw InvalidSpecError("cluster_re: sigmas must be nonnegative");
          }
          if (p.cluster_size < 1) throw InvalidSpecError("cluster_re: cluster size >= 1");
        } else if constexpr (std::is_same_v<T, NetworkMA>) {
          if (!std::isfinite(p.weight)) throw InvalidSpecError("network_ma: bad weight");
          for (const auto& [a, b] : p.edges) {
            if (a < 0 || b < 0 || a == b) throw InvalidSpecError("network_ma: bad edge");
          }
        }
      },
      process);
}

double ErrorProcessSpec::avg_variance(Eigen::Index n) const {
  if (is_stationary(*this)) return stationary_gamma(*this, 0);
  if (const auto* cre = std::get_if<ClusterRE>(&process)) {
    return cre->sigma_between * cre->sigma_between + cre->sigma_within * cre->sigma_within;
  }
  const auto& net = std::get<NetworkMA>(process);
  if (max_node(net) >= n) throw InvalidSpecError("network edge endpoint out of range");
  const AdjView view = AdjView::build(net, n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto deg = static_cast<double>(view.nbrs[static_cast<std::size_t>(i)].size());
    total += 1.0 + net.weight * net.weight * deg;
  }
  return total / static_cast<double>(n);
}

double ErrorProcessSpec::cov(Eigen::Index i, Eigen::Index j) const {
  if (is_stationary(*this)) return stationary_gamma(*this, std::abs(i - j));
  if (const auto* cre = std::get_if<ClusterRE>(&process)) {
    if (i == j) {
      return cre->sigma_between * cre->sigma_between +
             cre->sigma_within * cre->sigma_within;
    }
    return (i / cre->cluster_size == j / cre->cluster_size)
               ? cre->sigma_between * cre->sigma_between
               : 0.0;
  }
  const auto& net = std::get<NetworkMA>(process);
  const AdjView view = AdjView::build(net, std::max(max_node(net), std::max(i, j)) + 1);
  const double w = net.weight;
  const int ii = static_cast<int>(i);
  const int jj = static_cast<int>(j);
  double c = w * w * static_cast<double>(view.common_neighbors(ii, jj));
  if (i == j) {
    c += 1.0;
  } else if (view.connected(ii, jj)) {
    c += 2.0 * w;
  }
  return c;
}

double ErrorProcessSpec::block_sum_variance(Eigen::Index lo, Eigen::Index hi) const {
  const Eigen::Index m = hi - lo;
  if (m <= 0) return 0.0;
  if (is_stationary(*this)) {
    const Eigen::Index horizon = std::min(m - 1, gamma_horizon(*this));
    double total = static_cast<double>(m) * stationary_gamma(*this, 0);
    for (Eigen::Index h = 1; h <= horizon; ++h) {
      total += 2.0 * static_cast<double>(m - h) * stationary_gamma(*this, h);
    }
    return total;
  }
  if (const auto* cre = std::get_if<ClusterRE>(&process)) {
    const double vb = cre->sigma_between * cre->sigma_between;
    const double vw = cre->sigma_within * cre->sigma_within;
    double total = static_cast<double>(m) * vw;
    Eigen::Index pos = lo;
    while (pos < hi) {
      const Eigen::Index tile_end = (pos / cre->cluster_size + 1) * cre->cluster_size;
      const Eigen::Index overlap = std::min(hi, tile_end) - pos;
      total += static_cast<double>(overlap) * static_cast<double>(overlap) * vb;
      pos += overlap;
    }
    return total;
  }
  double total = 0.0;
  for (Eigen::Index i = lo; i < hi; ++i) {
    for (Eigen::Index j = lo; j < hi; ++j) total += cov(i, j);
  }
  return total;
}

double ErrorProcessSpec::longrun_mean_square(Eigen::Index n) const {
  if (n <= 0) return 0.0;
  if (is_stationary(*this)) {
    const Eigen::Index horizon = std::min(n - 1, gamma_horizon(*this));
    if (horizon == 0) return stationary_gamma(*this, 0);  // independent draws, exactly
    double total = static_cast<double>(n) * stationary_gamma(*this, 0);
    for (Eigen::Index h = 1; h <= horizon; ++h) {
      total += 2.0 * static_cast<double>(n - h) * stationary_gamma(*this, h);
    }
    return total / static_cast<double>(n);
  }
  if (std::holds_alternative<ClusterRE>(process)) {
    return block_sum_variance(0, n) / static_cast<double>(n);
  }
  const auto& net = std::get<NetworkMA>(process);
  if (max_node(net) >= n) throw InvalidSpecError("network edge endpoint out of range");
  const AdjView view = AdjView::build(net, n);
  double total = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto deg = static_cast<double>(view.nbrs[static_cast<std::size_t>(k)].size());
    const double colsum = 1.0 + net.weight * deg;
    total += colsum * colsum;
  }
  return total / static_cast<double>(n);
}

Eigen::VectorXd gen_errors(const ErrorProcessSpec& spec, Eigen::Index n, Stream& rng) {
  if (n < 1) throw InvalidSpecError("gen_errors: need n >= 1");
  spec.validate();
  Eigen::VectorXd e(n);

  if (const auto* iid = std::get_if<IID>(&spec.process)) {
    for (Eigen::Index i = 0; i < n; ++i) e(i) = iid->sigma * rng.normal();
    return e;
  }
  if (const auto* ar = std::get_if<AR1>(&spec.process)) {
    const double marginal_sd = ar->sigma / std::sqrt(1.0 - ar->rho * ar->rho);
    e(0) = marginal_sd * rng.normal();
    for (Eigen::Index i = 1; i < n; ++i) e(i) = ar->rho * e(i - 1) + ar->sigma * rng.normal();
    return e;
  }
  if (const auto* ma = std::get_if<MAq>(&spec.process)) {
    const auto q = static_cast<Eigen::Index>(ma->coefficients.size());
    Eigen::VectorXd u(n + q);
    for (Eigen::Index i = 0; i < n + q; ++i) u(i) = rng.normal();
    for (Eigen::Index i = 0; i < n; ++i) {
      double x = u(i + q);
      for (Eigen::Index k = 1; k <= q; ++k) {
        x += ma->coefficients[static_cast<std::size_t>(k - 1)] * u(i + q - k);
      }
      e(i) = x;
    }
    return e;
  }
  if (const auto* cre = std::get_if<ClusterRE>(&spec.process)) {
    Eigen::Index pos = 0;
    while (pos < n) {
      const Eigen::Index end = std::min<Eigen::Index>(pos + cre->cluster_size, n);
      const double shared = cre->sigma_between * rng.normal();
      for (Eigen::Index i = pos; i < end; ++i) e(i) = shared + cre->sigma_within * rng.normal();
      pos = end;
    }
    return e;
  }
  const auto& net = std::get<NetworkMA>(spec.process);
  if (max_node(net) >= n) throw InvalidSpecError("network edge endpoint out of range");
  const AdjView view = AdjView::build(net, n);
  Eigen::VectorXd u(n);
  for (Eigen::Index i = 0; i < n; ++i) u(i) = rng.normal();
  for (Eigen::Index i = 0; i < n; ++i) {
    double x = u(i);
    for (int j : view.nbrs[static_cast<std::size_t>(i)]) x += net.weight * u(j);
    e(i) = x;
  }
  return e;
}

// ---------------------------------------------------------------------------
// TreatmentSpec
// ---------------------------------------------------------------------------

void TreatmentSpec::validate() const {
  std::visit(
      [](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Bernoulli>) {
          if (!(d.p > 0.0 && d.p < 1.0)) {
            throw InvalidSpecError("bernoulli: p must lie strictly inside (0,1)");
          }
        } else if constexpr (std::is_same_v<T, NormalDist>) {
          if (!(d.sigma > 0.0)) throw InvalidSpecError("normal: sigma must be positive");
        } else {
          if (d.values.empty() || d.values.size() != d.probs.size()) {
            throw InvalidSpecError("discrete: values/probs size mismatch");
          }
          double total = 0.0;
          for (double p : d.probs) {
            if (!(p >= 0.0)) throw InvalidSpecError("discrete: negative probability");
            total += p;
          }
          if (std::abs(total - 1.0) > 1e-12) {
            throw InvalidSpecError("discrete: probabilities must sum to 1");
          }
        }
      },
      dist);
  if (!(variance() > 0.0)) {
    throw InvalidSpecError("treatment distribution is degenerate (zero variance)");
  }
}

double TreatmentSpec::mean() const {
  return std::visit(
      [](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Bernoulli>) {
          return d.p;
        } else if constexpr (std::is_same_v<T, NormalDist>) {
          return d.mu;
        } else {
          double m = 0.0;
          for (std::size_t k = 0; k < d.values.size(); ++k) m += d.values[k] * d.probs[k];
          return m;
        }
      },
      dist);
}

double TreatmentSpec::variance() const {
  return std::visit(
      [this](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Bernoulli>) {
          return d.p * (1.0 - d.p);
        } else if constexpr (std::is_same_v<T, NormalDist>) {
          return d.sigma * d.sigma;
        } else {
          const double m = mean();
          double v = 0.0;
          for (std::size_t k = 0; k < d.values.size(); ++k) {
            v += (d.values[k] - m) * (d.values[k] - m) * d.probs[k];
          }
          return v;
        }
      },
      dist);
}

bool TreatmentSpec::is_binary() const {
  if (std::holds_alternative<Bernoulli>(dist)) return true;
  if (const auto* dd = std::get_if<Discrete>(&dist)) {
    return std::all_of(dd->values.begin(), dd->values.end(),
                       [](double v) { return v == 0.0 || v == 1.0; });
  }
  return false;
}

double TreatmentSpec::draw(Stream& rng) const {
  return std::visit(
      [&rng](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Bernoulli>) {
          return rng.bernoulli(d.p) ? 1.0 : 0.0;
        } else if constexpr (std::is_same_v<T, NormalDist>) {
          return d.mu + d.sigma * rng.normal();
        } else {
          const double u = rng.uniform01();
          double acc = 0.0;
          for (std::size_t k = 0; k < d.values.size(); ++k) {
            acc += d.probs[k];
            if (u < acc) return d.values[k];
          }
          return d.values.back();
        }
      },
      dist);
}

Eigen::VectorXd gen_treatment(const TreatmentSpec& spec, Eigen::Index n,
                              const std::optional<std::vector<int>>& group_sizes,
                              Stream& rng) {
  spec.validate();
  Eigen::VectorXd d(n);
  if (spec.level == AssignLevel::Unit) {
    for (Eigen::Index i = 0; i < n; ++i) d(i) = spec.draw(rng);
    return d;
  }
  if (!group_sizes) throw InvalidSpecError("group-level assignment requires group sizes");
  const auto total =
      std::accumulate(group_sizes->begin(), group_sizes->end(), Eigen::Index{0});
  if (total != n) throw InvalidSpecError("group sizes must sum to n");
  Eigen::Index pos = 0;
  for (int size : *group_sizes) {
    if (size < 1) throw InvalidSpecError("group sizes must be positive");
    const double value = spec.draw(rng);
    d.segment(pos, size).setConstant(value);
    pos += size;
  }
  return d;
}

// ---------------------------------------------------------------------------
// EffectSpec
// ---------------------------------------------------------------------------

void EffectSpec::validate() const {
  std::visit(
      [](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, HeterogeneousIID>) {
          if (!(e.var_tau >= 0.0)) throw InvalidSpecError("effect variance must be nonnegative");
        } else if constexpr (std::is_same_v<T, HeterogeneousClustered>) {
          if (!(e.var_between >= 0.0) || !(e.var_within >= 0.0)) {
            throw InvalidSpecError("effect variances must be nonnegative");
          }
          if (e.cluster_size < 1) throw InvalidSpecError("effect cluster size >= 1");
        }
      },
      effect);
}

double EffectSpec::mean() const {
  return std::visit(
      [](const auto& e) -> double {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, ConstantEffect>) {
          return e.tau;
        } else {
          return e.mean_tau;
        }
      },
      effect);
}

double EffectSpec::variance() const {
  return std::visit(
      [](const auto& e) -> double {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, ConstantEffect>) {
          return 0.0;
        } else if constexpr (std::is_same_v<T, HeterogeneousIID>) {
          return e.var_tau;
        } else {
          return e.var_between + e.var_within;
        }
      },
      effect);
}

bool EffectSpec::heterogeneous() const { return variance() > 0.0; }

int EffectSpec::cluster_size() const {
  if (const auto* c = std::get_if<HeterogeneousClustered>(&effect)) return c->cluster_size;
  return 1;
}

ErrorProcessSpec EffectSpec::as_error_process() const {
  if (const auto* c = std::get_if<HeterogeneousClustered>(&effect)) {
    return {ClusterRE{std::sqrt(c->var_between), std::sqrt(c->var_within), c->cluster_size}};
  }
  return {IID{std::sqrt(variance())}};
}

// ---------------------------------------------------------------------------
// ScenarioSpec
// ---------------------------------------------------------------------------

Eigen::Index ScenarioSpec::n_groups() const {
  return group_sizes ? static_cast<Eigen::Index>(group_sizes->size()) : n;
}

double ScenarioSpec::kappa_ratio() const {
  if (!group_sizes) return 1.0 / std::sqrt(static_cast<double>(n));
  double ss = 0.0;
  for (int m : *group_sizes) ss += static_cast<double>(m) * static_cast<double>(m);
  return std::sqrt(ss) / static_cast<double>(n);
}

void ScenarioSpec::validate() const {
  const auto k = static_cast<Eigen::Index>(controls.size());
  if (n < k + 3) throw InvalidSpecError("scenario: n too small for the design");
  error0.validate();
  treatment.validate();
  effect.validate();
  for (const auto& c : controls) c.validate();
  if (gamma_true.size() != k + 1) {
    throw InvalidSpecError("scenario: gamma_true must have length 1 + #controls");
  }
  if (beta_true != effect.mean()) {
    throw InvalidSpecError("scenario: beta_true must equal the mean treatment effect");
  }
  if ((treatment.level == AssignLevel::Group) != group_sizes.has_value()) {
    throw InvalidSpecError("scenario: group_sizes present iff group-level assignment");
  }
  if (group_sizes) {
    const auto total =
        std::accumulate(group_sizes->begin(), group_sizes->end(), Eigen::Index{0});
    if (total != n) throw InvalidSpecError("scenario: group sizes must sum to n");
    for (int m : *group_sizes) {
      if (m < 1) throw InvalidSpecError("scenario: group sizes must be positive");
    }
    if (!(kappa_ratio() < 0.5)) {
      throw InvalidSpecError("scenario: sqrt(sum n_j^2)/n must stay below 0.5");
    }
  }
  if (alpha_dw && alpha_dw->size() != k + 1) {
    throw InvalidSpecError("scenario: alpha_dw must have length 1 + #controls");
  }
  if (iv) {
    iv->eta.validate();
    if (treatment.level != AssignLevel::Unit) {
      throw InvalidSpecError("scenario: instrumented designs use unit-level assignment");
    }
  }
  if (effect.heterogeneous()) {
    if (iv || alpha_dw) {
      throw UnsupportedSpecError(
          "scenario: heterogeneous effects need binary treatment; incompatible with "
          "alpha_dw or an instrument");
    }
    if (!treatment.is_binary()) {
      throw UnsupportedSpecError("scenario: heterogeneous effects need binary treatment");
    }
  }
  if (methods.empty()) throw InvalidSpecError("scenario: empty method list");
  for (Method m : methods) {
    if (m == Method::Tsls && !iv) {
      throw InvalidSpecError("scenario: tsls method requires an instrument spec");
    }
    if (m == Method::ClusterLZ && !clusters_for_lz(*this)) {
      throw InvalidSpecError(
          "scenario: cluster method needs group-level assignment or clustered effects");
    }
  }
}

// ---------------------------------------------------------------------------
// Truth
// ---------------------------------------------------------------------------

TruthRecord compute_truth(const ScenarioSpec& spec) {
  TruthRecord t;
  t.beta_true = spec.beta_true;
  t.gamma_true = spec.gamma_true;
  t.mu_d = spec.treatment.mean();
  t.sigma2_d = spec.treatment.variance();
  t.group_level = spec.treatment.level == AssignLevel::Group;
  t.heterogeneous = spec.effect.heterogeneous();
  t.has_iv = spec.iv.has_value();
  t.sigma2_tau = spec.effect.variance();
  t.mu_A = Eigen::Vector2d(0.0, t.sigma2_d);

  const double sigma2_0 = spec.error0.avg_variance(spec.n);
  const ErrorProcessSpec tau_proc = spec.effect.as_error_process();

  double p = 0.0;
  double var_dd = 0.0;  // Var(d * (d - p)) for binary d
  if (t.heterogeneous) {
    p = t.mu_d;
    const double q = 1.0 - p;
    var_dd = p * q * q * q;
    t.sigma2_eps = sigma2_0 + p * t.sigma2_tau;
    t.lrv_tau = tau_proc.longrun_mean_square(spec.n);
    t.te_adjustment = t.lrv_tau - t.sigma2_tau;
    t.sigma2_e1 = p * q * sigma2_0 + var_dd * t.sigma2_tau;
    t.sigma2_e2 = t.sigma2_d * t.sigma2_d * t.lrv_tau;
  } else {
    t.sigma2_eps = sigma2_0;
  }

  if (t.group_level) {
    double s2_y0 = 0.0;
    double s2_tau = 0.0;
    Eigen::Index pos = 0;
    for (int m : *spec.group_sizes) {
      s2_y0 += spec.error0.block_sum_variance(pos, pos + m);
      if (t.heterogeneous) s2_tau += tau_proc.block_sum_variance(pos, pos + m);
      pos += m;
    }
    s2_y0 /= static_cast<double>(spec.n);
    s2_tau /= static_cast<double>(spec.n);
    if (t.heterogeneous) {
      const double q = 1.0 - p;
      t.s2_eps = s2_y0 + p * s2_tau;
      t.s2_e1 = p * q * s2_y0 + var_dd * s2_tau;
      t.s2_e2 = t.sigma2_e2;
    } else {
      t.s2_eps = s2_y0;
    }
  }

  if (t.has_iv) {
    t.rho = spec.iv->rho;
    t.mu_v = spec.treatment.mean();
    t.sigma2_v = spec.treatment.variance();
  }
  return t;
}

// ---------------------------------------------------------------------------
// Outcome generation and assembly
// ---------------------------------------------------------------------------

PotentialOutcomes gen_potential_outcomes(const ScenarioSpec& spec, const Eigen::MatrixXd& w,
                                         const Eigen::VectorXd& d,
                                         const Eigen::VectorXd& baseline, Stream& rng) {
  const Eigen::Index n = d.size();
  if (w.rows() != n || baseline.size() != n) {
    throw DimensionMismatchError("gen_potential_outcomes: input lengths disagree");
  }
  if (w.cols() != spec.gamma_true.size()) {
    throw DimensionMismatchError("gen_potential_outcomes: controls vs gamma_true");
  }
  const double mean_tau = spec.effect.mean();

  if (spec.effect.heterogeneous()) {
    const bool binary =
        (d.array() == 0.0 || d.array() == 1.0).all();
    if (!binary) {
      throw UnsupportedSpecError(
          "gen_potential_outcomes: heterogeneous effects need binary treatment values");
    }
  }

  Eigen::VectorXd tau(n);
  std::visit(
      [&](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, ConstantEffect>) {
          tau.setConstant(e.tau);
        } else if constexpr (std::is_same_v<T, HeterogeneousIID>) {
          const double sd = std::sqrt(e.var_tau);
          for (Eigen::Index i = 0; i < n; ++i) tau(i) = e.mean_tau + sd * rng.normal();
        } else {
          const double sb = std::sqrt(e.var_between);
          const double sw = std::sqrt(e.var_within);
          Eigen::Index pos = 0;
          while (pos < n) {
            const Eigen::Index end = std::min<Eigen::Index>(pos + e.cluster_size, n);
            const double shared = sb * rng.normal();
            for (Eigen::Index i = pos; i < end; ++i) {
              tau(i) = e.mean_tau + shared + sw * rng.normal();
            }
            pos = end;
          }
        }
      },
      spec.effect.effect);

  PotentialOutcomes po;
  po.tau = tau;
  po.y0 = w * spec.gamma_true + baseline;
  po.y1 = po.y0 + tau;
  po.y = po.y0 + d.cwiseProduct(tau);
  po.epsilon = baseline + d.cwiseProduct((tau.array() - mean_tau).matrix());
  return po;
}

std::optional<std::vector<int>> clusters_for_lz(const ScenarioSpec& spec) {
  if (spec.treatment.level == AssignLevel::Group) {
    std::vector<int> ids;
    ids.reserve(static_cast<std::size_t>(spec.n));
    int g = 0;
    for (int m : *spec.group_sizes) {
      ids.insert(ids.end(), static_cast<std::size_t>(m), g);
      ++g;
    }
    return ids;
  }
  if (spec.effect.heterogeneous() && spec.effect.cluster_size() > 1) {
    std::vector<int> ids(static_cast<std::size_t>(spec.n));
    const int m = spec.effect.cluster_size();
    for (Eigen::Index i = 0; i < spec.n; ++i) {
      ids[static_cast<std::size_t>(i)] = static_cast<int>(i) / m;
    }
    return ids;
  }
  return std::nullopt;
}

AssembledData assemble(const ScenarioSpec& spec, std::uint64_t seed) {
  spec.validate();
  const Eigen::Index n = spec.n;
  const auto k = static_cast<Eigen::Index>(spec.controls.size());

  auto stream_for = [seed](StreamTag tag, std::uint64_t offset = 0) {
    return Stream(derive_stream_seed(seed, 0, static_cast<std::uint64_t>(tag) + offset));
  };

  Eigen::MatrixXd w(n, 1 + k);
  w.col(0).setOnes();
  for (Eigen::Index c = 0; c < k; ++c) {
    Stream s = stream_for(StreamTag::ControlBase, static_cast<std::uint64_t>(c));
    w.col(1 + c) = gen_errors(spec.controls[static_cast<std::size_t>(c)], n, s);
  }

  Stream treat_stream = stream_for(StreamTag::Treatment);
  const Eigen::VectorXd raw = gen_treatment(spec.treatment, n, spec.group_sizes, treat_stream);

  Eigen::VectorXd d;
  std::optional<Eigen::VectorXd> v;
  if (spec.iv) {
    v = raw;
    Stream eta_stream = stream_for(StreamTag::IvEta);
    const Eigen::VectorXd eta = gen_errors(spec.iv->eta, n, eta_stream);
    d = spec.iv->rho * raw + eta;
    if (spec.alpha_dw) d += w * (*spec.alpha_dw);
  } else if (spec.alpha_dw) {
    d = w * (*spec.alpha_dw) + raw;
  } else {
    d = raw;
  }

  Stream base_stream = stream_for(StreamTag::Error0);
  const Eigen::VectorXd baseline = gen_errors(spec.error0, n, base_stream);

  Stream effect_stream = stream_for(StreamTag::EffectBetween);
  const PotentialOutcomes po = gen_potential_outcomes(spec, w, d, baseline, effect_stream);

  AssembledData out;
  out.data.y = po.y;
  out.data.d = std::move(d);
  out.data.w = std::move(w);
  out.data.v = std::move(v);
  if (spec.treatment.level == AssignLevel::Group) {
    std::vector<int> ids;
    ids.reserve(static_cast<std::size_t>(n));
    int g = 0;
    for (int m : *spec.group_sizes) {
      ids.insert(ids.end(), static_cast<std::size_t>(m), g);
      ++g;
    }
    out.data.group_ids = std::move(ids);
  }
  out.data.validate();
  out.truth = compute_truth(spec);
  return out;
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

namespace {

std::vector<int> uniform_groups(Eigen::Index n, int size) {
  if (n % size != 0) throw InvalidSpecError("group size must divide n");
  return std::vector<int>(static_cast<std::size_t>(n / size), size);
}

ScenarioSpec preset_strong_exog_ar1() {
  ScenarioSpec s;
  s.n = 2000;
  s.error0 = {AR1{0.7, 1.0}};
  s.treatment = {AssignLevel::Unit, Bernoulli{0.5}};
  s.effect = {ConstantEffect{1.0}};
  s.controls = {{AR1{0.6, 1.0}}, {AR1{0.3, 1.0}}};
  s.beta_true = 1.0;
  s.gamma_true = Eigen::Vector3d(1.0, 0.7, -0.4);
  s.methods = {Method::Classic, Method::HC0};
  return s;
}

ScenarioSpec preset_hetero_iid_te() {
  ScenarioSpec s;
  s.n = 2000;
  s.error0 = {AR1{0.5, 0.5}};
  s.treatment = {AssignLevel::Unit, Bernoulli{0.2}};
  s.effect = {HeterogeneousIID{1.0, 1.0}};
  s.controls = {{AR1{0.4, 1.0}}};
  s.beta_true = 1.0;
  s.gamma_true = Eigen::Vector2d(1.0, 0.5);
  s.methods = {Method::Classic, Method::HC0};
  return s;
}

ScenarioSpec preset_hetero_clustered_te() {
  ScenarioSpec s;
  s.n = 2000;
  s.error0 = {ClusterRE{0.4, 0.3, 50}};
  s.treatment = {AssignLevel::Unit, Bernoulli{0.5}};
  s.effect = {HeterogeneousClustered{1.0, 0.5, 0.1, 10}};
  s.controls = {{AR1{0.4, 1.0}}};
  s.beta_true = 1.0;
  s.gamma_true = Eigen::Vector2d(1.0, 0.5);
  s.methods = {Method::Classic, Method::HC0, Method::ClusterLZ};
  return s;
}

ScenarioSpec preset_group_assign_crosscorr() {
  ScenarioSpec s;
  s.n = 2000;
  s.group_sizes = uniform_groups(s.n, 5);
  s.error0 = {AR1{0.6, 0.8}};
  s.treatment = {AssignLevel::Group, Bernoulli{0.5}};
  s.effect = {ConstantEffect{1.0}};
  s.controls = {{AR1{0.4, 1.0}}};
  s.beta_true = 1.0;
  s.gamma_true = Eigen::Vector2d(1.0, 0.5);
  s.methods = {Method::Classic, Method::HC0, Method::ClusterLZ};
  return s;
}

ScenarioSpec preset_iv_first_stage() {
  ScenarioSpec s;
  s.n = 2000;
  s.error0 = {AR1{0.6, 0.8}};
  s.treatment = {AssignLevel::Unit, NormalDist{0.0, 1.0}};
  s.effect = {ConstantEffect{1.0}};
  s.controls = {{AR1{0.5, 1.0}}};
  s.alpha_dw = Eigen::Vector2d(0.5, 0.3);
  s.iv = IvSpec{0.8, {IID{0.6}}};
  s.beta_true = 1.0;
  s.gamma_true = Eigen::Vector2d(1.0, 0.5);
  s.methods = {Method::Tsls};
  return s;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"strong-exog-ar1", "hetero-iid-te", "hetero-clustered-te", "group-assign-crosscorr",
          "iv-first-stage"};
}

ScenarioSpec scenario_preset(const std::string& name) {
  if (name == "strong-exog-ar1") return preset_strong_exog_ar1();
  if (name == "hetero-iid-te") return preset_hetero_iid_te();
  if (name == "hetero-clustered-te") return preset_hetero_clustered_te();
  if (name == "group-assign-crosscorr") return preset_group_assign_crosscorr();
  if (name == "iv-first-stage") return preset_iv_first_stage();
  throw ConfigError("unknown preset '" + name + "'");
}

std::string preset_description(const std::string& name) {
  if (name == "strong-exog-ar1") {
    return "AR(1) errors, iid Bernoulli(0.5) treatment, constant effect, two AR(1) controls";
  }
  if (name == "hetero-iid-te") {
    return "iid heterogeneous effects, Bernoulli(0.2) treatment, AR(1) baseline noise";
  }
  if (name == "hetero-clustered-te") {
    return "effects clustered in blocks of 10, baseline noise clustered in blocks of 50";
  }
  if (name == "group-assign-crosscorr") {
    return "treatment assigned in groups of 5, AR(1) errors crossing group boundaries";
  }
  if (name == "iv-first-stage") {
    return "instrumented treatment with iid first-stage noise and AR(1) outcome errors";
  }
  throw ConfigError("unknown preset '" + name + "'");
}

}  // namespace randse::dgp
