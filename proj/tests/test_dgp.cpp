#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "randse/dgp.hpp"
#include "randse/errors.hpp"
#include "randse/rng.hpp"

using namespace randse;
using namespace randse::dgp;

namespace {

double sample_autocov(const Eigen::VectorXd& x, int lag) {
  const double mean = x.mean();
  double acc = 0.0;
  for (Eigen::Index i = 0; i + lag < x.size(); ++i) {
    acc += (x(i) - mean) * (x(i + lag) - mean);
  }
  return acc / static_cast<double>(x.size());
}

// Band on the sampling noise of the lag-0 sample autocovariance of a
// stationary Gaussian series: Var = (2/n) * sum_h gamma(h)^2.
double gamma0_mc_sd(const ErrorProcessSpec& spec, Eigen::Index n) {
  double ss = 0.0;
  for (Eigen::Index h = 0; h < 200; ++h) {
    const double g = spec.cov(0, h);
    ss += (h == 0 ? 1.0 : 2.0) * g * g;
  }
  return std::sqrt(2.0 * ss / static_cast<double>(n));
}

}  // namespace

TEST_CASE("gen_errors invalid specs") {
  Stream rng(1);
  CHECK_THROWS_AS(gen_errors({AR1{1.0, 1.0}}, 10, rng), InvalidSpecError);
  CHECK_THROWS_AS(gen_errors({AR1{-1.2, 1.0}}, 10, rng), InvalidSpecError);
  CHECK_THROWS_AS(gen_errors({IID{-0.5}}, 10, rng), InvalidSpecError);
  CHECK_THROWS_AS(gen_errors({ClusterRE{-1.0, 1.0, 4}}, 10, rng), InvalidSpecError);
}

TEST_CASE("gen_errors degenerate and collapse cases") {
  Stream rng(derive_stream_seed(2, 0, 1));
  const Eigen::VectorXd zeros = gen_errors({IID{0.0}}, 50, rng);
  CHECK(zeros.cwiseAbs().maxCoeff() == 0.0);

  // AR1 with rho=0 behaves like iid draws: lag-1 autocorrelation near zero.
  Stream rng2(derive_stream_seed(2, 1, 1));
  const Eigen::Index n = 100000;
  const Eigen::VectorXd e = gen_errors({AR1{0.0, 1.3}}, n, rng2);
  const double ac1 = sample_autocov(e, 1) / sample_autocov(e, 0);
  CHECK(std::abs(ac1) < 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("AR1 long-run moments match the stationary formulas") {
  const ErrorProcessSpec spec{AR1{0.7, 1.0}};
  const Eigen::Index n = 100000;
  Stream rng(derive_stream_seed(3, 0, 1));
  const Eigen::VectorXd e = gen_errors(spec, n, rng);

  const double g0_true = 1.0 / (1.0 - 0.49);
  CHECK(std::abs(sample_autocov(e, 0) - g0_true) < 3.0 * gamma0_mc_sd(spec, n));

  for (int h : {1, 2}) {
    const double gh_true = g0_true * std::pow(0.7, h);
    // Same fourth-moment order for the lagged autocovariances.
    CHECK(std::abs(sample_autocov(e, h) - gh_true) < 4.0 * gamma0_mc_sd(spec, n));
  }
}

TEST_CASE("cluster random effects hit the intraclass correlation") {
  const ErrorProcessSpec spec{ClusterRE{0.6, 0.8, 5}};
  const Eigen::Index n = 100000;
  Stream rng(derive_stream_seed(4, 0, 1));
  const Eigen::VectorXd e = gen_errors(spec, n, rng);

  // Average within-cluster cross products over distinct pairs.
  double cross = 0.0;
  long pairs = 0;
  for (Eigen::Index c = 0; c + 5 <= n; c += 5) {
    for (int a = 0; a < 5; ++a) {
      for (int b = a + 1; b < 5; ++b) {
        cross += e(c + a) * e(c + b);
        ++pairs;
      }
    }
  }
  cross /= static_cast<double>(pairs);
  const double var = sample_autocov(e, 0);
  const double icc_true = 0.36 / (0.36 + 0.64);
  CHECK(std::abs(cross / var - icc_true) < 0.01);
}

TEST_CASE("moving-average and network processes match their closed-form covariances") {
  SUBCASE("ma block sums equal the pairwise covariance enumeration") {
    const ErrorProcessSpec spec{MAq{{0.5, -0.3}}};
    double direct = 0.0;
    for (int i = 2; i < 9; ++i) {
      for (int j = 2; j < 9; ++j) direct += spec.cov(i, j);
    }
    CHECK(spec.block_sum_variance(2, 9) == doctest::Approx(direct).epsilon(1e-12));
    CHECK(spec.avg_variance(50) == doctest::Approx(1.0 + 0.25 + 0.09).epsilon(1e-12));
  }

  SUBCASE("network covariance equals the dense (I+wA)(I+wA)' entries") {
    NetworkMA net;
    net.weight = 0.3;
    net.edges = {{0, 1}, {1, 2}, {3, 4}, {1, 4}};
    const ErrorProcessSpec spec{net};
    const int n = 6;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (const auto& [u, v] : net.edges) {
      a(u, v) = 1.0;
      a(v, u) = 1.0;
    }
    const Eigen::MatrixXd b = Eigen::MatrixXd::Identity(n, n) + 0.3 * a;
    const Eigen::MatrixXd omega = b * b.transpose();
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        CHECK(spec.cov(i, j) == doctest::Approx(omega(i, j)).epsilon(1e-12));
      }
    }
    CHECK(spec.avg_variance(n) == doctest::Approx(omega.trace() / n).epsilon(1e-12));
    CHECK(spec.longrun_mean_square(n) == doctest::Approx(omega.sum() / n).epsilon(1e-12));

    Stream rng(derive_stream_seed(5, 0, 1));
    const Eigen::VectorXd e = gen_errors(spec, n, rng);
    CHECK(e.size() == n);
  }

  SUBCASE("ar1 block sums equal the pairwise enumeration") {
    const ErrorProcessSpec spec{AR1{0.6, 0.8}};
    double direct = 0.0;
    for (int i = 10; i < 15; ++i) {
      for (int j = 10; j < 15; ++j) direct += spec.cov(i, j);
    }
    CHECK(spec.block_sum_variance(10, 15) == doctest::Approx(direct).epsilon(1e-12));
  }

  SUBCASE("cluster block sums handle tile boundaries") {
    const ErrorProcessSpec spec{ClusterRE{0.5, 0.2, 4}};
    double direct = 0.0;
    for (int i = 2; i < 11; ++i) {
      for (int j = 2; j < 11; ++j) direct += spec.cov(i, j);
    }
    CHECK(spec.block_sum_variance(2, 11) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("gen_treatment") {
  SUBCASE("bernoulli moments at scale") {
    TreatmentSpec spec{AssignLevel::Unit, Bernoulli{0.5}};
    Stream rng(derive_stream_seed(6, 0, 2));
    const Eigen::Index n = 100000;
    const Eigen::VectorXd d = gen_treatment(spec, n, std::nullopt, rng);
    CHECK(std::abs(d.mean() - 0.5) < 4.0 * std::sqrt(0.25 / static_cast<double>(n)));
  }

  SUBCASE("boundary probabilities are rejected") {
    CHECK_THROWS_AS((TreatmentSpec{AssignLevel::Unit, Bernoulli{0.0}}.validate()),
                    InvalidSpecError);
    CHECK_THROWS_AS((TreatmentSpec{AssignLevel::Unit, Bernoulli{1.0}}.validate()),
                    InvalidSpecError);
  }

  SUBCASE("group replication pins values to group boundaries") {
    TreatmentSpec spec{AssignLevel::Group, NormalDist{0.0, 1.0}};
    Stream rng(derive_stream_seed(6, 1, 2));
    const std::vector<int> sizes = {3, 2};
    const Eigen::VectorXd d = gen_treatment(spec, 5, sizes, rng);
    CHECK(d(0) == d(1));
    CHECK(d(1) == d(2));
    CHECK(d(3) == d(4));
    CHECK(d(2) != d(3));
  }

  SUBCASE("degenerate discrete distribution is rejected") {
    TreatmentSpec spec{AssignLevel::Unit, Discrete{{1.0}, {1.0}}};
    CHECK_THROWS_AS(spec.validate(), InvalidSpecError);
  }

  SUBCASE("binary discrete support counts as binary") {
    TreatmentSpec spec{AssignLevel::Unit, Discrete{{0.0, 1.0}, {0.3, 0.7}}};
    CHECK(spec.is_binary());
    CHECK(spec.mean() == doctest::Approx(0.7));
    CHECK(spec.variance() == doctest::Approx(0.21));
  }
}

TEST_CASE("gen_potential_outcomes") {
  ScenarioSpec spec;
  spec.n = 8;
  spec.error0 = {IID{0.7}};
  spec.treatment = {AssignLevel::Unit, Bernoulli{0.5}};
  spec.effect = {ConstantEffect{2.0}};
  spec.beta_true = 2.0;
  spec.gamma_true = Eigen::VectorXd::Constant(1, 1.5);

  Eigen::MatrixXd w = Eigen::MatrixXd::Ones(8, 1);
  Eigen::VectorXd d(8);
  d << 1, 0, 1, 1, 0, 0, 1, 0;
  Stream noise(derive_stream_seed(7, 0, 3));
  const Eigen::VectorXd baseline = gen_errors(spec.error0, 8, noise);

  SUBCASE("constant effect shifts y1 by tau") {
    Stream rng(derive_stream_seed(7, 1, 3));
    const PotentialOutcomes po = gen_potential_outcomes(spec, w, d, baseline, rng);
    CHECK(((po.y1 - po.y0).array() == 2.0).all());
  }

  SUBCASE("everyone treated observes y1") {
    Stream rng(derive_stream_seed(7, 2, 3));
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(8);
    const PotentialOutcomes po = gen_potential_outcomes(spec, w, ones, baseline, rng);
    CHECK((po.y - po.y1).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("the error identity holds exactly for heterogeneous draws") {
    spec.effect = {HeterogeneousClustered{2.0, 0.5, 0.3, 3}};
    Stream rng(derive_stream_seed(7, 3, 3));
    const PotentialOutcomes po = gen_potential_outcomes(spec, w, d, baseline, rng);
    const Eigen::VectorXd reconstructed =
        po.y - d * spec.beta_true - w * spec.gamma_true;
    CHECK((reconstructed - po.epsilon).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("heterogeneous effects demand binary treatment values") {
    spec.effect = {HeterogeneousIID{2.0, 0.5}};
    Eigen::VectorXd continuous(8);
    continuous << 0.5, 1.2, -0.3, 0.8, 0.1, 1.0, 0.0, 2.0;
    Stream rng(derive_stream_seed(7, 4, 3));
    CHECK_THROWS_AS(gen_potential_outcomes(spec, w, continuous, baseline, rng),
                    UnsupportedSpecError);
  }
}

TEST_CASE("assemble") {
  SUBCASE("noiseless scenarios reproduce the structural equation exactly") {
    ScenarioSpec spec;
    spec.n = 20;
    spec.error0 = {IID{0.0}};
    spec.treatment = {AssignLevel::Unit, Bernoulli{0.5}};
    spec.effect = {ConstantEffect{1.25}};
    spec.controls = {{AR1{0.4, 1.0}}};
    spec.beta_true = 1.25;
    spec.gamma_true = Eigen::Vector2d(0.5, -0.3);

    const AssembledData out = assemble(spec, 99);
    const Eigen::VectorXd structural =
        out.data.d * 1.25 + out.data.w * spec.gamma_true;
    CHECK((out.data.y - structural).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("same seed gives a bit-identical dataset") {
    const ScenarioSpec spec = scenario_preset("hetero-clustered-te");
    const AssembledData a = assemble(spec, 1234);
    const AssembledData b = assemble(spec, 1234);
    CHECK(a.data.y == b.data.y);
    CHECK(a.data.d == b.data.d);
    CHECK(a.data.w == b.data.w);
    const AssembledData c = assemble(spec, 1235);
    CHECK(a.data.y != c.data.y);
  }

  SUBCASE("group-level treatment is constant within groups and validates") {
    ScenarioSpec spec = scenario_preset("group-assign-crosscorr");
    spec.n = 200;
    spec.group_sizes = std::vector<int>(40, 5);
    const AssembledData out = assemble(spec, 7);
    CHECK(out.data.group_ids.has_value());
    for (Eigen::Index i = 0; i < 200; ++i) {
      CHECK(out.data.d(i) == out.data.d(5 * (i / 5)));
    }
    CHECK(spec.kappa_ratio() < 0.5);
  }

  SUBCASE("closed-form error variance matches a large-sample draw") {
    ScenarioSpec spec = scenario_preset("strong-exog-ar1");
    spec.n = 100000;
    const AssembledData out = assemble(spec, 42);
    const Eigen::VectorXd eps =
        out.data.y - out.data.d * out.truth.beta_true - out.data.w * out.truth.gamma_true;
    const double sample_var = (eps.array() - eps.mean()).square().sum() / spec.n;
    CHECK(std::abs(sample_var - out.truth.sigma2_eps) <
          3.0 * gamma0_mc_sd(spec.error0, spec.n));
  }

  SUBCASE("heterogeneous error variance includes the effect part") {
    ScenarioSpec spec = scenario_preset("hetero-iid-te");
    spec.n = 100000;
    const AssembledData out = assemble(spec, 43);
    // sigma0^2 = 1/3, p = 0.2, var_tau = 1.
    CHECK(out.truth.sigma2_eps == doctest::Approx(1.0 / 3.0 + 0.2).epsilon(1e-12));
    const Eigen::VectorXd eps =
        out.data.y - out.data.d * out.truth.beta_true - out.data.w * out.truth.gamma_true;
    const double sample_var = (eps.array() - eps.mean()).square().sum() / spec.n;
    CHECK(std::abs(sample_var - out.truth.sigma2_eps) < 0.012);
  }
}

TEST_CASE("truth record group-level components") {
  const ScenarioSpec spec = scenario_preset("group-assign-crosscorr");
  const TruthRecord t = compute_truth(spec);
  // AR1(0.6, 0.8): gamma0 = 1; blocks of 5:
  // S2 = gamma0 * (1 + (2/5) * sum_{h=1..4} (5-h) * 0.6^h).
  const double expected =
      1.0 + 0.4 * (4 * 0.6 + 3 * 0.36 + 2 * 0.216 + 1 * 0.1296);
  CHECK(t.s2_eps == doctest::Approx(expected).epsilon(1e-12));
  CHECK(t.sigma2_d == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("scenario validation") {
  ScenarioSpec spec = scenario_preset("strong-exog-ar1");
  CHECK_NOTHROW(spec.validate());

  SUBCASE("beta_true must equal the effect mean") {
    spec.beta_true = 2.0;
    CHECK_THROWS_AS(spec.validate(), InvalidSpecError);
  }
  SUBCASE("gamma length must match controls") {
    spec.gamma_true = Eigen::Vector2d(1.0, 0.5);
    CHECK_THROWS_AS(spec.validate(), InvalidSpecError);
  }
  SUBCASE("group sizes only with group-level assignment") {
    spec.group_sizes = std::vector<int>(1000, 2);
    CHECK_THROWS_AS(spec.validate(), InvalidSpecError);
  }
  SUBCASE("oversized groups violate the size-growth cap") {
    ScenarioSpec grp = scenario_preset("group-assign-crosscorr");
    grp.n = 2000;
    grp.group_sizes = std::vector<int>{1500, 500};
    CHECK_THROWS_AS(grp.validate(), InvalidSpecError);
  }
  SUBCASE("heterogeneous effects need binary treatment") {
    spec.effect = {HeterogeneousIID{1.0, 0.5}};
    spec.treatment.dist = NormalDist{0.0, 1.0};
    CHECK_THROWS_AS(spec.validate(), UnsupportedSpecError);
  }
}

TEST_CASE("clusters_for_lz picks the level treatment varies at, then effects") {
  const ScenarioSpec group_spec = scenario_preset("group-assign-crosscorr");
  const auto group_ids = clusters_for_lz(group_spec);
  REQUIRE(group_ids.has_value());
  CHECK((*group_ids)[0] == 0);
  CHECK((*group_ids)[4] == 0);
  CHECK((*group_ids)[5] == 1);

  const ScenarioSpec effect_spec = scenario_preset("hetero-clustered-te");
  const auto effect_ids = clusters_for_lz(effect_spec);
  REQUIRE(effect_ids.has_value());
  CHECK((*effect_ids)[9] == 0);
  CHECK((*effect_ids)[10] == 1);

  const ScenarioSpec plain = scenario_preset("strong-exog-ar1");
  CHECK(!clusters_for_lz(plain).has_value());
}
