#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "randse/dataset.hpp"
#include "randse/errors.hpp"
#include "randse/linmodel.hpp"
#include "randse/rng.hpp"

using namespace randse;

namespace {

// Independent least-squares route: explicit normal equations through a dense
// inverse, no shared code with the QR implementation.
Eigen::VectorXd brute_force_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  return (X.transpose() * X).inverse() * (X.transpose() * y);
}

Dataset make_dataset(const Eigen::VectorXd& y, const Eigen::VectorXd& d,
                     const Eigen::MatrixXd& w) {
  Dataset data;
  data.y = y;
  data.d = d;
  data.w = w;
  return data;
}

Dataset random_dataset(std::uint64_t seed, Eigen::Index n, Eigen::Index extra_controls) {
  Stream rng(derive_stream_seed(seed, 0, 99));
  Dataset data;
  data.y.resize(n);
  data.d.resize(n);
  data.w.resize(n, 1 + extra_controls);
  data.w.col(0).setOnes();
  for (Eigen::Index j = 1; j <= extra_controls; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) data.w(i, j) = rng.normal();
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    data.d(i) = rng.normal();
    data.y(i) = 0.7 * data.d(i) + data.w.row(i).sum() * 0.3 + rng.normal();
  }
  return data;
}

}  // namespace

TEST_CASE("fit_ols exact-fit cases") {
  Eigen::VectorXd d(4);
  d << 1, 0, 1, 0;
  Eigen::MatrixXd w = Eigen::MatrixXd::Ones(4, 1);

  Eigen::VectorXd y1(4);
  y1 << 1, 0, 1, 0;
  OlsFit fit1 = fit_ols(make_dataset(y1, d, w));
  CHECK(fit1.beta_hat() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit1.theta_hat(1) == doctest::Approx(0.0).scale(1).epsilon(1e-12));
  CHECK(fit1.s2 == doctest::Approx(0.0).scale(1).epsilon(1e-24));

  Eigen::VectorXd y2 = Eigen::VectorXd::Constant(4, 2.0);
  OlsFit fit2 = fit_ols(make_dataset(y2, d, w));
  CHECK(fit2.beta_hat() == doctest::Approx(0.0).scale(1).epsilon(1e-12));
  CHECK(fit2.theta_hat(1) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fit2.s2 == doctest::Approx(0.0).scale(1).epsilon(1e-24));
}

TEST_CASE("fit_ols matches the frozen normal-equations solution on the n=5 instance") {
  Eigen::VectorXd y(5), d(5);
  y << 1.1, 0.4, 2.3, 1.7, 0.2;
  d << 0.5, -1.0, 1.5, 0.7, -0.9;
  Eigen::MatrixXd w = Eigen::MatrixXd::Ones(5, 1);

  OlsFit fit = fit_ols(make_dataset(y, d, w));
  // Values computed ahead of time from the explicit 2x2 normal equations.
  CHECK(fit.beta_hat() == doctest::Approx(0.79152397260273966).epsilon(1e-10));
  CHECK(fit.theta_hat(1) == doctest::Approx(1.0133561643835618).epsilon(1e-10));
  CHECK(fit.s2 == doctest::Approx(0.032988869863013658).epsilon(1e-10));

  Eigen::MatrixXd X(5, 2);
  X.col(0) = d;
  X.col(1).setOnes();
  const Eigen::VectorXd theta_bf = brute_force_ols(X, y);
  CHECK(fit.beta_hat() == doctest::Approx(theta_bf(0)).epsilon(1e-10));
  CHECK(fit.theta_hat(1) == doctest::Approx(theta_bf(1)).epsilon(1e-10));
}

TEST_CASE("fit_ols invariants hold on random designs") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Dataset data = random_dataset(seed, 40, 3);
    OlsFit fit = fit_ols(data);

    Eigen::MatrixXd X(data.n(), 1 + data.w.cols());
    X.col(0) = data.d;
    X.rightCols(data.w.cols()) = data.w;

    const double ynorm = data.y.norm();
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      CHECK(std::abs(fit.residuals.dot(X.col(j))) <= 1e-8 * ynorm * X.col(j).norm());
    }
    CHECK(fit.s2 == fit.residuals.squaredNorm() / static_cast<double>(fit.n));
    const Eigen::MatrixXd should_be_identity = fit.xtx_inv * (X.transpose() * X);
    CHECK((should_be_identity - Eigen::MatrixXd::Identity(X.cols(), X.cols()))
              .cwiseAbs()
              .maxCoeff() < 1e-8);
  }
}

TEST_CASE("fit_ols rejects a singular design") {
  Dataset data = random_dataset(5, 30, 1);
  Eigen::MatrixXd w(30, 3);
  w.leftCols(2) = data.w;
  w.col(2) = data.w.col(1);  // duplicated control
  data.w = w;
  CHECK_THROWS_AS(fit_ols(data), RankDeficientError);
  CHECK_THROWS_AS(residualize_fwl(data), RankDeficientError);
}

TEST_CASE("s2 degrees-of-freedom option") {
  Dataset data = random_dataset(11, 25, 2);
  const OlsFit plain = fit_ols(data);
  OlsOptions opts;
  opts.dof_adjust_s2 = true;
  const OlsFit adjusted = fit_ols(data, opts);
  const double n = 25.0, k = 3.0;
  CHECK(adjusted.s2 == doctest::Approx(plain.s2 * n / (n - 1.0 - k)).epsilon(1e-12));
}

TEST_CASE("residualize_fwl demeans against a constant") {
  Eigen::VectorXd d(5);
  d << 2, 4, 6, 8, 10;
  Dataset data = make_dataset(Eigen::VectorXd::Zero(5), d, Eigen::MatrixXd::Ones(5, 1));
  data.y << 1, 2, 3, 4, 5;
  const Eigen::VectorXd dbreve = residualize_fwl(data);
  for (Eigen::Index i = 0; i < 5; ++i) {
    CHECK(dbreve(i) == doctest::Approx(d(i) - 6.0).epsilon(1e-12));
  }

  // Mean-zero d against a constant control is already orthogonal.
  Eigen::VectorXd d0(5);
  d0 << 1, -1, 2, -2, 0;
  data.d = d0;
  const Eigen::VectorXd same = residualize_fwl(data);
  CHECK((same - d0).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("FWL identity: univariate slope on the residualized d reproduces beta") {
  for (std::uint64_t seed : {7u, 8u, 9u}) {
    Dataset data = random_dataset(seed, 35, 2);
    const OlsFit fit = fit_ols(data);
    const Eigen::VectorXd dbreve = residualize_fwl(data);
    for (Eigen::Index j = 0; j < data.w.cols(); ++j) {
      CHECK(std::abs(dbreve.dot(data.w.col(j))) < 1e-8 * dbreve.norm() * data.w.col(j).norm());
    }
    const double slope = dbreve.dot(data.y) / dbreve.squaredNorm();
    CHECK(slope == doctest::Approx(fit.beta_hat()).epsilon(1e-10));
    CHECK(fit.dbreve_ss == doctest::Approx(dbreve.squaredNorm()).epsilon(1e-12));
  }
}

TEST_CASE("top-left equivalence: s2*[xtx_inv]_00 equals s2/dbreve_ss") {
  Dataset data = random_dataset(13, 50, 3);
  const OlsFit fit = fit_ols(data);
  CHECK(fit.s2 * fit.xtx_inv(0, 0) == doctest::Approx(fit.s2 / fit.dbreve_ss).epsilon(1e-10));
}

TEST_CASE("affine equivariance: shifting d by a control column leaves residuals alone") {
  Dataset data = random_dataset(17, 30, 2);
  const OlsFit base = fit_ols(data);
  Dataset shifted = data;
  shifted.d += 2.5 * data.w.col(1);
  const OlsFit moved = fit_ols(shifted);
  CHECK((moved.residuals - base.residuals).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(moved.s2 == doctest::Approx(base.s2).epsilon(1e-9));
  CHECK(moved.beta_hat() == doctest::Approx(base.beta_hat()).epsilon(1e-9));
}

TEST_CASE("fit_first_stage basics") {
  Dataset data = random_dataset(19, 30, 1);

  SUBCASE("perfect instrument") {
    data.v = data.d;
    const FirstStageFit fs = fit_first_stage(data);
    CHECK(fs.rho_hat == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(fs.eta_residuals.cwiseAbs().maxCoeff() < 1e-10);
  }

  SUBCASE("univariate slope identity with a constant control") {
    Dataset small = random_dataset(23, 40, 0);
    Stream rng(derive_stream_seed(23, 1, 4));
    Eigen::VectorXd v(40);
    for (Eigen::Index i = 0; i < 40; ++i) v(i) = rng.normal();
    small.v = v;
    const FirstStageFit fs = fit_first_stage(small);
    const double vbar = v.mean();
    const double dbar = small.d.mean();
    const double cov = (v.array() - vbar).matrix().dot((small.d.array() - dbar).matrix());
    const double var = (v.array() - vbar).square().sum();
    CHECK(fs.rho_hat == doctest::Approx(cov / var).epsilon(1e-10));
  }

  SUBCASE("missing instrument") {
    data.v.reset();
    CHECK_THROWS_AS(fit_first_stage(data), MissingInstrumentError);
    CHECK_THROWS_AS(fit_2sls(data), MissingInstrumentError);
  }
}

TEST_CASE("fit_first_stage matches the frozen n=6 normal-equations solution") {
  Eigen::VectorXd d(6), v(6), w1(6);
  d << 0.9, -0.3, 1.2, 0.4, -0.8, 0.1;
  v << 1.0, -0.5, 0.8, 0.6, -1.1, 0.2;
  w1 << 0.2, 0.4, -0.3, 0.9, -0.6, 0.05;
  Eigen::MatrixXd w(6, 2);
  w.col(0).setOnes();
  w.col(1) = w1;
  Dataset data = make_dataset(Eigen::VectorXd::Zero(6), d, w);
  data.y << 1, 2, 3, 4, 5, 6;
  data.v = v;

  const FirstStageFit fs = fit_first_stage(data);
  CHECK(fs.rho_hat == doctest::Approx(0.95116379503866511).epsilon(1e-10));
  CHECK(fs.alpha_hat(0) == doctest::Approx(0.12548718617513691).epsilon(1e-10));
  CHECK(fs.alpha_hat(1) == doctest::Approx(-0.31397986475305595).epsilon(1e-10));
  CHECK(std::abs(fs.eta_residuals.dot(v)) < 1e-10);
  CHECK(std::abs(fs.eta_residuals.dot(w1)) < 1e-10);
}

TEST_CASE("fit_2sls reductions and the projection-matrix oracle") {
  SUBCASE("instrument equal to the regressor reproduces OLS") {
    Dataset data = random_dataset(29, 40, 2);
    data.v = data.d;
    const TslsFit tsls = fit_2sls(data);
    const OlsFit ols = fit_ols(data);
    CHECK(tsls.beta_2sls == doctest::Approx(ols.beta_hat()).epsilon(1e-10));
    CHECK(tsls.rho_hat == doctest::Approx(1.0).epsilon(1e-10));
  }

  SUBCASE("noiseless structural equation") {
    Dataset data = random_dataset(31, 30, 1);
    Stream rng(derive_stream_seed(31, 2, 5));
    Eigen::VectorXd v(30);
    for (Eigen::Index i = 0; i < 30; ++i) v(i) = 0.8 * data.d(i) + 0.3 * rng.normal();
    data.v = v;
    data.y = 1.7 * data.d;
    const TslsFit tsls = fit_2sls(data);
    CHECK(tsls.beta_2sls == doctest::Approx(1.7).epsilon(1e-9));
    CHECK(tsls.s2 < 1e-18);
  }

  SUBCASE("explicit annihilator-difference formula on a fixed n=8 instance") {
    const int n = 8;
    Eigen::VectorXd y(n), d(n), v(n), w1(n);
    y << 1.2, -0.4, 2.2, 0.9, 1.4, -0.7, 0.3, 1.9;
    d << 0.8, -0.6, 1.4, 0.2, 0.9, -1.1, -0.2, 1.2;
    v << 1.0, -0.4, 1.1, 0.5, 0.7, -0.9, 0.1, 0.8;
    w1 << 0.3, -0.2, 0.5, 0.1, -0.6, 0.4, 0.0, -0.3;
    Eigen::MatrixXd w(n, 2);
    w.col(0).setOnes();
    w.col(1) = w1;
    Dataset data = make_dataset(y, d, w);
    data.v = v;

    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd mw = eye - w * (w.transpose() * w).inverse() * w.transpose();
    Eigen::MatrixXd vw(n, 3);
    vw.col(0) = v;
    vw.rightCols(2) = w;
    const Eigen::MatrixXd mvw = eye - vw * (vw.transpose() * vw).inverse() * vw.transpose();
    const double oracle =
        (d.transpose() * (mw - mvw) * y)(0) / (d.transpose() * (mw - mvw) * d)(0);

    const TslsFit tsls = fit_2sls(data);
    CHECK(tsls.beta_2sls == doctest::Approx(oracle).epsilon(1e-9));
  }

  SUBCASE("irrelevant instrument is rejected") {
    Eigen::VectorXd d(6), v(6);
    d << 1, -1, 1, -1, 1, -1;
    v << 1, 1, -1, -1, 1, 1;  // orthogonal to d and to the constant
    Dataset data = make_dataset(Eigen::VectorXd::Zero(6), d, Eigen::MatrixXd::Ones(6, 1));
    data.y << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6;
    data.v = v;
    CHECK_THROWS_AS(fit_2sls(data), WeakInstrumentError);
  }
}

TEST_CASE("dataset validation catches structural problems") {
  Dataset data = random_dataset(37, 20, 1);
  CHECK_NOTHROW(data.validate());

  SUBCASE("row count mismatch") {
    data.d.conservativeResize(19);
    CHECK_THROWS_AS(data.validate(), DataError);
  }
  SUBCASE("zero constant") {
    data.w.col(0).setZero();
    CHECK_THROWS_AS(data.validate(), DataError);
  }
  SUBCASE("non-constant first column") {
    data.w(3, 0) = 2.0;
    CHECK_THROWS_AS(data.validate(), DataError);
  }
  SUBCASE("group labels must be contiguous") {
    std::vector<int> ids(20, 0);
    ids[5] = 2;  // label 1 missing
    data.group_ids = ids;
    CHECK_THROWS_AS(data.validate(), DataError);
  }
  SUBCASE("d must be group-constant") {
    std::vector<int> ids(20);
    for (int i = 0; i < 20; ++i) ids[i] = i / 5;
    data.group_ids = ids;
    CHECK_THROWS_AS(data.validate(), DataError);
  }
}
