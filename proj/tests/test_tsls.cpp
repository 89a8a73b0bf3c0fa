#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "ssov/tsls.hpp"
#include "test_util.hpp"

using namespace ssov;

namespace {

StackedDesign small_design(int m, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> wd(0.5, 2.0);
  StackedDesign sd;
  sd.n = m;
  sd.T = 1;
  sd.p = 1;
  sd.d = d;
  sd.y.resize(m);
  sd.x.resize(m);
  sd.z.resize(m);
  sd.weight.resize(m);
  sd.W.resize(m, d);
  sd.S = Eigen::MatrixXd::Zero(m, 1);
  sd.obs_cluster.resize(m);
  sd.unit_index.resize(m);
  sd.period_index.assign(m, 0);
  for (int i = 0; i < m; ++i) {
    sd.z(i) = nd(rng);
    if (d > 0) sd.W(i, 0) = 1.0;
    for (int k = 1; k < d; ++k) sd.W(i, k) = nd(rng);
    sd.x(i) = 0.8 * sd.z(i) + nd(rng);
    double ctrl = 0.0;
    for (int k = 0; k < d; ++k) ctrl += 0.4 * sd.W(i, k);
    sd.y(i) = 1.2 * sd.x(i) + ctrl + nd(rng);
    sd.weight(i) = wd(rng);
    sd.obs_cluster[i] = "c" + std::to_string(i % 3);
    sd.unit_index[i] = i;
    sd.S(i, 0) = 0.5;
  }
  return sd;
}

}  // namespace

TEST_CASE("residualize_on_controls") {
  SUBCASE("intercept only is weighted demeaning") {
    Eigen::VectorXd v(3);
    v << 1, 2, 3;
    Eigen::MatrixXd W = Eigen::MatrixXd::Ones(3, 1);
    Eigen::VectorXd wt = Eigen::VectorXd::Ones(3);
    auto res = residualize_on_controls(v, W, wt);
    CHECK(res.coef(0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(res.resid(0) == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(res.resid(1) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(res.resid(2) == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("exact fit leaves a zero residual") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd W(6, 2);
    for (int i = 0; i < 6; ++i) {
      W(i, 0) = 1.0;
      W(i, 1) = nd(rng);
    }
    Eigen::VectorXd c(2);
    c << 0.7, -1.3;
    Eigen::VectorXd v = W * c;
    Eigen::VectorXd wt = Eigen::VectorXd::Constant(6, 2.0);
    auto res = residualize_on_controls(v, W, wt);
    CHECK(res.resid.cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("random case matches the dense normal equations") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd W(5, 2);
    Eigen::VectorXd v(5), wt(5);
    for (int i = 0; i < 5; ++i) {
      W(i, 0) = 1.0;
      W(i, 1) = nd(rng);
      v(i) = nd(rng);
      wt(i) = 0.5 + std::abs(nd(rng));
    }
    auto res = residualize_on_controls(v, W, wt);
    Eigen::VectorXd oracle = ssov_test::normal_equations_ls(W, v, wt);
    CHECK((res.coef - oracle).cwiseAbs().maxCoeff() < 1e-10);
    // Weighted orthogonality.
    Eigen::VectorXd mom = W.transpose() * wt.asDiagonal() * res.resid;
    CHECK(mom.cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("rank-deficient controls name the offending column") {
    Eigen::MatrixXd W(4, 2);
    W.col(0) = Eigen::VectorXd::Ones(4);
    W.col(1) = 2.0 * W.col(0);
    Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(4, 0, 3);
    Eigen::VectorXd wt = Eigen::VectorXd::Ones(4);
    std::vector<std::string> names = {"(intercept)", "dup"};
    CHECK_THROWS_AS(residualize_on_controls(v, W, wt, &names),
                    NumericalError);
  }
}

TEST_CASE("fit_tsls") {
  SUBCASE("instrument equal to regressor, no controls") {
    StackedDesign sd = small_design(8, 0, 21);
    sd.z = sd.x;
    TslsFit fit = fit_tsls(sd);
    double num = (sd.weight.array() * sd.x.array() * sd.y.array()).sum();
    double den = (sd.weight.array() * sd.x.array().square()).sum();
    CHECK(fit.beta == doctest::Approx(num / den).epsilon(1e-12));
  }
  SUBCASE("exact linear data is recovered exactly") {
    StackedDesign sd = small_design(10, 1, 22);
    sd.y = 2.0 * sd.x + sd.W.col(0);
    TslsFit fit = fit_tsls(sd);
    CHECK(fit.beta == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(fit.gamma_s(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.eps_hat.cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("random instance matches the two-step brute-force oracle") {
    for (std::uint64_t seed = 100; seed < 110; ++seed) {
      StackedDesign sd = small_design(6, 2, seed);
      TslsFit fit = fit_tsls(sd);
      // Stage one: X on (Z, W); stage two: y on (fitted X, W).
      Eigen::MatrixXd ZW(6, 3);
      ZW.col(0) = sd.z;
      ZW.rightCols(2) = sd.W;
      Eigen::VectorXd fs =
          ssov_test::normal_equations_ls(ZW, sd.x, sd.weight);
      Eigen::VectorXd xhat = ZW * fs;
      Eigen::MatrixXd XW(6, 3);
      XW.col(0) = xhat;
      XW.rightCols(2) = sd.W;
      Eigen::VectorXd ss = ssov_test::normal_equations_ls(XW, sd.y, sd.weight);
      CHECK(fit.beta == doctest::Approx(ss(0)).epsilon(1e-9));
    }
  }
  SUBCASE("normal equations hold on every fit") {
    for (std::uint64_t seed = 300; seed < 320; ++seed) {
      StackedDesign sd = small_design(12, 2, seed);
      TslsFit fit = fit_tsls(sd);
      CHECK(fit.condition_report.max_normal_eq_violation < 1e-8);
    }
  }
  SUBCASE("weight scaling leaves the fit unchanged") {
    StackedDesign sd = small_design(9, 2, 23);
    TslsFit a = fit_tsls(sd);
    sd.weight *= 17.5;
    TslsFit b = fit_tsls(sd);
    CHECK(b.beta == doctest::Approx(a.beta).epsilon(1e-12));
    CHECK((b.gamma_s - a.gamma_s).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((b.eps_hat - a.eps_hat).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("instrument scaling leaves beta unchanged") {
    StackedDesign sd = small_design(9, 2, 24);
    TslsFit a = fit_tsls(sd);
    sd.z *= 3.25;
    TslsFit b = fit_tsls(sd);
    CHECK(b.beta == doctest::Approx(a.beta).epsilon(1e-10));
  }
  SUBCASE("zero first stage errors") {
    StackedDesign sd = small_design(8, 1, 25);
    sd.x.setZero();
    sd.y.setZero();
    CHECK_THROWS_AS(fit_tsls(sd), NumericalError);
  }
}
