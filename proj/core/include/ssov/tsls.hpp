#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ssov/panel_data.hpp"

namespace ssov {

struct ConditionReport {
  double controls_condition = 0.0;  // singular-value ratio of sqrt(w)W
  double max_normal_eq_violation = 0.0;  // relative, over (Z, W') moments
  std::vector<std::string> warnings;
};

// Weighted just-identified TSLS with instruments (Z, W') and regressors
// (X, W'). No degrees-of-freedom corrections anywhere; the tests own their
// own scaling.
struct TslsFit {
  double beta = 0.0;
  Eigen::VectorXd gamma_s;  // d
  Eigen::VectorXd pi_hat;   // d, coefficient of Z on W
  Eigen::VectorXd eps_hat;  // nT
  Eigen::VectorXd z_dot;    // nT, Z - W'pi_hat
  double first_stage_cov = 0.0;  // sum_r w_r z_dot_r x_r
  ConditionReport condition_report;
};

struct WeightedLsResult {
  Eigen::VectorXd coef;
  Eigen::VectorXd resid;
  double condition = 0.0;
};

// Weighted least squares of v on W solved by QR on the sqrt(w)-scaled
// design. Throws NumericalError naming the offending columns when the
// scaled design has condition number above 1e12; records a warning above
// 1e8. d = 0 returns coef of size 0 and resid = v.
WeightedLsResult residualize_on_controls(
    const Eigen::VectorXd& v, const Eigen::MatrixXd& W,
    const Eigen::VectorXd& weight,
    const std::vector<std::string>* col_names = nullptr,
    std::vector<std::string>* warnings = nullptr);

TslsFit fit_tsls(const StackedDesign& design);

}  // namespace ssov
