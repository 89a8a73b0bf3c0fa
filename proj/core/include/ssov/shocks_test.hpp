#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "ssov/panel_data.hpp"
#include "ssov/test_result.hpp"
#include "ssov/tsls.hpp"

namespace ssov {

// User-chosen moment functions g_j(eps, W_i, S_i) with analytic derivatives
// in eps. Built-ins depend on eps only but the interface keeps the general
// signature.
struct MomentFunctionSet {
  using Fn = std::function<double(int j, double eps,
                                  const Eigen::Ref<const Eigen::VectorXd>& w_row,
                                  const Eigen::Ref<const Eigen::VectorXd>& s_row)>;
  int q = 0;
  std::vector<std::string> labels;
  Fn eval;
  Fn deval;  // d g_j / d eps
};

// Twenty moments: g_1 = eps^2 and g_2..g_20 the Logit pdf centered at
// -2.25, -2.00, ..., 2.00, 2.25.
MomentFunctionSet logit_moment_set();

// Moment set from a JSON spec: {"moments": [{"kind": "square"} |
// {"kind": "logit_pdf", "center": a}, ...]}.
MomentFunctionSet moment_set_from_json(const std::string& json_text);

enum class EMethod { ridge, projection };

// Estimate of the demeaned shock E_t = Z_t - E[Z_t | G_n], one row per
// period at the native sector level.
struct ShockResidual {
  Eigen::MatrixXd e_hat;  // T x p
  EMethod method = EMethod::ridge;
  double lambda = 0.0;
  Eigen::MatrixXd q_matrix;  // projection only, p x k
};

// Per-period penalized cross-sectional regression
//   e_hat_t = (sum_i S_it S_it' + lambda I)^{-1} sum_i S_it (Z_it - W_it' pi).
// lambda = 0 requires a numerically nonsingular Gram matrix and otherwise
// errors with a recommendation to use a positive penalty.
ShockResidual ridge_shock_residual(const PanelDataset& ds,
                                   const Eigen::VectorXd& pi_hat,
                                   double lambda);

// e_hat_t = Z_t - Q (Q'Q)^{-1} Q' Z_t for an observed p x k matrix Q.
ShockResidual projection_shock_residual(const Eigen::MatrixXd& shock_z,
                                        const Eigen::MatrixXd& Q);

// Influence rows indexed by (sector, period), aggregated to sector clusters
// pooling periods:
//   delta_j = (sum w W W')^{-1} sum w W g_j
//   kappa_j = (sum w zdot x)^{-1} sum w zdot x dg_j
//   U_{(s,t),j} = e_hat(t,s) * sum_i w_it S_its (g_j(e_it) - W_it' delta_j
//                                                - e_it kappa_j).
InfluenceMatrix shocks_influence(const PanelDataset& ds,
                                 const StackedDesign& design,
                                 const TslsFit& fit,
                                 const MomentFunctionSet& g,
                                 const ShockResidual& e_hat);

struct ShocksTestOptions {
  MomentFunctionSet g;  // default-constructed: logit_moment_set()
  EMethod e_method = EMethod::ridge;
  double lambda = 1e-5;
  Eigen::MatrixXd projection_q;  // required when e_method == projection
  BootstrapConfig bootstrap;
  int threads = 1;
};

// Full pipeline: TSLS -> pi_hat -> shock residual -> influence -> bootstrap.
// The same shock-residual method and penalty feed both the influence rows
// and the statistic; the result records lambda.
TestResult run_shocks_test(const PanelDataset& ds, const ShocksTestOptions& opts);

}  // namespace ssov
