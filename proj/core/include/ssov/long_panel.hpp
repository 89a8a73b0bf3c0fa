#pragma once

#include <Eigen/Dense>

#include "ssov/panel_data.hpp"
#include "ssov/tsls.hpp"

namespace ssov {

// Split of the TSLS score into a time-series component driven by the
// cross-sectional mean of S e and a mean-zero panel remainder:
//   zeta_hat(t)  = (1/n) sum_i S_it e_it          (per sector)
//   ts_series(t) = shock_t' zeta_hat(t)
//   nu_hat(i,t)  = shock_t' (S_it e_it - zeta_hat(t)) = Z_it e_it - ts_series(t)
//   d_hat        = (1/nT) sum_it X_it Z_it.
struct ScoreDecomposition {
  Eigen::MatrixXd zeta_hat;  // T x p
  Eigen::MatrixXd nu_hat;    // n x T
  Eigen::VectorXd ts_series; // T
  double d_hat = 0.0;
  int n = 0, T = 0;
};

ScoreDecomposition decompose_score(const PanelDataset& ds, const TslsFit& fit);

struct LongPanelVariance {
  double var_zeta = 0.0;  // Bartlett HAC long-run variance of ts_series
  double var_nu = 0.0;    // pooled sample variance of nu contributions
  double se_beta = 0.0;   // (1/|d_hat|) sqrt(var_zeta/T + var_nu/(nT))
  int hac_bandwidth = 0;
  bool small_t_warning = false;  // T < 10
};

// bandwidth < 0 selects floor(1.3 T^{1/3}).
LongPanelVariance longpanel_se(const ScoreDecomposition& dec, int bandwidth = -1);

// Bartlett-kernel long-run variance of a (demeaned) series:
// gamma_0 + 2 sum_{l<=L} (1 - l/(L+1)) gamma_l.
double bartlett_hac_variance(const Eigen::VectorXd& series, int bandwidth);

}  // namespace ssov
