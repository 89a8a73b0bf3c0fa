#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ssov/panel_data.hpp"
#include "ssov/test_result.hpp"
#include "ssov/tsls.hpp"

namespace ssov {

// Which moment set to build from the panel: one block of p moments per
// period, a single period's block, or sector moments summed across periods
// before studentization.
enum class PeriodSelection { all_periods, single_period, pooled_time };

struct SharesTestOptions {
  int sic_level = 0;  // 0: native sector codes
  PeriodSelection periods = PeriodSelection::all_periods;
  int period_index = 0;        // for single_period
  bool refit_per_period = false;  // single_period only; default pooled fit
  BootstrapConfig bootstrap;
  int threads = 1;
};

// Influence estimate for moment columns M (rows aligned with the design):
//   U_rj = w_r M_rj e_r - (sum_k w_k M_kj (x_k, W_k')) B^{-1} w_r A_r e_r,
// with A_r = (Z_r, W_r')' and B = sum_k w_k A_k (x_k, W_k'). Rows are then
// summed within obs clusters and studentized by the cluster-level standard
// deviation. Moments with zero scale are dropped and recorded.
InfluenceMatrix shares_influence(const StackedDesign& design,
                                 const TslsFit& fit,
                                 const std::vector<std::string>& cluster,
                                 const Eigen::MatrixXd& moments,
                                 const std::vector<std::string>& labels);

// Convenience overload: moments are the design's own share columns.
InfluenceMatrix shares_influence(const StackedDesign& design,
                                 const TslsFit& fit,
                                 const std::vector<std::string>& cluster);

// Full pipeline: optional SIC aggregation of the moment shares, pooled TSLS
// fit (instrument stays at the native level), per-option moment assembly,
// multiplier bootstrap.
TestResult run_shares_test(const PanelDataset& ds,
                           const SharesTestOptions& opts);

}  // namespace ssov
