#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "ssov/panel_data.hpp"
#include "ssov/shocks_test.hpp"

namespace ssov {

// Pairwise correlation of the control-residualized share columns. High
// correlations rule out positive TSLS weights under share-exogenous
// heterogeneous effects; the flag is advisory, never a hard failure.
struct ShareCorrPair {
  std::string code_a, code_b;
  double corr = 0.0;
};
struct ShareCorrReport {
  double threshold = 0.1;
  double max_abs_corr = 0.0;
  int pairs_above = 0;
  bool flagged = false;
  int skipped_degenerate = 0;  // share columns with zero residual variance
  std::vector<ShareCorrPair> top_pairs;  // largest |corr|, capped at 10
};
ShareCorrReport share_corr_check(const PanelDataset& ds, double threshold = 0.1);

// A positive per-observation transform of the controls.
struct ObsTransform {
  std::string label;
  std::function<double(const Eigen::Ref<const Eigen::VectorXd>& w_row)> f;
};
// A positive sector-vector transform of (shares, controls).
struct SectorTransform {
  std::string label;
  std::function<Eigen::VectorXd(const Eigen::Ref<const Eigen::VectorXd>& s_row,
                                const Eigen::Ref<const Eigen::VectorXd>& w_row)>
      f;
};

struct SignDiagnosticReport {
  std::vector<std::pair<std::string, double>> stats;  // label, signed covariance
  bool sign_agrees = true;
  // Shocks variant only: the fitted first-stage covariance, reported for
  // reference alongside the transform statistics.
  double first_stage_cov = 0.0;
  bool has_first_stage = false;
};

// Built-ins: constant one, exp of a standardized control, and a positive
// affine function of that control. Falls back to the constant alone when no
// non-degenerate control exists.
std::vector<ObsTransform> default_obs_transforms(const PanelDataset& ds);
std::vector<SectorTransform> default_sector_transforms(const PanelDataset& ds);

// sign of sum_it w X (S_dot' Ztilde) across transform choices
// Ztilde_j = f(W) shock_j, with S_dot the control-residualized shares.
SignDiagnosticReport sign_diagnostic_shares(
    const PanelDataset& ds, const std::vector<ObsTransform>& transforms);

// sign of sum_it w X (e_hat_t' f(S,W)) across transform choices, with the
// estimated shock residual standing in for the demeaned shocks.
SignDiagnosticReport sign_diagnostic_shocks(
    const PanelDataset& ds, const ShockResidual& e_hat,
    const std::vector<SectorTransform>& transforms);

// Per-cluster pairwise covariances of the shock residual across periods.
// Negative within-cluster covariances rule out positive TSLS weights under
// shock-exogenous heterogeneous effects.
struct ClusterCovEntry {
  std::string cluster;
  int sectors = 0;
  double min_cov = 0.0;
  int negative_pairs = 0;
};
struct ClusterCovReport {
  std::vector<ClusterCovEntry> clusters;  // clusters with >= 2 sectors
  int skipped_singletons = 0;
  bool any_flagged = false;
};
ClusterCovReport within_cluster_shock_cov(
    const ShockResidual& e_hat, const std::vector<std::string>& sector_cluster);

// First-stage types and the conditional variance of the exogenous primitive,
// for computing the heterogeneous-effects weights from known quantities.
struct PrimitiveSpec {
  enum class Regime { shares, shocks };
  Regime regime = Regime::shares;
  std::vector<Eigen::VectorXd> lambda;  // n diagonals, each of length p
  Eigen::MatrixXd var_matrix;           // p x p: Var{S|W} or Var{Z|G_n}
  void check() const;
};

// omega_i = r_i' (Lambda_i V) r_i / sum_j r_j' (Lambda_j V) r_j, where r_i
// is row i of `realization` (a single row is broadcast to every unit: the
// common shock vector in the shares regime). Sums to one by construction.
Eigen::VectorXd weights_from_primitives(const PrimitiveSpec& spec,
                                        const Eigen::MatrixXd& realization);

}  // namespace ssov
