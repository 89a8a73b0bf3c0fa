#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "ssov/panel_data.hpp"
#include "ssov/shares_test.hpp"
#include "ssov/shocks_test.hpp"
#include "ssov/tsls.hpp"

namespace ssov {

// Moulton-style group shock model fitted to the base residuals:
//   eps_it = eta_c + zeta_it,
//   E[eta_c^2]  = a_eta  + s_eta  sum_{(i,t) in c} |S_zit|^2
//   E[zeta_it^2] = a_zeta + s_zeta |S_zit|^2,
// with simulated variances floored at zero.
struct SharesDgp {
  double a_eta = 0.0, s_eta = 0.0, a_zeta = 0.0, s_zeta = 0.0;
  double beta_hat = 0.0;
  Eigen::VectorXd gamma_hat;
  PanelDataset base;
  std::uint64_t seed = 0;
};

// Two least-squares fits over within-cluster residual cross-products and
// squared residuals. Needs at least one cluster containing a pair.
SharesDgp fit_shares_dgp(const PanelDataset& ds, const TslsFit& fit);

// One synthetic dataset: controls, shocks and weights fixed; shares
// resampled with replacement per period (jointly for S_x and S_z);
// instruments rebuilt; outcome = X b + W'g + V_c sd_eta + U sd_zeta with
// fresh Gaussian draws. Bit-identical for identical (seed, replication).
PanelDataset simulate_shares_dgp(const SharesDgp& dgp, int replication);

// Shock-exogenous design in which E[Z*|G_n] = W' Gamma holds by
// construction through shocks that are conditionally centered at Zw Gamma,
// with controls rebuilt as W_it = Zw_t' S_zit.
struct ShocksDgp {
  std::vector<Eigen::MatrixXd> shock_w;  // T matrices p x d (ridge fits)
  Eigen::VectorXd gamma_coef;            // Gamma, d
  Eigen::MatrixXd e_cond;                // T x p, Zw Gamma
  double sigma_eta = 0.0, sigma_zeta = 0.0;  // shock cluster/idiosyncratic SDs
  double alpha_hat = 0.0, kappa_hat = 0.0, sigma_xi = 0.0;  // shock_x | shock_z
  double beta_hat = 0.0;
  Eigen::VectorXd gamma_hat;
  Eigen::MatrixXd resid;   // n x T, residuals of the refit with W replaced
  Eigen::VectorXd beta_i;  // optional per-unit effects; empty = homogeneous
  PanelDataset base;       // base with controls replaced by W_hat
  double lambda_fit = 0.1;
  std::uint64_t seed = 0;
};

// Ridge regression of each control coordinate on the shares (penalty
// lambda_fit), Gamma by least squares, common-shock variance components at
// the sector-cluster level, and a first-stage regression of the regressor
// shocks on the instrument shocks.
ShocksDgp fit_shocks_dgp(const PanelDataset& ds, double lambda_fit = 0.1);

PanelDataset simulate_shocks_dgp(const ShocksDgp& dgp, int replication);

struct RejectionTable {
  std::string label;
  int reps = 0;
  double rej01 = 0.0, rej05 = 0.0, rej10 = 0.0;
  double se01 = 0.0, se05 = 0.0, se10 = 0.0;
  int degenerate = 0;  // replications reporting all moments degenerate
};

RejectionTable rejection_study(const SharesDgp& dgp,
                               const SharesTestOptions& opts, int reps,
                               int threads = 1);
RejectionTable rejection_study(const ShocksDgp& dgp,
                               const ShocksTestOptions& opts, int reps,
                               int threads = 1);

std::string format_rejection_table(const std::vector<RejectionTable>& rows);

// Deterministic synthetic base panels so the harness runs without any
// external dataset. Sector codes are 4-digit strings whose 2- and 3-digit
// prefixes define the aggregation and clustering structure.
struct SyntheticBaseParams {
  int n = 500, T = 2, p = 40;
  int obs_clusters = 48;
  int sectors_per_code_group = 1;   // sectors sharing a 3-digit prefix
  int code_groups_per_two_digit = 2;
  double share_concentration = 0.5;  // gamma shape of raw share draws
  double share_mass_lo = 0.55, share_mass_hi = 0.95;  // row-sum target
  double beta = 1.0;
  double gamma_intercept = 0.5, gamma_control = 0.25;
  bool bartik_control = false;  // control = S' Zw instead of iid normal
  double shock_cluster_sd = 0.0;  // common component within 3-digit cluster
  double shock_idio_sd = 1.0;
  double fs_alpha = 0.1, fs_kappa = 0.8, fs_xi_sd = 0.5;
  double eps_cluster_sd = 0.2;
  double eps_idio_a = 0.25, eps_idio_s = 2.0;  // zeta var = a + s |S|^2
  std::uint64_t seed = 20260801;
};

PanelDataset make_synthetic_base(const SyntheticBaseParams& params);
SyntheticBaseParams builtin_shares_base_params();  // n=500, T=2, p=40, 48 cl
SyntheticBaseParams builtin_shocks_base_params();  // n=300, T=2, p=100

}  // namespace ssov
