#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "ssov/common.hpp"

namespace ssov {

// Column-name schema for CSV ingestion. Logical roles map to header names;
// share columns are discovered as `share_prefix` + sector code.
struct CsvSchema {
  std::string unit = "unit";
  std::string period = "period";
  std::string outcome = "y";
  std::string regressor = "x";
  std::vector<std::string> controls;
  bool add_intercept = false;
  std::string weight = "weight";
  std::string cluster = "cluster";
  std::string share_prefix = "sh_";
  std::string share_x_prefix;  // empty: no regressor shares
  std::vector<std::string> sector_codes;  // empty: derive from header order
  int sector_cluster_digits = 3;
  // Shock file. "long": one row per (period, sector) with value columns.
  // "wide": one row per period, one column per sector code.
  std::string shock_layout = "long";
  std::string shock_period = "period";
  std::string shock_sector = "sector";
  std::string shock_z = "z";
  std::string shock_x;  // empty: no regressor shocks
};

// Balanced panel of n units over T periods with p sectors and d controls.
// Shares may be time-varying; shocks are per (period, sector). The Bartik
// instrument z is computed at construction from the native-level shares and
// is carried through share aggregation unchanged (the instrument always
// lives at the original sector level, only the moment shares collapse).
// Immutable after construction; safe to share across threads.
struct PanelDataset {
  int n = 0, T = 0, p = 0, d = 0;

  Eigen::MatrixXd y;  // n x T
  Eigen::MatrixXd x;  // n x T
  std::vector<Eigen::MatrixXd> w;    // T matrices of n x d
  std::vector<Eigen::MatrixXd> s_z;  // T matrices of n x p
  std::vector<Eigen::MatrixXd> s_x;  // optional, same shape as s_z
  Eigen::MatrixXd shock_z;  // T x p_native
  Eigen::MatrixXd shock_x;  // optional, T x p_native
  Eigen::MatrixXd z;        // n x T, S_z' shock_z at the native level
  Eigen::MatrixXd reg_weight;  // n x T, strictly positive

  std::vector<std::string> obs_cluster;     // n*T, index i*T + t
  std::vector<std::string> sector_cluster;  // p
  std::vector<std::string> sector_code;     // p
  std::vector<std::string> unit_id;         // n
  std::vector<std::string> period_id;       // T
  std::vector<std::string> control_names;   // d

  int sector_cluster_digits = 3;
  int aggregated_level = 0;  // 0 = native sector codes

  bool has_regressor_shares() const { return !s_x.empty(); }
  bool has_regressor_shocks() const { return shock_x.size() > 0; }
  // After aggregate_sic the share tensor no longer aligns with the shock
  // columns; operations that contract shares against shocks must check this.
  bool shares_match_shocks() const { return aggregated_level == 0; }

  const std::string& cluster_of(int i, int t) const {
    return obs_cluster[static_cast<std::size_t>(i) * T + t];
  }
};

// Row-stacked view of the panel: unit-major, then period (row r = i*T + t).
struct StackedDesign {
  int n = 0, T = 0, p = 0, d = 0;
  Eigen::VectorXd y, x, z, weight;  // nT
  Eigen::MatrixXd W;                // nT x d
  Eigen::MatrixXd S;                // nT x p
  std::vector<std::string> obs_cluster;  // nT
  std::vector<int> unit_index, period_index;  // row -> (i, t)

  Eigen::Index rows() const { return y.size(); }
};

// Loads a panel from an observation CSV plus a shock CSV, validating every
// dataset invariant. Errors name the offending column, cell, or code.
PanelDataset load_csv(const std::string& obs_path, const std::string& shock_path,
                      const CsvSchema& schema);

// Writes the dataset back to the same two-file layout with full precision
// (17 significant digits, so load_csv(save_csv(ds)) is bit-exact).
void save_csv(const PanelDataset& ds, const std::string& obs_path,
              const std::string& shock_path, const CsvSchema& schema);

// Re-checks all invariants on an assembled dataset; throws ValidationError.
void validate(const PanelDataset& ds);

// Collapses share columns to `level`-digit sector-code prefixes by summation.
// Shocks and the stored instrument stay at the native level: aggregation
// applies to the moment vector S, not to Z. sector_cluster is recomputed
// from the new prefixes.
PanelDataset aggregate_sic(const PanelDataset& ds, int level);

// Stacks the panel and carries the stored instrument through.
StackedDesign stack_panel(const PanelDataset& ds);

// Restriction of a stacked design to the rows of one period.
StackedDesign restrict_to_period(const StackedDesign& design, int t);

// Maps cluster labels to dense ids in order of first appearance.
std::vector<int> cluster_ids(const std::vector<std::string>& labels,
                             int* n_clusters);

}  // namespace ssov
