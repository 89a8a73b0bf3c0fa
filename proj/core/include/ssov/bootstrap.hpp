#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ssov/common.hpp"

namespace ssov {

enum class WeightScheme { gaussian, rademacher, mammen, multinomial };

std::string to_string(WeightScheme s);
WeightScheme weight_scheme_from_string(const std::string& s);

struct BootstrapConfig {
  int B = 1000;
  WeightScheme scheme = WeightScheme::gaussian;
  double alpha = 0.05;
  std::uint64_t seed = 0;

  void check() const {
    if (B < 1) throw ValidationError("bootstrap draw count must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0))
      throw ValidationError("alpha must lie in (0,1)");
  }
};

// Estimated influence contributions, already studentized: psi_hat(c, j) is
// the cluster-c contribution to moment j divided by sigma_hat(j). Rows index
// the effective observations (clusters for the shares test, sector clusters
// for the shocks test).
struct InfluenceMatrix {
  Eigen::MatrixXd psi_hat;    // b_eff x q
  Eigen::VectorXd sigma_hat;  // q
  Eigen::VectorXd raw_stats;  // q, studentized moment sums
  std::vector<std::string> labels;   // q
  std::vector<std::string> dropped;  // degenerate moments (sigma == 0)

  int b_eff() const { return static_cast<int>(psi_hat.rows()); }
  int q() const { return static_cast<int>(psi_hat.cols()); }

  void check() const {
    if (q() < 1) throw ValidationError("influence matrix has no moments");
    if (b_eff() < 2)
      throw ValidationError("need at least 2 effective observations");
    if (!psi_hat.allFinite() || !sigma_hat.allFinite() ||
        !raw_stats.allFinite())
      throw NumericalError("non-finite influence contributions");
    if ((sigma_hat.array() <= 0.0).any())
      throw NumericalError("non-positive moment scale");
  }
};

// One multiplier draw: gaussian N(0,1); rademacher +/-1; mammen two-point
// {(1-sqrt5)/2, (1+sqrt5)/2} with probabilities ((sqrt5+1)/(2 sqrt5),
// (sqrt5-1)/(2 sqrt5)); multinomial(b_eff, uniform) counts.
Eigen::VectorXd draw_weights(WeightScheme scheme, int b_eff,
                             std::mt19937_64& rng);

// max_j | sum_i omega_i (psi_ij - mean_j psi) | with each column demeaned by
// its own sample mean over i.
double bootstrap_max_stat(const Eigen::MatrixXd& psi,
                          const Eigen::VectorXd& omega);

struct QuantileResult {
  double c_hat = 0.0;
  double p_value = 1.0;
  bool reject = false;
};

// c_hat is the ceil((1-alpha) B)-th order statistic of t_star (the inf over
// the empirical law); p = (1 + #{b : t_star_b >= t_n}) / (B + 1);
// reject iff t_n > c_hat.
QuantileResult critical_value_and_pvalue(double t_n,
                                         const std::vector<double>& t_star,
                                         double alpha);

struct BootstrapRun {
  double t_n = 0.0;
  double c_hat = 0.0;
  double p_value = 1.0;
  bool reject = false;
  std::vector<double> t_star;
};

// Full engine run: T_n = max_j |raw_stats_j|, B multiplier replications with
// per-replication substreams of cfg.seed, quantile and p-value. Identical
// output for any worker count.
BootstrapRun run_max_test(const InfluenceMatrix& infl,
                          const BootstrapConfig& cfg, int threads = 1);

// All 2^b_eff Rademacher sign assignments, index = bit pattern (bit i set
// means omega_i = +1). Exact finite law used by the stratified small-sample
// path and the enumeration tests. Requires b_eff <= 26.
std::vector<double> exhaustive_rademacher_stats(const Eigen::MatrixXd& psi);

}  // namespace ssov
