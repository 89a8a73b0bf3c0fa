#include "ssov/bootstrap.hpp"

#include <algorithm>
#include <cmath>

namespace ssov {

std::string to_string(WeightScheme s) {
  switch (s) {
    case WeightScheme::gaussian: return "gaussian";
    case WeightScheme::rademacher: return "rademacher";
    case WeightScheme::mammen: return "mammen";
    case WeightScheme::multinomial: return "multinomial";
  }
  return "?";
}

WeightScheme weight_scheme_from_string(const std::string& s) {
  if (s == "gaussian") return WeightScheme::gaussian;
  if (s == "rademacher") return WeightScheme::rademacher;
  if (s == "mammen") return WeightScheme::mammen;
  if (s == "multinomial") return WeightScheme::multinomial;
  throw ValidationError("unknown weight scheme '" + s + "'");
}

Eigen::VectorXd draw_weights(WeightScheme scheme, int b_eff,
                             std::mt19937_64& rng) {
  Eigen::VectorXd w(b_eff);
  switch (scheme) {
    case WeightScheme::gaussian: {
      std::normal_distribution<double> nd(0.0, 1.0);
      for (int i = 0; i < b_eff; ++i) w(i) = nd(rng);
      break;
    }
    case WeightScheme::rademacher: {
      std::bernoulli_distribution bd(0.5);
      for (int i = 0; i < b_eff; ++i) w(i) = bd(rng) ? 1.0 : -1.0;
      break;
    }
    case WeightScheme::mammen: {
      const double sqrt5 = std::sqrt(5.0);
      const double lo = (1.0 - sqrt5) / 2.0;
      const double hi = (1.0 + sqrt5) / 2.0;
      const double p_lo = (sqrt5 + 1.0) / (2.0 * sqrt5);
      std::uniform_real_distribution<double> ud(0.0, 1.0);
      for (int i = 0; i < b_eff; ++i) w(i) = ud(rng) < p_lo ? lo : hi;
      break;
    }
    case WeightScheme::multinomial: {
      w.setZero();
      std::uniform_int_distribution<int> ui(0, b_eff - 1);
      for (int i = 0; i < b_eff; ++i) w(ui(rng)) += 1.0;
      break;
    }
  }
  return w;
}

double bootstrap_max_stat(const Eigen::MatrixXd& psi,
                          const Eigen::VectorXd& omega) {
  if (psi.rows() != omega.size())
    throw ValidationError("bootstrap_max_stat: dimension mismatch");
  // sum_i w_i (psi_ij - mean_j) = (psi' w)_j - mean_j * sum(w)
  Eigen::RowVectorXd colmean = psi.colwise().mean();
  Eigen::RowVectorXd t = omega.transpose() * psi - colmean * omega.sum();
  return t.cwiseAbs().maxCoeff();
}

QuantileResult critical_value_and_pvalue(double t_n,
                                         const std::vector<double>& t_star,
                                         double alpha) {
  if (t_star.empty()) throw ValidationError("empty bootstrap sample");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ValidationError("alpha must lie in (0,1)");
  const std::size_t B = t_star.size();
  std::vector<double> sorted(t_star);
  std::sort(sorted.begin(), sorted.end());
  std::size_t k = static_cast<std::size_t>(
      std::ceil((1.0 - alpha) * static_cast<double>(B)));
  k = std::min(std::max<std::size_t>(k, 1), B);
  QuantileResult qr;
  qr.c_hat = sorted[k - 1];
  std::size_t count = 0;
  for (double v : t_star)
    if (v >= t_n) ++count;
  qr.p_value = static_cast<double>(1 + count) / static_cast<double>(B + 1);
  qr.reject = t_n > qr.c_hat;
  return qr;
}

BootstrapRun run_max_test(const InfluenceMatrix& infl,
                          const BootstrapConfig& cfg, int threads) {
  infl.check();
  cfg.check();
  BootstrapRun run;
  run.t_n = infl.raw_stats.cwiseAbs().maxCoeff();
  run.t_star.assign(cfg.B, 0.0);
  const Eigen::MatrixXd& psi = infl.psi_hat;
  const int b_eff = infl.b_eff();
  parallel_for(cfg.B, threads, [&](std::int64_t b) {
    std::mt19937_64 rng = substream_engine(cfg.seed, static_cast<std::uint64_t>(b));
    Eigen::VectorXd omega = draw_weights(cfg.scheme, b_eff, rng);
    run.t_star[b] = bootstrap_max_stat(psi, omega);
  });
  QuantileResult qr = critical_value_and_pvalue(run.t_n, run.t_star, cfg.alpha);
  run.c_hat = qr.c_hat;
  run.p_value = qr.p_value;
  run.reject = qr.reject;
  return run;
}

std::vector<double> exhaustive_rademacher_stats(const Eigen::MatrixXd& psi) {
  const int b = static_cast<int>(psi.rows());
  if (b > 26) throw ValidationError("exhaustive enumeration needs b_eff <= 26");
  const int q = static_cast<int>(psi.cols());
  Eigen::MatrixXd centered =
      psi.rowwise() - Eigen::RowVectorXd(psi.colwise().mean());
  const std::size_t total = std::size_t{1} << b;
  std::vector<double> stats(total);

  // Plain ascending-index summation per sign pattern: reproducible term
  // order so enumeration oracles can match bit for bit.
  for (std::size_t mask = 0; mask < total; ++mask) {
    double best = 0.0;
    for (int j = 0; j < q; ++j) {
      double s = 0.0;
      for (int i = 0; i < b; ++i) {
        double omega = (mask >> i) & 1 ? 1.0 : -1.0;
        s += omega * centered(i, j);
      }
      best = std::max(best, std::abs(s));
    }
    stats[mask] = best;
  }
  return stats;
}

}  // namespace ssov
