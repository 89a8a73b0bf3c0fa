#include "ssov/long_panel.hpp"

#include <cmath>

namespace ssov {

ScoreDecomposition decompose_score(const PanelDataset& ds, const TslsFit& fit) {
  if (ds.T < 2)
    throw ValidationError("long-panel decomposition needs T >= 2");
  if (!ds.shares_match_shocks())
    throw ValidationError("long-panel decomposition needs native-level shares");
  if (fit.eps_hat.size() != static_cast<Eigen::Index>(ds.n) * ds.T)
    throw ValidationError("fit does not match dataset");

  ScoreDecomposition dec;
  dec.n = ds.n;
  dec.T = ds.T;
  dec.zeta_hat.setZero(ds.T, ds.p);
  dec.nu_hat.setZero(ds.n, ds.T);
  dec.ts_series.setZero(ds.T);

  // eps by (i, t); stacking is unit-major.
  Eigen::MatrixXd eps(ds.n, ds.T);
  for (int i = 0; i < ds.n; ++i)
    for (int t = 0; t < ds.T; ++t)
      eps(i, t) = fit.eps_hat(static_cast<Eigen::Index>(i) * ds.T + t);

  for (int t = 0; t < ds.T; ++t) {
    dec.zeta_hat.row(t) =
        (ds.s_z[t].array().colwise() * eps.col(t).array()).colwise().mean();
    dec.ts_series(t) = dec.zeta_hat.row(t).dot(ds.shock_z.row(t));
    dec.nu_hat.col(t) = ds.z.col(t).cwiseProduct(eps.col(t)).array() -
                        dec.ts_series(t);
  }
  dec.d_hat = ds.x.cwiseProduct(ds.z).sum() /
              (static_cast<double>(ds.n) * ds.T);
  return dec;
}

double bartlett_hac_variance(const Eigen::VectorXd& series, int bandwidth) {
  const int T = static_cast<int>(series.size());
  if (T < 2) throw ValidationError("HAC variance needs T >= 2");
  if (bandwidth < 0 || bandwidth >= T)
    throw ValidationError("HAC bandwidth out of range");
  Eigen::VectorXd a = series.array() - series.mean();
  double v = a.squaredNorm() / T;
  for (int l = 1; l <= bandwidth; ++l) {
    double gamma = 0.0;
    for (int t = l; t < T; ++t) gamma += a(t) * a(t - l);
    gamma /= T;
    v += 2.0 * (1.0 - static_cast<double>(l) / (bandwidth + 1)) * gamma;
  }
  return v;
}

LongPanelVariance longpanel_se(const ScoreDecomposition& dec, int bandwidth) {
  LongPanelVariance out;
  const int T = dec.T;
  const int n = dec.n;
  out.hac_bandwidth =
      bandwidth < 0 ? static_cast<int>(std::floor(1.3 * std::cbrt(T)))
                    : bandwidth;
  out.hac_bandwidth = std::min(out.hac_bandwidth, T - 1);
  out.var_zeta = bartlett_hac_variance(dec.ts_series, out.hac_bandwidth);
  double mean_nu = dec.nu_hat.mean();
  out.var_nu = (dec.nu_hat.array() - mean_nu).square().sum() /
               (static_cast<double>(n) * T);
  if (dec.d_hat == 0.0) throw NumericalError("zero score denominator");
  out.se_beta = std::sqrt((out.var_zeta / T +
                           out.var_nu / (static_cast<double>(n) * T))) /
                std::abs(dec.d_hat);
  out.small_t_warning = T < 10;
  return out;
}

}  // namespace ssov
