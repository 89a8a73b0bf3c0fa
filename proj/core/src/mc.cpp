#include "ssov/mc.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

namespace ssov {

namespace {

// Minimal-norm least squares of y on [1, r]: rank-deficient regressors
// (e.g. a single cluster) resolve to the pseudo-inverse solution.
std::pair<double, double> tiny_ls(const std::vector<double>& r,
                                  const std::vector<double>& y) {
  Eigen::MatrixXd X(r.size(), 2);
  Eigen::VectorXd b(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = r[i];
    b(i) = y[i];
  }
  Eigen::VectorXd coef =
      X.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(b);
  return {coef(0), coef(1)};
}

Eigen::MatrixXd share_sq_norms(const PanelDataset& ds) {
  Eigen::MatrixXd out(ds.n, ds.T);
  for (int t = 0; t < ds.T; ++t)
    out.col(t) = ds.s_z[t].rowwise().squaredNorm();
  return out;
}

Eigen::MatrixXd eps_by_unit_period(const PanelDataset& ds,
                                   const Eigen::VectorXd& eps_flat) {
  Eigen::MatrixXd eps(ds.n, ds.T);
  for (int i = 0; i < ds.n; ++i)
    for (int t = 0; t < ds.T; ++t)
      eps(i, t) = eps_flat(static_cast<Eigen::Index>(i) * ds.T + t);
  return eps;
}

void rebuild_instrument(PanelDataset& ds) {
  for (int t = 0; t < ds.T; ++t)
    ds.z.col(t) = ds.s_z[t] * ds.shock_z.row(t).transpose();
}

Eigen::MatrixXd rebuild_regressor(const PanelDataset& ds) {
  Eigen::MatrixXd x(ds.n, ds.T);
  for (int t = 0; t < ds.T; ++t)
    x.col(t) = ds.s_x[t] * ds.shock_x.row(t).transpose();
  return x;
}

constexpr std::uint64_t kBootDomain = 0xB007B007ULL;

}  // namespace

SharesDgp fit_shares_dgp(const PanelDataset& ds, const TslsFit& fit) {
  validate(ds);
  if (fit.eps_hat.size() != static_cast<Eigen::Index>(ds.n) * ds.T)
    throw ValidationError("fit does not match dataset");

  int n_clusters = 0;
  std::vector<int> cl = cluster_ids(ds.obs_cluster, &n_clusters);
  std::vector<std::vector<std::pair<int, int>>> members(n_clusters);
  for (int i = 0; i < ds.n; ++i)
    for (int t = 0; t < ds.T; ++t)
      members[cl[static_cast<std::size_t>(i) * ds.T + t]].emplace_back(i, t);

  bool any_pair = false;
  for (const auto& m : members)
    if (m.size() >= 2) any_pair = true;
  if (!any_pair)
    throw ValidationError("no cluster with a within pair");

  Eigen::MatrixXd eps = eps_by_unit_period(ds, fit.eps_hat);
  Eigen::MatrixXd sq = share_sq_norms(ds);
  Eigen::VectorXd cluster_mass(n_clusters);
  for (int c = 0; c < n_clusters; ++c) {
    double m = 0.0;
    for (auto [i, t] : members[c]) m += sq(i, t);
    cluster_mass(c) = m;
  }

  // Cross-product regression over ordered within-cluster pairs.
  std::vector<double> reg1, y1;
  for (int c = 0; c < n_clusters; ++c)
    for (std::size_t a = 0; a < members[c].size(); ++a)
      for (std::size_t b = 0; b < members[c].size(); ++b) {
        if (a == b) continue;
        auto [ia, ta] = members[c][a];
        auto [ib, tb] = members[c][b];
        reg1.push_back(cluster_mass(c));
        y1.push_back(eps(ia, ta) * eps(ib, tb));
      }

  SharesDgp dgp;
  std::tie(dgp.a_eta, dgp.s_eta) = tiny_ls(reg1, y1);

  // Squared-residual regression net of the fitted cluster variance.
  std::vector<double> reg2, y2;
  for (int c = 0; c < n_clusters; ++c) {
    double eta_var = std::max(dgp.a_eta + dgp.s_eta * cluster_mass(c), 0.0);
    for (auto [i, t] : members[c]) {
      reg2.push_back(sq(i, t));
      y2.push_back(eps(i, t) * eps(i, t) - eta_var);
    }
  }
  std::tie(dgp.a_zeta, dgp.s_zeta) = tiny_ls(reg2, y2);

  dgp.beta_hat = fit.beta;
  dgp.gamma_hat = fit.gamma_s;
  dgp.base = ds;
  return dgp;
}

PanelDataset simulate_shares_dgp(const SharesDgp& dgp, int replication) {
  const PanelDataset& base = dgp.base;
  std::mt19937_64 rng =
      substream_engine(dgp.seed, static_cast<std::uint64_t>(replication));

  PanelDataset out = base;
  // Step 2: per-period joint resampling of (S_x, S_z) rows.
  std::uniform_int_distribution<int> pick(0, base.n - 1);
  for (int t = 0; t < base.T; ++t) {
    Eigen::MatrixXd sz(base.n, base.p), sx;
    bool has_x = base.has_regressor_shares();
    if (has_x) sx.resize(base.n, base.p);
    for (int i = 0; i < base.n; ++i) {
      int k = pick(rng);
      sz.row(i) = base.s_z[t].row(k);
      if (has_x) sx.row(i) = base.s_x[t].row(k);
    }
    out.s_z[t] = std::move(sz);
    if (has_x) out.s_x[t] = std::move(sx);
  }

  // Step 3: rebuild instrument and regressor from the resampled shares.
  rebuild_instrument(out);
  if (base.has_regressor_shares() && base.has_regressor_shocks())
    out.x = rebuild_regressor(out);
  else
    out.x = out.z;  // degenerate designs without regressor shares

  // Step 4: variances from the resampled shares, floored at zero.
  int n_clusters = 0;
  std::vector<int> cl = cluster_ids(out.obs_cluster, &n_clusters);
  Eigen::MatrixXd sq = share_sq_norms(out);
  Eigen::VectorXd cluster_mass = Eigen::VectorXd::Zero(n_clusters);
  for (int i = 0; i < out.n; ++i)
    for (int t = 0; t < out.T; ++t)
      cluster_mass(cl[static_cast<std::size_t>(i) * out.T + t]) += sq(i, t);

  // Step 5: Gaussian cluster and idiosyncratic draws.
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::VectorXd v(n_clusters);
  for (int c = 0; c < n_clusters; ++c) v(c) = nd(rng);
  for (int i = 0; i < out.n; ++i)
    for (int t = 0; t < out.T; ++t) {
      int c = cl[static_cast<std::size_t>(i) * out.T + t];
      double sd_eta =
          std::sqrt(std::max(dgp.a_eta + dgp.s_eta * cluster_mass(c), 0.0));
      double sd_zeta =
          std::sqrt(std::max(dgp.a_zeta + dgp.s_zeta * sq(i, t), 0.0));
      double ctrl = out.d > 0 ? out.w[t].row(i).dot(dgp.gamma_hat) : 0.0;
      out.y(i, t) = out.x(i, t) * dgp.beta_hat + ctrl + v(c) * sd_eta +
                    nd(rng) * sd_zeta;
    }
  return out;
}

ShocksDgp fit_shocks_dgp(const PanelDataset& ds, double lambda_fit) {
  validate(ds);
  if (!ds.has_regressor_shares() || !ds.has_regressor_shocks())
    throw ValidationError("shocks DGP needs both share tensors and shocks");
  if (!ds.shares_match_shocks())
    throw ValidationError("shocks DGP needs native-level shares");
  if (!(lambda_fit > 0.0))
    throw ValidationError("DGP ridge penalty must be positive");

  ShocksDgp dgp;
  dgp.lambda_fit = lambda_fit;

  // Ridge fits of each control coordinate on the shares, per period.
  dgp.shock_w.assign(ds.T, Eigen::MatrixXd(ds.p, ds.d));
  for (int t = 0; t < ds.T; ++t) {
    Eigen::MatrixXd gram = ds.s_z[t].transpose() * ds.s_z[t];
    gram.diagonal().array() += lambda_fit;
    dgp.shock_w[t] =
        gram.ldlt().solve(ds.s_z[t].transpose() * ds.w[t]);
  }

  // Gamma: stacked least squares of shock_z on the fitted shock_w.
  {
    Eigen::MatrixXd A(static_cast<Eigen::Index>(ds.T) * ds.p, ds.d);
    Eigen::VectorXd b(static_cast<Eigen::Index>(ds.T) * ds.p);
    for (int t = 0; t < ds.T; ++t) {
      A.middleRows(static_cast<Eigen::Index>(t) * ds.p, ds.p) = dgp.shock_w[t];
      b.segment(static_cast<Eigen::Index>(t) * ds.p, ds.p) =
          ds.shock_z.row(t).transpose();
    }
    dgp.gamma_coef = A.colPivHouseholderQr().solve(b);
  }
  dgp.e_cond.resize(ds.T, ds.p);
  Eigen::MatrixXd nu(ds.T, ds.p);
  for (int t = 0; t < ds.T; ++t) {
    dgp.e_cond.row(t) = (dgp.shock_w[t] * dgp.gamma_coef).transpose();
    nu.row(t) = ds.shock_z.row(t) - dgp.e_cond.row(t);
  }

  // Common shock model for nu at the sector-cluster level, pairs pooled
  // across periods.
  int n_clusters = 0;
  std::vector<int> cl = cluster_ids(ds.sector_cluster, &n_clusters);
  std::vector<std::vector<int>> members(n_clusters);
  for (int j = 0; j < ds.p; ++j) members[cl[j]].push_back(j);
  double eta_acc = 0.0, sq_acc = 0.0;
  int used = 0;
  for (int c = 0; c < n_clusters; ++c) {
    const auto& sec = members[c];
    const int nc = static_cast<int>(sec.size()) * ds.T;
    if (nc < 2) continue;
    double cross = 0.0, sum = 0.0, sumsq = 0.0;
    for (int t = 0; t < ds.T; ++t)
      for (int j : sec) {
        sum += nu(t, j);
        sumsq += nu(t, j) * nu(t, j);
      }
    cross = sum * sum - sumsq;  // sum over ordered pairs (t,j) != (t~,j~)
    eta_acc += cross / (static_cast<double>(nc) * (nc - 1));
    sq_acc += sumsq / nc;
    ++used;
  }
  if (used == 0)
    throw ValidationError("degenerate sector clusters (no pairs)");
  double var_eta = eta_acc / used;
  double var_zeta = sq_acc / used - var_eta;
  dgp.sigma_eta = std::sqrt(std::max(var_eta, 0.0));
  dgp.sigma_zeta = std::sqrt(std::max(var_zeta, 0.0));

  // Strength of the instrument: shock_x on shock_z.
  {
    const double m = static_cast<double>(ds.T) * ds.p;
    double zbar = ds.shock_z.mean(), xbar = ds.shock_x.mean();
    double szz = (ds.shock_z.array() - zbar).square().sum();
    double szx =
        ((ds.shock_z.array() - zbar) * (ds.shock_x.array() - xbar)).sum();
    if (szz == 0.0) throw NumericalError("constant instrument shocks");
    dgp.kappa_hat = szx / szz;
    dgp.alpha_hat = xbar - dgp.kappa_hat * zbar;
    Eigen::ArrayXXd xi = ds.shock_x.array() - dgp.alpha_hat -
                         dgp.kappa_hat * ds.shock_z.array();
    dgp.sigma_xi = std::sqrt((xi - xi.mean()).square().sum() / m);
  }

  // Refit the model with the controls replaced by W_hat = shock_w' S_z.
  PanelDataset rebuilt = ds;
  for (int t = 0; t < ds.T; ++t)
    rebuilt.w[t] = ds.s_z[t] * dgp.shock_w[t];
  TslsFit refit = fit_tsls(stack_panel(rebuilt));
  dgp.beta_hat = refit.beta;
  dgp.gamma_hat = refit.gamma_s;
  dgp.resid = eps_by_unit_period(ds, refit.eps_hat);
  dgp.base = std::move(rebuilt);
  return dgp;
}

PanelDataset simulate_shocks_dgp(const ShocksDgp& dgp, int replication) {
  const PanelDataset& base = dgp.base;
  std::mt19937_64 rng =
      substream_engine(dgp.seed, static_cast<std::uint64_t>(replication));
  std::normal_distribution<double> nd(0.0, 1.0);

  int n_clusters = 0;
  std::vector<int> cl = cluster_ids(base.sector_cluster, &n_clusters);
  Eigen::VectorXd v(n_clusters);
  for (int c = 0; c < n_clusters; ++c) v(c) = nd(rng);

  PanelDataset out = base;
  for (int t = 0; t < base.T; ++t)
    for (int j = 0; j < base.p; ++j)
      out.shock_z(t, j) =
          dgp.e_cond(t, j) + v(cl[j]) * dgp.sigma_eta + nd(rng) * dgp.sigma_zeta;
  for (int t = 0; t < base.T; ++t)
    for (int j = 0; j < base.p; ++j)
      out.shock_x(t, j) = dgp.alpha_hat + dgp.kappa_hat * out.shock_z(t, j) +
                          nd(rng) * dgp.sigma_xi;

  rebuild_instrument(out);
  out.x = rebuild_regressor(out);
  for (int i = 0; i < base.n; ++i) {
    double beta =
        dgp.beta_i.size() > 0 ? dgp.beta_i(i) : dgp.beta_hat;
    for (int t = 0; t < base.T; ++t) {
      double ctrl = base.d > 0 ? base.w[t].row(i).dot(dgp.gamma_hat) : 0.0;
      out.y(i, t) = out.x(i, t) * beta + ctrl + dgp.resid(i, t);
    }
  }
  return out;
}

namespace {

RejectionTable summarize(const std::vector<double>& tn,
                         const std::vector<std::vector<double>>& tstar,
                         const std::vector<char>& degenerate,
                         const std::string& label) {
  RejectionTable tab;
  tab.label = label;
  tab.reps = static_cast<int>(tn.size());
  const double levels[3] = {0.01, 0.05, 0.10};
  double* rej[3] = {&tab.rej01, &tab.rej05, &tab.rej10};
  double* se[3] = {&tab.se01, &tab.se05, &tab.se10};
  for (int l = 0; l < 3; ++l) {
    int count = 0;
    for (int r = 0; r < tab.reps; ++r) {
      if (degenerate[r]) continue;
      QuantileResult qr =
          critical_value_and_pvalue(tn[r], tstar[r], levels[l]);
      if (qr.reject) ++count;
    }
    double rate = static_cast<double>(count) / tab.reps;
    *rej[l] = rate;
    *se[l] = std::sqrt(rate * (1.0 - rate) / tab.reps);
  }
  for (char d : degenerate) tab.degenerate += d ? 1 : 0;
  return tab;
}

}  // namespace

RejectionTable rejection_study(const SharesDgp& dgp,
                               const SharesTestOptions& opts, int reps,
                               int threads) {
  std::vector<double> tn(reps, 0.0);
  std::vector<std::vector<double>> tstar(reps);
  std::vector<char> degenerate(reps, 0);
  parallel_for(reps, threads, [&](std::int64_t r) {
    PanelDataset sim = simulate_shares_dgp(dgp, static_cast<int>(r));
    SharesTestOptions o = opts;
    o.threads = 1;
    o.bootstrap.seed = substream_seed(
        substream_seed(opts.bootstrap.seed, kBootDomain), r);
    TestResult res = run_shares_test(sim, o);
    tn[r] = res.t_n;
    tstar[r] = std::move(res.t_star);
    degenerate[r] = res.all_degenerate ? 1 : 0;
  });
  return summarize(tn, tstar, degenerate, "shares");
}

RejectionTable rejection_study(const ShocksDgp& dgp,
                               const ShocksTestOptions& opts, int reps,
                               int threads) {
  std::vector<double> tn(reps, 0.0);
  std::vector<std::vector<double>> tstar(reps);
  std::vector<char> degenerate(reps, 0);
  parallel_for(reps, threads, [&](std::int64_t r) {
    PanelDataset sim = simulate_shocks_dgp(dgp, static_cast<int>(r));
    ShocksTestOptions o = opts;
    o.threads = 1;
    o.bootstrap.seed = substream_seed(
        substream_seed(opts.bootstrap.seed, kBootDomain), r);
    TestResult res = run_shocks_test(sim, o);
    tn[r] = res.t_n;
    tstar[r] = std::move(res.t_star);
    degenerate[r] = res.all_degenerate ? 1 : 0;
  });
  return summarize(tn, tstar, degenerate, "shocks");
}

std::string format_rejection_table(const std::vector<RejectionTable>& rows) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-28s %6s  %8s %8s %8s  %8s\n", "design",
                "reps", "rej@1%", "rej@5%", "rej@10%", "mc se@5%");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf,
                  "%-28s %6d  %8.4f %8.4f %8.4f  %8.4f\n", r.label.c_str(),
                  r.reps, r.rej01, r.rej05, r.rej10, r.se05);
    os << buf;
  }
  return os.str();
}

PanelDataset make_synthetic_base(const SyntheticBaseParams& params) {
  const int n = params.n, T = params.T, p = params.p;
  if (p % params.sectors_per_code_group != 0)
    throw ValidationError("p must be divisible by sectors_per_code_group");
  const int g3 = p / params.sectors_per_code_group;
  if (params.code_groups_per_two_digit > 9 ||
      params.sectors_per_code_group > 10)
    throw ValidationError("code layout out of range");
  std::mt19937_64 rng(splitmix64(params.seed));
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> mass(params.share_mass_lo,
                                              params.share_mass_hi);
  std::gamma_distribution<double> gamma_draw(params.share_concentration, 1.0);

  PanelDataset ds;
  ds.n = n;
  ds.T = T;
  ds.p = p;
  ds.d = 2;  // intercept + one covariate
  ds.sector_cluster_digits = 3;

  // 4-digit codes: two-digit prefix, 3-digit group digit, sector digit.
  ds.sector_code.resize(p);
  ds.sector_cluster.resize(p);
  for (int j = 0; j < p; ++j) {
    int group = j / params.sectors_per_code_group;
    int within = j % params.sectors_per_code_group;
    int two = 10 + group / params.code_groups_per_two_digit;
    int third = group % params.code_groups_per_two_digit + 1;
    if (two > 99) throw ValidationError("too many sector code groups");
    char code[16];
    std::snprintf(code, sizeof code, "%02d%d%d", two % 100, third % 10,
                  within % 10);
    ds.sector_code[j] = code;
    ds.sector_cluster[j] = std::string(code).substr(0, 3);
  }

  ds.unit_id.resize(n);
  ds.period_id.resize(T);
  for (int i = 0; i < n; ++i) ds.unit_id[i] = "u" + std::to_string(i);
  for (int t = 0; t < T; ++t) ds.period_id[t] = std::to_string(1990 + t);
  ds.obs_cluster.resize(static_cast<std::size_t>(n) * T);
  for (int i = 0; i < n; ++i)
    for (int t = 0; t < T; ++t) {
      char lab[16];
      std::snprintf(lab, sizeof lab, "c%02d", i % params.obs_clusters);
      ds.obs_cluster[static_cast<std::size_t>(i) * T + t] = lab;
    }
  ds.control_names = {"(intercept)", "ctrl"};

  // Shocks: optional common component within each 3-digit cluster, shared
  // across periods, plus idiosyncratic noise.
  ds.shock_z.resize(T, p);
  ds.shock_x.resize(T, p);
  {
    Eigen::VectorXd common(g3);
    for (int g = 0; g < g3; ++g) common(g) = nd(rng);
    for (int t = 0; t < T; ++t)
      for (int j = 0; j < p; ++j) {
        int g = j / params.sectors_per_code_group;
        ds.shock_z(t, j) = params.shock_cluster_sd * common(g) +
                           params.shock_idio_sd * nd(rng);
      }
    for (int t = 0; t < T; ++t)
      for (int j = 0; j < p; ++j)
        ds.shock_x(t, j) = params.fs_alpha +
                           params.fs_kappa * ds.shock_z(t, j) +
                           params.fs_xi_sd * nd(rng);
  }

  // Shares: gamma draws normalized to a row mass below one; regressor
  // shares coincide with the instrument shares.
  ds.s_z.assign(T, Eigen::MatrixXd::Zero(n, p));
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd raw(p);
      for (int j = 0; j < p; ++j) raw(j) = gamma_draw(rng);
      double total = raw.sum();
      if (total <= 0.0) total = 1.0;
      ds.s_z[t].row(i) = (raw * (mass(rng) / total)).transpose();
    }
  ds.s_x = ds.s_z;

  // Controls and weights.
  Eigen::MatrixXd shock_ctrl;
  if (params.bartik_control) {
    shock_ctrl.resize(T, p);
    for (int t = 0; t < T; ++t)
      for (int j = 0; j < p; ++j) shock_ctrl(t, j) = nd(rng);
  }
  ds.w.assign(T, Eigen::MatrixXd::Zero(n, 2));
  ds.reg_weight.resize(n, T);
  std::uniform_real_distribution<double> wdist(0.5, 1.5);
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < n; ++i) {
      ds.w[t](i, 0) = 1.0;
      ds.w[t](i, 1) = params.bartik_control
                          ? ds.s_z[t].row(i).dot(shock_ctrl.row(t))
                          : nd(rng);
      ds.reg_weight(i, t) = wdist(rng);
    }

  rebuild_instrument(ds);
  ds.x = rebuild_regressor(ds);

  // Moulton errors: cluster shock plus share-norm heteroskedastic noise.
  ds.y.resize(n, T);
  Eigen::VectorXd eta(params.obs_clusters);
  for (int c = 0; c < params.obs_clusters; ++c)
    eta(c) = params.eps_cluster_sd * nd(rng);
  for (int i = 0; i < n; ++i)
    for (int t = 0; t < T; ++t) {
      double sq = ds.s_z[t].row(i).squaredNorm();
      double sd = std::sqrt(params.eps_idio_a + params.eps_idio_s * sq);
      double eps = eta(i % params.obs_clusters) + sd * nd(rng);
      ds.y(i, t) = ds.x(i, t) * params.beta +
                   params.gamma_intercept * ds.w[t](i, 0) +
                   params.gamma_control * ds.w[t](i, 1) + eps;
    }

  validate(ds);
  return ds;
}

SyntheticBaseParams builtin_shares_base_params() {
  SyntheticBaseParams p;
  p.n = 500;
  p.T = 2;
  p.p = 40;
  p.obs_clusters = 48;
  p.sectors_per_code_group = 1;   // 40 three-digit prefixes
  p.code_groups_per_two_digit = 2;  // 20 two-digit prefixes
  p.seed = 20260801;
  return p;
}

SyntheticBaseParams builtin_shocks_base_params() {
  SyntheticBaseParams p;
  p.n = 300;
  p.T = 2;
  p.p = 100;
  p.obs_clusters = 48;
  p.sectors_per_code_group = 2;   // 50 three-digit clusters
  p.code_groups_per_two_digit = 5;
  p.bartik_control = true;
  p.shock_cluster_sd = 0.4;
  p.seed = 20260802;
  return p;
}

}  // namespace ssov
