#include "ssov/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "ssov/tsls.hpp"

namespace ssov {

namespace {

// Weighted residualization of every share column on the controls.
Eigen::MatrixXd residualized_shares(const StackedDesign& design) {
  Eigen::MatrixXd out(design.rows(), design.p);
  if (design.d == 0) {
    out = design.S;
    return out;
  }
  Eigen::VectorXd sw = design.weight.array().sqrt();
  Eigen::MatrixXd Ws = sw.asDiagonal() * design.W;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Ws);
  Eigen::VectorXd rdiag =
      qr.matrixR().topLeftCorner(design.d, design.d).diagonal().cwiseAbs();
  if (rdiag.minCoeff() <= 0.0 || rdiag.maxCoeff() / rdiag.minCoeff() > 1e12)
    throw NumericalError("singular control design in share residualization");
  Eigen::MatrixXd coef = qr.solve(sw.asDiagonal() * design.S);
  out = design.S - design.W * coef;
  return out;
}

int pick_diagnostic_control(const PanelDataset& ds,
                            const StackedDesign& design) {
  for (int k = 0; k < design.d; ++k) {
    if (k < static_cast<int>(ds.control_names.size()) &&
        ds.control_names[k] == "(intercept)")
      continue;
    double lo = design.W.col(k).minCoeff();
    double hi = design.W.col(k).maxCoeff();
    if (hi > lo) return k;
  }
  return -1;
}

}  // namespace

ShareCorrReport share_corr_check(const PanelDataset& ds, double threshold) {
  if (ds.p < 2)
    throw ValidationError("share correlation check needs at least 2 sectors");
  StackedDesign design = stack_panel(ds);
  Eigen::MatrixXd R = residualized_shares(design);

  // Weighted covariance of the residualized columns.
  const Eigen::ArrayXd w = design.weight.array();
  const double wsum = w.sum();
  Eigen::RowVectorXd mean = (w.matrix().transpose() * R) / wsum;
  Eigen::MatrixXd centered = R.rowwise() - mean;
  Eigen::MatrixXd cov =
      centered.transpose() * (w.matrix().asDiagonal() * centered) / wsum;
  Eigen::VectorXd sd = cov.diagonal().cwiseMax(0.0).cwiseSqrt();

  ShareCorrReport rep;
  rep.threshold = threshold;
  double sd_max = sd.maxCoeff();
  std::vector<ShareCorrPair> pairs;
  for (int j = 0; j < ds.p; ++j) {
    if (sd(j) <= 1e-14 * sd_max) {
      ++rep.skipped_degenerate;
      continue;
    }
    for (int k = j + 1; k < ds.p; ++k) {
      if (sd(k) <= 1e-14 * sd_max) continue;
      double corr = cov(j, k) / (sd(j) * sd(k));
      rep.max_abs_corr = std::max(rep.max_abs_corr, std::abs(corr));
      if (std::abs(corr) > threshold) {
        ++rep.pairs_above;
        pairs.push_back({ds.sector_code[j], ds.sector_code[k], corr});
      }
    }
  }
  rep.flagged = rep.pairs_above > 0;
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
    return std::abs(a.corr) > std::abs(b.corr);
  });
  if (pairs.size() > 10) pairs.resize(10);
  rep.top_pairs = std::move(pairs);
  return rep;
}

std::vector<ObsTransform> default_obs_transforms(const PanelDataset& ds) {
  StackedDesign design = stack_panel(ds);
  std::vector<ObsTransform> out;
  out.push_back({"const", [](const Eigen::Ref<const Eigen::VectorXd>&) {
                   return 1.0;
                 }});
  int k = pick_diagnostic_control(ds, design);
  if (k < 0) return out;
  const Eigen::ArrayXd w = design.weight.array();
  double mean = (w * design.W.col(k).array()).sum() / w.sum();
  double var = (w * (design.W.col(k).array() - mean).square()).sum() / w.sum();
  double sd = std::sqrt(var);
  if (sd <= 0.0) return out;
  double lo = design.W.col(k).minCoeff();
  double hi = design.W.col(k).maxCoeff();
  std::string name = ds.control_names.empty() ? "w" + std::to_string(k)
                                              : ds.control_names[k];
  out.push_back({"exp_std_" + name,
                 [k, mean, sd](const Eigen::Ref<const Eigen::VectorXd>& wr) {
                   return std::exp((wr(k) - mean) / sd);
                 }});
  out.push_back({"affine_" + name,
                 [k, lo, hi](const Eigen::Ref<const Eigen::VectorXd>& wr) {
                   return 0.5 + (wr(k) - lo) / (hi - lo);
                 }});
  return out;
}

std::vector<SectorTransform> default_sector_transforms(const PanelDataset& ds) {
  std::vector<SectorTransform> out;
  for (auto& t : default_obs_transforms(ds)) {
    auto f = t.f;
    out.push_back({t.label,
                   [f](const Eigen::Ref<const Eigen::VectorXd>& s_row,
                       const Eigen::Ref<const Eigen::VectorXd>& w_row) {
                     return Eigen::VectorXd::Constant(s_row.size(), f(w_row))
                         .eval();
                   }});
  }
  return out;
}

namespace {

bool signs_agree(const std::vector<std::pair<std::string, double>>& stats) {
  int sign = 0;
  for (const auto& [label, v] : stats) {
    int s = v > 0.0 ? 1 : (v < 0.0 ? -1 : 0);
    if (s == 0) continue;
    if (sign == 0) sign = s;
    else if (s != sign) return false;
  }
  return true;
}

}  // namespace

SignDiagnosticReport sign_diagnostic_shares(
    const PanelDataset& ds, const std::vector<ObsTransform>& transforms) {
  if (transforms.empty())
    throw ValidationError("sign diagnostic needs at least one transform");
  if (!ds.shares_match_shocks())
    throw ValidationError("sign diagnostic requires native-level shares");
  StackedDesign design = stack_panel(ds);
  Eigen::MatrixXd Sdot = residualized_shares(design);

  // v_r = S_dot_r' shock_{t(r)}
  Eigen::VectorXd v(design.rows());
  for (Eigen::Index r = 0; r < design.rows(); ++r)
    v(r) = Sdot.row(r).dot(ds.shock_z.row(design.period_index[r]));

  SignDiagnosticReport rep;
  Eigen::VectorXd w_row(design.d);
  for (const auto& tr : transforms) {
    double stat = 0.0;
    for (Eigen::Index r = 0; r < design.rows(); ++r) {
      if (design.d > 0) w_row = design.W.row(r);
      double f = tr.f(w_row);
      if (!(f > 0.0))
        throw ValidationError("transform '" + tr.label +
                              "' produced a non-positive value");
      stat += design.weight(r) * design.x(r) * f * v(r);
    }
    rep.stats.emplace_back(tr.label, stat);
  }
  rep.sign_agrees = signs_agree(rep.stats);
  return rep;
}

SignDiagnosticReport sign_diagnostic_shocks(
    const PanelDataset& ds, const ShockResidual& e_hat,
    const std::vector<SectorTransform>& transforms) {
  if (transforms.empty())
    throw ValidationError("sign diagnostic needs at least one transform");
  if (!ds.shares_match_shocks())
    throw ValidationError("sign diagnostic requires native-level shares");
  if (e_hat.e_hat.rows() != ds.T || e_hat.e_hat.cols() != ds.p)
    throw ValidationError("shock residual shape mismatch");
  StackedDesign design = stack_panel(ds);
  TslsFit fit = fit_tsls(design);

  SignDiagnosticReport rep;
  rep.first_stage_cov = fit.first_stage_cov;
  rep.has_first_stage = true;
  Eigen::VectorXd w_row(design.d), s_row(design.p);
  for (const auto& tr : transforms) {
    double stat = 0.0;
    for (Eigen::Index r = 0; r < design.rows(); ++r) {
      if (design.d > 0) w_row = design.W.row(r);
      s_row = design.S.row(r);
      Eigen::VectorXd f = tr.f(s_row, w_row);
      if (f.size() != ds.p)
        throw ValidationError("transform '" + tr.label +
                              "' returned wrong sector count");
      if (!(f.array() > 0.0).all())
        throw ValidationError("transform '" + tr.label +
                              "' produced a non-positive value");
      stat += design.weight(r) * design.x(r) *
              e_hat.e_hat.row(design.period_index[r]).dot(f);
    }
    rep.stats.emplace_back(tr.label, stat);
  }
  rep.sign_agrees = signs_agree(rep.stats);
  return rep;
}

ClusterCovReport within_cluster_shock_cov(
    const ShockResidual& e_hat, const std::vector<std::string>& sector_cluster) {
  const int T = static_cast<int>(e_hat.e_hat.rows());
  const int p = static_cast<int>(e_hat.e_hat.cols());
  if (T < 2)
    throw ValidationError("within-cluster covariances need T >= 2 periods");
  if (static_cast<int>(sector_cluster.size()) != p)
    throw ValidationError("sector cluster labels do not match residual");

  int n_clusters = 0;
  std::vector<int> ids = cluster_ids(sector_cluster, &n_clusters);
  std::vector<std::vector<int>> members(n_clusters);
  for (int j = 0; j < p; ++j) members[ids[j]].push_back(j);

  Eigen::RowVectorXd mean = e_hat.e_hat.colwise().mean();
  Eigen::MatrixXd centered = e_hat.e_hat.rowwise() - mean;

  ClusterCovReport rep;
  for (int c = 0; c < n_clusters; ++c) {
    if (members[c].size() < 2) {
      ++rep.skipped_singletons;
      continue;
    }
    ClusterCovEntry entry;
    entry.cluster = sector_cluster[members[c].front()];
    entry.sectors = static_cast<int>(members[c].size());
    entry.min_cov = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < members[c].size(); ++a)
      for (std::size_t b = a + 1; b < members[c].size(); ++b) {
        double cov = centered.col(members[c][a])
                         .dot(centered.col(members[c][b])) /
                     (T - 1);
        entry.min_cov = std::min(entry.min_cov, cov);
        if (cov < 0.0) ++entry.negative_pairs;
      }
    if (entry.negative_pairs > 0) rep.any_flagged = true;
    rep.clusters.push_back(std::move(entry));
  }
  return rep;
}

void PrimitiveSpec::check() const {
  const Eigen::Index p = var_matrix.rows();
  if (var_matrix.cols() != p || p < 1)
    throw ValidationError("var_matrix must be square");
  if (lambda.empty()) throw ValidationError("no units in primitive spec");
  for (const auto& l : lambda)
    if (l.size() != p)
      throw ValidationError("lambda diagonal length mismatch");
  double scale = std::max(1.0, var_matrix.cwiseAbs().maxCoeff());
  if (((var_matrix - var_matrix.transpose()).cwiseAbs().array() >
       1e-10 * scale)
          .any())
    throw ValidationError("var_matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(var_matrix,
                                                    Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-10 * scale)
    throw ValidationError("var_matrix is not positive semi-definite");
}

Eigen::VectorXd weights_from_primitives(const PrimitiveSpec& spec,
                                        const Eigen::MatrixXd& realization) {
  spec.check();
  const int n = static_cast<int>(spec.lambda.size());
  const Eigen::Index p = spec.var_matrix.rows();
  if (realization.cols() != p ||
      (realization.rows() != 1 && realization.rows() != n))
    throw ValidationError("realization must be 1 x p or n x p");

  Eigen::VectorXd quad(n);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd r =
        realization.row(realization.rows() == 1 ? 0 : i).transpose();
    quad(i) = (r.cwiseProduct(spec.lambda[i])).dot(spec.var_matrix * r);
  }
  double denom = quad.sum();
  if (denom == 0.0)
    throw NumericalError("zero denominator in weight computation");
  return quad / denom;
}

}  // namespace ssov
