#include "ssov/tsls.hpp"

#include <cmath>

namespace ssov {

namespace {

constexpr double kCondError = 1e12;
constexpr double kCondWarn = 1e8;
constexpr double kRelevanceTol = 1e-10;

std::string column_name(const std::vector<std::string>* names, Eigen::Index j) {
  if (names && j >= 0 && j < static_cast<Eigen::Index>(names->size()))
    return (*names)[j];
  return "column " + std::to_string(j);
}

}  // namespace

WeightedLsResult residualize_on_controls(
    const Eigen::VectorXd& v, const Eigen::MatrixXd& W,
    const Eigen::VectorXd& weight, const std::vector<std::string>* col_names,
    std::vector<std::string>* warnings) {
  if (W.rows() != v.size() || weight.size() != v.size())
    throw ValidationError("residualize: dimension mismatch");
  WeightedLsResult out;
  if (W.cols() == 0) {
    out.coef.resize(0);
    out.resid = v;
    out.condition = 1.0;
    return out;
  }
  Eigen::VectorXd sw = weight.array().sqrt();
  Eigen::MatrixXd Ws = sw.asDiagonal() * W;
  Eigen::VectorXd vs = sw.asDiagonal() * v;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Ws);
  Eigen::VectorXd rdiag = qr.matrixR()
                              .topLeftCorner(W.cols(), W.cols())
                              .diagonal()
                              .cwiseAbs();
  double rmax = rdiag.maxCoeff();
  double rmin = rdiag.minCoeff();
  out.condition = rmin > 0.0 ? rmax / rmin
                             : std::numeric_limits<double>::infinity();
  if (!(out.condition < kCondError)) {
    // Columns pivoted past the numerical rank are the dependent ones.
    Eigen::Index rank = qr.rank();
    std::string cols;
    for (Eigen::Index k = rank; k < W.cols(); ++k) {
      if (!cols.empty()) cols += ", ";
      cols += column_name(col_names, qr.colsPermutation().indices()(k));
    }
    throw NumericalError("singular control design (condition " +
                         std::to_string(out.condition) + "), offending: " +
                         (cols.empty() ? "unknown" : cols));
  }
  if (out.condition > kCondWarn && warnings)
    warnings->push_back("ill-conditioned control design, condition = " +
                        std::to_string(out.condition));
  out.coef = qr.solve(vs);
  out.resid = v - W * out.coef;
  return out;
}

TslsFit fit_tsls(const StackedDesign& design) {
  const Eigen::Index m = design.rows();
  if (m == 0) throw ValidationError("empty design");
  TslsFit fit;

  std::vector<std::string> warnings;
  WeightedLsResult zres = residualize_on_controls(design.z, design.W,
                                                  design.weight, nullptr,
                                                  &warnings);
  fit.pi_hat = zres.coef;
  fit.z_dot = zres.resid;
  fit.condition_report.controls_condition = zres.condition;
  fit.condition_report.warnings = std::move(warnings);

  const Eigen::ArrayXd w = design.weight.array();
  double D = (w * fit.z_dot.array() * design.x.array()).sum();
  double scale = std::sqrt((w * fit.z_dot.array().square()).sum()) *
                 std::sqrt((w * design.x.array().square()).sum());
  if (!(std::abs(D) > kRelevanceTol * std::max(scale, 1e-300)))
    throw NumericalError("degenerate instrument: weighted cov(z_dot, x) = " +
                         std::to_string(D));
  fit.first_stage_cov = D;
  fit.beta = (w * fit.z_dot.array() * design.y.array()).sum() / D;

  Eigen::VectorXd y_net = design.y - design.x * fit.beta;
  if (design.d > 0) {
    WeightedLsResult gres =
        residualize_on_controls(y_net, design.W, design.weight);
    fit.gamma_s = gres.coef;
    fit.eps_hat = gres.resid;
  } else {
    fit.gamma_s.resize(0);
    fit.eps_hat = y_net;
  }

  // Normal equations: sum_r w_r (Z_r, W_r')' eps_r = 0, relative scale.
  // Near-exact fits leave eps at rounding level; floor the scale by the
  // outcome norm so 0/0 does not read as a violation.
  double eps_norm = std::sqrt((w * fit.eps_hat.array().square()).sum());
  double y_norm = std::sqrt((w * design.y.array().square()).sum());
  double eps_scale = std::max(eps_norm, 1e-6 * std::max(y_norm, 1.0));
  double viol = 0.0;
  {
    double mz = (w * design.z.array() * fit.eps_hat.array()).sum();
    double sz = std::sqrt((w * design.z.array().square()).sum());
    viol = std::abs(mz) / std::max(sz * eps_scale, 1e-300);
  }
  for (Eigen::Index k = 0; k < design.d; ++k) {
    double mk = (w * design.W.col(k).array() * fit.eps_hat.array()).sum();
    double sk = std::sqrt((w * design.W.col(k).array().square()).sum());
    viol = std::max(viol, std::abs(mk) / std::max(sk * eps_scale, 1e-300));
  }
  fit.condition_report.max_normal_eq_violation = viol;
  if (viol > 1e-6)
    throw NumericalError("normal equations violated, relative residual " +
                         std::to_string(viol));
  return fit;
}

}  // namespace ssov
