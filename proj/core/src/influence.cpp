#include "ssov/influence.hpp"

#include <cmath>

namespace ssov {

namespace {
constexpr double kDegenerateRel = 1e-14;
}

InfluenceMatrix studentize_cluster_sums(const Eigen::MatrixXd& U,
                                        const std::vector<int>& cl_ids,
                                        int n_clusters,
                                        const Eigen::VectorXd& raw_moments,
                                        const std::vector<std::string>& labels) {
  const int q = static_cast<int>(U.cols());
  if (static_cast<Eigen::Index>(cl_ids.size()) != U.rows())
    throw ValidationError("cluster ids do not match influence rows");
  Eigen::MatrixXd cluster_sum = Eigen::MatrixXd::Zero(n_clusters, q);
  for (Eigen::Index r = 0; r < U.rows(); ++r)
    cluster_sum.row(cl_ids[r]) += U.row(r);

  Eigen::RowVectorXd mean = cluster_sum.colwise().mean();
  Eigen::VectorXd sigma(q);
  for (int j = 0; j < q; ++j)
    sigma(j) = std::sqrt(
        (cluster_sum.col(j).array() - mean(j)).square().sum() / n_clusters);

  double sig_max = sigma.maxCoeff();
  std::vector<int> keep;
  InfluenceMatrix infl;
  for (int j = 0; j < q; ++j) {
    if (sigma(j) > kDegenerateRel * sig_max && sigma(j) > 0.0)
      keep.push_back(j);
    else
      infl.dropped.push_back(labels[j]);
  }
  const int qk = static_cast<int>(keep.size());
  infl.psi_hat.resize(n_clusters, qk);
  infl.sigma_hat.resize(qk);
  infl.raw_stats.resize(qk);
  infl.labels.resize(qk);
  for (int k = 0; k < qk; ++k) {
    int j = keep[k];
    infl.psi_hat.col(k) = cluster_sum.col(j) / sigma(j);
    infl.sigma_hat(k) = sigma(j);
    infl.raw_stats(k) = raw_moments(j) / sigma(j);
    infl.labels[k] = labels[j];
  }
  return infl;
}

}  // namespace ssov
