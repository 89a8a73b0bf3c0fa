#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ssov/bootstrap.hpp"

namespace ssov {

// Sums influence rows within clusters, studentizes every column by the
// cluster-level standard deviation sqrt(mean_c (sum_c U - mean)^2), and
// drops zero-scale moments (recorded in `dropped`). raw_moments holds the
// unstudentized moment sums, divided by the same scales.
InfluenceMatrix studentize_cluster_sums(const Eigen::MatrixXd& U,
                                        const std::vector<int>& cl_ids,
                                        int n_clusters,
                                        const Eigen::VectorXd& raw_moments,
                                        const std::vector<std::string>& labels);

}  // namespace ssov
