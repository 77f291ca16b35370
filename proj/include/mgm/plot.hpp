#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mgm/stats.hpp"

namespace mgm {

/// Labeled scatter of the first two projection columns.
std::string scatter_svg(const std::vector<std::string>& labels, const Eigen::MatrixXd& points);

/// Dendrogram with leaves along the x axis and merge height on the y axis.
std::string dendrogram_svg(const std::vector<std::string>& labels, const Dendrogram& dendrogram);

}  // namespace mgm
