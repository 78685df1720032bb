#pragma once

#include <vector>

#include <Eigen/Core>

namespace echoroom {

/// Minimum-cost assignment (Kuhn-Munkres) on a rectangular cost matrix.
/// Returns, for each row, the assigned column or -1 when rows outnumber
/// columns. Every column is used at most once.
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

}  // namespace echoroom
