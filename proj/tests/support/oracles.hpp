#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace echoroom::oracles {

struct GridSearchResult {
  Eigen::Vector3d point;
  double cost = 0.0;
  std::size_t evaluations = 0;
};

/// Exact minimizer of sum_i (|x - a_i| - d_i)^2 over the grid
/// lo + k * step (inclusive of hi), found by best-first branch and bound.
GridSearchResult grid_search_multilateration(std::span<const Eigen::Vector3d> anchors,
                                             std::span<const double> distances, const Eigen::Vector3d& lo,
                                             const Eigen::Vector3d& hi, double step);

/// Grid search followed by a Nelder-Mead polish of the best grid point
/// (the brute-force-then-finish convention), using GSL's simplex minimizer.
struct PolishedGridResult {
  GridSearchResult grid;
  Eigen::Vector3d point;
  double cost = 0.0;
};
PolishedGridResult polished_grid_multilateration(std::span<const Eigen::Vector3d> anchors,
                                                 std::span<const double> distances, const Eigen::Vector3d& lo,
                                                 const Eigen::Vector3d& hi, double step);

/// Minimum-cost perfect assignment by enumerating permutations (square, small).
double brute_force_assignment_cost(const Eigen::MatrixXd& cost, std::vector<int>* best = nullptr);

/// One-sided paired t statistic of mean(a - b) > 0 and its critical value at `confidence`.
struct PairedTTest {
  double mean_difference = 0.0;
  double t = 0.0;
  double critical = 0.0;
  bool significant = false;
};
PairedTTest paired_t_test(std::span<const double> a, std::span<const double> b, double confidence = 0.95);

/// Central finite-difference Jacobian of f at x.
template <typename F>
Eigen::MatrixXd numeric_jacobian(F&& f, const Eigen::VectorXd& x, double h = 1e-6) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd j(f0.size(), x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Eigen::VectorXd xp = x, xm = x;
    xp(k) += h;
    xm(k) -= h;
    j.col(k) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return j;
}

}  // namespace echoroom::oracles
