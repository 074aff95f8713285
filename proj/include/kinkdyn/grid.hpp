#pragma once

#include <Eigen/Dense>

namespace kinkdyn {

/// Uniform grid of n points on [0, 1] with composite trapezoid weights.
class Grid {
 public:
  explicit Grid(int n);

  /// Smallest grid with spacing at most eps / points_per_eps.
  static Grid resolving(double eps, double points_per_eps = 5.0);

  int size() const { return n_; }
  double dx() const { return dx_; }
  double x(int i) const { return i * dx_; }
  Eigen::VectorXd nodes() const;
  const Eigen::VectorXd& weights() const { return w_; }

  double inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    return a.dot(w_.cwiseProduct(b));
  }
  double norm_l2(const Eigen::VectorXd& a) const;
  double norm_l4(const Eigen::VectorXd& a) const;
  /// Trapezoid integral over (0, 1), which is also the mean.
  double mean(const Eigen::VectorXd& a) const { return w_.dot(a); }

  bool operator==(const Grid& other) const { return n_ == other.n_; }
  bool operator!=(const Grid& other) const { return n_ != other.n_; }

 private:
  int n_;
  double dx_;
  Eigen::VectorXd w_;
};

/// Values on a grid. The grid travels with the data so mismatches can be
/// rejected at API boundaries.
struct GridFunction {
  Grid grid;
  Eigen::VectorXd values;

  explicit GridFunction(const Grid& g) : grid(g), values(Eigen::VectorXd::Zero(g.size())) {}
  GridFunction(const Grid& g, Eigen::VectorXd v);

  double inner(const GridFunction& other) const;
  double norm_l2() const { return grid.norm_l2(values); }
  double norm_l4() const { return grid.norm_l4(values); }
  double mean() const { return grid.mean(values); }
};

/// Throws InvalidArgument when the grids differ.
void require_same_grid(const Grid& a, const Grid& b);

}  // namespace kinkdyn
