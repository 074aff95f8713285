#include "kinkdyn/grid.hpp"

#include <cmath>
#include <string>

#include "kinkdyn/errors.hpp"

namespace kinkdyn {

Grid::Grid(int n) : n_(n), dx_(0.0) {
  if (n < 2) throw InvalidArgument("grid needs at least 2 points, got " + std::to_string(n));
  dx_ = 1.0 / (n - 1);
  w_ = Eigen::VectorXd::Constant(n, dx_);
  w_(0) *= 0.5;
  w_(n - 1) *= 0.5;
}

Grid Grid::resolving(double eps, double points_per_eps) {
  if (!(eps > 0.0) || !(points_per_eps > 0.0))
    throw InvalidArgument("resolving grid needs positive eps and density");
  const int cells = static_cast<int>(std::ceil(points_per_eps / eps - 1e-9));
  return Grid(cells + 1);
}

Eigen::VectorXd Grid::nodes() const {
  return Eigen::VectorXd::LinSpaced(n_, 0.0, 1.0);
}

double Grid::norm_l2(const Eigen::VectorXd& a) const {
  return std::sqrt(inner(a, a));
}

double Grid::norm_l4(const Eigen::VectorXd& a) const {
  return std::sqrt(std::sqrt(w_.dot(a.array().square().square().matrix())));
}

GridFunction::GridFunction(const Grid& g, Eigen::VectorXd v)
    : grid(g), values(std::move(v)) {
  if (values.size() != g.size())
    throw InvalidArgument("grid function has " + std::to_string(values.size()) +
                          " values for a grid of " + std::to_string(g.size()));
}

double GridFunction::inner(const GridFunction& other) const {
  require_same_grid(grid, other.grid);
  return grid.inner(values, other.values);
}

void require_same_grid(const Grid& a, const Grid& b) {
  if (a != b)
    throw InvalidArgument("grid mismatch: " + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + " points");
}

}  // namespace kinkdyn
