#include "kinkdyn/spde.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "kinkdyn/errors.hpp"

namespace kinkdyn {

Eigen::SparseMatrix<double> assemble_laplacian(const Grid& grid, double eps) {
  const int n = grid.size();
  if (n < 3) throw InvalidArgument("Laplacian needs at least 3 grid points");
  if (!(eps > 0.0)) throw InvalidArgument("eps must be positive");
  const double c = eps * eps / (grid.dx() * grid.dx());
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(3 * n);
  t.emplace_back(0, 0, -2.0 * c);
  t.emplace_back(0, 1, 2.0 * c);
  for (int i = 1; i + 1 < n; ++i) {
    t.emplace_back(i, i - 1, c);
    t.emplace_back(i, i, -2.0 * c);
    t.emplace_back(i, i + 1, c);
  }
  t.emplace_back(n - 1, n - 2, 2.0 * c);
  t.emplace_back(n - 1, n - 1, -2.0 * c);
  Eigen::SparseMatrix<double> m(n, n);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

void apply_laplacian(const Grid& grid, double eps, const Eigen::VectorXd& u,
                     Eigen::VectorXd& out) {
  const int n = grid.size();
  const double c = eps * eps / (grid.dx() * grid.dx());
  out.resize(n);
  out(0) = 2.0 * c * (u(1) - u(0));
  for (int i = 1; i + 1 < n; ++i) out(i) = c * (u(i - 1) - 2.0 * u(i) + u(i + 1));
  out(n - 1) = 2.0 * c * (u(n - 2) - u(n - 1));
}

SpdeIntegrator::SpdeIntegrator(const Grid& grid, SpdeConfig cfg, double dt)
    : grid_(grid), cfg_(std::move(cfg)), dt_(dt) {
  const int n = grid.size();
  if (n < 3) throw InvalidArgument("SPDE grid needs at least 3 points");
  if (!(cfg_.eps > 0.0)) throw InvalidArgument("eps must be positive");
  if (!(dt > 0.0) || dt > kMaxSpdeStep)
    throw InvalidArgument("time step " + std::to_string(dt) + " outside (0, " +
                          std::to_string(kMaxSpdeStep) + "]");
  if (cfg_.mass_conserving && !(cfg_.mu > -1.0 && cfg_.mu < 1.0))
    throw InvalidArgument("mass must lie in (-1, 1)");
  const double c = dt * cfg_.eps * cfg_.eps / (grid.dx() * grid.dx());
  // rows: a_i x_{i-1} + b_i x_i + c_i x_{i+1}
  Eigen::VectorXd a = Eigen::VectorXd::Constant(n, -c);
  Eigen::VectorXd b = Eigen::VectorXd::Constant(n, 1.0 + 2.0 * c);
  Eigen::VectorXd up = Eigen::VectorXd::Constant(n, -c);
  a(0) = 0.0;
  up(0) = -2.0 * c;
  a(n - 1) = -2.0 * c;
  up(n - 1) = 0.0;
  lower_ = a;
  upper_.resize(n);
  inv_pivot_.resize(n);
  double pivot = b(0);
  inv_pivot_(0) = 1.0 / pivot;
  upper_(0) = up(0) * inv_pivot_(0);
  for (int i = 1; i < n; ++i) {
    pivot = b(i) - a(i) * upper_(i - 1);
    inv_pivot_(i) = 1.0 / pivot;
    upper_(i) = up(i) * inv_pivot_(i);
  }
}

void SpdeIntegrator::solve(Eigen::VectorXd& r) const {
  const int n = grid_.size();
  r(0) *= inv_pivot_(0);
  for (int i = 1; i < n; ++i) r(i) = (r(i) - lower_(i) * r(i - 1)) * inv_pivot_(i);
  for (int i = n - 2; i >= 0; --i) r(i) -= upper_(i) * r(i + 1);
}

void SpdeIntegrator::step(SpdeState& state, const Eigen::VectorXd& increment) const {
  require_same_grid(state.u.grid, grid_);
  if (increment.size() != grid_.size()) throw InvalidArgument("increment size mismatch");
  Eigen::VectorXd& u = state.u.values;
  const int n = grid_.size();
  Eigen::VectorXd rhs(n);
  const Potential& pot = cfg_.potential;
  for (int i = 0; i < n; ++i) rhs(i) = u(i) - dt_ * pot.f(u(i));
  if (cfg_.mass_conserving) {
    const double inc_mean = grid_.mean(increment);
    const double scale = std::max(1.0, increment.cwiseAbs().maxCoeff());
    if (std::fabs(inc_mean) > 1e-12 * scale)
      throw InvalidArgument("fixed-mass step needs a mean-zero increment (mean " +
                            std::to_string(inc_mean) + ")");
    double fmean = 0.0;
    const Eigen::VectorXd& w = grid_.weights();
    for (int i = 0; i < n; ++i) fmean += w(i) * pot.f(u(i));
    rhs.array() += dt_ * fmean;
  }
  rhs += increment;
  solve(rhs);
  if (!rhs.allFinite()) throw NumericalFailure("SPDE state became non-finite at t = " +
                                               std::to_string(state.t));
  if (cfg_.mass_conserving) rhs.array() += cfg_.mu - grid_.mean(rhs);
  u.swap(rhs);
  state.t += dt_;
}

void SpdeIntegrator::step(SpdeState& state) const {
  step(state, Eigen::VectorXd::Zero(grid_.size()));
}

SpdeState ac_step(const SpdeState& state, const SpdeConfig& cfg, double dt,
                  const NoiseIncrement& inc) {
  SpdeConfig c = cfg;
  c.mass_conserving = false;
  SpdeIntegrator integ(state.u.grid, c, dt);
  SpdeState out = state;
  integ.step(out, inc.grid);
  return out;
}

SpdeState mac_step(const SpdeState& state, const SpdeConfig& cfg, double dt,
                   const NoiseIncrement& inc) {
  SpdeConfig c = cfg;
  c.mass_conserving = true;
  SpdeIntegrator integ(state.u.grid, c, dt);
  SpdeState out = state;
  integ.step(out, inc.grid);
  return out;
}

Eigen::VectorXd allen_cahn_operator(const Grid& grid, double eps, const Eigen::VectorXd& u,
                                    const Potential& pot) {
  Eigen::VectorXd out;
  apply_laplacian(grid, eps, u, out);
  for (Eigen::Index i = 0; i < u.size(); ++i) out(i) -= pot.f(u(i));
  return out;
}

OperatorParts operator_parts(const GridFunction& uh, const GridFunction& v, double eps,
                             const Potential& pot) {
  require_same_grid(uh.grid, v.grid);
  const Grid& g = uh.grid;
  const int n = g.size();
  Eigen::VectorXd lin;
  apply_laplacian(g, eps, v.values, lin);
  Eigen::VectorXd nl(n);
  for (int i = 0; i < n; ++i) {
    const double a = uh.values(i);
    const double b = v.values(i);
    lin(i) -= pot.f_prime(a) * b;
    if (pot.kind() == PotentialKind::quartic)
      nl(i) = -3.0 * a * b * b - b * b * b;
    else
      nl(i) = -(pot.f(a + b) - pot.f(a) - pot.f_prime(a) * b);
  }
  return OperatorParts{GridFunction(g, allen_cahn_operator(g, eps, uh.values, pot)),
                       GridFunction(g, std::move(lin)), GridFunction(g, std::move(nl))};
}

OperatorParts operator_parts(const GridFunction& u, const KinkConfig& h, const Heteroclinic& het) {
  const GridFunction uh = build_profile(h, u.grid, het);
  return operator_parts(uh, GridFunction(u.grid, u.values - uh.values), h.eps, het.potential());
}

double energy(const GridFunction& u, double eps, const Potential& pot) {
  const Grid& g = u.grid;
  const int n = g.size();
  double grad = 0.0;
  for (int i = 0; i + 1 < n; ++i) {
    const double d = (u.values(i + 1) - u.values(i)) / g.dx();
    grad += d * d * g.dx();
  }
  double pot_part = 0.0;
  for (int i = 0; i < n; ++i) pot_part += g.weights()(i) * pot.F(u.values(i));
  return 0.5 * eps * eps * grad + pot_part;
}

}  // namespace kinkdyn
