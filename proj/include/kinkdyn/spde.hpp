#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "kinkdyn/grid.hpp"
#include "kinkdyn/manifold.hpp"
#include "kinkdyn/noise.hpp"
#include "kinkdyn/potential.hpp"

namespace kinkdyn {

/// eps² D2 with Neumann ends by ghost reflection (boundary rows
/// 2(u_1 - u_0)/dx²). Symmetric in the trapezoid inner product.
Eigen::SparseMatrix<double> assemble_laplacian(const Grid& grid, double eps);
/// out = eps² D2 u without forming the matrix.
void apply_laplacian(const Grid& grid, double eps, const Eigen::VectorXd& u,
                     Eigen::VectorXd& out);

/// Largest stable explicit reaction step.
constexpr double kMaxSpdeStep = 0.05;

struct SpdeConfig {
  double eps = 0.02;
  Potential potential = Potential::quartic();
  bool mass_conserving = false;
  /// Target mean for the fixed-mass equation.
  double mu = 0.0;
};

struct SpdeState {
  double t = 0.0;
  GridFunction u;
};

/// Semi-implicit Euler: implicit diffusion, explicit reaction and additive
/// noise. The tridiagonal system is factored once per (grid, eps, dt).
class SpdeIntegrator {
 public:
  SpdeIntegrator(const Grid& grid, SpdeConfig cfg, double dt);

  const Grid& grid() const { return grid_; }
  const SpdeConfig& config() const { return cfg_; }
  double dt() const { return dt_; }

  /// Advances in place. For the fixed-mass equation the increment must have
  /// zero mean and the mean of u is restored to mu exactly.
  void step(SpdeState& state, const Eigen::VectorXd& increment) const;
  void step(SpdeState& state, const NoiseIncrement& inc) const { step(state, inc.grid); }
  /// Deterministic step.
  void step(SpdeState& state) const;

 private:
  void solve(Eigen::VectorXd& rhs) const;

  Grid grid_;
  SpdeConfig cfg_;
  double dt_;
  // Thomas factorization of I - dt eps² D2
  Eigen::VectorXd lower_, upper_, inv_pivot_;
};

SpdeState ac_step(const SpdeState& state, const SpdeConfig& cfg, double dt,
                  const NoiseIncrement& inc);
SpdeState mac_step(const SpdeState& state, const SpdeConfig& cfg, double dt,
                   const NoiseIncrement& inc);

/// L(u^h + v) = L(u^h) + L^h v + N^h(v) with L u = eps² D2 u - f(u).
struct OperatorParts {
  GridFunction L_of_uh;
  GridFunction Lh_v;
  GridFunction Nh_v;
};

OperatorParts operator_parts(const GridFunction& uh, const GridFunction& v, double eps,
                             const Potential& pot = Potential::quartic());
/// Splits u around the profile of h.
OperatorParts operator_parts(const GridFunction& u, const KinkConfig& h,
                             const Heteroclinic& het = Heteroclinic::quartic());
/// eps² D2 u - f(u).
Eigen::VectorXd allen_cahn_operator(const Grid& grid, double eps, const Eigen::VectorXd& u,
                                    const Potential& pot = Potential::quartic());

/// ∫ (eps²/2) u_x² + F(u), with the gradient on cells.
double energy(const GridFunction& u, double eps, const Potential& pot = Potential::quartic());

}  // namespace kinkdyn
