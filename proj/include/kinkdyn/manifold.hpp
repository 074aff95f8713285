#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kinkdyn/grid.hpp"
#include "kinkdyn/heteroclinic.hpp"

namespace kinkdyn {

// Indexing: kinks are numbered 0..N in C++ (N+1 interfaces). Kink i rises
// from -1 to +1 when i is even and falls when i is odd, so the profile starts
// at -1 on the left boundary.

/// Ordered interface positions with the scale eps and the exponent kappa of
/// rho = eps^kappa. Admissibility is not enforced on construction; see
/// admissible() and exit_check().
struct KinkConfig {
  Eigen::VectorXd h;
  double eps = 0.02;
  double kappa = 0.1;

  int count() const { return static_cast<int>(h.size()); }
  double rho() const;
  /// Required separation eps / rho = eps^(1 - kappa).
  double min_gap() const;
};

/// +1 for rising kinks (even index), -1 for falling ones.
inline int kink_sign(int i) { return (i % 2 == 0) ? 1 : -1; }

/// Constant background added to the kink sum so that u^h(0) = -1.
double background(int kinks);

struct GapViolation {
  /// Gap between extended positions index and index + 1, where extended
  /// position 0 is the ghost -h_0 and the last one is the ghost 2 - h_N.
  int index = 0;
  double gap = 0.0;
  double required = 0.0;
  bool unordered = false;

  std::string describe() const;
};

std::optional<GapViolation> exit_check(const KinkConfig& cfg);
bool admissible(const KinkConfig& cfg);
/// Throws DomainViolation naming the first violated gap.
void require_admissible(const KinkConfig& cfg);

/// Profile and diagonal position derivatives of all kinks on one grid.
/// Column i of d1, d2, d3 holds ∂_{h_i} u^h, ∂²_{h_i} u^h, ∂³_{h_i} u^h.
struct KinkFrame {
  Eigen::VectorXd profile;
  Eigen::MatrixXd d1;
  Eigen::MatrixXd d2;
  Eigen::MatrixXd d3;
};

/// max_order ∈ {0,1,2,3} selects which derivative blocks are filled.
KinkFrame evaluate_frame(const KinkConfig& cfg, const Grid& grid, int max_order = 3,
                         const Heteroclinic& het = Heteroclinic::quartic());

GridFunction build_profile(const KinkConfig& cfg, const Grid& grid,
                           const Heteroclinic& het = Heteroclinic::quartic());
/// ∂_{h_i} u^h.
GridFunction tangent(const KinkConfig& cfg, int i, const Grid& grid,
                     const Heteroclinic& het = Heteroclinic::quartic());
/// Derivative of u^h with respect to the listed positions (2 or 3 indices).
/// Mixed derivatives are exact zeros.
GridFunction tangent_deriv(const KinkConfig& cfg, const std::vector<int>& indices,
                           const Grid& grid,
                           const Heteroclinic& het = Heteroclinic::quartic());

/// A_kj = <u_k, u_j> - <u_kj, v>.
Eigen::MatrixXd gram_matrix(const KinkConfig& cfg, const GridFunction& v,
                            const Heteroclinic& het = Heteroclinic::quartic());
Eigen::MatrixXd gram_matrix(const KinkFrame& frame, const Grid& grid,
                            const Eigen::VectorXd& v);

/// Metric of the fixed-mass manifold with n free positions, closed form:
/// (chi/eps)(I + s sᵀ) with s_k = (-1)^k.
Eigen::MatrixXd analytic_metric(int n, double eps, double chi = chi_constant());
Eigen::MatrixXd analytic_metric_inverse(int n, double eps, double chi = chi_constant());

/// ∫_0^1 u^h dx in closed form.
double profile_mass(const KinkConfig& cfg, const Heteroclinic& het = Heteroclinic::quartic());
/// ∂ mass / ∂ h_i.
Eigen::VectorXd profile_mass_gradient(const KinkConfig& cfg,
                                      const Heteroclinic& het = Heteroclinic::quartic());

/// Free positions xi (N of them) and the mass mu. The last position follows
/// from the mass chart.
struct MassKinkConfig {
  Eigen::VectorXd xi;
  double mu = 0.0;
  KinkConfig full;

  int free_count() const { return static_cast<int>(xi.size()); }
  double h_last() const { return full.h(full.count() - 1); }
};

/// Solves mass(xi, h_last) = mu for h_last by Newton from the plateau
/// estimate. Throws InvalidArgument for empty xi and ConstraintInfeasible
/// when no admissible root exists.
double mass_chart(const Eigen::VectorXd& xi, double mu, double eps, double kappa = 0.1,
                  const Heteroclinic& het = Heteroclinic::quartic());
MassKinkConfig make_mass_config(const Eigen::VectorXd& xi, double mu, double eps,
                                double kappa = 0.1,
                                const Heteroclinic& het = Heteroclinic::quartic());
/// Sign linking a free position to the dependent one: ∂h_last/∂xi_i.
int chart_sign(int free_count, int i);

/// u^ξ_i = u_i + c_i u_N for free index i (0-based, i < N).
GridFunction mass_tangent(const MassKinkConfig& mcfg, int i, const Grid& grid,
                          const Heteroclinic& het = Heteroclinic::quartic());
/// Columns u^ξ_i built from an evaluated frame of the full configuration.
Eigen::MatrixXd mass_tangents(const KinkFrame& frame);
/// Numeric metric <u^ξ_k, u^ξ_j>.
Eigen::MatrixXd metric_tensor(const MassKinkConfig& mcfg, const Grid& grid,
                              const Heteroclinic& het = Heteroclinic::quartic());

struct FermiOptions {
  int max_iterations = 50;
  /// Residual tolerance relative to chi/eps.
  double rel_tol = 1e-12;
};

struct FermiSplit {
  KinkConfig h;
  GridFunction v;
  Eigen::VectorXd residuals;
  bool converged = false;
  int iterations = 0;
};

struct MassFermiSplit {
  MassKinkConfig xi;
  GridFunction v;
  Eigen::VectorXd residuals;
  bool converged = false;
  int iterations = 0;
};

/// Damped Newton for u = u^h + v with v orthogonal to every tangent.
/// Throws FermiFailure without convergence and DomainViolation when the
/// iterate leaves the admissible set.
FermiSplit fermi_split(const GridFunction& u, const KinkConfig& h_init,
                       const FermiOptions& opts = {},
                       const Heteroclinic& het = Heteroclinic::quartic());
/// Fixed-mass variant: the mass is taken from u and v is orthogonal to the
/// constrained tangents.
MassFermiSplit fermi_split_mass(const GridFunction& u, const MassKinkConfig& init,
                                const FermiOptions& opts = {},
                                const Heteroclinic& het = Heteroclinic::quartic());

/// Zero crossings of the 3-point moving average of u, linearly interpolated.
Eigen::VectorXd cold_start_positions(const GridFunction& u);

}  // namespace kinkdyn
