#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "kinkdyn/grid.hpp"
#include "kinkdyn/heteroclinic.hpp"
#include "kinkdyn/manifold.hpp"

namespace kinkdyn {

/// Default threshold below which |λ| counts as a tangent eigenvalue.
constexpr double kNearZero = 1e-4;

/// Fourth-order five-point eps² ∂xx with even reflection at both ends. Dense,
/// acting on nodal values; W·D is symmetric for trapezoid weights W.
Eigen::MatrixXd fourth_order_laplacian(const Grid& grid, double eps);

/// Nodal matrix of eps² ∂xx - f'(u^h). Rejects grids coarser than eps/5.
Eigen::MatrixXd assemble_linearized(const KinkConfig& cfg, const Grid& grid,
                                    const Heteroclinic& het = Heteroclinic::quartic());
/// Same operator around an arbitrary state.
Eigen::MatrixXd assemble_linearized_at(const GridFunction& u, double eps,
                                       const Potential& pot = Potential::quartic());
/// W^{1/2} L W^{-1/2}, symmetric when W L is.
Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& op, const Grid& grid);

struct SubspaceDiagnostics {
  double cos_angle = 0.0;
  double delta = 0.0;
  double lambda = 0.0;
  double bound = 0.0;
};

struct SpectralReport {
  /// Descending.
  Eigen::VectorXd eigenvalues;
  int near_zero_count = 0;
  /// Largest Rayleigh quotient on the constrained subspace (NaN if none was
  /// requested).
  double gap = 0.0;
  SubspaceDiagnostics diagnostics;
};

/// Full spectrum of the linearization around u^h plus the gap on the
/// complement of the given constraints.
SpectralReport linearized_spectrum(const KinkConfig& cfg, const Grid& grid,
                                   const std::vector<GridFunction>& constraints,
                                   const Heteroclinic& het = Heteroclinic::quartic());

/// max <L^h v, v> / |v|² over v orthogonal (trapezoid inner product) to all
/// constraints. Throws InvalidArgument for rank-deficient constraints.
double constrained_gap(const KinkConfig& cfg, const std::vector<GridFunction>& constraints,
                       const Grid& grid, const Heteroclinic& het = Heteroclinic::quartic());
/// Same on a prebuilt symmetric matrix with constraint columns already in the
/// symmetrized coordinates.
double constrained_top_eigenvalue(const Eigen::MatrixXd& sym, const Eigen::MatrixXd& constraints);

struct WholeLineReport {
  double halfwidth = 0.0;
  int n = 0;
  /// Top eigenvalues, descending.
  Eigen::VectorXd eigenvalues;
  /// |cos| between the first eigenvector and U'.
  double overlap_tangent = 0.0;
  /// |cos| between the second eigenvector and U √U'.
  double overlap_second = 0.0;
};

/// y'' - f'(U) y on [-a, a] (zero outside), n points, banded eigensolver for
/// the top `count` eigenpairs.
WholeLineReport whole_line_spectrum(double halfwidth, int n, int count = 4,
                                    const Heteroclinic& het = Heteroclinic::quartic());

struct SubspaceGap {
  double bound = 0.0;
  double cos_angle = 0.0;
  bool admissible = false;
  /// N + 1, the number of eigenvalues inside [-delta, delta].
  int near_count = 0;
  Eigen::VectorXd f_u;
};

/// Gap bound for vectors orthogonal to u and to f_i + c_i f_{N+1} (i ≤ N),
/// given an orthonormal eigenbasis with descending eigenvalues laid out as
/// delta ≥ λ_1..λ_{N+1} ≥ -delta > -lambda ≥ λ_{N+2}. Euclidean inner products.
SubspaceGap subspace_gap_bound(const Eigen::VectorXd& eigs, const Eigen::MatrixXd& eigvecs,
                               const Eigen::VectorXd& u, double delta, double lambda);

/// max <(L^h v + N^h(v)), v> / |v|² over random smooth v orthogonal to the
/// tangents with |v| = eps^(1/2 + m).
struct NonlinearCheck {
  int samples = 0;
  double worst_ratio = 0.0;
  double threshold = 0.0;
  int violations = 0;
};
NonlinearCheck nonlinear_stability_check(const KinkConfig& cfg, const Grid& grid, double m,
                                         int samples, std::uint64_t seed,
                                         const Heteroclinic& het = Heteroclinic::quartic());

}  // namespace kinkdyn
