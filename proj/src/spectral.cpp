#include "kinkdyn/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <lapacke.h>

#include "kinkdyn/errors.hpp"
#include "kinkdyn/noise.hpp"
#include "kinkdyn/spde.hpp"

namespace kinkdyn {

namespace {

void require_resolution(const Grid& grid, double eps) {
  if (!(eps > 0.0)) throw InvalidArgument("eps must be positive");
  if (grid.dx() > eps / 5.0 * (1.0 + 1e-9))
    throw InvalidArgument("grid spacing " + std::to_string(grid.dx()) +
                          " does not resolve eps = " + std::to_string(eps) +
                          " (need dx <= eps/5)");
}

// Reflect an index into [0, n) about the end nodes.
int reflect(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * (n - 1) - i;
  return i;
}

}  // namespace

Eigen::MatrixXd fourth_order_laplacian(const Grid& grid, double eps) {
  const int n = grid.size();
  if (n < 5) throw InvalidArgument("fourth-order stencil needs at least 5 points");
  const double c = eps * eps / (12.0 * grid.dx() * grid.dx());
  static constexpr int kOffset[5] = {-2, -1, 0, 1, 2};
  static constexpr double kCoef[5] = {-1.0, 16.0, -30.0, 16.0, -1.0};
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int s = 0; s < 5; ++s) d(i, reflect(i + kOffset[s], n)) += c * kCoef[s];
  return d;
}

Eigen::MatrixXd assemble_linearized_at(const GridFunction& u, double eps, const Potential& pot) {
  require_resolution(u.grid, eps);
  Eigen::MatrixXd op = fourth_order_laplacian(u.grid, eps);
  for (int i = 0; i < u.grid.size(); ++i) op(i, i) -= pot.f_prime(u.values(i));
  return op;
}

Eigen::MatrixXd assemble_linearized(const KinkConfig& cfg, const Grid& grid,
                                    const Heteroclinic& het) {
  require_resolution(grid, cfg.eps);
  if (cfg.count() > 0) require_admissible(cfg);
  const KinkFrame fr = evaluate_frame(cfg, grid, 0, het);
  return assemble_linearized_at(GridFunction(grid, fr.profile), cfg.eps, het.potential());
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& op, const Grid& grid) {
  const Eigen::VectorXd s = grid.weights().cwiseSqrt();
  Eigen::MatrixXd m = s.asDiagonal() * op * s.cwiseInverse().asDiagonal();
  return 0.5 * (m + m.transpose());
}

double constrained_top_eigenvalue(const Eigen::MatrixXd& sym, const Eigen::MatrixXd& constraints) {
  const Eigen::Index n = sym.rows();
  if (constraints.cols() == 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(n - 1);
  }
  if (constraints.rows() != n) throw InvalidArgument("constraint length does not match operator");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> rank_check(constraints);
  rank_check.setThreshold(1e-10);
  if (rank_check.rank() < constraints.cols())
    throw InvalidArgument("constraints are linearly dependent (rank " +
                          std::to_string(rank_check.rank()) + " of " +
                          std::to_string(constraints.cols()) + ")");
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(constraints);
  const Eigen::MatrixXd q = qr.householderQ();
  const Eigen::Index c = constraints.cols();
  const Eigen::MatrixXd q2 = q.rightCols(n - c);
  const Eigen::MatrixXd reduced = q2.transpose() * sym * q2;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (reduced + reduced.transpose()),
                                                    Eigen::EigenvaluesOnly);
  return es.eigenvalues()(n - c - 1);
}

namespace {

Eigen::MatrixXd weighted_columns(const std::vector<GridFunction>& cs, const Grid& grid) {
  const Eigen::VectorXd s = grid.weights().cwiseSqrt();
  Eigen::MatrixXd m(grid.size(), static_cast<Eigen::Index>(cs.size()));
  for (std::size_t j = 0; j < cs.size(); ++j) {
    require_same_grid(cs[j].grid, grid);
    m.col(static_cast<Eigen::Index>(j)) = s.cwiseProduct(cs[j].values);
  }
  return m;
}

}  // namespace

double constrained_gap(const KinkConfig& cfg, const std::vector<GridFunction>& constraints,
                       const Grid& grid, const Heteroclinic& het) {
  const Eigen::MatrixXd sym = symmetrize(assemble_linearized(cfg, grid, het), grid);
  return constrained_top_eigenvalue(sym, weighted_columns(constraints, grid));
}

SpectralReport linearized_spectrum(const KinkConfig& cfg, const Grid& grid,
                                   const std::vector<GridFunction>& constraints,
                                   const Heteroclinic& het) {
  const Eigen::MatrixXd sym = symmetrize(assemble_linearized(cfg, grid, het), grid);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  SpectralReport rep;
  rep.eigenvalues = es.eigenvalues().reverse();
  for (Eigen::Index i = 0; i < rep.eigenvalues.size(); ++i)
    if (std::fabs(rep.eigenvalues(i)) < kNearZero) ++rep.near_zero_count;
  rep.gap = constraints.empty() ? rep.eigenvalues(0)
                                : constrained_top_eigenvalue(sym, weighted_columns(constraints, grid));
  return rep;
}

WholeLineReport whole_line_spectrum(double halfwidth, int n, int count, const Heteroclinic& het) {
  if (halfwidth < 20.0) throw InvalidArgument("whole-line half-width must be at least 20");
  if (n < 2000) throw InvalidArgument("whole-line discretization needs at least 2000 points");
  if (count < 2 || count > n) throw InvalidArgument("requested eigenpair count out of range");
  const double dx = 2.0 * halfwidth / (n - 1);
  const double c = 1.0 / (12.0 * dx * dx);
  const lapack_int kd = 2;
  const lapack_int ldab = kd + 1;
  std::vector<double> ab(static_cast<std::size_t>(ldab) * n, 0.0);
  const auto at = [&](int i, int j) -> double& {
    return ab[static_cast<std::size_t>(kd + i - j) + static_cast<std::size_t>(j) * ldab];
  };
  Eigen::VectorXd x(n);
  for (int j = 0; j < n; ++j) {
    x(j) = -halfwidth + j * dx;
    at(j, j) = -30.0 * c - het.potential().f_prime(het.value(x(j)));
    if (j >= 1) at(j - 1, j) = 16.0 * c;
    if (j >= 2) at(j - 2, j) = -1.0 * c;
  }
  // eigenvalues only; the reduction with vectors would need an n × n work matrix
  std::vector<double> band = ab;
  std::vector<double> w(n);
  std::vector<double> unused(1);
  std::vector<lapack_int> ifail(n);
  lapack_int found = 0;
  lapack_int info =
      LAPACKE_dsbevx(LAPACK_COL_MAJOR, 'N', 'I', 'U', n, kd, band.data(), ldab, unused.data(), 1,
                     0.0, 0.0, n - count + 1, n, 2.0 * LAPACKE_dlamch('S'), &found, w.data(),
                     unused.data(), 1, ifail.data());
  if (info != 0 || found != count)
    throw NumericalFailure("banded eigensolver failed (info " + std::to_string(info) + ")");

  // eigenvectors by shifted inverse iteration on the general band storage
  const lapack_int kl = kd, ku = kd, ldgb = 2 * kl + ku + 1;
  std::vector<double> z(static_cast<std::size_t>(n) * count);
  for (int k = 0; k < count; ++k) {
    const double shift = w[k] + 1e-9 * (1.0 + std::fabs(w[k]));
    std::vector<double> gb(static_cast<std::size_t>(ldgb) * n, 0.0);
    for (int j = 0; j < n; ++j)
      for (int i = std::max(0, j - kd); i <= std::min(n - 1, j + kd); ++i) {
        const double a = i <= j ? at(i, j) : at(j, i);
        gb[static_cast<std::size_t>(kl + ku + i - j) + static_cast<std::size_t>(j) * ldgb] =
            a - (i == j ? shift : 0.0);
      }
    std::vector<lapack_int> piv(n);
    info = LAPACKE_dgbtrf(LAPACK_COL_MAJOR, n, n, kl, ku, gb.data(), ldgb, piv.data());
    if (info < 0) throw NumericalFailure("banded factorization failed");
    Eigen::Map<Eigen::VectorXd> vec(z.data() + static_cast<std::size_t>(k) * n, n);
    // start vector with both parities present
    for (int j = 0; j < n; ++j) vec(j) = 1.0 + 0.5 * std::sin(0.37 * j);
    for (int it = 0; it < 3; ++it) {
      info = LAPACKE_dgbtrs(LAPACK_COL_MAJOR, 'N', n, kl, ku, 1, gb.data(), ldgb, piv.data(),
                            vec.data(), n);
      if (info != 0) throw NumericalFailure("banded solve failed");
      vec.normalize();
    }
  }

  WholeLineReport rep;
  rep.halfwidth = halfwidth;
  rep.n = n;
  rep.eigenvalues.resize(count);
  for (int k = 0; k < count; ++k) rep.eigenvalues(k) = w[count - 1 - k];

  Eigen::VectorXd ref1(n), ref2(n);
  for (int j = 0; j < n; ++j) {
    const HeteroclinicJet jt = het.jet(x(j));
    ref1(j) = jt.d1;
    ref2(j) = jt.u * std::sqrt(jt.d1);
  }
  const Eigen::Map<const Eigen::VectorXd> top(z.data() + static_cast<std::size_t>(count - 1) * n, n);
  const Eigen::Map<const Eigen::VectorXd> second(z.data() + static_cast<std::size_t>(count - 2) * n, n);
  rep.overlap_tangent = std::fabs(top.dot(ref1)) / (top.norm() * ref1.norm());
  rep.overlap_second = std::fabs(second.dot(ref2)) / (second.norm() * ref2.norm());
  return rep;
}

SubspaceGap subspace_gap_bound(const Eigen::VectorXd& eigs, const Eigen::MatrixXd& eigvecs,
                               const Eigen::VectorXd& u, double delta, double lambda) {
  const Eigen::Index d = eigs.size();
  if (eigvecs.cols() != d || eigvecs.rows() != u.size())
    throw InvalidArgument("eigenbasis and vector sizes disagree");
  if (!(delta >= 0.0) || !(lambda > delta))
    throw InvalidArgument("need 0 <= delta < lambda");
  for (Eigen::Index i = 1; i < d; ++i)
    if (eigs(i) > eigs(i - 1)) throw InvalidArgument("eigenvalues must be sorted descending");
  int near = 0;
  while (near < d && std::fabs(eigs(near)) <= delta) ++near;
  if (near == 0) throw InvalidArgument("no eigenvalue inside [-delta, delta]");
  for (Eigen::Index i = near; i < d; ++i)
    if (eigs(i) > -lambda)
      throw InvalidArgument("eigenvalue " + std::to_string(eigs(i)) +
                            " lies between -lambda and -delta");
  const double pivot = eigvecs.col(near - 1).dot(u);
  if (pivot == 0.0 || std::fabs(pivot) < 1e-300)
    throw DegenerateFrame("last near-zero eigenvector is orthogonal to u");
  SubspaceGap out;
  out.near_count = near;
  out.f_u = eigvecs.col(near - 1);
  for (int i = 0; i + 1 < near; ++i) out.f_u += (eigvecs.col(i).dot(u) / pivot) * eigvecs.col(i);
  out.cos_angle = out.f_u.dot(u) / (out.f_u.norm() * u.norm());
  const double c2 = out.cos_angle * out.cos_angle;
  out.admissible = std::fabs(out.cos_angle) >= std::sqrt(delta / lambda);
  out.bound = (delta - lambda * c2) / (1.0 + c2);
  return out;
}

NonlinearCheck nonlinear_stability_check(const KinkConfig& cfg, const Grid& grid, double m,
                                         int samples, std::uint64_t seed, const Heteroclinic& het) {
  if (samples < 1) throw InvalidArgument("need at least one sample");
  require_admissible(cfg);
  const KinkFrame fr = evaluate_frame(cfg, grid, 1, het);
  const Eigen::MatrixXd op = assemble_linearized(cfg, grid, het);
  const Eigen::VectorXd& w = grid.weights();
  const Eigen::MatrixXd gram = fr.d1.transpose() * w.asDiagonal() * fr.d1;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  const double radius = std::pow(cfg.eps, 0.5 + m);
  const Potential& pot = het.potential();
  constexpr int kModes = 12;
  const ModalBasis basis(grid, kModes);

  NonlinearCheck out;
  out.samples = samples;
  out.threshold = -0.5 * pot.lambda0();
  out.worst_ratio = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    RandomStream rng(seed, static_cast<std::uint64_t>(s), 13);
    Eigen::VectorXd c(kModes + 1);
    for (int k = 0; k <= kModes; ++k) c(k) = rng.normal() / (1.0 + k);
    Eigen::VectorXd v = basis.synthesize(c);
    v -= fr.d1 * ldlt.solve(fr.d1.transpose() * w.cwiseProduct(v));
    v *= radius / grid.norm_l2(v);
    Eigen::VectorXd total = op * v;
    for (int i = 0; i < grid.size(); ++i) {
      const double a = fr.profile(i);
      const double b = v(i);
      total(i) -= pot.f(a + b) - pot.f(a) - pot.f_prime(a) * b;
    }
    const double ratio = grid.inner(total, v) / grid.inner(v, v);
    out.worst_ratio = std::max(out.worst_ratio, ratio);
    if (ratio > out.threshold) ++out.violations;
  }
  return out;
}

}  // namespace kinkdyn
