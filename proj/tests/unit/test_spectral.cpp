#include <doctest.h>

#include <cmath>
#include <random>

#include "kinkdyn/errors.hpp"
#include "kinkdyn/manifold.hpp"
#include "kinkdyn/spectral.hpp"
#include "oracles.hpp"

using namespace kinkdyn;

namespace {

KinkConfig make(std::initializer_list<double> hs, double eps = 0.02) {
  KinkConfig c;
  c.h = Eigen::VectorXd(static_cast<Eigen::Index>(hs.size()));
  int i = 0;
  for (double x : hs) c.h(i++) = x;
  c.eps = eps;
  return c;
}

std::vector<GridFunction> tangents(const KinkConfig& c, const Grid& g) {
  std::vector<GridFunction> out;
  for (int i = 0; i < c.count(); ++i) out.push_back(tangent(c, i, g));
  return out;
}

}  // namespace

TEST_SUITE("spectral") {

TEST_CASE("linearization around a constant phase") {
  const double eps = 0.02;
  const Grid g = Grid::resolving(eps);
  const GridFunction plus(g, Eigen::VectorXd::Ones(g.size()));
  const Eigen::MatrixXd op = assemble_linearized_at(plus, eps);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(op, g));
  CHECK(es.eigenvalues().maxCoeff() == doctest::Approx(-2.0).epsilon(1e-10));
  // second Neumann mode: -2 - eps² pi²
  const Eigen::VectorXd ev = es.eigenvalues();
  CHECK(ev(ev.size() - 2) == doctest::Approx(-2.0 - eps * eps * M_PI * M_PI).epsilon(1e-6));
}

TEST_CASE("linearization around kinks") {
  const double eps = 0.02;
  const KinkConfig c = make({0.25, 0.5, 0.75}, eps);
  // the stencil error is (dx/eps)^4, so the residual check uses ten points per eps
  const Grid g = Grid::resolving(eps, 10.0);
  const Eigen::MatrixXd op = assemble_linearized(c, g);
  const Eigen::MatrixXd wop = g.weights().asDiagonal() * op;
  CHECK((wop - wop.transpose()).cwiseAbs().maxCoeff() < 1e-12 * wop.cwiseAbs().maxCoeff());
  for (int i = 0; i < 3; ++i) {
    const GridFunction t = tangent(c, i, g);
    const double res = g.norm_l2(op * t.values) / t.norm_l2();
    CHECK(res < 1e-4);
  }
  CHECK_THROWS_AS(assemble_linearized(c, Grid(101)), InvalidArgument);
  CHECK_NOTHROW(assemble_linearized(c, Grid::resolving(eps)));
}

TEST_CASE("whole-line spectrum") {
  const WholeLineReport r = whole_line_spectrum(20.0, 4000, 4);
  REQUIRE(r.eigenvalues.size() == 4);
  CHECK(std::abs(r.eigenvalues(0)) < 1e-6);
  CHECK(r.overlap_tangent > 0.999);
  CHECK(std::abs(r.eigenvalues(1) + 1.5) < 1e-3);
  CHECK(r.overlap_second > 0.999);
  CHECK(r.eigenvalues(2) < -1.5);
  const WholeLineReport wide = whole_line_spectrum(40.0, 8000, 3);
  CHECK(wide.eigenvalues(2) > r.eigenvalues(2));
  CHECK(wide.eigenvalues(2) < -2.0 + 1e-2);
  CHECK_THROWS_AS(whole_line_spectrum(10.0, 4000), InvalidArgument);
  CHECK_THROWS_AS(whole_line_spectrum(20.0, 1000), InvalidArgument);
}

TEST_CASE("constrained gaps") {
  const double eps = 0.02;
  const KinkConfig c = make({0.25, 0.5, 0.75}, eps);
  const Grid g = Grid::resolving(eps);
  const SpectralReport rep = linearized_spectrum(c, g, tangents(c, g));
  CHECK(rep.near_zero_count == 3);
  CHECK(rep.gap <= -0.70);
  CHECK(rep.gap <= rep.eigenvalues(rep.near_zero_count) + 1e-10);
  for (Eigen::Index i = 1; i < rep.eigenvalues.size(); ++i)
    REQUIRE(rep.eigenvalues(i) <= rep.eigenvalues(i - 1));
  CHECK(constrained_gap(c, tangents(c, g), g) == doctest::Approx(rep.gap));

  const double top = constrained_gap(c, {}, g);
  CHECK(std::abs(top) < 1e-4);
  CHECK(top == doctest::Approx(rep.eigenvalues(0)).epsilon(1e-8));

  std::vector<GridFunction> dup = tangents(c, g);
  dup.push_back(dup.front());
  CHECK_THROWS_AS(constrained_gap(c, dup, g), InvalidArgument);
}

TEST_CASE("fixed-mass constrained gap") {
  const double eps = 0.02;
  const KinkConfig c = make({0.25, 0.5, 0.75}, eps);
  const Grid g = Grid::resolving(eps);
  const MassKinkConfig m = make_mass_config(c.h.head(2), profile_mass(c), eps);
  std::vector<GridFunction> cons;
  for (int i = 0; i < 2; ++i) cons.push_back(mass_tangent(m, i, g));
  cons.emplace_back(g, Eigen::VectorXd::Ones(g.size()));
  const double gap = constrained_gap(m.full, cons, g);
  CHECK(gap <= -0.8 * 1.5 * eps);
  CHECK(gap < 0.0);
}

TEST_CASE("subspace bound: aligned case") {
  Eigen::VectorXd eigs(4);
  eigs << 0.01, -0.02, -1.5, -2.0;
  const Eigen::MatrixXd vecs = Eigen::MatrixXd::Identity(4, 4);
  const SubspaceGap s = subspace_gap_bound(eigs, vecs, vecs.col(1), 0.05, 1.0);
  CHECK(s.near_count == 2);
  CHECK(s.cos_angle == doctest::Approx(1.0));
  CHECK(s.bound == doctest::Approx((0.05 - 1.0) / 2.0));
  CHECK(s.admissible);
  CHECK((s.f_u - vecs.col(1)).norm() < 1e-15);
  CHECK_THROWS_AS(subspace_gap_bound(eigs, vecs, vecs.col(2), 0.05, 1.0), DegenerateFrame);
  Eigen::VectorXd bad = eigs;
  bad(2) = -0.5;
  CHECK_THROWS_AS(subspace_gap_bound(bad, vecs, vecs.col(1), 0.05, 1.0), InvalidArgument);
  bad = eigs.reverse();
  CHECK_THROWS_AS(subspace_gap_bound(bad, vecs, vecs.col(1), 0.05, 1.0), InvalidArgument);
}

TEST_CASE("subspace bound against brute force") {
  std::mt19937_64 rng(99);
  int checked = 0, violations = 0;
  while (checked < 200) {
    const oracle::GapInstance inst = oracle::random_gap_instance(rng);
    const SubspaceGap s = subspace_gap_bound(inst.eigs, inst.vecs, inst.u, inst.delta, inst.lambda);
    CHECK(s.cos_angle == doctest::Approx(oracle::frame_cosine(inst)).epsilon(1e-10));
    if (!s.admissible) continue;
    ++checked;
    if (oracle::constrained_rayleigh_max(inst) > s.bound + 1e-12) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("fixed-mass frame angle shrinks like sqrt(eps)") {
  std::vector<double> scaled;
  for (double eps : {0.04, 0.02, 0.01}) {
    const KinkConfig c = make({0.25, 0.5, 0.75}, eps);
    const Grid g = Grid::resolving(eps);
    const Eigen::MatrixXd sym = symmetrize(assemble_linearized(c, g), g);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    const Eigen::VectorXd eigs = es.eigenvalues().reverse();
    const Eigen::MatrixXd vecs = es.eigenvectors().rowwise().reverse();
    const Eigen::VectorXd u = g.weights().cwiseSqrt();
    const SubspaceGap s = subspace_gap_bound(eigs, vecs, u, 1e-2, 0.75);
    CHECK(s.near_count == 3);
    scaled.push_back(std::abs(s.cos_angle) / std::sqrt(eps));
  }
  CHECK(scaled[1] / scaled[0] == doctest::Approx(1.0).epsilon(0.2));
  CHECK(scaled[2] / scaled[1] == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("nonlinear term keeps the tube stable") {
  const double eps = 0.02;
  const KinkConfig c = make({0.25, 0.5, 0.75}, eps);
  const NonlinearCheck chk = nonlinear_stability_check(c, Grid::resolving(eps), 0.1, 20, 5);
  CHECK(chk.samples == 20);
  CHECK(chk.violations == 0);
  CHECK(chk.worst_ratio <= chk.threshold);
  CHECK(chk.threshold == doctest::Approx(-0.75));
}

}
