#include <doctest.h>

#include <cmath>

#include "kinkdyn/errors.hpp"
#include "kinkdyn/manifold.hpp"
#include "kinkdyn/spde.hpp"

using namespace kinkdyn;

namespace {

KinkConfig pair(double a, double b, double eps = 0.02) {
  KinkConfig c;
  c.h = Eigen::Vector2d(a, b);
  c.eps = eps;
  return c;
}

}  // namespace

TEST_SUITE("spde") {

TEST_CASE("Neumann Laplacian") {
  for (int n : {51, 101}) {
    const Grid g(n);
    const Eigen::SparseMatrix<double> d = assemble_laplacian(g, 1.0);
    CHECK((d * Eigen::VectorXd::Ones(n)).cwiseAbs().maxCoeff() < 1e-9);
    const Eigen::MatrixXd dense = Eigen::MatrixXd(d);
    const Eigen::MatrixXd wd = g.weights().asDiagonal() * dense;
    CHECK((wd - wd.transpose()).cwiseAbs().maxCoeff() < 1e-9 * dense.cwiseAbs().maxCoeff());
    Eigen::VectorXd out;
    const Eigen::VectorXd x = g.nodes();
    const Eigen::VectorXd c = (M_PI * x).array().cos();
    apply_laplacian(g, 1.0, c, out);
    CHECK((out - d * c).cwiseAbs().maxCoeff() < 1e-9);
    // top eigenvalue of the symmetrized operator is the constant mode
    const Eigen::VectorXd s = g.weights().cwiseSqrt();
    const Eigen::MatrixXd sym = s.asDiagonal() * dense * s.cwiseInverse().asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (sym + sym.transpose()));
    CHECK(std::abs(es.eigenvalues().maxCoeff()) < 1e-10 * n * n);
  }
  // second-order convergence on cos(pi x)
  double prev = 0.0;
  for (int n : {41, 81, 161}) {
    const Grid g(n);
    const Eigen::VectorXd x = g.nodes();
    const Eigen::VectorXd c = (M_PI * x).array().cos();
    Eigen::VectorXd out;
    apply_laplacian(g, 1.0, c, out);
    const double err = (out + M_PI * M_PI * c).cwiseAbs().maxCoeff();
    if (prev > 0) CHECK(prev / err == doctest::Approx(4.0).epsilon(0.05));
    prev = err;
  }
  CHECK_THROWS_AS(assemble_laplacian(Grid(2), 1.0), InvalidArgument);
}

TEST_CASE("fixed points") {
  const Grid g(101);
  SpdeConfig cfg;
  cfg.eps = 0.05;
  const SpdeIntegrator integ(g, cfg, 1e-3);
  SpdeState plus{0.0, GridFunction(g, Eigen::VectorXd::Ones(101))};
  SpdeState zero{0.0, GridFunction(g)};
  for (int i = 0; i < 100; ++i) {
    integ.step(plus);
    integ.step(zero);
  }
  CHECK((plus.u.values.array() - 1.0).abs().maxCoeff() < 1e-14);
  CHECK((zero.u.values.array() == 0.0).all());
  CHECK(plus.t == doctest::Approx(0.1));

  cfg.mass_conserving = true;
  cfg.mu = 0.3;
  const SpdeIntegrator mac(g, cfg, 1e-3);
  SpdeState flat{0.0, GridFunction(g, Eigen::VectorXd::Constant(101, 0.3))};
  for (int i = 0; i < 100; ++i) mac.step(flat);
  CHECK((flat.u.values.array() - 0.3).abs().maxCoeff() < 1e-15);
  CHECK_THROWS_AS(SpdeIntegrator(g, cfg, 0.06), InvalidArgument);
  CHECK_THROWS_AS(SpdeIntegrator(g, cfg, 0.0), InvalidArgument);
}

TEST_CASE("metastable profile persists") {
  const double eps = 0.02;
  const KinkConfig c = pair(0.3, 0.7, eps);
  const Grid g = Grid::resolving(eps);
  SpdeConfig cfg;
  cfg.eps = eps;
  const SpdeIntegrator integ(g, cfg, 1e-3);
  SpdeState s{0.0, build_profile(c, g)};
  double e_prev = energy(s.u, eps);
  bool decays = true;
  for (int i = 0; i < 10000; ++i) {
    integ.step(s);
    const double e = energy(s.u, eps);
    decays = decays && e <= e_prev + 1e-10 * 1e-3;
    e_prev = e;
  }
  CHECK(decays);
  const FermiSplit f = fermi_split(s.u, c);
  CHECK((f.h.h - c.h).cwiseAbs().maxCoeff() < 1e-4);
  CHECK(std::abs(s.u.values(1) - s.u.values(0)) / g.dx() < 1e-6);
}

TEST_CASE("mass conservation and rejection of biased increments") {
  const double eps = 0.05;
  const Grid g = Grid::resolving(eps);
  const KinkConfig c = pair(0.3, 0.7, eps);
  SpdeConfig cfg;
  cfg.eps = eps;
  cfg.mass_conserving = true;
  SpdeState s{0.0, build_profile(c, g)};
  cfg.mu = s.u.mean();
  const SpdeIntegrator integ(g, cfg, 1e-2);
  const NoiseModel model = build_noise(16, 0.05, true);
  const ModalBasis basis(g, 16);
  RandomStream rng(1, 0, 0);
  double worst = 0.0;
  for (int i = 0; i < 2000; ++i) {
    integ.step(s, sample_increment(model, basis, 1e-2, rng));
    worst = std::max(worst, std::abs(s.u.mean() - cfg.mu));
  }
  CHECK(worst < 1e-12);
  CHECK_THROWS_AS(integ.step(s, Eigen::VectorXd::Constant(g.size(), 1e-3)), InvalidArgument);
}

TEST_CASE("mirror equivariance of the fixed-mass flow") {
  const double eps = 0.05;
  const Grid g(101);
  const KinkConfig c = pair(0.3, 0.7, eps);
  SpdeConfig cfg;
  cfg.eps = eps;
  cfg.mass_conserving = true;
  SpdeState a{0.0, build_profile(c, g)};
  cfg.mu = a.u.mean();
  SpdeState b = a;
  const SpdeIntegrator integ(g, cfg, 1e-2);
  const NoiseModel model = build_noise(10, 0.05, true);
  const ModalBasis basis(g, 10);
  RandomStream rng(5, 0, 0);
  for (int i = 0; i < 300; ++i) {
    const NoiseIncrement inc = sample_increment(model, basis, 1e-2, rng);
    integ.step(a, inc.grid);
    integ.step(b, Eigen::VectorXd(inc.grid.reverse()));
  }
  CHECK((a.u.values - b.u.values.reverse()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("one-shot steppers agree with the integrator") {
  const double eps = 0.05;
  const Grid g(101);
  SpdeConfig cfg;
  cfg.eps = eps;
  const SpdeState s{0.0, build_profile(pair(0.3, 0.7, eps), g)};
  const NoiseModel model = build_noise(10, 0.05, true);
  const ModalBasis basis(g, 10);
  RandomStream rng(5, 0, 0);
  const NoiseIncrement inc = sample_increment(model, basis, 1e-2, rng);
  SpdeState t = s;
  SpdeIntegrator(g, cfg, 1e-2).step(t, inc);
  CHECK((ac_step(s, cfg, 1e-2, inc).u.values - t.u.values).cwiseAbs().maxCoeff() == 0.0);
  // manual semi-implicit step
  const Eigen::SparseMatrix<double> d = assemble_laplacian(g, eps);
  Eigen::SparseMatrix<double> lhs(g.size(), g.size());
  lhs.setIdentity();
  lhs -= 1e-2 * d;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(lhs);
  const Eigen::VectorXd rhs =
      s.u.values - 1e-2 * (s.u.values.array().cube() - s.u.values.array()).matrix() + inc.grid;
  CHECK((lu.solve(rhs) - t.u.values).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Taylor split of the operator") {
  const double eps = 0.02;
  const Grid g = Grid::resolving(eps);
  const KinkConfig c = pair(0.3, 0.7, eps);
  const GridFunction uh = build_profile(c, g);
  const OperatorParts zero = operator_parts(uh, GridFunction(g), eps);
  CHECK(zero.Lh_v.values.isZero(0.0));
  CHECK(zero.Nh_v.values.isZero(0.0));
  const Eigen::VectorXd x = g.nodes();
  const Eigen::VectorXd w = (4.0 * x).array().sin() * 0.1 + (11.0 * x).array().cos() * 0.05;
  const OperatorParts p = operator_parts(uh, GridFunction(g, w), eps);
  const Eigen::VectorXd full = allen_cahn_operator(g, eps, uh.values + w);
  CHECK((p.L_of_uh.values + p.Lh_v.values + p.Nh_v.values - full).cwiseAbs().maxCoeff() < 1e-10);
  // quartic closed form of the nonlinear part
  const Eigen::VectorXd nl = -3.0 * uh.values.cwiseProduct(w.cwiseAbs2()) - w.cwiseAbs2().cwiseProduct(w);
  CHECK((p.Nh_v.values - nl).cwiseAbs().maxCoeff() < 1e-14);
  const OperatorParts half = operator_parts(uh, GridFunction(g, 0.5 * w), eps);
  const double ratio = p.Nh_v.norm_l2() / half.Nh_v.norm_l2();
  CHECK(ratio == doctest::Approx(4.0).epsilon(0.15));
  const OperatorParts via_h = operator_parts(GridFunction(g, uh.values + w), c);
  CHECK((via_h.Nh_v.values - p.Nh_v.values).cwiseAbs().maxCoeff() < 1e-13);
  CHECK_THROWS_AS(operator_parts(uh, GridFunction(Grid(50)), eps), InvalidArgument);
}

TEST_CASE("strong convergence with a shared path") {
  const double eps = 0.05;
  const Grid g(101);
  SpdeConfig cfg;
  cfg.eps = eps;
  const NoiseModel model = build_noise(10, 0.1, true);
  const ModalBasis basis(g, 10);
  const GridFunction u0 = build_profile(pair(0.3, 0.7, eps), g);
  const double horizon = 0.1;
  const int fine_steps = 1024;
  const double dt_fine = horizon / fine_steps;
  std::vector<Eigen::VectorXd> path;
  RandomStream rng(9, 0, 0);
  for (int i = 0; i < fine_steps; ++i) path.push_back(sample_modal(model, dt_fine, rng));
  auto solve = [&](int stride) {
    SpdeState s{0.0, u0};
    const SpdeIntegrator integ(g, cfg, dt_fine * stride);
    for (int i = 0; i < fine_steps; i += stride) {
      Eigen::VectorXd modal = Eigen::VectorXd::Zero(11);
      for (int j = 0; j < stride; ++j) modal += path[static_cast<std::size_t>(i + j)];
      integ.step(s, complete_increment(modal, dt_fine * stride, basis));
    }
    return s.u.values;
  };
  const Eigen::VectorXd ref = solve(1);
  const double e16 = (solve(16) - ref).cwiseAbs().maxCoeff();
  const double e8 = (solve(8) - ref).cwiseAbs().maxCoeff();
  const double e4 = (solve(4) - ref).cwiseAbs().maxCoeff();
  CHECK(e16 / e8 == doctest::Approx(2.0).epsilon(0.3));
  CHECK(e8 / e4 == doctest::Approx(2.0).epsilon(0.3));
}

}
