#include <doctest.h>

#include <cmath>

#include "kinkdyn/errors.hpp"
#include "kinkdyn/manifold.hpp"
#include "kinkdyn/reduced_sde.hpp"

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

NoiseModel silent(int K) {
  NoiseModel m;
  m.alphas = Eigen::VectorXd::Zero(K + 1);
  m.eta = 0.0;
  return m;
}

}  // namespace

TEST_SUITE("reduced_sde") {

TEST_CASE("diffusion kernels at v = 0") {
  const double chi = chi_constant();
  double norm_prev = 0.0;
  for (double eps : {0.04, 0.02}) {
    const KinkConfig c = make({0.3, 0.7}, eps);
    const Grid g = Grid::resolving(eps);
    const SdeContext ctx(g, build_noise(16, 0.01, true));
    const std::vector<GridFunction> sigma = diffusion_sigma(c, GridFunction(g), ctx);
    REQUIRE(sigma.size() == 2);
    for (int r = 0; r < 2; ++r) {
      CHECK(sigma[r].norm_l2() == doctest::Approx(std::sqrt(eps / chi)).epsilon(1e-4));
      for (int s = 0; s < 2; ++s)
        CHECK(std::abs(sigma[r].inner(tangent(c, s, g)) - (r == s ? 1.0 : 0.0)) < 1e-8);
      // dominated by the own tangent scaled by the diagonal of the inverse Gram
      const GridFunction own = tangent(c, r, g), other = tangent(c, 1 - r, g);
      Eigen::Matrix2d a;
      a << own.inner(own), own.inner(other), own.inner(other), other.inner(other);
      const Eigen::Matrix2d ainv = a.inverse();
      const double scale = ainv(0, 0);
      CHECK((sigma[r].values - scale * own.values - ainv(0, 1) * other.values).cwiseAbs().maxCoeff() <
            1e-10 * own.values.cwiseAbs().maxCoeff() * scale);
      // the neighbour's share is the exponentially small tail overlap
      CHECK((sigma[r].values - scale * own.values).cwiseAbs().maxCoeff() <
            1e-4 * own.values.cwiseAbs().maxCoeff() * scale);
    }
    if (norm_prev > 0.0) CHECK(norm_prev / sigma[0].norm_l2() == doctest::Approx(std::sqrt(2.0)).epsilon(0.01));
    norm_prev = sigma[0].norm_l2();
  }
}

TEST_CASE("drift at v = 0") {
  const double eps = 0.02;
  const Grid g = Grid::resolving(eps);
  const SdeContext ctx(g, build_noise_with_trace(16, 1e-3, true));
  const Eigen::VectorXd b1 = drift_b(make({0.5}, eps), GridFunction(g), ctx);
  CHECK(std::abs(b1(0)) < 1e-8);
  const Eigen::VectorXd b2 = drift_b(make({0.3, 0.7}, eps), GridFunction(g), ctx);
  CHECK(b2.cwiseAbs().maxCoeff() <= 10.0 * 1e-3);
  // a mirrored pair drifts in mirrored directions
  CHECK(b2(0) == doctest::Approx(-b2(1)).epsilon(1e-6));
  const SdeCoefficients co = sde_coefficients(make({0.3, 0.7}, eps), GridFunction(g), ctx);
  CHECK((co.b - b2).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(co.sigma.cols() == 2);
}

TEST_CASE("full step") {
  const double eps = 0.02;
  const Grid g = Grid::resolving(eps);
  const SdeContext quiet(g, silent(16));
  SdeState s;
  s.h = make({0.5}, eps);
  NoiseIncrement zero;
  zero.dt = 1e-2;
  zero.modal = Eigen::VectorXd::Zero(17);
  for (int i = 0; i < 100; ++i) REQUIRE(full_step(s, zero, GridFunction(g), quiet));
  CHECK(std::abs(s.h.h(0) - 0.5) < 1e-10);
  CHECK(s.t == doctest::Approx(1.0));

  const SdeContext ctx(g, build_noise_with_trace(16, eps * eps * eps, true));
  auto trajectory = [&] {
    SdeState st;
    st.h = make({0.3, 0.7}, eps);
    RandomStream rng(11, 0, 0);
    std::vector<double> out;
    for (int i = 0; i < 200; ++i) {
      full_step(st, sample_increment(ctx.noise, ctx.basis, 1e-2, rng), GridFunction(g), ctx);
      out.push_back(st.h.h(0));
      out.push_back(st.h.h(1));
    }
    return out;
  };
  CHECK(trajectory() == trajectory());

  // a supplier returning zero matches the explicit form
  SdeState a, b;
  a.h = b.h = make({0.3, 0.7}, eps);
  RandomStream rng(3, 0, 0);
  const NoiseIncrement inc = sample_increment(ctx.noise, ctx.basis, 1e-2, rng);
  full_step(a, inc, GridFunction(g), ctx);
  full_step(b, inc, VSupplier([&](const KinkConfig&) { return GridFunction(g); }), ctx);
  CHECK(a.h.h == b.h.h);
}

TEST_CASE("exit freezes the state") {
  const double eps = 0.02;
  const Grid g = Grid::resolving(eps);
  const SdeContext ctx(g, build_noise(4, 1.0, true));
  SdeState s;
  s.h = make({0.3, 0.7}, eps);
  NoiseIncrement big;
  big.dt = 1e-2;
  big.modal = Eigen::VectorXd::Constant(5, 50.0);
  big.modal(0) = 0.0;
  bool ok = true;
  for (int i = 0; i < 20 && ok; ++i) ok = projected_step_ac(s, big, ctx);
  REQUIRE_FALSE(ok);
  CHECK(s.exited);
  CHECK(admissible(s.h));
  CHECK_FALSE(s.exit_reason.empty());
  const Eigen::VectorXd frozen = s.h.h;
  CHECK_FALSE(projected_step_ac(s, big, ctx));
  CHECK(s.h.h == frozen);
}

TEST_CASE("projected noise ignores modes orthogonal to a kink") {
  const double eps = 0.02;
  const KinkConfig c = make({0.3, 0.7}, eps);
  const Grid g = Grid::resolving(eps);
  const SdeContext ctx(g, build_noise(24, 0.05, true));
  const Eigen::VectorXd p0 = ctx.basis.project(tangent(c, 0, g).values);
  // modal increment with zero pairing against kink 0
  RandomStream rng(1, 0, 0);
  Eigen::VectorXd m = sample_modal(ctx.noise, 1e-2, rng);
  Eigen::VectorXd weighted = ctx.noise.alphas.cwiseProduct(p0);
  m -= (m.dot(p0) / p0.dot(p0)) * p0;
  NoiseIncrement inc;
  inc.dt = 1e-2;
  inc.modal = m;
  const Eigen::VectorXd dh = projected_noise_ac(c, inc, ctx);
  CHECK(std::abs(dh(0)) < 1e-10);
  CHECK(std::abs(dh(1)) > 1e-6);
  (void)weighted;
}

TEST_CASE("Ito isometry of the projected increments") {
  const double eps = 0.02, dt = 1e-3;
  const KinkConfig c = make({0.3, 0.7}, eps);
  const Grid g = Grid::resolving(eps);
  const SdeContext ctx(g, build_noise(24, 0.05, true));
  RandomStream rng(2024, 0, 0);
  const int n = 10000;
  Eigen::Vector2d sq = Eigen::Vector2d::Zero();
  for (int i = 0; i < n; ++i) {
    NoiseIncrement inc;
    inc.dt = dt;
    inc.modal = sample_modal(ctx.noise, dt, rng);
    sq += projected_noise_ac(c, inc, ctx).cwiseAbs2();
  }
  for (int k = 0; k < 2; ++k) {
    const GridFunction uk = tangent(c, k, g);
    const double norm2 = uk.inner(uk);
    const double predicted = q_bilinear(ctx.noise, ctx.basis, uk, uk) / (norm2 * norm2);
    CHECK(sq(k) / n / dt == doctest::Approx(predicted).epsilon(0.03));
  }
}

TEST_CASE("Ito correction scales with the noise trace") {
  for (double eps : {0.04, 0.02, 0.01}) {
    const Grid g = Grid::resolving(eps);
    const double eta = 1e-3;
    const SdeContext ctx(g, build_noise_with_trace(32, eta, true));
    const Eigen::VectorXd corr = ito_correction_ac(make({0.3, 0.7}, eps), ctx);
    CHECK(corr.cwiseAbs().maxCoeff() / eta < 10.0);
  }
  const Grid g(301);
  const SdeContext quiet(g, silent(8));
  CHECK(ito_correction_ac(make({0.3, 0.7}), quiet).isZero(0.0));
}

TEST_CASE("fixed-mass flow") {
  const double eps = 0.05, dt = 1e-2;
  const Grid g = Grid::resolving(eps);
  const KinkConfig full = make({0.3, 0.7}, eps);
  const double mu = profile_mass(full);
  MassSdeState s;
  s.xi = make_mass_config(full.h.head(1), mu, eps);
  const SdeContext ctx(g, build_noise_with_trace(16, std::pow(eps, 4.2), true));
  RandomStream rng(8, 0, 0);
  double worst_chart = 0.0, worst_grid = 0.0;
  for (int i = 0; i < 10000; ++i) {
    REQUIRE(projected_step_mac(s, sample_increment(ctx.noise, ctx.basis, dt, rng), ctx));
    worst_chart = std::max(worst_chart, std::abs(profile_mass(s.xi.full) - mu));
    if (i % 500 == 0)
      worst_grid = std::max(worst_grid, std::abs(build_profile(s.xi.full, g).mean() - mu));
  }
  CHECK(worst_chart < 1e-6);
  CHECK(worst_grid < 1e-6);
  CHECK(s.t == doctest::Approx(100.0));
}

TEST_CASE("coupling identity for two kinks") {
  const double eps = 0.02;
  const Grid g = Grid::resolving(eps);
  const KinkConfig full = make({0.3, 0.7}, eps);
  const MassKinkConfig m = make_mass_config(full.h.head(1), profile_mass(full), eps);
  const SdeContext ctx(g, build_noise(16, 0.05, true));
  RandomStream rng(4, 0, 0);
  for (int i = 0; i < 50; ++i) {
    const NoiseIncrement inc = sample_increment(ctx.noise, ctx.basis, 1e-3, rng);
    const Eigen::VectorXd a = projected_noise_mac(m, inc, ctx);
    const Eigen::VectorXd b = coupled_noise_mac(m, inc, ctx);
    // weighted combination of the unconstrained increments, 0-based signs
    const Eigen::VectorXd dh = projected_noise_ac(m.full, inc, ctx);
    const double manual = dh(0) - 0.5 * (dh(0) - dh(1));
    CHECK(std::abs(a(0) - b(0)) < 1e-10);
    CHECK(std::abs(b(0) - manual) < 1e-12);
  }
  CHECK(chart_sign(1, 0) == 1);
}

TEST_CASE("Ito and Stratonovich steppers") {
  const double eps = 0.02;
  const Grid g = Grid::resolving(eps);
  const KinkConfig c = make({0.3, 0.7}, eps);
  const SdeContext ctx(g, build_noise_with_trace(16, 1e-2, true));
  const CrosscheckReport rep = ito_strat_crosscheck(c, ctx, 1e-3, 0.5, 16, 7);
  CHECK(rep.exits == 0);
  CHECK(rep.ratio == doctest::Approx(2.0).epsilon(0.3));

  const SdeContext quiet(g, silent(16));
  const CrosscheckReport none = ito_strat_crosscheck(c, quiet, 1e-3, 0.1, 2, 7);
  CHECK(none.diff_coarse == 0.0);
  CHECK(none.diff_fine == 0.0);

  Eigen::VectorXd alphas = Eigen::VectorXd::Zero(9);
  alphas(1) = 0.1;
  const SdeContext rank_one(g, build_noise(alphas, true));
  const CrosscheckReport frozen = ito_strat_crosscheck(make({0.5}, eps), rank_one, 1e-3, 0.1, 4, 7, true);
  CHECK(frozen.diff_coarse < 1e-12);
  CHECK(frozen.diff_fine < 1e-12);
  CHECK_THROWS_AS(ito_strat_crosscheck(c, ctx, 0.0, 0.1, 2, 7), InvalidArgument);
}

}
