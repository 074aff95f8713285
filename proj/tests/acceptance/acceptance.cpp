// Runs every acceptance criterion at its stated tolerance and prints one
// PASS/FAIL line each. Exit status is nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "kinkdyn/config.hpp"
#include "kinkdyn/errors.hpp"
#include "kinkdyn/experiments.hpp"
#include "kinkdyn/heteroclinic.hpp"
#include "kinkdyn/manifold.hpp"
#include "kinkdyn/reduced_sde.hpp"
#include "kinkdyn/spde.hpp"
#include "kinkdyn/spectral.hpp"
#include "oracles.hpp"

using namespace kinkdyn;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

KinkConfig kinks(std::vector<double> h, double eps) {
  KinkConfig c;
  c.h = Eigen::Map<Eigen::VectorXd>(h.data(), static_cast<Eigen::Index>(h.size()));
  c.eps = eps;
  return c;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Outcome chi_constant_check() {
  const double closed = 2.0 * std::sqrt(2.0) / 3.0;
  const double value = chi_constant();
  const double quad = oracle::simpson([](double y) { return oracle::du(y) * oracle::du(y); }, -40.0, 40.0);
  const double err = std::max(std::abs(value - closed), std::abs(value - quad));
  return {err < 1e-10, fmt("|chi - 2sqrt2/3| and |chi - quadrature| <= %.2e", err)};
}

Outcome whole_line_check() {
  const WholeLineReport r = whole_line_spectrum(20.0, 4000, 4);
  bool ok = std::abs(r.eigenvalues(0)) < 1e-6 && r.overlap_tangent > 0.999 &&
            std::abs(r.eigenvalues(1) + 1.5) < 1e-3 && r.eigenvalues(2) < -1.5;
  double prev = r.eigenvalues(2);
  std::string edges = fmt("edge a=20: %.5f", prev);
  for (double a : {40.0, 80.0}) {
    const WholeLineReport w = whole_line_spectrum(a, static_cast<int>(100 * a), 3);
    const double e = w.eigenvalues(2);
    ok = ok && e > prev && e < -1.5;
    prev = e;
    edges += fmt(", %.5f", e);
  }
  ok = ok && prev > -2.0 - 1e-3;
  return {ok, fmt("lambda1 = %.2e", r.eigenvalues(0)) + fmt(", overlap %.6f", r.overlap_tangent) +
                  fmt(", lambda2 = %.6f", r.eigenvalues(1)) + ", " + edges};
}

Outcome gram_metric_check() {
  const double eps = 0.02;
  const KinkConfig c = kinks({0.25, 0.5, 0.75}, eps);
  const Grid g = Grid::resolving(eps);
  const Eigen::MatrixXd a = gram_matrix(c, GridFunction(g));
  double off = 0.0, diag_err = 0.0;
  for (int i = 0; i < 3; ++i) {
    diag_err = std::max(diag_err, std::abs(a(i, i) / (chi_constant() / eps) - 1.0));
    for (int j = 0; j < 3; ++j)
      if (i != j) off = std::max(off, std::abs(a(i, j)) / a(i, i));
  }
  double s_err = 0.0;
  for (int n = 1; n <= 6; ++n) {
    std::vector<double> h;
    for (int i = 0; i <= n; ++i) h.push_back((i + 0.5) / (n + 1));
    const KinkConfig full = kinks(h, eps);
    const MassKinkConfig m = make_mass_config(full.h.head(n), profile_mass(full), eps);
    const Eigen::MatrixXd prod = analytic_metric_inverse(n, eps) * metric_tensor(m, g);
    s_err = std::max(s_err, (prod - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff());
  }
  const bool ok = off < 1e-6 && diag_err < 1e-4 && s_err < 1e-8;
  return {ok, fmt("Gram off/diag = %.3e (< 1e-6)", off) + fmt(", diag rel err %.2e (< 1e-4)", diag_err) +
                  fmt(", max|S^-1 S - I| over N=1..6 = %.2e (< 1e-8)", s_err)};
}

Outcome ac_gap_check() {
  const double eps = 0.02;
  const KinkConfig c = kinks({0.25, 0.5, 0.75}, eps);
  const Grid g = Grid::resolving(eps);
  std::vector<GridFunction> t;
  for (int i = 0; i < 3; ++i) t.push_back(tangent(c, i, g));
  const double gap = constrained_gap(c, t, g);
  return {gap <= -0.70, fmt("gap = %.5f (<= -0.70)", gap)};
}

Outcome mac_gap_check() {
  std::vector<double> ratios;
  bool in_band = true;
  std::string detail = "gap/eps:";
  for (double eps : {0.04, 0.02, 0.01}) {
    const KinkConfig c = kinks({0.25, 0.5, 0.75}, eps);
    const Grid g = Grid::resolving(eps);
    const MassKinkConfig m = make_mass_config(c.h.head(2), profile_mass(c), eps);
    std::vector<GridFunction> cons{mass_tangent(m, 0, g), mass_tangent(m, 1, g),
                                   GridFunction(g, Eigen::VectorXd::Ones(g.size()))};
    const double r = constrained_gap(m.full, cons, g) / eps;
    ratios.push_back(r);
    in_band = in_band && r >= -1.5 * 1.2 && r <= -1.5 * 0.8;
    detail += fmt(" %.4f", r);
  }
  const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
  const double spread = (*hi - *lo) / std::abs(*lo);
  detail += fmt(" (band [-1.8, -1.2]); relative spread %.4f (< 0.2)", spread);
  return {in_band && spread < 0.2, detail};
}

Outcome subspace_oracle_check() {
  std::mt19937_64 rng(20240601);
  int instances = 0, violations = 0;
  double worst = -1e300;
  while (instances < 1000) {
    const oracle::GapInstance inst = oracle::random_gap_instance(rng);
    const SubspaceGap s = subspace_gap_bound(inst.eigs, inst.vecs, inst.u, inst.delta, inst.lambda);
    if (!s.admissible) continue;
    ++instances;
    const double excess = oracle::constrained_rayleigh_max(inst) - s.bound;
    worst = std::max(worst, excess);
    if (excess > 1e-12) ++violations;
  }
  return {violations == 0, std::to_string(instances) + " instances, " + std::to_string(violations) +
                               " violations, max(brute force - bound) = " + fmt("%.3e", worst)};
}

Outcome fermi_roundtrip_check() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> count(1, 5);
  const double eps = 0.02;
  const Grid g = Grid::resolving(eps);
  double worst_h = 0.0, worst_v = 0.0;
  int done = 0;
  while (done < 100) {
    std::vector<double> h(static_cast<std::size_t>(count(rng)));
    for (double& x : h) x = unit(rng);
    std::sort(h.begin(), h.end());
    const KinkConfig c = kinks(h, eps);
    if (!admissible(c)) continue;
    KinkConfig init = c;
    for (Eigen::Index i = 0; i < init.h.size(); ++i) init.h(i) += 0.2 * eps * (unit(rng) - 0.5);
    if (!admissible(init)) continue;
    const FermiSplit s = fermi_split(build_profile(c, g), init);
    worst_h = std::max(worst_h, (s.h.h - c.h).cwiseAbs().maxCoeff());
    worst_v = std::max(worst_v, s.v.norm_l2());
    ++done;
  }
  return {worst_h < 1e-10 && worst_v < 1e-10,
          fmt("100 configurations: max|dh| = %.2e", worst_h) + fmt(", max|v| = %.2e", worst_v)};
}

Outcome mass_conservation_check() {
  const double eps = 0.05, dt = 1e-2;
  const Grid g = Grid::resolving(eps);
  const KinkConfig c = kinks({0.3, 0.7}, eps);
  SpdeConfig sc;
  sc.eps = eps;
  sc.mass_conserving = true;
  SpdeState s{0.0, build_profile(c, g)};
  sc.mu = s.u.mean();
  const SpdeIntegrator integ(g, sc, dt);
  const NoiseModel model = build_noise_with_trace(32, std::pow(eps, 4.2), true);
  const ModalBasis basis(g, 32);
  RandomStream rng(1, 0, 0);
  double spde_worst = 0.0;
  for (int i = 0; i < 100000; ++i) {
    integ.step(s, sample_increment(model, basis, dt, rng));
    spde_worst = std::max(spde_worst, std::abs(s.u.mean() - sc.mu));
  }
  const double mu = profile_mass(c);
  MassSdeState m;
  m.xi = make_mass_config(c.h.head(1), mu, eps);
  const SdeContext ctx(g, model);
  RandomStream rng2(2, 0, 0);
  double sde_worst = 0.0;
  bool alive = true;
  for (int i = 0; i < 10000 && alive; ++i) {
    alive = projected_step_mac(m, sample_increment(model, basis, dt, rng2), ctx);
    sde_worst = std::max(sde_worst, std::abs(build_profile(m.xi.full, g).mean() - mu));
  }
  return {alive && spde_worst < 1e-12 && sde_worst < 1e-6,
          fmt("SPDE 1e5 steps max|mean - mu| = %.2e (< 1e-12)", spde_worst) +
              fmt(", reduced 1e4 steps max|int u - mu| = %.2e (< 1e-6)", sde_worst) +
              (alive ? "" : ", reduced run exited")};
}

Outcome tracking_check() {
  ExperimentConfig cfg = default_config(Scenario::compare);
  const ExperimentReport rep = cmd_compare(cfg);
  const nlohmann::json& t = rep.summary["trend"];
  const std::vector<double> v = t["sup_spde_reduced_over_eps"].get<std::vector<double>>();
  bool ok = t["finite"].get<bool>() && t["nonincreasing_as_eps_decreases"].get<bool>();
  for (std::size_t i = 1; i < v.size(); ++i) ok = ok && v[i] <= v[i - 1];
  std::string d = "mean sup|h_SPDE - h_reduced|/eps over eps = 0.04, 0.02:";
  for (double x : v) d += fmt(" %.5f", x);
  return {ok && v.size() == 2, d + " (" + std::to_string(cfg.run.replicas) + " replicas per rung)"};
}

Outcome ito_strat_check() {
  const double eps = 0.02;
  const Grid g = Grid::resolving(eps);
  const SdeContext ctx(g, build_noise_with_trace(16, 1e-2, true));
  const CrosscheckReport r = ito_strat_crosscheck(kinks({0.3, 0.7}, eps), ctx, 1e-3, 0.5, 64, 7);
  return {r.exits == 0 && std::abs(r.ratio - 2.0) <= 0.6,
          fmt("diff(dt=1e-3) = %.3e", r.diff_coarse) + fmt(", diff(dt=5e-4) = %.3e", r.diff_fine) +
              fmt(", ratio %.3f (2 +- 30%%)", r.ratio)};
}

Outcome stability_check() {
  std::string d;
  bool ok = true;
  for (Scenario s : {Scenario::stability_ac_l2, Scenario::stability_mac_l2}) {
    const auto t0 = std::chrono::steady_clock::now();
    const ExperimentReport rep = cmd_stability(default_config(s));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const nlohmann::json& r = rep.summary["rungs"][0];
    const double upper = r["ci95"]["upper"].get<double>();
    ok = ok && upper < 0.05 && secs < 900.0;
    d += (d.empty() ? "" : "; ") + to_string(s) + ": " + std::to_string(r["tube_exits"].get<int>()) + "/" +
         std::to_string(r["replicas"].get<int>()) + fmt(" exits, CI upper %.4f", upper) + fmt(" [%.0f s]", secs);
  }
  return {ok, d};
}

Outcome correlation_check() {
  const ExperimentReport dec = cmd_correlations(default_config(Scenario::correlations));
  const double off = dec.summary["ac"]["max_offdiagonal_correlation"].get<double>();
  ExperimentConfig glob = default_config(Scenario::correlations);
  glob.noise.shape = NoiseShape::global_mode;
  glob.initial.h = {0.3, 0.7};
  const ExperimentReport gr = cmd_correlations(glob);
  const double z = gr.summary["ac"]["max_abs_z"].get<double>();
  return {off < 0.05 && z <= 3.0,
          fmt("decoupled max off-diagonal corr = %.4f (< 0.05)", off) + fmt(", global mode max|z| = %.3f (<= 3)", z)};
}

Outcome nonlinear_check() {
  const double eps = 0.02;
  const NonlinearCheck r =
      nonlinear_stability_check(kinks({0.25, 0.5, 0.75}, eps), Grid::resolving(eps), 0.1, 100, 13);
  return {r.violations == 0, std::to_string(r.samples) + " samples, worst ratio " + fmt("%.5f", r.worst_ratio) +
                                 fmt(" (<= %.2f)", r.threshold)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all = {
      {1, "heteroclinic energy constant", 1.0, chi_constant_check},
      {2, "whole-line spectrum", 30.0, whole_line_check},
      {3, "Gram and metric matrices", 5.0, gram_metric_check},
      {4, "AC constrained gap", 60.0, ac_gap_check},
      {5, "fixed-mass constrained gap", 180.0, mac_gap_check},
      {6, "subspace gap bound vs brute force", 30.0, subspace_oracle_check},
      {7, "Fermi round trip", 10.0, fermi_roundtrip_check},
      {8, "mass conservation", 1e30, mass_conservation_check},
      {9, "SPDE tracking by the reduced SDE", 600.0, tracking_check},
      {10, "Ito-Stratonovich consistency", 60.0, ito_strat_check},
      {11, "tube stability", 1800.0, stability_check},
      {12, "correlation structure", 1e30, correlation_check},
      {13, "nonlinear stability inequality", 10.0, nonlinear_check},
  };
  int failed = 0;
  for (const Criterion& c : all) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget) {
      o.pass = false;
      o.detail += fmt("; runtime over budget %.0f s", c.budget);
    }
    if (!o.pass) ++failed;
    std::printf("%s criterion %2d (%s): %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(all.size()) - failed, all.size());
  return failed == 0 ? 0 : 1;
}
