#include "kinkdyn/reduced_sde.hpp"

#include <cmath>
#include <string>

#include "kinkdyn/errors.hpp"
#include "kinkdyn/spde.hpp"

namespace kinkdyn {

namespace {

Eigen::LDLT<Eigen::MatrixXd> factor_gram(const Eigen::MatrixXd& a) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw TubeExit("Gram matrix is not positive definite");
  const Eigen::VectorXd d = ldlt.vectorD().cwiseAbs();
  if (d.minCoeff() <= 1e-12 * d.maxCoeff()) throw TubeExit("Gram matrix is numerically singular");
  return ldlt;
}

void mark_exit(double t, std::string reason, bool& exited, double& exit_time,
               std::string& exit_reason) {
  exited = true;
  exit_time = t;
  exit_reason = std::move(reason);
}

// Commits h_new to the state or freezes it on exit.
bool commit(SdeState& s, const Eigen::VectorXd& h_new, double dt) {
  KinkConfig next = s.h;
  next.h = h_new;
  const double t = s.t + dt;
  if (!h_new.allFinite()) {
    mark_exit(t, "non-finite positions", s.exited, s.exit_time, s.exit_reason);
    return false;
  }
  if (auto v = exit_check(next)) {
    mark_exit(t, v->describe(), s.exited, s.exit_time, s.exit_reason);
    return false;
  }
  s.h = std::move(next);
  s.t = t;
  return true;
}

bool commit(MassSdeState& s, const Eigen::VectorXd& xi_new, double dt, const SdeContext& ctx) {
  const double t = s.t + dt;
  if (!xi_new.allFinite()) {
    mark_exit(t, "non-finite positions", s.exited, s.exit_time, s.exit_reason);
    return false;
  }
  try {
    s.xi = make_mass_config(xi_new, s.xi.mu, s.xi.full.eps, s.xi.full.kappa, *ctx.het);
  } catch (const ConstraintInfeasible& e) {
    mark_exit(t, e.what(), s.exited, s.exit_time, s.exit_reason);
    return false;
  } catch (const DomainViolation& e) {
    mark_exit(t, e.what(), s.exited, s.exit_time, s.exit_reason);
    return false;
  }
  s.t = t;
  return true;
}

double metric_scale(const KinkConfig& cfg, const SdeContext& ctx) {
  return cfg.eps / ctx.het->chi();
}

}  // namespace

SdeCoefficients sde_coefficients(const KinkConfig& cfg, const GridFunction& v,
                                 const SdeContext& ctx) {
  require_same_grid(v.grid, ctx.grid);
  const Grid& grid = ctx.grid;
  const Eigen::VectorXd& w = grid.weights();
  const KinkFrame fr = evaluate_frame(cfg, grid, 3, *ctx.het);
  const Eigen::MatrixXd a = gram_matrix(fr, grid, v.values);
  const auto ldlt = factor_gram(a);
  const int k = cfg.count();
  SdeCoefficients c;
  c.gram_inverse = ldlt.solve(Eigen::MatrixXd::Identity(k, k));
  c.gram_inverse = 0.5 * (c.gram_inverse + c.gram_inverse.transpose()).eval();
  c.sigma = fr.d1 * c.gram_inverse;

  const Eigen::MatrixXd p2 = ctx.basis.project(fr.d2);
  const Eigen::MatrixXd ps = ctx.basis.project(c.sigma);
  const Eigen::VectorXd a2 = ctx.noise.alphas.array().square();
  // q(sigma_i, sigma_k) and q(u_ii, sigma_i)
  const Eigen::MatrixXd qss = ps.transpose() * a2.asDiagonal() * ps;
  const Eigen::MatrixXd q2s = p2.transpose() * a2.asDiagonal() * ps;

  const Eigen::VectorXd u = fr.profile + v.values;
  const Eigen::VectorXd lu =
      allen_cahn_operator(grid, cfg.eps, u, ctx.het->potential());
  const Eigen::VectorXd wl = w.cwiseProduct(lu);
  const Eigen::VectorXd wv = w.cwiseProduct(v.values);
  // cross[i][k] = <u_ii, u_k>
  const Eigen::MatrixXd cross = fr.d2.transpose() * w.asDiagonal() * fr.d1;

  Eigen::VectorXd bracket(k);
  for (int i = 0; i < k; ++i) {
    double r = fr.d1.col(i).dot(wl);
    r += q2s(i, i);
    r += 0.5 * fr.d3.col(i).dot(wv) * qss(i, i);
    for (int m = 0; m < k; ++m) r -= cross(i, m) * qss(i, m);
    for (int j = 0; j < k; ++j) r -= 0.5 * cross(j, i) * qss(j, j);
    bracket(i) = r;
  }
  c.b = c.gram_inverse * bracket;
  return c;
}

std::vector<GridFunction> diffusion_sigma(const KinkConfig& cfg, const GridFunction& v,
                                          const SdeContext& ctx) {
  require_same_grid(v.grid, ctx.grid);
  const KinkFrame fr = evaluate_frame(cfg, ctx.grid, 2, *ctx.het);
  const auto ldlt = factor_gram(gram_matrix(fr, ctx.grid, v.values));
  const Eigen::MatrixXd sigma = ldlt.solve(fr.d1.transpose()).transpose();
  std::vector<GridFunction> out;
  out.reserve(cfg.count());
  for (int r = 0; r < cfg.count(); ++r) out.emplace_back(ctx.grid, sigma.col(r));
  return out;
}

Eigen::VectorXd drift_b(const KinkConfig& cfg, const GridFunction& v, const SdeContext& ctx) {
  return sde_coefficients(cfg, v, ctx).b;
}

bool full_step(SdeState& state, const NoiseIncrement& inc, const GridFunction& v,
               const SdeContext& ctx) {
  if (state.exited) return false;
  SdeCoefficients c;
  try {
    c = sde_coefficients(state.h, v, ctx);
  } catch (const TubeExit& e) {
    mark_exit(state.t + inc.dt, e.what(), state.exited, state.exit_time, state.exit_reason);
    return false;
  }
  const Eigen::VectorXd dw = ctx.basis.project(c.sigma).transpose() * inc.modal;
  return commit(state, state.h.h + c.b * inc.dt + dw, inc.dt);
}

bool full_step(SdeState& state, const NoiseIncrement& inc, const VSupplier& supplier,
               const SdeContext& ctx) {
  if (state.exited) return false;
  return full_step(state, inc, supplier(state.h), ctx);
}

Eigen::VectorXd ito_correction_ac(const KinkConfig& cfg, const SdeContext& ctx) {
  const KinkFrame fr = evaluate_frame(cfg, ctx.grid, 2, *ctx.het);
  const Eigen::MatrixXd p1 = ctx.basis.project(fr.d1);
  const Eigen::MatrixXd p2 = ctx.basis.project(fr.d2);
  const Eigen::VectorXd a2 = ctx.noise.alphas.array().square();
  const double s = metric_scale(cfg, ctx);
  Eigen::VectorXd out(cfg.count());
  for (int r = 0; r < cfg.count(); ++r)
    out(r) = 0.5 * s * s * (a2.array() * p1.col(r).array() * p2.col(r).array()).sum();
  return out;
}

Eigen::VectorXd projected_noise_ac(const KinkConfig& cfg, const NoiseIncrement& inc,
                                   const SdeContext& ctx) {
  const KinkFrame fr = evaluate_frame(cfg, ctx.grid, 1, *ctx.het);
  return metric_scale(cfg, ctx) * (ctx.basis.project(fr.d1).transpose() * inc.modal);
}

bool projected_step_ac(SdeState& state, const NoiseIncrement& inc, const SdeContext& ctx,
                       ItoScheme scheme) {
  if (state.exited) return false;
  const KinkFrame fr = evaluate_frame(state.h, ctx.grid, 2, *ctx.het);
  const double s = metric_scale(state.h, ctx);
  const Eigen::VectorXd gdw = s * (ctx.basis.project(fr.d1).transpose() * inc.modal);
  Eigen::VectorXd dh;
  if (scheme == ItoScheme::milstein) {
    const Eigen::VectorXd dgdw = s * (ctx.basis.project(fr.d2).transpose() * inc.modal);
    dh = gdw + 0.5 * dgdw.cwiseProduct(gdw);
  } else {
    dh = gdw + ito_correction_ac(state.h, ctx) * inc.dt;
  }
  return commit(state, state.h.h + dh, inc.dt);
}

bool heun_step_ac(SdeState& state, const NoiseIncrement& inc, const SdeContext& ctx) {
  if (state.exited) return false;
  const Eigen::VectorXd k1 = projected_noise_ac(state.h, inc, ctx);
  KinkConfig pred = state.h;
  pred.h += k1;
  if (auto v = exit_check(pred)) {
    mark_exit(state.t + inc.dt, v->describe(), state.exited, state.exit_time, state.exit_reason);
    return false;
  }
  const Eigen::VectorXd k2 = projected_noise_ac(pred, inc, ctx);
  return commit(state, state.h.h + 0.5 * (k1 + k2), inc.dt);
}

Eigen::MatrixXd mass_frame(const MassKinkConfig& cfg, const Grid& grid, const Heteroclinic& het) {
  const KinkFrame fr = evaluate_frame(cfg.full, grid, 1, het);
  const int n = cfg.free_count();
  return mass_tangents(fr) * analytic_metric_inverse(n, cfg.full.eps, het.chi());
}

namespace {

// Modal coefficients of G_r and of its derivatives, paired with an increment.
struct MassPairing {
  Eigen::MatrixXd pg;    // (K+1) × N, modal coefficients of G_r
  Eigen::MatrixXd p2;    // (K+1) × (N+1), modal coefficients of u_ii
  Eigen::MatrixXd sinv;  // analytic inverse metric
  Eigen::VectorXd chart; // c_i
};

MassPairing mass_pairing(const MassKinkConfig& cfg, const SdeContext& ctx) {
  const KinkFrame fr = evaluate_frame(cfg.full, ctx.grid, 2, *ctx.het);
  const int n = cfg.free_count();
  MassPairing p;
  p.sinv = analytic_metric_inverse(n, cfg.full.eps, ctx.het->chi());
  p.pg = ctx.basis.project(Eigen::MatrixXd(mass_tangents(fr) * p.sinv));
  p.p2 = ctx.basis.project(fr.d2);
  p.chart.resize(n);
  for (int i = 0; i < n; ++i) p.chart(i) = chart_sign(n, i);
  return p;
}

// Modal coefficients of ∂_j G_r: S⁻¹_rj u_jj + (S⁻¹c)_r c_j u_NN.
Eigen::VectorXd dframe_coeffs(const MassPairing& p, int r, int j) {
  const int n = static_cast<int>(p.sinv.rows());
  const double w = p.sinv.row(r).dot(p.chart) * p.chart(j);
  return p.sinv(r, j) * p.p2.col(j) + w * p.p2.col(n);
}

}  // namespace

Eigen::VectorXd ito_correction_mac(const MassKinkConfig& cfg, const SdeContext& ctx) {
  const MassPairing p = mass_pairing(cfg, ctx);
  const int n = cfg.free_count();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (int r = 0; r < n; ++r)
    for (int j = 0; j < n; ++j) out(r) += 0.5 * q_modal(ctx.noise, dframe_coeffs(p, r, j), p.pg.col(j));
  return out;
}

Eigen::VectorXd projected_noise_mac(const MassKinkConfig& cfg, const NoiseIncrement& inc,
                                    const SdeContext& ctx) {
  const Eigen::MatrixXd g = mass_frame(cfg, ctx.grid, *ctx.het);
  return ctx.basis.project(g).transpose() * inc.modal;
}

Eigen::VectorXd coupled_noise_mac(const MassKinkConfig& cfg, const NoiseIncrement& inc,
                                  const SdeContext& ctx) {
  const Eigen::VectorXd dh = projected_noise_ac(cfg.full, inc, ctx);
  const int total = cfg.full.count();
  double alt = 0.0;
  for (int i = 0; i < total; ++i) alt += kink_sign(i) * dh(i);
  Eigen::VectorXd out(cfg.free_count());
  for (int r = 0; r < cfg.free_count(); ++r) out(r) = dh(r) - kink_sign(r) * alt / total;
  return out;
}

bool projected_step_mac(MassSdeState& state, const NoiseIncrement& inc, const SdeContext& ctx,
                        ItoScheme scheme) {
  if (state.exited) return false;
  if (ctx.noise.alphas(0) != 0.0)
    throw InvalidArgument("fixed-mass interface dynamics need mean-zero noise");
  const MassPairing p = mass_pairing(state.xi, ctx);
  const int n = state.xi.free_count();
  const Eigen::VectorXd gdw = p.pg.transpose() * inc.modal;
  Eigen::VectorXd dxi = gdw;
  if (scheme == ItoScheme::milstein) {
    for (int r = 0; r < n; ++r)
      for (int j = 0; j < n; ++j) dxi(r) += 0.5 * dframe_coeffs(p, r, j).dot(inc.modal) * gdw(j);
  } else {
    dxi += ito_correction_mac(state.xi, ctx) * inc.dt;
  }
  return commit(state, state.xi.xi + dxi, inc.dt, ctx);
}

bool heun_step_mac(MassSdeState& state, const NoiseIncrement& inc, const SdeContext& ctx) {
  if (state.exited) return false;
  const Eigen::VectorXd k1 = projected_noise_mac(state.xi, inc, ctx);
  MassKinkConfig pred;
  try {
    pred = make_mass_config(state.xi.xi + k1, state.xi.mu, state.xi.full.eps,
                            state.xi.full.kappa, *ctx.het);
  } catch (const ConstraintInfeasible& e) {
    mark_exit(state.t + inc.dt, e.what(), state.exited, state.exit_time, state.exit_reason);
    return false;
  }
  const Eigen::VectorXd k2 = projected_noise_mac(pred, inc, ctx);
  return commit(state, state.xi.xi + 0.5 * (k1 + k2), inc.dt, ctx);
}

CrosscheckReport ito_strat_crosscheck(const KinkConfig& h0, const SdeContext& ctx, double dt,
                                      double horizon, int paths, std::uint64_t seed,
                                      bool frozen) {
  if (!(dt > 0.0) || !(horizon > dt)) throw InvalidArgument("crosscheck needs 0 < dt < horizon");
  if (paths < 1) throw InvalidArgument("crosscheck needs at least one path");
  require_admissible(h0);
  const int coarse_steps = static_cast<int>(std::llround(horizon / dt));
  const double fine_dt = 0.5 * dt;

  // With frozen kernels both schemes reduce to h += g(h0) ΔW.
  Eigen::MatrixXd frozen_gain;
  if (frozen) {
    const KinkFrame fr = evaluate_frame(h0, ctx.grid, 1, *ctx.het);
    frozen_gain = metric_scale(h0, ctx) * ctx.basis.project(fr.d1).transpose();
  }

  CrosscheckReport rep;
  rep.dt = dt;
  rep.horizon = coarse_steps * dt;
  rep.paths = paths;
  double sum_coarse = 0.0;
  double sum_fine = 0.0;
  int used = 0;
  for (int path = 0; path < paths; ++path) {
    RandomStream rng(seed, static_cast<std::uint64_t>(path), 0);
    std::vector<Eigen::VectorXd> fine;
    fine.reserve(2 * coarse_steps);
    for (int s = 0; s < 2 * coarse_steps; ++s) fine.push_back(sample_modal(ctx.noise, fine_dt, rng));

    const auto run = [&](int steps, double step_dt, int stride) {
      SdeState ito{0.0, h0, false, 0.0, {}};
      SdeState heun = ito;
      double worst = 0.0;
      for (int s = 0; s < steps; ++s) {
        Eigen::VectorXd m = Eigen::VectorXd::Zero(fine.front().size());
        for (int q = 0; q < stride; ++q) m += fine[s * stride + q];
        NoiseIncrement inc;
        inc.dt = step_dt;
        inc.modal = std::move(m);
        if (frozen) {
          const Eigen::VectorXd d = frozen_gain * inc.modal;
          ito.h.h += d;
          heun.h.h += d;
        } else {
          const bool a = projected_step_ac(ito, inc, ctx, ItoScheme::milstein);
          const bool b = heun_step_ac(heun, inc, ctx);
          if (!a || !b) return -1.0;
        }
        worst = std::max(worst, (ito.h.h - heun.h.h).cwiseAbs().maxCoeff());
      }
      return worst;
    };
    const double c = run(coarse_steps, dt, 2);
    const double f = run(2 * coarse_steps, fine_dt, 1);
    if (c < 0.0 || f < 0.0) {
      ++rep.exits;
      continue;
    }
    sum_coarse += c;
    sum_fine += f;
    ++used;
  }
  if (used == 0) throw NumericalFailure("every crosscheck path left the admissible set");
  rep.diff_coarse = sum_coarse / used;
  rep.diff_fine = sum_fine / used;
  rep.ratio = rep.diff_fine > 0.0 ? rep.diff_coarse / rep.diff_fine : 0.0;
  return rep;
}

}  // namespace kinkdyn
