#include "kinkdyn/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kinkdyn/errors.hpp"

namespace kinkdyn {

namespace {

// Beyond this stretched distance U is ±1 to double precision.
constexpr double kFlat = Heteroclinic::kTruncation;

void check_positions(const KinkConfig& cfg) {
  if (!(cfg.eps > 0.0)) throw InvalidArgument("eps must be positive");
  if (!(cfg.kappa > 0.0) || cfg.kappa > 0.25)
    throw InvalidArgument("kappa must lie in (0, 0.25]");
  for (int i = 0; i < cfg.count(); ++i)
    if (!std::isfinite(cfg.h(i))) throw NumericalFailure("non-finite interface position");
}

void check_index(const KinkConfig& cfg, int i) {
  if (i < 0 || i >= cfg.count())
    throw InvalidArgument("kink index " + std::to_string(i) + " out of range [0, " +
                          std::to_string(cfg.count()) + ")");
}

}  // namespace

double KinkConfig::rho() const { return std::pow(eps, kappa); }

double KinkConfig::min_gap() const { return eps / rho(); }

double background(int kinks) {
  // kinks = N + 1; ((-1)^N - 1) / 2
  return (kinks % 2 == 1) ? 0.0 : -1.0;
}

std::string GapViolation::describe() const {
  std::ostringstream os;
  if (unordered) {
    os << "positions " << index - 1 << " and " << index << " are not strictly ordered";
  } else {
    os << "gap " << index << " (between extended positions " << index << " and "
       << index + 1 << ") is " << gap << ", below the required " << required;
  }
  return os.str();
}

std::optional<GapViolation> exit_check(const KinkConfig& cfg) {
  const int n = cfg.count();
  if (n == 0) return std::nullopt;
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(cfg.h(i)) || cfg.h(i) <= 0.0 || cfg.h(i) >= 1.0) {
      GapViolation g;
      g.index = i + 1;
      g.unordered = true;
      g.gap = std::numeric_limits<double>::quiet_NaN();
      return g;
    }
  }
  const double need = cfg.min_gap();
  // extended sequence: -h_0, h_0, ..., h_N, 2 - h_N
  std::vector<double> ext;
  ext.reserve(n + 2);
  ext.push_back(-cfg.h(0));
  for (int i = 0; i < n; ++i) ext.push_back(cfg.h(i));
  ext.push_back(2.0 - cfg.h(n - 1));
  for (std::size_t k = 0; k + 1 < ext.size(); ++k) {
    const double gap = ext[k + 1] - ext[k];
    if (gap <= 0.0) {
      GapViolation g;
      g.index = static_cast<int>(k);
      g.gap = gap;
      g.required = need;
      g.unordered = true;
      return g;
    }
    if (gap <= need) {
      GapViolation g;
      g.index = static_cast<int>(k);
      g.gap = gap;
      g.required = need;
      return g;
    }
  }
  return std::nullopt;
}

bool admissible(const KinkConfig& cfg) { return !exit_check(cfg).has_value(); }

void require_admissible(const KinkConfig& cfg) {
  if (auto v = exit_check(cfg)) throw DomainViolation("inadmissible interfaces: " + v->describe());
}

KinkFrame evaluate_frame(const KinkConfig& cfg, const Grid& grid, int max_order,
                         const Heteroclinic& het) {
  check_positions(cfg);
  if (max_order < 0 || max_order > 3) throw InvalidArgument("max_order must be in 0..3");
  const int n = grid.size();
  const int k = cfg.count();
  const double eps = cfg.eps;
  const double inv = 1.0 / eps;
  KinkFrame fr;
  fr.profile = Eigen::VectorXd::Constant(n, background(k));
  if (max_order >= 1) fr.d1 = Eigen::MatrixXd::Zero(n, k);
  if (max_order >= 2) fr.d2 = Eigen::MatrixXd::Zero(n, k);
  if (max_order >= 3) fr.d3 = Eigen::MatrixXd::Zero(n, k);
  for (int j = 0; j < k; ++j) {
    const double s = kink_sign(j);
    const double c = cfg.h(j);
    for (int p = 0; p < n; ++p) {
      const double y = (grid.x(p) - c) * inv;
      if (std::fabs(y) > kFlat) {
        fr.profile(p) += y > 0 ? s : -s;
        continue;
      }
      const HeteroclinicJet jt = het.jet(y);
      fr.profile(p) += s * jt.u;
      if (max_order >= 1) fr.d1(p, j) = -s * inv * jt.d1;
      if (max_order >= 2) fr.d2(p, j) = s * inv * inv * jt.d2;
      if (max_order >= 3) fr.d3(p, j) = -s * inv * inv * inv * jt.d3;
    }
  }
  return fr;
}

GridFunction build_profile(const KinkConfig& cfg, const Grid& grid, const Heteroclinic& het) {
  require_admissible(cfg);
  return GridFunction(grid, evaluate_frame(cfg, grid, 0, het).profile);
}

GridFunction tangent(const KinkConfig& cfg, int i, const Grid& grid, const Heteroclinic& het) {
  check_index(cfg, i);
  return GridFunction(grid, evaluate_frame(cfg, grid, 1, het).d1.col(i));
}

GridFunction tangent_deriv(const KinkConfig& cfg, const std::vector<int>& indices,
                           const Grid& grid, const Heteroclinic& het) {
  if (indices.size() < 2 || indices.size() > 3)
    throw InvalidArgument("tangent_deriv takes 2 or 3 indices");
  for (int i : indices) check_index(cfg, i);
  const bool diagonal = std::all_of(indices.begin(), indices.end(),
                                    [&](int i) { return i == indices.front(); });
  if (!diagonal) return GridFunction(grid);
  const int order = static_cast<int>(indices.size());
  const KinkFrame fr = evaluate_frame(cfg, grid, order, het);
  const int i = indices.front();
  return GridFunction(grid, order == 2 ? Eigen::VectorXd(fr.d2.col(i))
                                       : Eigen::VectorXd(fr.d3.col(i)));
}

Eigen::MatrixXd gram_matrix(const KinkFrame& frame, const Grid& grid, const Eigen::VectorXd& v) {
  const Eigen::VectorXd& w = grid.weights();
  Eigen::MatrixXd a = frame.d1.transpose() * w.asDiagonal() * frame.d1;
  const Eigen::VectorXd curv = frame.d2.transpose() * w.cwiseProduct(v);
  a.diagonal() -= curv;
  // the weighted product is symmetric in exact arithmetic; make it so in floating point
  return 0.5 * (a + a.transpose());
}

Eigen::MatrixXd gram_matrix(const KinkConfig& cfg, const GridFunction& v, const Heteroclinic& het) {
  const KinkFrame fr = evaluate_frame(cfg, v.grid, 2, het);
  return gram_matrix(fr, v.grid, v.values);
}

Eigen::MatrixXd analytic_metric(int n, double eps, double chi) {
  if (n < 1) throw InvalidArgument("metric needs at least one free position");
  if (!(eps > 0.0)) throw InvalidArgument("eps must be positive");
  Eigen::VectorXd s(n);
  for (int k = 0; k < n; ++k) s(k) = (k % 2 == 0) ? 1.0 : -1.0;
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n) + s * s.transpose();
  return (chi / eps) * m;
}

Eigen::MatrixXd analytic_metric_inverse(int n, double eps, double chi) {
  if (n < 1) throw InvalidArgument("metric needs at least one free position");
  if (!(eps > 0.0)) throw InvalidArgument("eps must be positive");
  Eigen::VectorXd s(n);
  for (int k = 0; k < n; ++k) s(k) = (k % 2 == 0) ? 1.0 : -1.0;
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n) - s * s.transpose() / (n + 1.0);
  return (eps / chi) * m;
}

double profile_mass(const KinkConfig& cfg, const Heteroclinic& het) {
  check_positions(cfg);
  const double eps = cfg.eps;
  double m = background(cfg.count());
  for (int j = 0; j < cfg.count(); ++j) {
    const double h = cfg.h(j);
    m += kink_sign(j) * eps *
         (het.antiderivative((1.0 - h) / eps) - het.antiderivative(h / eps));
  }
  return m;
}

Eigen::VectorXd profile_mass_gradient(const KinkConfig& cfg, const Heteroclinic& het) {
  check_positions(cfg);
  Eigen::VectorXd g(cfg.count());
  for (int j = 0; j < cfg.count(); ++j) {
    const double h = cfg.h(j);
    g(j) = -kink_sign(j) * (het.value((1.0 - h) / cfg.eps) + het.value(h / cfg.eps));
  }
  return g;
}

int chart_sign(int free_count, int i) {
  // (-1)^(N - i) in 1-based numbering
  return ((free_count - i - 1) % 2 == 0) ? 1 : -1;
}

double mass_chart(const Eigen::VectorXd& xi, double mu, double eps, double kappa,
                  const Heteroclinic& het) {
  const int nfree = static_cast<int>(xi.size());
  if (nfree < 1) throw InvalidArgument("mass chart requires at least one free position");
  if (!(mu > -1.0 && mu < 1.0)) throw InvalidArgument("mass must lie in (-1, 1)");
  KinkConfig cfg;
  cfg.eps = eps;
  cfg.kappa = kappa;
  cfg.h.resize(nfree + 1);
  cfg.h.head(nfree) = xi;
  check_positions(cfg);
  const int last = nfree;
  const double s_last = kink_sign(last);

  // Plateau estimate: the sharp-interface profile alternates between -1 and
  // +1, so its mass is affine in the last position with slope -2 s_last.
  double plateau = 0.0;
  double left = 0.0;
  double phase = -1.0;
  for (int j = 0; j < nfree; ++j) {
    plateau += phase * (xi(j) - left);
    left = xi(j);
    phase = -phase;
  }
  // remaining mass with the last interface at the right wall, then slide it
  const double at_wall = plateau + phase * (1.0 - left);
  double h = 1.0 + (mu - at_wall) / (2.0 * phase);

  const double need = cfg.min_gap();
  const double lo = xi(nfree - 1) + need;
  const double hi = 1.0 - 0.5 * need;
  if (!(lo < hi)) throw ConstraintInfeasible("no room for the last interface");
  h = std::clamp(h, lo, hi);

  for (int it = 0; it < 100; ++it) {
    cfg.h(last) = h;
    const double r = profile_mass(cfg, het) - mu;
    const double slope = -s_last * (het.value((1.0 - h) / eps) + het.value(h / eps));
    if (std::fabs(r) < 1e-15) break;
    if (slope == 0.0) throw ConstraintInfeasible("mass chart has a flat direction");
    double next = h - r / slope;
    // stay inside the admissible window; the mass is monotone there
    if (next <= lo) next = 0.5 * (h + lo);
    if (next >= hi) next = 0.5 * (h + hi);
    if (std::fabs(next - h) < 1e-16) {
      h = next;
      break;
    }
    h = next;
  }
  cfg.h(last) = h;
  if (std::fabs(profile_mass(cfg, het) - mu) > 1e-10)
    throw ConstraintInfeasible("no admissible root of the mass constraint for mu = " +
                               std::to_string(mu));
  if (!admissible(cfg))
    throw ConstraintInfeasible("mass constraint root is not admissible: " +
                               exit_check(cfg)->describe());
  return h;
}

MassKinkConfig make_mass_config(const Eigen::VectorXd& xi, double mu, double eps, double kappa,
                                const Heteroclinic& het) {
  MassKinkConfig m;
  m.xi = xi;
  m.mu = mu;
  m.full.eps = eps;
  m.full.kappa = kappa;
  m.full.h.resize(xi.size() + 1);
  m.full.h.head(xi.size()) = xi;
  m.full.h(xi.size()) = mass_chart(xi, mu, eps, kappa, het);
  return m;
}

Eigen::MatrixXd mass_tangents(const KinkFrame& frame) {
  const int nfree = static_cast<int>(frame.d1.cols()) - 1;
  Eigen::MatrixXd t = frame.d1.leftCols(nfree);
  for (int i = 0; i < nfree; ++i) t.col(i) += chart_sign(nfree, i) * frame.d1.col(nfree);
  return t;
}

GridFunction mass_tangent(const MassKinkConfig& mcfg, int i, const Grid& grid,
                          const Heteroclinic& het) {
  if (i < 0 || i >= mcfg.free_count())
    throw InvalidArgument("free index " + std::to_string(i) + " out of range");
  const KinkFrame fr = evaluate_frame(mcfg.full, grid, 1, het);
  return GridFunction(grid, mass_tangents(fr).col(i));
}

Eigen::MatrixXd metric_tensor(const MassKinkConfig& mcfg, const Grid& grid,
                              const Heteroclinic& het) {
  require_admissible(mcfg.full);
  const KinkFrame fr = evaluate_frame(mcfg.full, grid, 1, het);
  const Eigen::MatrixXd t = mass_tangents(fr);
  Eigen::MatrixXd s = t.transpose() * grid.weights().asDiagonal() * t;
  return 0.5 * (s + s.transpose());
}

namespace {

struct NewtonEval {
  KinkFrame frame;
  Eigen::VectorXd v;
  Eigen::VectorXd g;
  double norm = 0.0;
};

}  // namespace

FermiSplit fermi_split(const GridFunction& u, const KinkConfig& h_init, const FermiOptions& opts,
                       const Heteroclinic& het) {
  require_admissible(h_init);
  const Grid& grid = u.grid;
  const Eigen::VectorXd& w = grid.weights();
  const double tol = opts.rel_tol * het.chi() / h_init.eps;

  const auto eval = [&](const KinkConfig& c) {
    NewtonEval e;
    e.frame = evaluate_frame(c, grid, 2, het);
    e.v = u.values - e.frame.profile;
    e.g = e.frame.d1.transpose() * w.cwiseProduct(e.v);
    e.norm = e.g.cwiseAbs().maxCoeff();
    return e;
  };

  KinkConfig cur = h_init;
  NewtonEval e = eval(cur);
  for (int it = 0; it <= opts.max_iterations; ++it) {
    if (e.norm <= tol) {
      FermiSplit out{cur, GridFunction(grid, e.v), e.g, true, it};
      return out;
    }
    if (it == opts.max_iterations) break;
    const Eigen::MatrixXd a = gram_matrix(e.frame, grid, e.v);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw TubeExit("Gram matrix lost definiteness during Fermi extraction");
    const Eigen::VectorXd step = ldlt.solve(e.g);
    double t = 1.0;
    bool accepted = false;
    for (int half = 0; half < 40; ++half, t *= 0.5) {
      KinkConfig trial = cur;
      trial.h += t * step;
      if (!admissible(trial)) continue;
      NewtonEval te = eval(trial);
      if (te.norm < e.norm || te.norm <= tol) {
        cur = trial;
        e = std::move(te);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      KinkConfig trial = cur;
      trial.h += step;
      if (!admissible(trial))
        throw DomainViolation("Fermi iterate left the admissible set: " +
                              exit_check(trial)->describe());
      throw FermiFailure("Fermi Newton stalled at residual " + std::to_string(e.norm));
    }
  }
  throw FermiFailure("Fermi Newton did not converge in " + std::to_string(opts.max_iterations) +
                     " iterations (residual " + std::to_string(e.norm) + ")");
}

MassFermiSplit fermi_split_mass(const GridFunction& u, const MassKinkConfig& init,
                                const FermiOptions& opts, const Heteroclinic& het) {
  require_admissible(init.full);
  const Grid& grid = u.grid;
  const Eigen::VectorXd& w = grid.weights();
  const double eps = init.full.eps;
  const double kappa = init.full.kappa;
  const double mu = grid.mean(u.values);
  const double tol = opts.rel_tol * het.chi() / eps;
  const int nfree = init.free_count();

  struct Eval {
    MassKinkConfig cfg;
    KinkFrame frame;
    Eigen::MatrixXd t;
    Eigen::VectorXd v;
    Eigen::VectorXd g;
    double norm = 0.0;
  };
  const auto eval = [&](const Eigen::VectorXd& xi) {
    Eval e;
    e.cfg = make_mass_config(xi, mu, eps, kappa, het);
    e.frame = evaluate_frame(e.cfg.full, grid, 2, het);
    e.t = mass_tangents(e.frame);
    e.v = u.values - e.frame.profile;
    e.g = e.t.transpose() * w.cwiseProduct(e.v);
    e.norm = e.g.cwiseAbs().maxCoeff();
    return e;
  };

  Eval e = eval(init.xi);
  for (int it = 0; it <= opts.max_iterations; ++it) {
    if (e.norm <= tol) return MassFermiSplit{e.cfg, GridFunction(grid, e.v), e.g, true, it};
    if (it == opts.max_iterations) break;
    Eigen::MatrixXd jac = e.t.transpose() * w.asDiagonal() * e.t;
    const Eigen::VectorXd wv = w.cwiseProduct(e.v);
    const double last_curv = e.frame.d2.col(nfree).dot(wv);
    for (int i = 0; i < nfree; ++i) {
      jac(i, i) -= e.frame.d2.col(i).dot(wv);
      for (int j = 0; j < nfree; ++j)
        jac(i, j) -= chart_sign(nfree, i) * chart_sign(nfree, j) * last_curv;
    }
    jac = 0.5 * (jac + jac.transpose());
    Eigen::LDLT<Eigen::MatrixXd> ldlt(jac);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw TubeExit("metric lost definiteness during Fermi extraction");
    const Eigen::VectorXd step = ldlt.solve(e.g);
    double t = 1.0;
    bool accepted = false;
    for (int half = 0; half < 40; ++half, t *= 0.5) {
      Eval te;
      try {
        te = eval(e.cfg.xi + t * step);
      } catch (const ConstraintInfeasible&) {
        continue;
      }
      if (te.norm < e.norm || te.norm <= tol) {
        e = std::move(te);
        accepted = true;
        break;
      }
    }
    if (!accepted) throw FermiFailure("fixed-mass Fermi Newton stalled at residual " +
                                      std::to_string(e.norm));
  }
  throw FermiFailure("fixed-mass Fermi Newton did not converge (residual " +
                     std::to_string(e.norm) + ")");
}

Eigen::VectorXd cold_start_positions(const GridFunction& u) {
  const int n = u.grid.size();
  if (n < 3) throw InvalidArgument("cold start needs at least 3 grid points");
  Eigen::VectorXd s(n);
  s(0) = (2.0 * u.values(0) + u.values(1)) / 3.0;
  s(n - 1) = (2.0 * u.values(n - 1) + u.values(n - 2)) / 3.0;
  for (int i = 1; i + 1 < n; ++i) s(i) = (u.values(i - 1) + u.values(i) + u.values(i + 1)) / 3.0;
  std::vector<double> roots;
  for (int i = 0; i + 1 < n; ++i) {
    const double a = s(i);
    const double b = s(i + 1);
    if (a == 0.0 && i > 0) continue;
    if ((a < 0.0 && b >= 0.0) || (a > 0.0 && b <= 0.0)) {
      if (b == 0.0 && i + 2 < n && (s(i + 2) > 0.0) == (a > 0.0)) continue;
      const double frac = a / (a - b);
      roots.push_back(u.grid.x(i) + frac * u.grid.dx());
    }
  }
  return Eigen::Map<Eigen::VectorXd>(roots.data(), static_cast<Eigen::Index>(roots.size()));
}

}  // namespace kinkdyn
