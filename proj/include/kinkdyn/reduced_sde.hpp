#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kinkdyn/grid.hpp"
#include "kinkdyn/heteroclinic.hpp"
#include "kinkdyn/manifold.hpp"
#include "kinkdyn/noise.hpp"

namespace kinkdyn {

/// Everything the interface equations need besides the state: the grid the
/// kernels live on, the noise spectrum and its sampled basis, and the
/// heteroclinic.
struct SdeContext {
  Grid grid;
  NoiseModel noise;
  ModalBasis basis;
  const Heteroclinic* het = &Heteroclinic::quartic();

  SdeContext(const Grid& g, NoiseModel model)
      : grid(g), noise(std::move(model)), basis(g, noise.modes()) {}
};

/// Interface positions evolving in time. Once an iterate leaves the
/// admissible set the state freezes at its last admissible value and keeps
/// the exit time.
struct SdeState {
  double t = 0.0;
  KinkConfig h;
  bool exited = false;
  double exit_time = 0.0;
  std::string exit_reason;
};

struct MassSdeState {
  double t = 0.0;
  MassKinkConfig xi;
  bool exited = false;
  double exit_time = 0.0;
  std::string exit_reason;
};

struct SdeCoefficients {
  Eigen::VectorXd b;
  /// Columns are the diffusion kernels sigma_r on the grid.
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd gram_inverse;
};

/// sigma_r = Σ_i (A⁻¹)_ri u_i and the drift b. Throws TubeExit if the Gram
/// matrix is not positive definite.
SdeCoefficients sde_coefficients(const KinkConfig& cfg, const GridFunction& v,
                                 const SdeContext& ctx);
std::vector<GridFunction> diffusion_sigma(const KinkConfig& cfg, const GridFunction& v,
                                          const SdeContext& ctx);
Eigen::VectorXd drift_b(const KinkConfig& cfg, const GridFunction& v, const SdeContext& ctx);

/// Supplies v for the current positions (for instance u - u^h of a
/// co-evolving SPDE, or a Fermi split of it).
using VSupplier = std::function<GridFunction(const KinkConfig&)>;

/// Euler–Maruyama on dh = b dt + <sigma, dW>, the pairing taken modally.
/// Returns false when the step exits.
bool full_step(SdeState& state, const NoiseIncrement& inc, const GridFunction& v,
               const SdeContext& ctx);
bool full_step(SdeState& state, const NoiseIncrement& inc, const VSupplier& supplier,
               const SdeContext& ctx);

enum class ItoScheme {
  /// h += I dt + g ΔW
  euler_maruyama,
  /// h += g ΔW + ½ (g'ΔW)(gΔW); same mean correction, order-dt consistent with Heun
  milstein,
};

/// Itô correction ½ q(∂_r g_r, g_r) of dh_r = g_r ∘ dW with g_r = u_r/|u_r|²,
/// using the metric chi/eps.
Eigen::VectorXd ito_correction_ac(const KinkConfig& cfg, const SdeContext& ctx);
/// Pure noise part <g_r, dW> of one step.
Eigen::VectorXd projected_noise_ac(const KinkConfig& cfg, const NoiseIncrement& inc,
                                   const SdeContext& ctx);

bool projected_step_ac(SdeState& state, const NoiseIncrement& inc, const SdeContext& ctx,
                       ItoScheme scheme = ItoScheme::milstein);
/// Stratonovich Heun (predictor at h + gΔW, trapezoidal corrector).
bool heun_step_ac(SdeState& state, const NoiseIncrement& inc, const SdeContext& ctx);

/// Frame G_r = Σ_i S⁻¹_ri u^ξ_i with the closed-form inverse metric.
Eigen::MatrixXd mass_frame(const MassKinkConfig& cfg, const Grid& grid,
                           const Heteroclinic& het = Heteroclinic::quartic());
Eigen::VectorXd ito_correction_mac(const MassKinkConfig& cfg, const SdeContext& ctx);
Eigen::VectorXd projected_noise_mac(const MassKinkConfig& cfg, const NoiseIncrement& inc,
                                    const SdeContext& ctx);
/// Noise part of dξ via the weighted sum of the unconstrained increments:
/// dh_r - ((-1)^r/(N+1)) Σ_i (-1)^i dh_i in 0-based numbering, where dh are
/// the unconstrained projected increments of all N+1 interfaces.
Eigen::VectorXd coupled_noise_mac(const MassKinkConfig& cfg, const NoiseIncrement& inc,
                                  const SdeContext& ctx);

bool projected_step_mac(MassSdeState& state, const NoiseIncrement& inc, const SdeContext& ctx,
                        ItoScheme scheme = ItoScheme::milstein);
bool heun_step_mac(MassSdeState& state, const NoiseIncrement& inc, const SdeContext& ctx);

struct CrosscheckReport {
  double dt = 0.0;
  double horizon = 0.0;
  int paths = 0;
  /// Mean over paths of max_t |h_ito - h_heun| at step dt and dt/2.
  double diff_coarse = 0.0;
  double diff_fine = 0.0;
  double ratio = 0.0;
  int exits = 0;
};

/// Runs the Itô (Milstein form) and Heun steppers on shared Brownian paths at
/// dt and dt/2. With frozen = true the kernels stay at h0, where both schemes
/// coincide.
CrosscheckReport ito_strat_crosscheck(const KinkConfig& h0, const SdeContext& ctx, double dt,
                                      double horizon, int paths, std::uint64_t seed,
                                      bool frozen = false);

}  // namespace kinkdyn
