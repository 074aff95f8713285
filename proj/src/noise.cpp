#include "kinkdyn/noise.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "kinkdyn/errors.hpp"

namespace kinkdyn {

NoiseModel build_noise(int K, double sigma0, bool mean_zero) {
  if (K < 1) throw InvalidArgument("noise needs at least one mode, got K = " + std::to_string(K));
  if (!(sigma0 > 0.0) || !std::isfinite(sigma0))
    throw InvalidArgument("noise amplitude must be positive");
  Eigen::VectorXd a = Eigen::VectorXd::Constant(K + 1, sigma0);
  if (mean_zero) a(0) = 0.0;
  return build_noise(a, mean_zero);
}

NoiseModel build_noise_with_trace(int K, double eta, bool mean_zero) {
  if (!(eta > 0.0)) throw InvalidArgument("noise trace must be positive");
  const int active = mean_zero ? K : K + 1;
  return build_noise(K, std::sqrt(eta / active), mean_zero);
}

NoiseModel build_noise(const Eigen::VectorXd& alphas, bool mean_zero) {
  if (alphas.size() < 2) throw InvalidArgument("noise needs modes 0..K with K >= 1");
  for (Eigen::Index k = 0; k < alphas.size(); ++k)
    if (!(alphas(k) >= 0.0) || !std::isfinite(alphas(k)))
      throw InvalidArgument("noise amplitude " + std::to_string(k) + " is negative or not finite");
  if (mean_zero && alphas(0) != 0.0)
    throw InvalidArgument("mean-zero noise cannot excite the constant mode");
  NoiseModel m;
  m.alphas = alphas;
  m.mean_zero = mean_zero;
  m.eta = alphas.squaredNorm();
  if (!(m.eta > 0.0)) throw InvalidArgument("noise spectrum is identically zero");
  return m;
}

ModalBasis::ModalBasis(const Grid& grid, int K) : grid_(grid), K_(K) {
  const int n = grid.size();
  if (K < 0) throw InvalidArgument("negative mode count");
  if (K >= n - 1)
    throw InvalidArgument("grid of " + std::to_string(n) + " points resolves at most " +
                          std::to_string(n - 2) + " cosine modes");
  basis_.resize(n, K + 1);
  for (int p = 0; p < n; ++p) {
    const double x = grid.x(p);
    basis_(p, 0) = 1.0;
    for (int k = 1; k <= K; ++k) basis_(p, k) = std::sqrt(2.0) * std::cos(k * std::numbers::pi * x);
  }
  weighted_ = grid.weights().asDiagonal() * basis_;
}

Eigen::VectorXd ModalBasis::project(const Eigen::VectorXd& g) const {
  return weighted_.transpose() * g;
}

Eigen::MatrixXd ModalBasis::project(const Eigen::MatrixXd& g) const {
  return weighted_.transpose() * g;
}

Eigen::VectorXd ModalBasis::synthesize(const Eigen::VectorXd& coeffs) const {
  return basis_ * coeffs;
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t replica, std::uint64_t consumer) {
  const auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
  const auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(seed), hi(seed), lo(replica), hi(replica), lo(consumer), hi(consumer)};
  engine_.seed(seq);
}

double RandomStream::uniform() {
  return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
}

Eigen::VectorXd sample_modal(const NoiseModel& model, double dt, RandomStream& rng) {
  if (!(dt > 0.0)) throw InvalidArgument("time step must be positive");
  const double s = std::sqrt(dt);
  Eigen::VectorXd m(model.alphas.size());
  for (Eigen::Index k = 0; k < m.size(); ++k) m(k) = model.alphas(k) * s * rng.normal();
  return m;
}

NoiseIncrement complete_increment(const Eigen::VectorXd& modal, double dt,
                                  const ModalBasis& basis) {
  if (modal.size() != basis.modes() + 1)
    throw InvalidArgument("modal increment does not match the basis size");
  NoiseIncrement inc;
  inc.dt = dt;
  inc.modal = modal;
  inc.grid = basis.synthesize(modal);
  return inc;
}

NoiseIncrement sample_increment(const NoiseModel& model, const ModalBasis& basis, double dt,
                                RandomStream& rng) {
  if (model.modes() != basis.modes())
    throw InvalidArgument("noise model and basis disagree on the mode count");
  return complete_increment(sample_modal(model, dt, rng), dt, basis);
}

GridFunction apply_Q(const NoiseModel& model, const ModalBasis& basis, const GridFunction& g) {
  require_same_grid(g.grid, basis.grid());
  const Eigen::VectorXd c = basis.project(g.values);
  return GridFunction(g.grid, basis.synthesize(model.alphas.array().square().matrix().cwiseProduct(c)));
}

double q_bilinear(const NoiseModel& model, const ModalBasis& basis, const GridFunction& g1,
                  const GridFunction& g2) {
  require_same_grid(g1.grid, basis.grid());
  require_same_grid(g2.grid, basis.grid());
  return q_modal(model, basis.project(g1.values), basis.project(g2.values));
}

}  // namespace kinkdyn
