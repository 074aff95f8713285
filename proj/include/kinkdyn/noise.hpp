#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "kinkdyn/grid.hpp"

namespace kinkdyn {

/// Cosine-mode covariance: Q e_k = alpha_k² e_k with e_0 = 1 and
/// e_k = √2 cos(kπx). alphas[k] is the amplitude of mode k, k = 0..K.
struct NoiseModel {
  Eigen::VectorXd alphas;
  bool mean_zero = true;
  double eta = 0.0;

  int modes() const { return static_cast<int>(alphas.size()) - 1; }
};

/// Uniform amplitude sigma0 on modes 1..K; mode 0 gets sigma0 too unless
/// mean_zero. Throws InvalidArgument for K < 1 or sigma0 <= 0.
NoiseModel build_noise(int K, double sigma0, bool mean_zero = true);
/// Amplitude sigma0 chosen so that the trace equals eta.
NoiseModel build_noise_with_trace(int K, double eta, bool mean_zero = true);
/// Explicit amplitudes for modes 0..K. Zeros are allowed (they switch a mode
/// off); negative entries or an all-zero spectrum throw InvalidArgument, as
/// does a nonzero alpha_0 with mean_zero.
NoiseModel build_noise(const Eigen::VectorXd& alphas, bool mean_zero);

/// Cosine basis sampled on a grid. The trapezoid rule makes the sampled
/// modes exactly orthonormal for k < n - 1.
class ModalBasis {
 public:
  ModalBasis(const Grid& grid, int K);

  const Grid& grid() const { return grid_; }
  int modes() const { return K_; }
  /// n × (K + 1) matrix of basis values.
  const Eigen::MatrixXd& values() const { return basis_; }
  /// <g, e_k> for k = 0..K.
  Eigen::VectorXd project(const Eigen::VectorXd& g) const;
  /// Column-wise projection of a matrix of grid functions.
  Eigen::MatrixXd project(const Eigen::MatrixXd& g) const;
  Eigen::VectorXd synthesize(const Eigen::VectorXd& coeffs) const;

 private:
  Grid grid_;
  int K_;
  Eigen::MatrixXd basis_;
  Eigen::MatrixXd weighted_;  // W · basis
};

/// Normal variates for one (seed, replica, consumer) triple. Streams with
/// distinct triples are statistically independent; the same triple always
/// replays the same sequence.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t replica, std::uint64_t consumer);

  double normal() { return dist_(engine_); }
  double uniform();
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> dist_;
};

struct NoiseIncrement {
  double dt = 0.0;
  /// alpha_k ΔB_k for k = 0..K.
  Eigen::VectorXd modal;
  /// Σ modal_k e_k on the grid.
  Eigen::VectorXd grid;
};

/// Draws K + 1 normals (one per mode, including switched-off ones, so that
/// a stream's consumption does not depend on the spectrum).
NoiseIncrement sample_increment(const NoiseModel& model, const ModalBasis& basis, double dt,
                                RandomStream& rng);
/// Brownian increments only, without the grid field.
Eigen::VectorXd sample_modal(const NoiseModel& model, double dt, RandomStream& rng);
/// Adds the grid field to a modal increment.
NoiseIncrement complete_increment(const Eigen::VectorXd& modal, double dt,
                                  const ModalBasis& basis);

/// Σ alpha_k² <g, e_k> e_k.
GridFunction apply_Q(const NoiseModel& model, const ModalBasis& basis, const GridFunction& g);
/// Σ alpha_k² <g1, e_k> <g2, e_k>.
double q_bilinear(const NoiseModel& model, const ModalBasis& basis, const GridFunction& g1,
                  const GridFunction& g2);
/// Same pairing on precomputed modal coefficients.
inline double q_modal(const NoiseModel& model, const Eigen::VectorXd& c1,
                      const Eigen::VectorXd& c2) {
  return (model.alphas.array().square() * c1.array() * c2.array()).sum();
}

}  // namespace kinkdyn
