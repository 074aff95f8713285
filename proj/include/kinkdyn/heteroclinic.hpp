#pragma once

#include <memory>
#include <vector>

#include "kinkdyn/potential.hpp"

namespace kinkdyn {

/// U and its first three derivatives at one point.
struct HeteroclinicJet {
  double u = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double d3 = 0.0;
};

/// The increasing heteroclinic U'' = f(U), U(0) = 0, U(±∞) = ±1.
///
/// For the quartic potential everything is closed form (U = tanh(y/√2)).
/// Custom potentials are resolved once by RK4 shooting on U' = √(2F(U)) and
/// stored as a dense table; derivatives are then functions of U:
/// U' = √(2F(U)), U'' = f(U), U''' = f'(U) U'.
///
/// The constant 𝓧 = ∫ U'² is computed at construction by adaptive
/// Gauss–Kronrod quadrature and cached. Instances are immutable and cheap to
/// copy (the shooting table is shared).
class Heteroclinic {
 public:
  explicit Heteroclinic(Potential potential = Potential::quartic());

  /// Shared quartic instance.
  static const Heteroclinic& quartic();

  const Potential& potential() const { return potential_; }

  double value(double y) const;
  /// order ∈ {1, 2, 3}; anything else throws InvalidArgument.
  double deriv(double y, int order) const;
  HeteroclinicJet jet(double y) const;
  /// ∫_0^y U(s) ds; even in y.
  double antiderivative(double y) const;

  double chi() const { return chi_; }

  /// Half-width of the stretched variable beyond which U ≡ ±1 numerically.
  static constexpr double kTruncation = 40.0;

 private:
  struct Table;

  double table_value(double y) const;

  Potential potential_;
  std::shared_ptr<const Table> table_;
  double chi_ = 0.0;
};

/// Quadrature of U'² over (-half_width, half_width).
double chi_quadrature(const Heteroclinic& het, double half_width);

// Quartic convenience functions.

double u_het(double x);
double u_het_deriv(double x, int order);
/// ±U((x - xi)/eps); throws InvalidArgument for eps <= 0 or |sign| != 1.
double rescaled_profile(double x, double xi, int sign, double eps);
double chi_constant();

}  // namespace kinkdyn
