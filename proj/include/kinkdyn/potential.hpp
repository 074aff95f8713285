#pragma once

#include <functional>

namespace kinkdyn {

enum class PotentialKind { quartic, custom };

/// Symmetric double-well potential F with f = F'. Zeros of f at {0, ±1},
/// f'(±1) > 0 > f'(0). The quartic case F(u) = (1 - u²)²/4 is evaluated
/// inline; custom potentials go through std::function.
class Potential {
 public:
  using Fn = std::function<double(double)>;

  static Potential quartic();
  /// `f_second` is needed for third derivatives of the heteroclinic; lambda0
  /// is the spectral constant, which has no closed form in general.
  static Potential custom(Fn F, Fn f, Fn f_prime, Fn f_second, double lambda0);

  PotentialKind kind() const { return kind_; }
  double lambda0() const { return lambda0_; }

  double F(double u) const {
    if (kind_ == PotentialKind::quartic) {
      const double a = 1.0 - u * u;
      return 0.25 * a * a;
    }
    return F_(u);
  }
  double f(double u) const {
    if (kind_ == PotentialKind::quartic) return u * u * u - u;
    return f_(u);
  }
  double f_prime(double u) const {
    if (kind_ == PotentialKind::quartic) return 3.0 * u * u - 1.0;
    return f_prime_(u);
  }
  double f_second(double u) const {
    if (kind_ == PotentialKind::quartic) return 6.0 * u;
    return f_second_(u);
  }

 private:
  Potential() = default;

  PotentialKind kind_ = PotentialKind::quartic;
  double lambda0_ = 1.5;
  Fn F_, f_, f_prime_, f_second_;
};

}  // namespace kinkdyn
