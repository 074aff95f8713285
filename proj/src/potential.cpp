#include "kinkdyn/potential.hpp"

#include <utility>

#include "kinkdyn/errors.hpp"

namespace kinkdyn {

Potential Potential::quartic() { return Potential{}; }

Potential Potential::custom(Fn F, Fn f, Fn f_prime, Fn f_second,
                            double lambda0) {
  if (!F || !f || !f_prime || !f_second)
    throw InvalidArgument("custom potential needs F, f, f' and f''");
  if (!(lambda0 > 0.0))
    throw InvalidArgument("lambda0 must be positive");
  Potential p;
  p.kind_ = PotentialKind::custom;
  p.lambda0_ = lambda0;
  p.F_ = std::move(F);
  p.f_ = std::move(f);
  p.f_prime_ = std::move(f_prime);
  p.f_second_ = std::move(f_second);
  if (p.F_(1.0) > 1e-12 || p.F_(-1.0) > 1e-12)
    throw InvalidArgument("custom potential must vanish at +-1");
  if (!(p.f_prime_(1.0) > 0.0) || !(p.f_prime_(0.0) < 0.0))
    throw InvalidArgument("custom potential needs f'(1) > 0 > f'(0)");
  return p;
}

}  // namespace kinkdyn
