#include "kinkdyn/heteroclinic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "kinkdyn/errors.hpp"

namespace kinkdyn {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;
constexpr double kShootStep = 1e-4;

// ln cosh(z) without overflow.
double log_cosh(double z) {
  const double a = std::fabs(z);
  return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
}

}  // namespace

// Dense RK4 output on y ∈ [0, kTruncation]; negative y by odd symmetry.
struct Heteroclinic::Table {
  double step = kShootStep;
  std::vector<double> u;
  std::vector<double> du;
  std::vector<double> integral;  // ∫_0^y U
};

Heteroclinic::Heteroclinic(Potential potential)
    : potential_(std::move(potential)) {
  if (potential_.kind() == PotentialKind::custom) {
    auto table = std::make_shared<Table>();
    const auto slope = [this](double u) {
      if (u >= 1.0) return 0.0;
      return std::sqrt(std::max(0.0, 2.0 * potential_.F(u)));
    };
    const std::size_t count =
        static_cast<std::size_t>(std::llround(kTruncation / kShootStep)) + 1;
    table->u.resize(count);
    table->du.resize(count);
    table->integral.resize(count);
    const double h = table->step;
    double u = 0.0;
    table->u[0] = u;
    table->du[0] = slope(u);
    table->integral[0] = 0.0;
    for (std::size_t i = 1; i < count; ++i) {
      const double k1 = slope(u);
      const double k2 = slope(u + 0.5 * h * k1);
      const double k3 = slope(u + 0.5 * h * k2);
      const double k4 = slope(u + h * k3);
      u = std::min(1.0, u + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
      table->u[i] = u;
      table->du[i] = slope(u);
      // exact integral of the cubic Hermite interpolant over one step
      table->integral[i] = table->integral[i - 1] +
                           0.5 * h * (table->u[i - 1] + u) +
                           h * h / 12.0 * (table->du[i - 1] - table->du[i]);
    }
    table_ = std::move(table);
  }
  chi_ = chi_quadrature(*this, kTruncation);
}

const Heteroclinic& Heteroclinic::quartic() {
  static const Heteroclinic instance{};
  return instance;
}

double Heteroclinic::table_value(double y) const {
  const Table& t = *table_;
  const double a = std::fabs(y);
  if (a >= kTruncation) return y > 0 ? t.u.back() : -t.u.back();
  const double s = a / t.step;
  const std::size_t i = std::min(static_cast<std::size_t>(s), t.u.size() - 2);
  const double r = s - static_cast<double>(i);
  const double h00 = (1.0 + 2.0 * r) * (1.0 - r) * (1.0 - r);
  const double h10 = r * (1.0 - r) * (1.0 - r);
  const double h01 = r * r * (3.0 - 2.0 * r);
  const double h11 = r * r * (r - 1.0);
  const double v = h00 * t.u[i] + h10 * t.step * t.du[i] + h01 * t.u[i + 1] +
                   h11 * t.step * t.du[i + 1];
  return y < 0 ? -v : v;
}

double Heteroclinic::value(double y) const {
  if (potential_.kind() == PotentialKind::quartic) return std::tanh(y / kSqrt2);
  return table_value(y);
}

HeteroclinicJet Heteroclinic::jet(double y) const {
  HeteroclinicJet j;
  if (potential_.kind() == PotentialKind::quartic) {
    // one exponential serves tanh and sech²
    const double z = y / kSqrt2;
    const double e = std::exp(-2.0 * std::fabs(z));
    const double t = -std::expm1(-2.0 * std::fabs(z)) / (1.0 + e);
    const double sech2 = 4.0 * e / ((1.0 + e) * (1.0 + e));
    j.u = z < 0 ? -t : t;
    j.d1 = sech2 / kSqrt2;
    j.d2 = -j.u * sech2;
    j.d3 = (3.0 * j.u * j.u - 1.0) * j.d1;
    return j;
  }
  j.u = table_value(y);
  j.d1 = std::sqrt(std::max(0.0, 2.0 * potential_.F(j.u)));
  j.d2 = potential_.f(j.u);
  j.d3 = potential_.f_prime(j.u) * j.d1;
  return j;
}

double Heteroclinic::deriv(double y, int order) const {
  const HeteroclinicJet j = jet(y);
  switch (order) {
    case 1: return j.d1;
    case 2: return j.d2;
    case 3: return j.d3;
    default:
      throw InvalidArgument("heteroclinic derivative order must be 1, 2 or 3, got " +
                            std::to_string(order));
  }
}

double Heteroclinic::antiderivative(double y) const {
  const double a = std::fabs(y);
  if (potential_.kind() == PotentialKind::quartic)
    return kSqrt2 * log_cosh(a / kSqrt2);
  const Table& t = *table_;
  if (a >= kTruncation) return t.integral.back() + (a - kTruncation) * t.u.back();
  const double s = a / t.step;
  const std::size_t i = std::min(static_cast<std::size_t>(s), t.u.size() - 2);
  const double r = s - static_cast<double>(i);
  // integrate the Hermite cubic from node i to a
  const double h = t.step;
  const double i00 = r - r * r * r + 0.5 * r * r * r * r;
  const double i10 = h * (0.5 * r * r - 2.0 / 3.0 * r * r * r + 0.25 * r * r * r * r);
  const double i01 = r * r * r - 0.5 * r * r * r * r;
  const double i11 = h * (0.25 * r * r * r * r - r * r * r / 3.0);
  return t.integral[i] +
         h * (i00 * t.u[i] + i10 * t.du[i] + i01 * t.u[i + 1] + i11 * t.du[i + 1]);
}

double chi_quadrature(const Heteroclinic& het, double half_width) {
  using boost::math::quadrature::gauss_kronrod;
  const auto integrand = [&het](double y) {
    const double d = het.deriv(y, 1);
    return d * d;
  };
  // split at the origin so both halves see a monotone integrand
  const double left =
      gauss_kronrod<double, 61>::integrate(integrand, -half_width, 0.0, 20, 1e-15);
  const double right =
      gauss_kronrod<double, 61>::integrate(integrand, 0.0, half_width, 20, 1e-15);
  return left + right;
}

double u_het(double x) { return Heteroclinic::quartic().value(x); }

double u_het_deriv(double x, int order) {
  return Heteroclinic::quartic().deriv(x, order);
}

double rescaled_profile(double x, double xi, int sign, double eps) {
  if (!(eps > 0.0)) throw InvalidArgument("eps must be positive");
  if (sign != 1 && sign != -1) throw InvalidArgument("sign must be +1 or -1");
  return sign * u_het((x - xi) / eps);
}

double chi_constant() { return Heteroclinic::quartic().chi(); }

}  // namespace kinkdyn
