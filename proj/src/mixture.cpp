#include "tmarch/mixture.hpp"

#include <cmath>
#include <numbers>

#include "tmarch/errors.hpp"
#include "tmarch/special.hpp"

namespace tmarch {

void MixtureParams::validate() const {
  if (!(f >= 0.0 && f <= 1.0)) throw DomainError("mixture: f must lie in [0, 1]");
  if (!(c > 0.0 && c < 1.0)) throw DomainError("mixture: c must lie in (0, 1)");
}

double mixture_pdf(const MixtureParams& p, double z) {
  p.validate();
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  const double gauss = inv_sqrt_2pi * std::exp(-0.5 * z * z);
  double spread;
  if (z == 0.0) {
    spread = inv_sqrt_2pi / (2.0 * p.c) * std::log((1.0 + p.c) / (1.0 - p.c));
  } else {
    const double x1 = z * z / (2.0 * (1.0 - p.c) * (1.0 - p.c));
    const double x2 = z * z / (2.0 * (1.0 + p.c) * (1.0 + p.c));
    // Ei(-x1) - Ei(-x2) = E1(x2) - E1(x1)
    spread = inv_sqrt_2pi / (4.0 * p.c) * (expint_e1(x2) - expint_e1(x1));
  }
  return p.f * spread + (1.0 - p.f) * gauss;
}

double mixture_sigma2(const MixtureParams& p) {
  p.validate();
  return (1.0 - p.f) + p.f * (1.0 + p.c * p.c / 3.0);
}

double mixture_sigma4(const MixtureParams& p) {
  p.validate();
  const double c2 = p.c * p.c;
  return (1.0 - p.f) + p.f * (1.0 + 2.0 * c2 + c2 * c2 / 5.0);
}

double mixture_pdf_unit(const MixtureParams& p, double z) {
  const double s = std::sqrt(mixture_sigma2(p));
  return s * mixture_pdf(p, s * z);
}

double mixture_kurtosis(const MixtureParams& p) {
  const double m2 = mixture_sigma2(p);
  return 3.0 * mixture_sigma4(p) / (m2 * m2);
}

}  // namespace tmarch
