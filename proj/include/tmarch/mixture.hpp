#pragma once

namespace tmarch {

// Volatility law: sigma uniform on (1 - c, 1 + c) with weight f, sigma = 1
// otherwise. z is Gaussian given sigma.
struct MixtureParams {
  double f = 0.5;
  double c = 0.5;

  void validate() const;  // 0 <= f <= 1, 0 < c < 1
};

// Density of z, written with exponential integrals.
double mixture_pdf(const MixtureParams& p, double z);

// Same law rescaled to unit variance.
double mixture_pdf_unit(const MixtureParams& p, double z);

// E[sigma^2] and E[sigma^4].
double mixture_sigma2(const MixtureParams& p);
double mixture_sigma4(const MixtureParams& p);

// Scale-free, so shared by the raw and unit-variance forms.
double mixture_kurtosis(const MixtureParams& p);

}  // namespace tmarch
