#include <cmath>
#include <limits>

#include <boost/math/constants/constants.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <doctest.h>

#include "tmarch/errors.hpp"
#include "tmarch/mixture.hpp"
#include "tmarch/special.hpp"

using namespace tmarch;

namespace {

// E1(y) = int_1^inf e^{-y t} / t dt
double e1_quadrature(double y) {
  boost::math::quadrature::exp_sinh<double> q;
  return q.integrate([y](double u) { return std::exp(-y * (1.0 + u)) / (1.0 + u); }, 0.0,
                     std::numeric_limits<double>::infinity());
}

double gauss(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * boost::math::constants::pi<double>()); }

// Conditional Gaussian averaged over the volatility law.
double mixture_quadrature(double f, double c, double z) {
  const double uniform = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [z](double s) { return gauss(z / s) / s; }, 1.0 - c, 1.0 + c, 15, 1e-14);
  return (1.0 - f) * gauss(z) + f * uniform / (2.0 * c);
}

}  // namespace

TEST_SUITE("special") {

TEST_CASE("Ei at reference points") {
  CHECK(expint_ei(-1.0) == doctest::Approx(-0.21938393439552027).epsilon(1e-12));
  CHECK(expint_ei(-10.0) == doctest::Approx(-4.156968929685324e-06).epsilon(1e-10));
  CHECK(expint_ei(1.0) == doctest::Approx(1.8951178163559368).epsilon(1e-12));
  CHECK_THROWS_AS(expint_ei(0.0), DomainError);
  CHECK_THROWS_AS(expint_e1(-1.0), DomainError);
  CHECK(expint_e1(std::numeric_limits<double>::infinity()) == 0.0);
}

TEST_CASE("E1 against quadrature on a wide grid") {
  for (double y : {1e-6, 1e-3, 0.05, 0.3, 0.999, 1.0, 1.001, 2.5, 7.0, 20.0, 80.0, 300.0}) {
    CAPTURE(y);
    CHECK(expint_e1(y) == doctest::Approx(e1_quadrature(y)).epsilon(1e-8));
    CHECK(expint_ei(-y) == -expint_e1(y));
  }
}

TEST_CASE("Ei derivative is e^x / x") {
  for (double x : {-20.0, -3.0, -0.4, 0.2, 1.5, 6.0, 30.0}) {
    const double h = 1e-5 * std::max(1.0, std::abs(x));
    const double d = (expint_ei(x + h) - expint_ei(x - h)) / (2.0 * h);
    CHECK(d == doctest::Approx(std::exp(x) / x).epsilon(1e-6));
  }
}

}

TEST_SUITE("mixture") {

TEST_CASE("kurtosis at f = c = 1/2") {
  const MixtureParams p{0.5, 0.5};
  CHECK(mixture_kurtosis(p) == doctest::Approx(10854.0 / 3125.0).epsilon(1e-12));
  CHECK(mixture_sigma2(p) == doctest::Approx(0.5 + 0.5 * (1.0 + 0.25 / 3.0)).epsilon(1e-14));
  CHECK(mixture_kurtosis({0.0, 0.5}) == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("density agrees with direct quadrature over sigma") {
  for (double f : {0.0, 0.3, 0.5, 1.0}) {
    for (double c : {0.1, 0.5, 0.9}) {
      for (double z : {0.0, 1e-4, 0.5, 1.0, 2.0, 4.0, 7.0}) {
        CAPTURE(f);
        CAPTURE(c);
        CAPTURE(z);
        CHECK(mixture_pdf({f, c}, z) == doctest::Approx(mixture_quadrature(f, c, z)).epsilon(1e-7));
      }
    }
  }
}

TEST_CASE("normalisation, unit variance and the Gaussian limit") {
  using boost::math::quadrature::gauss_kronrod;
  const MixtureParams p{0.5, 0.5};
  const double mass = 2.0 * gauss_kronrod<double, 61>::integrate([&](double z) { return mixture_pdf(p, z); }, 0.0, 15.0, 15, 1e-13);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
  const double var = 2.0 * gauss_kronrod<double, 61>::integrate([&](double z) { return z * z * mixture_pdf_unit(p, z); }, 0.0, 15.0, 15, 1e-13);
  CHECK(var == doctest::Approx(1.0).epsilon(1e-8));
  for (double z : {0.0, 0.7, 3.0}) CHECK(mixture_pdf({0.0, 0.4}, z) == doctest::Approx(gauss(z)).epsilon(1e-14));
}

TEST_CASE("validation") {
  CHECK_THROWS_AS(mixture_pdf({1.5, 0.5}, 0.0), DomainError);
  CHECK_THROWS_AS(mixture_pdf({0.5, 1.0}, 0.0), DomainError);
  CHECK_THROWS_AS(mixture_pdf({0.5, 0.0}, 0.0), DomainError);
}

}
