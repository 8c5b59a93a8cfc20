#include "tmarch/special.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "tmarch/errors.hpp"

namespace tmarch {

namespace {

constexpr double kEps = 1e-16;
constexpr int kMaxIter = 500;

// E1 by its power series, y <= 1.
double e1_series(double y) {
  double sum = 0.0;
  double term = 1.0;  // (-y)^k / k!
  for (int k = 1; k < kMaxIter; ++k) {
    term *= -y / k;
    const double add = term / k;
    sum += add;
    if (std::abs(add) < kEps * std::abs(sum)) break;
  }
  return -std::numbers::egamma - std::log(y) - sum;
}

// E1 by the modified Lentz continued fraction, y > 1.
double e1_continued_fraction(double y) {
  constexpr double tiny = 1e-300;
  double b = y + 1.0;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -static_cast<double>(i) * i;
    b += 2.0;
    d = 1.0 / (an * d + b);
    c = b + an / c;
    const double del = c * d;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h * std::exp(-y);
}

// Ei for x > 0: power series up to ~40, asymptotic expansion beyond.
double ei_positive(double x) {
  if (x < 40.0) {
    double sum = 0.0;
    double term = 1.0;
    for (int k = 1; k < kMaxIter; ++k) {
      term *= x / k;
      const double add = term / k;
      sum += add;
      if (add < kEps * sum) break;
    }
    return std::numbers::egamma + std::log(x) + sum;
  }
  double sum = 1.0;
  double term = 1.0;
  for (int k = 1; k < 60; ++k) {
    const double prev = term;
    term *= k / x;
    if (term > prev) break;
    sum += term;
    if (term < kEps * sum) break;
  }
  return std::exp(x) / x * sum;
}

}  // namespace

double expint_e1(double y) {
  if (!(y > 0.0)) throw DomainError("E1: argument must be > 0");
  if (std::isinf(y)) return 0.0;
  return y <= 1.0 ? e1_series(y) : e1_continued_fraction(y);
}

double expint_ei(double x) {
  if (x == 0.0) throw DomainError("Ei: singular at x = 0");
  if (std::isnan(x)) return std::numeric_limits<double>::quiet_NaN();
  if (x < 0.0) return -expint_e1(-x);
  return ei_positive(x);
}

}  // namespace tmarch
