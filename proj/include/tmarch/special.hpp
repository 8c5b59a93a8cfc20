#pragma once

namespace tmarch {

/// Exponential integral Ei(x), principal value for x > 0.
/// Throws DomainError at x == 0.
double expint_ei(double x);

/// E1(y) = -Ei(-y) for y > 0.
double expint_e1(double y);

}  // namespace tmarch
