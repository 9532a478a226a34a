#pragma once

#include <functional>
#include <vector>

namespace crpsreg::quadrature {

using Integrand = std::function<double(double)>;

inline constexpr double kIntervalTolerance = 1e-10;
inline constexpr double kTailTolerance = 1e-13;

struct Estimate {
  double value = 0.0;
  double error = 0.0;  // sum of |K15 - G7| over accepted subintervals
};

/// Adaptive Gauss-Kronrod (7/15) on a finite interval. A subinterval is
/// accepted once |K15 - G7| <= tol, or when max_depth bisections are used up.
Estimate integrate(const Integrand& f, double a, double b,
                   double tol = kIntervalTolerance, int max_depth = 40);

/// Integral over [lower, +inf) of an integrand that is smooth between
/// consecutive `breakpoints`.
///
/// Past the last breakpoint the integral continues over segments of doubling
/// width (first width `tail_scale`) until `tail_envelope(x)`, an upper bound
/// on the integral over [x, inf), falls below kTailTolerance. An empty
/// `tail_envelope` means the integrand vanishes after the last breakpoint.
struct PiecewiseDomain {
  double lower = 0.0;
  std::vector<double> breakpoints;
  double tail_scale = 1.0;
  std::function<double(double)> tail_envelope;
};

Estimate integrate_piecewise(const Integrand& f, const PiecewiseDomain& domain,
                             double tol = kIntervalTolerance);

}  // namespace crpsreg::quadrature
