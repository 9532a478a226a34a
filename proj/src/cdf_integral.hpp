#pragma once

#include <initializer_list>
#include <span>

#include "crpsreg/distributions.hpp"
#include "crpsreg/quadrature.hpp"

namespace crpsreg::detail {

// Integral over [lower_cut, inf) of an integrand built from the given
// distribution functions. The integrand must vanish below the lowest support
// point of every cdf and every extra point, and must be bounded past them by
// the sum over GPD components of S(z)^tail_power.
double integrate_over_cdfs(const quadrature::Integrand& f,
                           std::initializer_list<const CDF*> cdfs,
                           std::span<const double> extra_points,
                           double lower_cut, double tail_power);

}  // namespace crpsreg::detail
