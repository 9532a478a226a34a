#pragma once

#include <string_view>

#include "crpsreg/distributions.hpp"

namespace crpsreg {

/// CRPS(F, y) = integral of (F(z) - 1{y <= z})^2 dz, evaluated by adaptive
/// quadrature. Reference path for the closed forms below.
double crps_quadrature(const CDF& forecast, double y);

/// CRPS of a step forecast, summed exactly piece by piece.
double crps_step_exact(const StepCDF& forecast, double y);

/// Closed-form CRPS of a generalized Pareto forecast. Observations below the
/// support add their distance to zero; |xi| < 1e-8 uses the exponential limit.
double crps_gpd(const GPDParams& forecast, double y);

/// Dispatches to crps_step_exact or crps_gpd.
double crps(const CDF& forecast, double y);

/// Threshold-weighted CRPS. With the constant weight this is crps() itself.
double wcrps(const CDF& forecast, double y, const WeightFn& weight);

/// Integral of G (1 - G): the expected CRPS of G under itself.
double dispersion_integral(const CDF& g);

/// Expected CRPS of `forecast` when observations follow `truth`, computed as
/// l2_cdf_distance_sq(forecast, truth) + dispersion_integral(truth).
double expected_crps(const CDF& forecast, const CDF& truth);

/// Expected CRPS of a GPD forecast under GPD truth through the moment
/// representation sigma*/(1-xi*) + 2 sigma/(1-xi) m0 + 2 xi/(1-xi) m1 + c,
/// reported next to the quadrature value.
///
/// The moments m0 = E[S(Y)] and m1 = E[Y S(Y)], S the forecast survival
/// function, are computed under both the forecast and the truth measure. The
/// published constant c = 2 sigma* (1/(1-xi) - 1/(2(2-xi))) does not reproduce
/// the quadrature value under either measure; expanding the expectation of
/// crps_gpd term by term gives c = -sigma (3-xi)/((1-xi)(2-xi)) with moments
/// under the truth, which does. All three are reported and `matching` names
/// the one that agrees with `value`.
struct GpdExpectedCrps {
  enum class Variant { kNone, kPublishedForecastMeasure, kPublishedTruthMeasure, kExpandedTruthMeasure };

  double value = 0.0;  // expected_crps(forecast, truth), authoritative
  double published_forecast_measure = 0.0;
  double published_truth_measure = 0.0;
  double expanded_truth_measure = 0.0;
  Variant matching = Variant::kNone;
};

std::string_view to_string(GpdExpectedCrps::Variant v);

GpdExpectedCrps expected_crps_gpd_formula(const GPDParams& forecast, const GPDParams& truth);

/// Two-atom forecast on {0, L} with upper mass m = (1/L) int_0^L (1 - F).
/// Never has a larger expected CRPS than `forecast` against truth on {0, L}.
StepCDF project_to_binary(const CDF& forecast, double L);

/// L (y/L - p)^2 for a forecast on {0, L} with mass p at L and y in {0, L}.
double brier_of_binary(const StepCDF& forecast, double L, double y);

}  // namespace crpsreg
