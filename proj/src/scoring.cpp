#include "crpsreg/scoring.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "cdf_integral.hpp"
#include "crpsreg/error.hpp"
#include "crpsreg/quadrature.hpp"

namespace crpsreg {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Integral over [lower, inf) of (F(z) - 1{y <= z})^2. F and the indicator
// are both constant between consecutive merged breakpoints.
double step_crps_from(const StepCDF& f, double y, double lower) {
  const auto support = f.support();
  const auto cum = f.cum_probs();
  double sum = 0.0;
  double prev = std::min(support.front(), y);
  double fv = 0.0;
  std::size_t i = 0;
  bool y_done = false;
  while (i < support.size() || !y_done) {
    const double next = (!y_done && (i == support.size() || y <= support[i])) ? y : support[i];
    const double lo = std::max(prev, lower);
    if (next > lo) {
      const double diff = fv - (y_done ? 1.0 : 0.0);
      sum += (next - lo) * diff * diff;
    }
    if (!y_done && y == next) y_done = true;
    while (i < support.size() && support[i] == next) fv = cum[i++];
    prev = next;
  }
  return sum;
}

// Lowest point where (F(z) - 1{y <= z})^2 can be nonzero.
double crps_integrand_start(const CDF& f, double y) {
  const double support_start = std::visit(
      [](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, StepCDF>) return d.lowest();
        else return 0.0;
      },
      f);
  return std::min(support_start, y);
}

double crps_quadrature_from(const CDF& f, double y, double lower) {
  require_finite_mean(f);
  const auto integrand = [&](double z) {
    const double d = y <= z ? evaluate_survival(f, z) : evaluate(f, z);
    return d * d;
  };
  const std::array<double, 1> extra{y};
  return detail::integrate_over_cdfs(integrand, {&f}, extra, lower, 2.0);
}

// E[S_f(Y)] and E[Y S_f(Y)] for Y ~ measure.
struct SurvivalMoments {
  double m0;
  double m1;
};

SurvivalMoments survival_moments(const GPDParams& f, const GPDParams& measure) {
  quadrature::PiecewiseDomain domain;
  domain.lower = 0.0;
  for (const GPDParams* g : {&f, &measure}) {
    const double end = gpd_upper_endpoint(*g);
    if (std::isfinite(end)) domain.breakpoints.push_back(end);
  }
  // Both integrands vanish past the first finite endpoint.
  std::sort(domain.breakpoints.begin(), domain.breakpoints.end());
  if (!domain.breakpoints.empty()) domain.breakpoints.resize(1);
  const bool bounded = !domain.breakpoints.empty();
  domain.tail_scale = std::min(f.sigma, measure.sigma);

  if (!bounded)
    domain.tail_envelope = [&](double t) { return gpd_survival(measure, t); };
  const double m0 =
      quadrature::integrate_piecewise(
          [&](double y) { return gpd_density(measure, y) * gpd_survival(f, y); }, domain)
          .value;
  if (!bounded)
    domain.tail_envelope = [&](double t) {
      // E[Y 1{Y > t}] = t S(t) + int_t^inf S
      return t * gpd_survival(measure, t) + gpd_survival_power_tail(measure, t, 1.0);
    };
  const double m1 =
      quadrature::integrate_piecewise(
          [&](double y) { return y * gpd_density(measure, y) * gpd_survival(f, y); }, domain)
          .value;
  return {m0, m1};
}

}  // namespace

double crps_quadrature(const CDF& forecast, double y) {
  return crps_quadrature_from(forecast, y, kNegInf);
}

double crps_step_exact(const StepCDF& forecast, double y) {
  return step_crps_from(forecast, y, kNegInf);
}

double crps_gpd(const GPDParams& p, double y) {
  require_finite_mean(p);
  const double below = y < 0.0 ? -y : 0.0;
  const double obs = std::max(y, 0.0);
  const double s = p.sigma;
  if (std::abs(p.xi) < kGpdExponentialBranch)
    return below + obs + 2.0 * s * std::exp(-obs / s) - 1.5 * s;

  const double xi = p.xi;
  const double survival = gpd_survival(p, obs);
  const double cdf = 1.0 - survival;
  // Past the upper endpoint of a negative-shape GPD the survival term is zero
  // while 1 + xi y / sigma turns negative; the product is zero.
  const double tail_term = survival > 0.0 ? survival * (1.0 + xi * obs / s) : 0.0;
  return below + (obs + s / xi) * (2.0 * cdf - 1.0) -
         2.0 * s / (xi * (xi - 1.0)) * (1.0 / (xi - 2.0) + tail_term);
}

double crps(const CDF& forecast, double y) {
  if (const auto* s = std::get_if<StepCDF>(&forecast)) return crps_step_exact(*s, y);
  return crps_gpd(std::get<GPDParams>(forecast), y);
}

double wcrps(const CDF& forecast, double y, const WeightFn& weight) {
  require_finite_mean(forecast);
  if (weight.kind() == WeightFn::Kind::kConstant) return crps(forecast, y);
  const double t = weight.threshold_value();
  if (const auto* s = std::get_if<StepCDF>(&forecast)) return step_crps_from(*s, y, t);
  // The integrand vanishes below its start, so the weight is 1 wherever it matters.
  if (t <= crps_integrand_start(forecast, y)) return crps(forecast, y);
  return crps_quadrature_from(forecast, y, t);
}

double dispersion_integral(const CDF& g) {
  if (const auto* s = std::get_if<StepCDF>(&g)) {
    double sum = 0.0;
    for (std::size_t j = 0; j + 1 < s->size(); ++j) {
      const double p = s->cum_probs()[j];
      sum += (s->support()[j + 1] - s->support()[j]) * p * (1.0 - p);
    }
    return sum;
  }
  require_finite_mean(g);
  const auto integrand = [&](double z) {
    const double s = evaluate_survival(g, z);
    return s * (1.0 - s);
  };
  return detail::integrate_over_cdfs(integrand, {&g}, {}, kNegInf, 1.0);
}

double expected_crps(const CDF& forecast, const CDF& truth) {
  return l2_cdf_distance_sq(forecast, truth) + dispersion_integral(truth);
}

std::string_view to_string(GpdExpectedCrps::Variant v) {
  switch (v) {
    case GpdExpectedCrps::Variant::kPublishedForecastMeasure: return "published_forecast_measure";
    case GpdExpectedCrps::Variant::kPublishedTruthMeasure: return "published_truth_measure";
    case GpdExpectedCrps::Variant::kExpandedTruthMeasure: return "expanded_truth_measure";
    case GpdExpectedCrps::Variant::kNone: break;
  }
  return "none";
}

GpdExpectedCrps expected_crps_gpd_formula(const GPDParams& fc, const GPDParams& truth) {
  require_finite_mean(fc);
  require_finite_mean(truth);
  GpdExpectedCrps out;
  out.value = expected_crps(fc, truth);

  const double xi = fc.xi;
  const double truth_mean = truth.sigma / (1.0 - truth.xi);
  const double published_const = 2.0 * truth.sigma * (1.0 / (1.0 - xi) - 1.0 / (2.0 * (2.0 - xi)));
  const double expanded_const = -fc.sigma * (3.0 - xi) / ((1.0 - xi) * (2.0 - xi));
  const auto combine = [&](SurvivalMoments m, double constant) {
    return truth_mean + 2.0 * fc.sigma / (1.0 - xi) * m.m0 + 2.0 * xi / (1.0 - xi) * m.m1 + constant;
  };
  const SurvivalMoments under_fc = survival_moments(fc, fc);
  const SurvivalMoments under_truth = survival_moments(fc, truth);
  out.published_forecast_measure = combine(under_fc, published_const);
  out.published_truth_measure = combine(under_truth, published_const);
  out.expanded_truth_measure = combine(under_truth, expanded_const);

  const double tol = 1e-6 * std::max(1.0, std::abs(out.value));
  double best = tol;
  const std::array<std::pair<GpdExpectedCrps::Variant, double>, 3> candidates{{
      {GpdExpectedCrps::Variant::kPublishedForecastMeasure, out.published_forecast_measure},
      {GpdExpectedCrps::Variant::kPublishedTruthMeasure, out.published_truth_measure},
      {GpdExpectedCrps::Variant::kExpandedTruthMeasure, out.expanded_truth_measure},
  }};
  for (const auto& [variant, v] : candidates) {
    const double gap = std::abs(v - out.value);
    if (gap <= best) {
      best = gap;
      out.matching = variant;
    }
  }
  return out;
}

StepCDF project_to_binary(const CDF& forecast, double L) {
  if (!(L > 0.0) || !std::isfinite(L)) throw Error("L must be positive");
  double below_mass;  // int_0^L F
  if (const auto* s = std::get_if<StepCDF>(&forecast)) {
    below_mass = 0.0;
    double prev = 0.0;
    double fv = (*s)(0.0);
    for (std::size_t j = 0; j < s->size(); ++j) {
      const double z = s->support()[j];
      if (z <= 0.0) continue;
      if (z >= L) break;
      below_mass += (z - prev) * fv;
      fv = s->cum_probs()[j];
      prev = z;
    }
    below_mass += (L - prev) * fv;
  } else {
    const auto& g = std::get<GPDParams>(forecast);
    validate(g);
    const std::array<double, 3> extra{0.0, L, std::min(gpd_upper_endpoint(g), L)};
    below_mass = detail::integrate_over_cdfs([&](double z) { return z <= L ? gpd_cdf(g, z) : 0.0; },
                                             {}, extra, 0.0, 2.0);
  }
  const double m = std::clamp(1.0 - below_mass / L, 0.0, 1.0);
  const std::array<double, 2> atoms{0.0, L};
  const std::array<double, 2> weights{1.0 - m, m};
  return StepCDF::from_sample(atoms, weights);
}

double brier_of_binary(const StepCDF& forecast, double L, double y) {
  if (!(L > 0.0)) throw Error("L must be positive");
  if (y != 0.0 && y != L) throw Error("non-binary outcome");
  double p = 0.0;
  for (std::size_t j = 0; j < forecast.size(); ++j) {
    const double z = forecast.support()[j];
    if (z == L) p = forecast.mass(j);
    else if (z != 0.0) throw Error("forecast is not supported on {0, L}");
  }
  const double r = y / L - p;
  return L * r * r;
}

}  // namespace crpsreg
