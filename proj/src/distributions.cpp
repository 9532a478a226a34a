#include "crpsreg/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "cdf_integral.hpp"
#include "crpsreg/error.hpp"

namespace crpsreg {

StepCDF::StepCDF(std::vector<double> support, std::vector<double> cum_probs)
    : support_(std::move(support)), cum_(std::move(cum_probs)) {
  if (support_.empty()) throw Error("empty sample");
  if (support_.size() != cum_.size())
    throw Error("support and cumulative probabilities differ in length");
  for (std::size_t j = 0; j < support_.size(); ++j) {
    if (!std::isfinite(support_[j])) throw Error("support points must be finite");
    if (j > 0 && !(support_[j - 1] < support_[j]))
      throw Error("support must be strictly increasing");
    if (!(cum_[j] > 0.0 && cum_[j] <= 1.0))
      throw Error("cumulative probabilities must lie in (0, 1]");
    if (j > 0 && cum_[j] < cum_[j - 1])
      throw Error("cumulative probabilities must be nondecreasing");
  }
  if (cum_.back() != 1.0) throw Error("last cumulative probability must be 1");
}

StepCDF StepCDF::point_mass(double at) { return StepCDF({at}, {1.0}); }

StepCDF StepCDF::from_sample(std::span<const double> values) {
  if (values.empty()) throw Error("empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  for (double v : sorted)
    if (!std::isfinite(v)) throw Error("sample values must be finite");
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  std::vector<double> support;
  std::vector<double> cum;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
    support.push_back(sorted[i]);
    cum.push_back(static_cast<double>(i + 1) / n);
  }
  cum.back() = 1.0;
  return StepCDF(Unchecked{}, std::move(support), std::move(cum));
}

StepCDF StepCDF::from_sample(std::span<const double> values,
                             std::span<const double> weights) {
  if (values.empty()) throw Error("empty sample");
  if (weights.size() != values.size())
    throw Error("weights and values differ in length");
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) throw Error("sample values must be finite");
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i]))
      throw Error("weights must be finite and nonnegative");
    total += weights[i];
  }
  if (!(total > 0.0)) throw Error("degenerate weights");

  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

  std::vector<double> support;
  std::vector<double> cum;
  double running = 0.0;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const std::size_t i = order[pos];
    running += weights[i];
    const bool last_of_value =
        pos + 1 == order.size() || values[order[pos + 1]] != values[i];
    if (!last_of_value) continue;
    const double p = std::min(running / total, 1.0);
    if (!(p > 0.0) || (!cum.empty() && p <= cum.back())) continue;  // zero mass
    support.push_back(values[i]);
    cum.push_back(p);
  }
  cum.back() = 1.0;
  return StepCDF(Unchecked{}, std::move(support), std::move(cum));
}

double StepCDF::operator()(double z) const {
  const auto it = std::upper_bound(support_.begin(), support_.end(), z);
  if (it == support_.begin()) return 0.0;
  return cum_[static_cast<std::size_t>(it - support_.begin()) - 1];
}

// --- generalized Pareto --------------------------------------------------

namespace {
bool exponential_branch(const GPDParams& p) { return std::abs(p.xi) < kGpdExponentialBranch; }
}  // namespace

void validate(const GPDParams& params) {
  if (!(params.sigma > 0.0) || !std::isfinite(params.sigma))
    throw Error("GPD scale sigma must be positive");
  if (!std::isfinite(params.xi)) throw Error("GPD shape xi must be finite");
}

void require_finite_mean(const GPDParams& params) {
  validate(params);
  if (params.xi >= 1.0) throw Error("infinite mean, integral may diverge");
}

double gpd_survival(const GPDParams& p, double z) {
  if (z <= 0.0) return 1.0;
  if (exponential_branch(p)) return std::exp(-z / p.sigma);
  const double arg = p.xi * z / p.sigma;
  if (arg <= -1.0) return 0.0;
  return std::exp(-std::log1p(arg) / p.xi);
}

double gpd_cdf(const GPDParams& p, double z) { return 1.0 - gpd_survival(p, z); }

double gpd_quantile(const GPDParams& p, double u) {
  if (!(u >= 0.0 && u <= 1.0)) throw Error("quantile level must lie in [0, 1]");
  if (u == 0.0) return 0.0;
  if (u == 1.0) return gpd_upper_endpoint(p);
  const double log_tail = std::log1p(-u);
  if (exponential_branch(p)) return -p.sigma * log_tail;
  return p.sigma * std::expm1(-p.xi * log_tail) / p.xi;
}

double gpd_density(const GPDParams& p, double z) {
  if (z < 0.0) return 0.0;
  if (exponential_branch(p)) return std::exp(-z / p.sigma) / p.sigma;
  const double base = 1.0 + p.xi * z / p.sigma;
  if (base <= 0.0) return 0.0;
  return std::exp(-(1.0 / p.xi + 1.0) * std::log(base)) / p.sigma;
}

double gpd_mean(const GPDParams& p) {
  require_finite_mean(p);
  return p.sigma / (1.0 - p.xi);
}

double gpd_upper_endpoint(const GPDParams& p) {
  if (p.xi < 0.0 && !exponential_branch(p)) return -p.sigma / p.xi;
  return std::numeric_limits<double>::infinity();
}

double gpd_survival_power_tail(const GPDParams& p, double t, double power) {
  if (!(power > p.xi)) throw Error("tail integral of S^p diverges for p <= xi");
  const double start = std::max(t, 0.0);
  const double below = std::max(0.0, -t);  // S = 1 on [t, 0)
  if (exponential_branch(p))
    return below + p.sigma / power * std::exp(-power * start / p.sigma);
  const double base = 1.0 + p.xi * start / p.sigma;
  if (base <= 0.0) return below;
  // u = 1 + xi z / sigma:  int_u^inf (sigma/xi) v^{-p/xi} dv
  return below + p.sigma / (power - p.xi) * std::exp((1.0 - power / p.xi) * std::log(base));
}

double gpd_sample(const GPDParams& params, Rng& rng) {
  const double u = uniform_open01(rng);
  double z = gpd_quantile(params, u);
  // u > 0 gives z > 0 mathematically; keep that after rounding too.
  if (!(z > 0.0)) z = std::numeric_limits<double>::denorm_min();
  return z;
}

// --- generic CDFs ----------------------------------------------------------

double evaluate(const CDF& cdf, double z) {
  return std::visit(
      [z](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, StepCDF>) return d(z);
        else return gpd_cdf(d, z);
      },
      cdf);
}

double evaluate_survival(const CDF& cdf, double z) {
  return std::visit(
      [z](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, StepCDF>) return 1.0 - d(z);
        else return gpd_survival(d, z);
      },
      cdf);
}

void require_finite_mean(const CDF& cdf) {
  if (const auto* g = std::get_if<GPDParams>(&cdf)) require_finite_mean(*g);
}

double l2_cdf_distance_sq(const StepCDF& f, const StepCDF& g) {
  // Both functions are constant between consecutive merged support points and
  // agree (0 or 1) outside [min, max].
  const auto fs = f.support();
  const auto gs = g.support();
  std::size_t i = 0, j = 0;
  double fv = 0.0, gv = 0.0;
  double prev = std::min(fs.front(), gs.front());
  double sum = 0.0;
  while (i < fs.size() || j < gs.size()) {
    const double next = j == gs.size() || (i < fs.size() && fs[i] <= gs[j]) ? fs[i] : gs[j];
    const double diff = fv - gv;
    sum += (next - prev) * diff * diff;
    while (i < fs.size() && fs[i] == next) fv = f.cum_probs()[i++];
    while (j < gs.size() && gs[j] == next) gv = g.cum_probs()[j++];
    prev = next;
  }
  return sum;
}

double l2_cdf_distance_sq(const CDF& f, const CDF& g) {
  if (const auto* fs = std::get_if<StepCDF>(&f))
    if (const auto* gs = std::get_if<StepCDF>(&g)) return l2_cdf_distance_sq(*fs, *gs);
  require_finite_mean(f);
  require_finite_mean(g);
  const auto integrand = [&](double z) {
    const double d = evaluate_survival(g, z) - evaluate_survival(f, z);
    return d * d;
  };
  return detail::integrate_over_cdfs(integrand, {&f, &g}, {},
                                     -std::numeric_limits<double>::infinity(), 2.0);
}

// --- integration over CDF breakpoints --------------------------------------

double detail::integrate_over_cdfs(const quadrature::Integrand& f,
                                   std::initializer_list<const CDF*> cdfs,
                                   std::span<const double> extra_points,
                                   double lower_cut, double tail_power) {
  quadrature::PiecewiseDomain domain;
  std::vector<GPDParams> tails;
  double lowest = std::numeric_limits<double>::infinity();
  double scale = std::numeric_limits<double>::infinity();
  for (const CDF* c : cdfs) {
    if (const auto* s = std::get_if<StepCDF>(c)) {
      domain.breakpoints.insert(domain.breakpoints.end(), s->support().begin(),
                                s->support().end());
      lowest = std::min(lowest, s->lowest());
    } else {
      const auto& g = std::get<GPDParams>(*c);
      domain.breakpoints.push_back(0.0);
      lowest = std::min(lowest, 0.0);
      const double end = gpd_upper_endpoint(g);
      if (std::isfinite(end)) {
        domain.breakpoints.push_back(end);
      } else {
        tails.push_back(g);
        scale = std::min(scale, g.sigma);
      }
    }
  }
  for (double p : extra_points) {
    domain.breakpoints.push_back(p);
    lowest = std::min(lowest, p);
  }
  if (domain.breakpoints.empty()) return 0.0;
  domain.lower = std::max(lowest, lower_cut);
  if (!tails.empty()) {
    domain.tail_scale = scale;
    domain.tail_envelope = [tails = std::move(tails), tail_power](double x) {
      double bound = 0.0;
      for (const auto& g : tails) bound += gpd_survival_power_tail(g, x, tail_power);
      return bound;
    };
  }
  return quadrature::integrate_piecewise(f, domain).value;
}

}  // namespace crpsreg
