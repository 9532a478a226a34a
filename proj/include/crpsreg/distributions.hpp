#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "crpsreg/rng.hpp"

namespace crpsreg {

/// Right-continuous distribution function with finitely many jumps.
///
/// Stored as strictly increasing jump locations z_1 < ... < z_m and the
/// cumulative probabilities p_j = F(z_j), so evaluation is a binary search.
/// F(z) = 0 below z_1 and F(z) = 1 from z_m on; p_m is exactly 1.
class StepCDF {
 public:
  /// Validates the invariants and throws crpsreg::Error if they do not hold.
  StepCDF(std::vector<double> support, std::vector<double> cum_probs);

  static StepCDF point_mass(double at);

  /// Empirical distribution of `values`; equal values are merged.
  static StepCDF from_sample(std::span<const double> values);

  /// Weighted empirical distribution. Each distinct value receives its total
  /// weight divided by the sum of all weights; zero-weight values are dropped.
  static StepCDF from_sample(std::span<const double> values,
                             std::span<const double> weights);

  double operator()(double z) const;

  std::span<const double> support() const { return support_; }
  std::span<const double> cum_probs() const { return cum_; }
  std::size_t size() const { return support_.size(); }

  /// Probability of the j-th jump.
  double mass(std::size_t j) const { return j == 0 ? cum_[0] : cum_[j] - cum_[j - 1]; }

  double lowest() const { return support_.front(); }
  double highest() const { return support_.back(); }

  bool operator==(const StepCDF&) const = default;

 private:
  struct Unchecked {};
  StepCDF(Unchecked, std::vector<double> support, std::vector<double> cum_probs)
      : support_(std::move(support)), cum_(std::move(cum_probs)) {}

  std::vector<double> support_;
  std::vector<double> cum_;
};

/// Generalized Pareto distribution H_{xi,sigma} on [0, inf) (or on
/// [0, -sigma/xi] when xi < 0).
struct GPDParams {
  double xi = 0.0;
  double sigma = 1.0;

  bool operator==(const GPDParams&) const = default;
};

/// Shapes closer to zero than this use the exponential limit.
inline constexpr double kGpdExponentialBranch = 1e-8;

void validate(const GPDParams& params);

/// Throws "infinite mean, integral may diverge" unless xi < 1.
void require_finite_mean(const GPDParams& params);

double gpd_survival(const GPDParams& params, double z);
double gpd_cdf(const GPDParams& params, double z);
double gpd_quantile(const GPDParams& params, double u);
double gpd_density(const GPDParams& params, double z);
double gpd_mean(const GPDParams& params);

/// Right end of the support; +inf unless xi < 0.
double gpd_upper_endpoint(const GPDParams& params);

/// Integral of S(z)^power over [t, inf), S the survival function.
/// Requires power > xi; closed form in every branch.
double gpd_survival_power_tail(const GPDParams& params, double t, double power);

/// Inverse-transform draw; always strictly positive.
double gpd_sample(const GPDParams& params, Rng& rng);

/// Either kind of forecast or truth the library integrates against.
using CDF = std::variant<StepCDF, GPDParams>;

double evaluate(const CDF& cdf, double z);
/// 1 - F(z), without cancellation in the upper tail of a GPD.
double evaluate_survival(const CDF& cdf, double z);

/// Throws for a GPD without finite mean; steps always pass.
void require_finite_mean(const CDF& cdf);

/// Weight for the threshold-weighted CRPS: w = 1 everywhere, or w = 1{z >= t}.
class WeightFn {
 public:
  enum class Kind { kConstant, kThreshold };

  static WeightFn constant() { return WeightFn(Kind::kConstant, 0.0); }
  static WeightFn threshold(double t) { return WeightFn(Kind::kThreshold, t); }

  Kind kind() const { return kind_; }
  double threshold_value() const { return t_; }

  /// Lower end of the region where w = 1.
  double lower() const {
    return kind_ == Kind::kConstant ? -std::numeric_limits<double>::infinity() : t_;
  }
  double operator()(double z) const {
    return kind_ == Kind::kConstant || z >= t_ ? 1.0 : 0.0;
  }

 private:
  WeightFn(Kind kind, double t) : kind_(kind), t_(t) {}
  Kind kind_;
  double t_;
};

/// Squared L2 distance between two step functions, by exact piecewise
/// summation over the merged breakpoints.
double l2_cdf_distance_sq(const StepCDF& f, const StepCDF& g);

/// Squared L2 distance between two distribution functions. Exact for two
/// steps, adaptive quadrature otherwise.
double l2_cdf_distance_sq(const CDF& f, const CDF& g);

}  // namespace crpsreg
