#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crpsreg/distributions.hpp"
#include "crpsreg/regressors.hpp"
#include "crpsreg/rng.hpp"

namespace crpsreg {

/// Ground-truth conditional distribution x -> F*_x on [0,1]^d, with the
/// class parameters (h, C, M) it provably satisfies.
///
/// binary_smooth: Y in {0, L}, P(Y = L | x) = m(x) = center + amplitude prod_j sin(pi x_j).
///   |grad m| <= pi |amplitude|, so ||F*_x - F*_x'||_L2 = sqrt(L) |m(x) - m(x')|
///   gives h = 1, C = pi |amplitude| sqrt(L); M = L/4.
/// gpd_linear: Y | x ~ GPD(xi0 + alpha sum_j x_j, sigma0 + beta sum_j x_j).
///   h = 1; C and M are evaluated numerically over the parameter path.
class ConditionalModel {
 public:
  enum class Kind { kBinarySmooth, kGpdLinear };

  static ConditionalModel binary_smooth(std::size_t d, double L = 1.0, double center = 0.5,
                                        double amplitude = 0.4);
  /// xi in [0.3, 0.5], sigma in [1, 1.5] over the cube.
  static ConditionalModel gpd_linear(std::size_t d);
  static ConditionalModel gpd_linear(std::size_t d, double xi0, double alpha, double sigma0,
                                     double beta);

  Kind kind() const { return kind_; }
  std::size_t dim() const { return class_params_.d; }
  const ClassParams& class_params() const { return class_params_; }
  std::string describe() const;

  /// P(Y = L | x) for binary_smooth.
  double upper_probability(std::span<const double> x) const;
  /// Conditional GPD parameters for gpd_linear.
  GPDParams gpd_at(std::span<const double> x) const;
  double level() const { return L_; }

  /// F*_x. Throws for x outside the unit cube.
  CDF true_cdf(std::span<const double> x) const;

  double sample_outcome(std::span<const double> x, Rng& rng) const;

 private:
  ConditionalModel() = default;

  Kind kind_ = Kind::kBinarySmooth;
  ClassParams class_params_;
  double L_ = 1.0, center_ = 0.5, amplitude_ = 0.4;
  double xi0_ = 0.0, alpha_ = 0.0, sigma0_ = 1.0, beta_ = 0.0;
};

/// Draws n pairs with X uniform on [0,1]^d and Y ~ F*_X.
TrainingSet sample_training(const ConditionalModel& model, std::size_t n, Rng& rng);

enum class Method { kKnn, kKernel };

std::string_view to_string(Method m);

/// Optimal: k or bandwidth from the class-optimal rules; otherwise `value`
/// is used for every n.
struct Tuning {
  bool optimal = true;
  double value = 0.0;
};

struct ExperimentConfig {
  ConditionalModel model = ConditionalModel::binary_smooth(1);
  Method method = Method::kKnn;
  Tuning tuning;
  std::vector<std::size_t> sample_sizes;
  std::size_t replications = 200;
  std::size_t test_points = 64;
  std::uint64_t master_seed = 0;
  /// Worker threads; 0 means hardware concurrency. Results do not depend on it.
  unsigned threads = 0;
};

void validate(const ExperimentConfig& cfg);

/// k (as a real number) or bandwidth used at sample size n.
double tuning_value(const ExperimentConfig& cfg, std::size_t n);

/// Upper bound on the excess risk for the method at sample size n, evaluated
/// with the model's certified class parameters.
double risk_bound(const ExperimentConfig& cfg, std::size_t n);

struct RiskEstimate {
  std::size_t n = 0;
  double mean = 0.0;
  double standard_error = 0.0;
  double tuning = 0.0;
  double bound = 0.0;
  std::vector<double> replications;  // per-replication average over test points
};

/// Excess-risk estimate at one test point: squared L2 distance between the
/// fitted and the true conditional distribution at x.
double pointwise_excess_risk(const ExperimentConfig& cfg, const TrainingSet& data,
                             const NeighborSearch& search, std::span<const double> x,
                             std::uint64_t tie_seed);

/// Monte Carlo estimate of E[ int |F^_{n,X} - F*_X|^2 ] over training sets and
/// test points. Replication seeds are derived from (master_seed, n, r).
RiskEstimate excess_risk_mc(const ExperimentConfig& cfg, std::size_t n);

/// excess_risk_mc for every configured sample size; replications run in
/// parallel, reduction order is fixed.
std::vector<RiskEstimate> run_sweep(const ExperimentConfig& cfg);

struct BoundCheck {
  std::size_t n = 0;
  double estimate = 0.0;
  double standard_error = 0.0;
  double bound = 0.0;
  bool pass = false;  // estimate - 3 SE <= bound
};

BoundCheck bound_check(const RiskEstimate& estimate);
BoundCheck bound_check(const ExperimentConfig& cfg, std::size_t n);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::optional<double> slope_se;  // bootstrap over replications
  std::vector<std::size_t> ns;
  std::vector<double> means;
  std::vector<double> standard_errors;
};

/// Least squares of log(mean) on log(n). Needs at least three sample sizes
/// and positive means.
RateFit fit_rate(std::span<const double> ns, std::span<const double> means);

/// As above, plus a bootstrap standard error of the slope obtained by
/// resampling replications within each n. Omitted with one replication.
RateFit fit_rate(std::span<const RiskEstimate> estimates, std::uint64_t seed,
                 std::size_t bootstrap_draws = 1000);

/// Theoretical slope -rate for the configured method and model.
double target_slope(const ExperimentConfig& cfg);

double pairwise_sum(std::span<const double> values);

}  // namespace crpsreg
