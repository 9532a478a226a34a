#include "crpsreg/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <sstream>
#include <thread>

#include "crpsreg/error.hpp"
#include "crpsreg/quadrature.hpp"

namespace crpsreg {
namespace {

double coordinate_sum(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s;
}

// L2 norm in z of d/ds S_{xi(s), sigma(s)}(z) along the linear parameter path.
double survival_path_derivative_norm(double xi, double sigma, double dxi, double dsigma) {
  const GPDParams p{xi, sigma};
  const auto deriv = [&](double z) {
    if (z <= 0.0) return 0.0;
    const double s = gpd_survival(p, z);
    const double base = sigma + xi * z;
    const double d_sigma = s * z / (sigma * base);
    const double d_xi = s * (std::log1p(xi * z / sigma) / (xi * xi) - z / (xi * base));
    const double g = dxi * d_xi + dsigma * d_sigma;
    return g * g;
  };
  quadrature::PiecewiseDomain domain;
  domain.lower = 0.0;
  domain.breakpoints = {0.0, sigma};
  domain.tail_scale = sigma;
  // The derivative squared decays like S^2 log^2 z, below 100 S^1.5 well past sigma.
  domain.tail_envelope = [p](double t) { return 100.0 * gpd_survival_power_tail(p, t, 1.5); };
  return std::sqrt(quadrature::integrate_piecewise(deriv, domain).value);
}

}  // namespace

ConditionalModel ConditionalModel::binary_smooth(std::size_t d, double L, double center,
                                                 double amplitude) {
  if (d < 1) throw Error("dimension d must be at least 1");
  if (!(L > 0.0)) throw Error("L must be positive");
  if (!(center - std::abs(amplitude) >= 0.0 && center + std::abs(amplitude) <= 1.0))
    throw Error("binary_smooth probabilities must stay in [0, 1]");
  ConditionalModel m;
  m.kind_ = Kind::kBinarySmooth;
  m.L_ = L;
  m.center_ = center;
  m.amplitude_ = amplitude;
  // A constant m is in every Hölder class; keep C positive.
  const double C = std::max(std::numbers::pi * std::abs(amplitude) * std::sqrt(L), 1e-12);
  m.class_params_ = ClassParams{1.0, C, L / 4.0, d};
  return m;
}

ConditionalModel ConditionalModel::gpd_linear(std::size_t d) {
  const double dd = static_cast<double>(d);
  return gpd_linear(d, 0.3, 0.2 / dd, 1.0, 0.5 / dd);
}

ConditionalModel ConditionalModel::gpd_linear(std::size_t d, double xi0, double alpha,
                                              double sigma0, double beta) {
  if (d < 1) throw Error("dimension d must be at least 1");
  const double dd = static_cast<double>(d);
  for (double s : {0.0, dd}) {
    const double xi = xi0 + alpha * s;
    const double sigma = sigma0 + beta * s;
    if (!(xi > 0.05 && xi < 0.95)) throw Error("gpd_linear shape must stay in (0.05, 0.95)");
    if (!(sigma > 0.1)) throw Error("gpd_linear scale must stay above 0.1");
  }
  ConditionalModel m;
  m.kind_ = Kind::kGpdLinear;
  m.xi0_ = xi0;
  m.alpha_ = alpha;
  m.sigma0_ = sigma0;
  m.beta_ = beta;

  // Both parameters are affine in s = sum_j x_j in [0, d]; scan s.
  constexpr int kGrid = 32;
  double max_dispersion = 0.0;
  double max_derivative = 0.0;
  for (int i = 0; i <= kGrid; ++i) {
    const double s = dd * i / kGrid;
    const double xi = xi0 + alpha * s;
    const double sigma = sigma0 + beta * s;
    max_dispersion = std::max(max_dispersion, sigma / ((1.0 - xi) * (2.0 - xi)));
    max_derivative = std::max(max_derivative, survival_path_derivative_norm(xi, sigma, alpha, beta));
  }
  // |sum_j (x'_j - x_j)| <= sqrt(d) |x' - x|. The 5% margin covers variation
  // of the derivative norm between grid points.
  const double C = std::max(1.05 * std::sqrt(dd) * max_derivative, 1e-12);
  const bool monotone = alpha * beta >= 0.0;
  m.class_params_ = ClassParams{1.0, C, monotone ? max_dispersion : 1.05 * max_dispersion, d};
  return m;
}

std::string ConditionalModel::describe() const {
  std::ostringstream os;
  os.precision(17);
  if (kind_ == Kind::kBinarySmooth)
    os << "binary_smooth(d=" << dim() << ", L=" << L_ << ", center=" << center_
       << ", amplitude=" << amplitude_ << ")";
  else
    os << "gpd_linear(d=" << dim() << ", xi0=" << xi0_ << ", alpha=" << alpha_
       << ", sigma0=" << sigma0_ << ", beta=" << beta_ << ")";
  return os.str();
}

double ConditionalModel::upper_probability(std::span<const double> x) const {
  require_in_unit_cube(x, dim());
  double prod = 1.0;
  for (double v : x) prod *= std::sin(std::numbers::pi * v);
  return std::clamp(center_ + amplitude_ * prod, 0.0, 1.0);
}

GPDParams ConditionalModel::gpd_at(std::span<const double> x) const {
  require_in_unit_cube(x, dim());
  const double s = coordinate_sum(x);
  return {xi0_ + alpha_ * s, sigma0_ + beta_ * s};
}

CDF ConditionalModel::true_cdf(std::span<const double> x) const {
  if (kind_ == Kind::kGpdLinear) return gpd_at(x);
  const double m = upper_probability(x);
  if (m <= 0.0) return StepCDF::point_mass(0.0);
  if (m >= 1.0) return StepCDF::point_mass(L_);
  return StepCDF({0.0, L_}, {1.0 - m, 1.0});
}

double ConditionalModel::sample_outcome(std::span<const double> x, Rng& rng) const {
  if (kind_ == Kind::kGpdLinear) return gpd_sample(gpd_at(x), rng);
  return uniform_open01(rng) < upper_probability(x) ? L_ : 0.0;
}

TrainingSet sample_training(const ConditionalModel& model, std::size_t n, Rng& rng) {
  if (n < 1) throw Error("sample size n must be at least 1");
  const std::size_t d = model.dim();
  std::vector<double> xs(n * d);
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::span<double> x(xs.data() + i * d, d);
    for (double& v : x) v = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    ys[i] = model.sample_outcome(x, rng);
  }
  return TrainingSet(d, std::move(xs), std::move(ys));
}

std::string_view to_string(Method m) { return m == Method::kKnn ? "knn" : "kernel"; }

void validate(const ExperimentConfig& cfg) {
  if (cfg.sample_sizes.empty()) throw Error("sample_sizes must not be empty");
  for (std::size_t i = 0; i < cfg.sample_sizes.size(); ++i) {
    if (cfg.sample_sizes[i] < 1) throw Error("sample sizes must be at least 1");
    if (i > 0 && cfg.sample_sizes[i] <= cfg.sample_sizes[i - 1])
      throw Error("sample_sizes must be strictly increasing");
  }
  if (cfg.replications < 1) throw Error("replications must be at least 1");
  if (cfg.test_points < 1) throw Error("test_points must be at least 1");
  if (!cfg.tuning.optimal) {
    if (!(cfg.tuning.value > 0.0)) throw Error("fixed tuning value must be positive");
    if (cfg.method == Method::kKnn) {
      if (cfg.tuning.value != std::floor(cfg.tuning.value))
        throw Error("fixed k must be an integer");
      if (cfg.tuning.value > static_cast<double>(cfg.sample_sizes.front()))
        throw Error("k exceeds sample size");
    }
  }
}

double tuning_value(const ExperimentConfig& cfg, std::size_t n) {
  const ClassParams& cp = cfg.model.class_params();
  if (!cfg.tuning.optimal) return cfg.tuning.value;
  if (cfg.method == Method::kKnn) return static_cast<double>(optimal_k(n, cp));
  return optimal_bandwidth(n, cp);
}

double risk_bound(const ExperimentConfig& cfg, std::size_t n) {
  const ClassParams& cp = cfg.model.class_params();
  const double t = tuning_value(cfg, n);
  if (cfg.method == Method::kKnn) return upper_bound_knn(n, static_cast<std::size_t>(t), cp);
  return upper_bound_kernel(n, t, cp);
}

double pointwise_excess_risk(const ExperimentConfig& cfg, const TrainingSet& data,
                             const NeighborSearch& search, std::span<const double> x,
                             std::uint64_t tie_seed) {
  const double t = tuning_value(cfg, data.size());
  const StepCDF fitted =
      cfg.method == Method::kKnn
          ? knn_predict(search, data, x, KnnConfig{static_cast<std::size_t>(t), tie_seed})
          : kernel_predict(data, x, KernelConfig{t});
  const CDF truth = cfg.model.true_cdf(x);
  if (const auto* s = std::get_if<StepCDF>(&truth)) return l2_cdf_distance_sq(fitted, *s);
  return l2_cdf_distance_sq(CDF(fitted), truth);
}

namespace {

constexpr std::uint64_t kTieStream = 0x7469657300000000ULL;

double replication_risk(const ExperimentConfig& cfg, std::size_t n, std::size_t r) {
  Rng rng(derive_seed(cfg.master_seed, {n, r}));
  const TrainingSet data = sample_training(cfg.model, n, rng);
  const NeighborSearch search(data);
  const std::size_t d = cfg.model.dim();
  std::vector<double> x(d);
  std::vector<double> risks(cfg.test_points);
  for (std::size_t j = 0; j < cfg.test_points; ++j) {
    for (double& v : x) v = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    risks[j] = pointwise_excess_risk(cfg, data, search, x,
                                     derive_seed(cfg.master_seed, {n, r, j, kTieStream}));
  }
  return pairwise_sum(risks) / static_cast<double>(risks.size());
}

RiskEstimate summarize(const ExperimentConfig& cfg, std::size_t n, std::vector<double> reps) {
  RiskEstimate e;
  e.n = n;
  e.tuning = tuning_value(cfg, n);
  e.bound = risk_bound(cfg, n);
  const double count = static_cast<double>(reps.size());
  e.mean = pairwise_sum(reps) / count;
  if (reps.size() > 1) {
    std::vector<double> sq(reps.size());
    for (std::size_t i = 0; i < reps.size(); ++i) sq[i] = (reps[i] - e.mean) * (reps[i] - e.mean);
    e.standard_error = std::sqrt(pairwise_sum(sq) / (count - 1.0) / count);
  }
  e.replications = std::move(reps);
  return e;
}

// Runs task(i) for i in [0, count) on `threads` workers.
template <class Task>
void parallel_for(std::size_t count, unsigned threads, const Task& task) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i; !failed && (i = next.fetch_add(1)) < count;) {
        try {
          task(i);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

RiskEstimate excess_risk_mc(const ExperimentConfig& cfg, std::size_t n) {
  validate(cfg);
  std::vector<double> reps(cfg.replications);
  parallel_for(reps.size(), cfg.threads, [&](std::size_t r) { reps[r] = replication_risk(cfg, n, r); });
  return summarize(cfg, n, std::move(reps));
}

std::vector<RiskEstimate> run_sweep(const ExperimentConfig& cfg) {
  validate(cfg);
  const std::size_t sizes = cfg.sample_sizes.size();
  const std::size_t reps = cfg.replications;
  std::vector<double> results(sizes * reps);
  // Largest n first so the long tasks do not trail at the end.
  parallel_for(results.size(), cfg.threads, [&](std::size_t task) {
    const std::size_t ni = sizes - 1 - task / reps;
    const std::size_t r = task % reps;
    results[ni * reps + r] = replication_risk(cfg, cfg.sample_sizes[ni], r);
  });
  std::vector<RiskEstimate> out;
  out.reserve(sizes);
  for (std::size_t ni = 0; ni < sizes; ++ni) {
    std::vector<double> per(results.begin() + static_cast<std::ptrdiff_t>(ni * reps),
                            results.begin() + static_cast<std::ptrdiff_t>((ni + 1) * reps));
    out.push_back(summarize(cfg, cfg.sample_sizes[ni], std::move(per)));
  }
  return out;
}

BoundCheck bound_check(const RiskEstimate& e) {
  return {e.n, e.mean, e.standard_error, e.bound, e.mean - 3.0 * e.standard_error <= e.bound};
}

BoundCheck bound_check(const ExperimentConfig& cfg, std::size_t n) {
  return bound_check(excess_risk_mc(cfg, n));
}

namespace {

struct Line {
  double slope, intercept, r_squared;
};

Line least_squares(std::span<const double> xs, std::span<const double> ys) {
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  const double slope = sxy / sxx;
  const double r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return {slope, my - slope * mx, r2};
}

std::vector<double> logs_of_means(std::span<const double> means) {
  std::vector<double> out(means.size());
  for (std::size_t i = 0; i < means.size(); ++i) {
    if (!(means[i] > 0.0)) throw Error("cannot take log of a nonpositive risk estimate");
    out[i] = std::log(means[i]);
  }
  return out;
}

}  // namespace

RateFit fit_rate(std::span<const double> ns, std::span<const double> means) {
  if (ns.size() != means.size()) throw Error("sample sizes and estimates differ in length");
  if (ns.size() < 3) throw Error("rate fit needs at least three sample sizes");
  std::vector<double> lx(ns.size());
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (!(ns[i] > 0.0)) throw Error("cannot take log of a nonpositive sample size");
    lx[i] = std::log(ns[i]);
  }
  const Line line = least_squares(lx, logs_of_means(means));
  RateFit fit;
  fit.slope = line.slope;
  fit.intercept = line.intercept;
  fit.r_squared = line.r_squared;
  fit.means.assign(means.begin(), means.end());
  for (double n : ns) fit.ns.push_back(static_cast<std::size_t>(n));
  fit.standard_errors.assign(ns.size(), 0.0);
  return fit;
}

RateFit fit_rate(std::span<const RiskEstimate> estimates, std::uint64_t seed,
                 std::size_t bootstrap_draws) {
  std::vector<double> ns, means;
  for (const auto& e : estimates) {
    ns.push_back(static_cast<double>(e.n));
    means.push_back(e.mean);
  }
  RateFit fit = fit_rate(ns, means);
  for (std::size_t i = 0; i < estimates.size(); ++i) fit.standard_errors[i] = estimates[i].standard_error;

  const bool resamplable = std::all_of(estimates.begin(), estimates.end(),
                                       [](const RiskEstimate& e) { return e.replications.size() > 1; });
  if (!resamplable || bootstrap_draws < 2) return fit;

  std::vector<double> lx(ns.size());
  for (std::size_t i = 0; i < ns.size(); ++i) lx[i] = std::log(ns[i]);
  Rng rng(derive_seed(seed, {0x626f6f74ULL}));
  std::vector<double> slopes;
  slopes.reserve(bootstrap_draws);
  std::vector<double> ly(ns.size());
  std::vector<double> draw;
  for (std::size_t b = 0; b < bootstrap_draws; ++b) {
    bool usable = true;
    for (std::size_t i = 0; i < estimates.size(); ++i) {
      const auto& reps = estimates[i].replications;
      draw.resize(reps.size());
      std::uniform_int_distribution<std::size_t> pick(0, reps.size() - 1);
      for (double& v : draw) v = reps[pick(rng)];
      const double m = pairwise_sum(draw) / static_cast<double>(draw.size());
      if (!(m > 0.0)) usable = false;
      ly[i] = usable ? std::log(m) : 0.0;
    }
    if (usable) slopes.push_back(least_squares(lx, ly).slope);
  }
  if (slopes.size() < 2) return fit;
  double mean = 0.0;
  for (double s : slopes) mean += s;
  mean /= static_cast<double>(slopes.size());
  double var = 0.0;
  for (double s : slopes) var += (s - mean) * (s - mean);
  fit.slope_se = std::sqrt(var / static_cast<double>(slopes.size() - 1));
  return fit;
}

double target_slope(const ExperimentConfig& cfg) {
  const ClassParams& cp = cfg.model.class_params();
  if (cfg.method == Method::kKnn) return -knn_rate_exponent(cp);
  return -minimax_rate_exponent(cp);
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

}  // namespace crpsreg
