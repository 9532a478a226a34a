#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "crpsreg/error.hpp"
#include "crpsreg/experiments.hpp"
#include "crpsreg/scoring.hpp"

namespace crpsreg {
namespace {

ExperimentConfig small_config(ConditionalModel model, Method method, std::vector<std::size_t> ns) {
  ExperimentConfig cfg;
  cfg.model = std::move(model);
  cfg.method = method;
  cfg.sample_sizes = std::move(ns);
  cfg.replications = 20;
  cfg.test_points = 16;
  cfg.master_seed = 123;
  cfg.threads = 1;
  return cfg;
}

TEST(Model, DegenerateBinaryGivesAllL) {
  const ConditionalModel m = ConditionalModel::binary_smooth(2, 3.0, 1.0, 0.0);
  Rng rng(1);
  const TrainingSet data = sample_training(m, 500, rng);
  for (double y : data.ys()) EXPECT_EQ(y, 3.0);
}

TEST(Model, ConstantGpdSamplesMatchCdf) {
  const ConditionalModel m = ConditionalModel::gpd_linear(2, 0.3, 0.0, 1.0, 0.0);
  Rng rng(2);
  const TrainingSet data = sample_training(m, 100000, rng);
  std::vector<double> ys(data.ys().begin(), data.ys().end());
  std::sort(ys.begin(), ys.end());
  const double n = static_cast<double>(ys.size());
  double sup = 0.0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const double f = gpd_cdf({0.3, 1.0}, ys[i]);
    sup = std::max({sup, std::abs(f - i / n), std::abs(f - (i + 1) / n)});
  }
  // 1.63 / sqrt(n) is the 1% Kolmogorov critical value.
  EXPECT_LT(sup, 1.63 / std::sqrt(n));
}

TEST(Model, CovariatesUniform) {
  const ConditionalModel m = ConditionalModel::binary_smooth(3);
  Rng rng(3);
  const TrainingSet data = sample_training(m, 100000, rng);
  for (std::size_t j = 0; j < 3; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double v = data.x(i)[j];
      ASSERT_TRUE(v >= 0.0 && v <= 1.0);
      s += v;
    }
    const double se = std::sqrt(1.0 / 12.0 / data.size());
    EXPECT_LT(std::abs(s / data.size() - 0.5), 3.0 * se);
  }
}

TEST(Model, TrueCdf) {
  const ConditionalModel g = ConditionalModel::gpd_linear(2, 0.4, 0.0, 2.0, 0.0);
  EXPECT_EQ(std::get<GPDParams>(g.true_cdf(std::vector<double>{0.1, 0.9})), (GPDParams{0.4, 2.0}));
  const ConditionalModel b = ConditionalModel::binary_smooth(2);
  EXPECT_EQ(std::get<StepCDF>(b.true_cdf(std::vector<double>{0.0, 0.3})), StepCDF({0.0, 1.0}, {0.5, 1.0}));
  EXPECT_NEAR(b.upper_probability(std::vector<double>{0.5, 0.5}), 0.9, 1e-15);
  EXPECT_THROW(b.true_cdf(std::vector<double>{0.5, 1.1}), Error);
  EXPECT_THROW(ConditionalModel::binary_smooth(1, 1.0, 0.7, 0.4), Error);
  EXPECT_THROW(ConditionalModel::gpd_linear(1, 0.9, 0.2, 1.0, 0.0), Error);
}

TEST(Model, PresetParameterRanges) {
  for (std::size_t d : {1u, 2u, 5u}) {
    const ConditionalModel m = ConditionalModel::gpd_linear(d);
    const GPDParams lo = m.gpd_at(std::vector<double>(d, 0.0));
    const GPDParams hi = m.gpd_at(std::vector<double>(d, 1.0));
    EXPECT_NEAR(lo.xi, 0.3, 1e-15);
    EXPECT_NEAR(hi.xi, 0.5, 1e-15);
    EXPECT_NEAR(lo.sigma, 1.0, 1e-15);
    EXPECT_NEAR(hi.sigma, 1.5, 1e-15);
    // Dispersion sigma / ((1 - xi)(2 - xi)) peaks at the far corner: 1.5 / (0.5 * 1.5) = 2.
    EXPECT_NEAR(m.class_params().M, 2.0, 1e-12);
  }
  const ClassParams b = ConditionalModel::binary_smooth(2).class_params();
  EXPECT_NEAR(b.C, 0.4 * std::numbers::pi, 1e-15);
  EXPECT_EQ(b.M, 0.25);
  EXPECT_EQ(b.h, 1.0);
}

void check_holder_certificate(const ConditionalModel& m, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0), step(-0.3, 0.3);
  const ClassParams cp = m.class_params();
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> x(m.dim()), y(m.dim());
    double dist2 = 0.0;
    for (std::size_t j = 0; j < m.dim(); ++j) {
      x[j] = u(rng);
      // Half the pairs are close, where the linearisation is tightest.
      y[j] = i % 2 ? u(rng) : std::clamp(x[j] + 0.01 * step(rng), 0.0, 1.0);
      dist2 += (x[j] - y[j]) * (x[j] - y[j]);
    }
    const double lhs = l2_cdf_distance_sq(m.true_cdf(x), m.true_cdf(y));
    EXPECT_LE(lhs, cp.C * cp.C * std::pow(dist2, cp.h) * (1.0 + 1e-9) + 1e-14) << m.describe();
  }
}

TEST(Model, HolderCertificates) {
  for (std::size_t d : {1u, 2u, 3u}) check_holder_certificate(ConditionalModel::binary_smooth(d), d);
  for (std::size_t d : {1u, 2u}) check_holder_certificate(ConditionalModel::gpd_linear(d), 10 + d);
  check_holder_certificate(ConditionalModel::gpd_linear(1, 0.6, -0.3, 2.0, -1.0), 20);
}

TEST(Model, DispersionBoundHolds) {
  for (const ConditionalModel& m : {ConditionalModel::gpd_linear(2), ConditionalModel::binary_smooth(2)}) {
    Rng rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
      const std::vector<double> x{u(rng), u(rng)};
      EXPECT_LE(dispersion_integral(m.true_cdf(x)), m.class_params().M * (1.0 + 1e-9));
    }
  }
}

TEST(Harness, ConstantModelAllNeighbors) {
  // k = n: E[(p^ - p)^2] L = p (1 - p) L / n.
  const double p = 0.3, L = 2.0;
  for (std::size_t n : {20u, 80u}) {
    ExperimentConfig cfg = small_config(ConditionalModel::binary_smooth(1, L, p, 0.0), Method::kKnn, {n});
    cfg.tuning = {false, static_cast<double>(n)};
    cfg.replications = 400;
    cfg.test_points = 4;
    const RiskEstimate e = excess_risk_mc(cfg, n);
    EXPECT_LT(std::abs(e.mean - p * (1 - p) * L / n), 3.0 * e.standard_error) << n;
  }
}

TEST(Harness, BinaryPointwiseIdentity) {
  const ConditionalModel m = ConditionalModel::binary_smooth(2, 1.5);
  for (Method method : {Method::kKnn, Method::kKernel}) {
    ExperimentConfig cfg = small_config(m, method, {200});
    Rng rng(8);
    const TrainingSet data = sample_training(m, 200, rng);
    const NeighborSearch search(data);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
      const std::vector<double> x{u(rng), u(rng)};
      const StepCDF fit = method == Method::kKnn
                              ? knn_predict(search, data, x, {optimal_k(200, m.class_params()), 5})
                              : kernel_predict(data, x, {optimal_bandwidth(200, m.class_params())});
      const double mn = 1.0 - fit(0.0);
      const double diff = mn - m.upper_probability(x);
      EXPECT_NEAR(pointwise_excess_risk(cfg, data, search, x, 5), 1.5 * diff * diff, 1e-10);
    }
  }
}

TEST(Harness, GpdModelRuns) {
  ExperimentConfig cfg = small_config(ConditionalModel::gpd_linear(1), Method::kKnn, {64, 128, 256});
  cfg.replications = 4;
  cfg.test_points = 4;
  const auto estimates = run_sweep(cfg);
  ASSERT_EQ(estimates.size(), 3u);
  for (const auto& e : estimates) {
    EXPECT_GT(e.mean, 0.0);
    EXPECT_TRUE(std::isfinite(e.bound));
  }
}

TEST(Harness, BoundCheckPasses) {
  for (std::size_t d : {1u, 2u}) {
    for (Method method : {Method::kKnn, Method::kKernel}) {
      const ExperimentConfig cfg = small_config(ConditionalModel::binary_smooth(d), method, {512});
      const BoundCheck check = bound_check(cfg, 512);
      EXPECT_TRUE(check.pass) << d << ' ' << to_string(method);
      EXPECT_EQ(check.bound, risk_bound(cfg, 512));
    }
  }
  ExperimentConfig all = small_config(ConditionalModel::binary_smooth(2), Method::kKnn, {512});
  all.tuning = {false, 512.0};
  EXPECT_TRUE(bound_check(all, 512).pass);
  EXPECT_EQ(risk_bound(all, 512), upper_bound_knn(512, 512, all.model.class_params()));
}

TEST(Harness, DeterministicAcrossThreads) {
  ExperimentConfig cfg = small_config(ConditionalModel::binary_smooth(2), Method::kKnn, {64, 128, 256});
  const auto serial = run_sweep(cfg);
  cfg.threads = 4;
  const auto parallel = run_sweep(cfg);
  ASSERT_EQ(serial.size(), parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    EXPECT_EQ(serial[i].replications, parallel[i].replications);
    EXPECT_EQ(serial[i].mean, parallel[i].mean);
    EXPECT_EQ(serial[i].standard_error, parallel[i].standard_error);
  }
  // Estimates at one n do not depend on which other sizes are swept.
  cfg.sample_sizes = {128};
  EXPECT_EQ(run_sweep(cfg)[0].replications, serial[1].replications);
  cfg.master_seed = 124;
  EXPECT_NE(run_sweep(cfg)[0].replications, serial[1].replications);
}

TEST(Harness, MedianDecaysWithN) {
  for (Method method : {Method::kKnn, Method::kKernel}) {
    std::vector<std::vector<double>> per_n(3);
    for (std::uint64_t seed = 0; seed < 9; ++seed) {
      ExperimentConfig cfg = small_config(ConditionalModel::binary_smooth(1), method, {128, 1024, 8192});
      cfg.master_seed = seed;
      cfg.replications = 5;
      const auto est = run_sweep(cfg);
      for (std::size_t i = 0; i < 3; ++i) per_n[i].push_back(est[i].mean);
    }
    std::vector<double> med;
    for (auto& v : per_n) {
      std::nth_element(v.begin(), v.begin() + 4, v.end());
      med.push_back(v[4]);
    }
    EXPECT_GE(med[0], med[1]);
    EXPECT_GE(med[1], med[2]);
  }
}

TEST(Harness, Validation) {
  ExperimentConfig cfg = small_config(ConditionalModel::binary_smooth(1), Method::kKnn, {128, 64});
  EXPECT_THROW(validate(cfg), Error);
  cfg.sample_sizes = {};
  EXPECT_THROW(validate(cfg), Error);
  cfg.sample_sizes = {64, 128};
  cfg.replications = 0;
  EXPECT_THROW(validate(cfg), Error);
  cfg.replications = 1;
  cfg.tuning = {false, 100.0};
  EXPECT_THROW(validate(cfg), Error);
  cfg.tuning = {false, 2.5};
  EXPECT_THROW(validate(cfg), Error);
}

TEST(Harness, TargetSlopes) {
  const auto slope = [](std::size_t d, Method m) {
    return target_slope(small_config(ConditionalModel::binary_smooth(d), m, {1, 2, 3}));
  };
  EXPECT_NEAR(slope(1, Method::kKnn), -0.5, 1e-15);
  EXPECT_NEAR(slope(2, Method::kKnn), -0.5, 1e-15);
  EXPECT_NEAR(slope(1, Method::kKernel), -2.0 / 3.0, 1e-15);
  EXPECT_NEAR(slope(2, Method::kKernel), -0.5, 1e-15);
  EXPECT_NEAR(slope(3, Method::kKnn), -0.4, 1e-15);
}

TEST(RateFit, ExactPowerLaw) {
  const std::vector<double> ns{100, 200, 400, 800};
  std::vector<double> means;
  for (double n : ns) means.push_back(5.0 * std::pow(n, -0.5));
  const RateFit fit = fit_rate(ns, means);
  EXPECT_NEAR(fit.slope, -0.5, 1e-12);
  EXPECT_NEAR(fit.intercept, std::log(5.0), 1e-12);
  EXPECT_NEAR(fit.r_squared, 1.0, 1e-12);
  EXPECT_FALSE(fit.slope_se.has_value());
}

TEST(RateFit, NoisyPowerLaw) {
  Rng rng(4);
  std::normal_distribution<double> noise(0.0, 0.01);
  std::vector<double> ns, means;
  for (int e = 7; e <= 13; ++e) {
    const double n = std::ldexp(1.0, e);
    ns.push_back(n);
    means.push_back(0.7 * std::pow(n, -2.0 / 3.0) * (1.0 + noise(rng)));
  }
  EXPECT_NEAR(fit_rate(ns, means).slope, -2.0 / 3.0, 0.02);
}

TEST(RateFit, ConstantAndErrors) {
  const std::vector<double> ns{10, 20, 40}, flat{0.3, 0.3, 0.3};
  EXPECT_NEAR(fit_rate(ns, flat).slope, 0.0, 1e-14);
  const std::vector<double> bad{0.3, 0.0, 0.1};
  try {
    fit_rate(ns, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("cannot take log"), std::string::npos);
  }
  const std::vector<double> two_n{10, 20}, two{0.2, 0.1};
  EXPECT_THROW(fit_rate(two_n, two), Error);
}

TEST(RateFit, BootstrapStandardError) {
  ExperimentConfig cfg = small_config(ConditionalModel::binary_smooth(1), Method::kKnn, {64, 128, 256, 512});
  const auto est = run_sweep(cfg);
  const RateFit fit = fit_rate(est, 9);
  ASSERT_TRUE(fit.slope_se.has_value());
  EXPECT_GT(*fit.slope_se, 0.0);
  EXPECT_EQ(fit_rate(est, 9).slope_se, fit.slope_se);
  EXPECT_EQ(fit.ns, (std::vector<std::size_t>{64, 128, 256, 512}));

  cfg.replications = 1;
  const RateFit single = fit_rate(run_sweep(cfg), 9);
  EXPECT_FALSE(single.slope_se.has_value());
  EXPECT_TRUE(std::isfinite(single.slope));
}

TEST(PairwiseSum, MatchesExactSums) {
  std::vector<double> v(1000, 0.1);
  EXPECT_NEAR(pairwise_sum(v), 100.0, 1e-12);
  EXPECT_EQ(pairwise_sum(std::vector<double>{}), 0.0);
  EXPECT_EQ(pairwise_sum(std::vector<double>{1.0, 2.0, 3.0}), 6.0);
}

}  // namespace
}  // namespace crpsreg
