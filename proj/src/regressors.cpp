#include "crpsreg/regressors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "crpsreg/error.hpp"
#include "crpsreg/rng.hpp"

namespace crpsreg {

TrainingSet::TrainingSet(std::size_t dim, std::vector<double> xs, std::vector<double> ys)
    : dim_(dim), xs_(std::move(xs)), ys_(std::move(ys)) {
  if (dim_ == 0) throw Error("covariate dimension must be at least 1");
  if (ys_.empty()) throw Error("empty training set");
  if (xs_.size() != ys_.size() * dim_)
    throw Error("covariates and outcomes differ in length");
  for (std::size_t i = 0; i < ys_.size(); ++i) {
    require_in_unit_cube(x(i), dim_);
    if (!std::isfinite(ys_[i])) throw Error("outcomes must be finite");
  }
}

void require_in_unit_cube(std::span<const double> x, std::size_t dim) {
  if (x.size() != dim)
    throw Error("expected " + std::to_string(dim) + " covariates, got " + std::to_string(x.size()));
  for (double v : x)
    if (!(v >= 0.0 && v <= 1.0)) throw Error("covariate outside [0, 1]");
}

void validate(const ClassParams& cp) {
  if (!(cp.h > 0.0 && cp.h <= 1.0)) throw Error("Hölder exponent h must lie in (0, 1]");
  if (!(cp.C > 0.0) || !std::isfinite(cp.C)) throw Error("Hölder constant C must be positive");
  if (!(cp.M > 0.0) || !std::isfinite(cp.M)) throw Error("dispersion bound M must be positive");
  if (cp.d < 1) throw Error("dimension d must be at least 1");
}

// --- nearest neighbours ----------------------------------------------------

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double t = a[j] - b[j];
    s += t * t;
  }
  return s;
}

struct Candidate {
  double d2;
  std::size_t index;
};

// Selects k of the candidates: everything below the k-th smallest distance,
// then a seeded uniform subset of the ties at that distance.
std::vector<std::size_t> select_k(std::vector<Candidate> cands, std::size_t k,
                                  std::uint64_t tie_seed) {
  const auto kth = cands.begin() + static_cast<std::ptrdiff_t>(k - 1);
  std::nth_element(cands.begin(), kth, cands.end(),
                   [](const Candidate& a, const Candidate& b) { return a.d2 < b.d2; });
  const double cutoff = kth->d2;

  std::vector<std::size_t> chosen;
  std::vector<std::size_t> tied;
  chosen.reserve(k);
  for (const Candidate& c : cands) {
    if (c.d2 < cutoff) chosen.push_back(c.index);
    else if (c.d2 == cutoff) tied.push_back(c.index);
  }
  const std::size_t slots = k - chosen.size();
  if (tied.size() > slots) {
    std::sort(tied.begin(), tied.end());
    Rng rng(tie_seed);
    // Partial Fisher-Yates: the first `slots` entries become a uniform subset.
    for (std::size_t i = 0; i < slots; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, tied.size() - 1);
      std::swap(tied[i], tied[pick(rng)]);
    }
    tied.resize(slots);
  }
  chosen.insert(chosen.end(), tied.begin(), tied.end());
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

std::size_t cell_of(double v, std::size_t g) {
  const auto c = static_cast<std::size_t>(v * static_cast<double>(g));
  return std::min(c, g - 1);
}

}  // namespace

NeighborSearch::NeighborSearch(const TrainingSet& data, std::size_t grid_threshold)
    : data_(&data) {
  if (data.size() <= grid_threshold) return;
  const std::size_t d = data.dim();
  // About four points per cell, and at most 2^22 cells.
  double g = std::floor(std::pow(static_cast<double>(data.size()) / 4.0, 1.0 / static_cast<double>(d)));
  g = std::min(g, std::floor(std::pow(4194304.0, 1.0 / static_cast<double>(d))));
  if (g < 2.0) return;
  cells_per_axis_ = static_cast<std::size_t>(g);
  std::size_t total = 1;
  for (std::size_t j = 0; j < d; ++j) total *= cells_per_axis_;
  buckets_.resize(total);
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::size_t flat = 0;
    for (double v : data.x(i)) flat = flat * cells_per_axis_ + cell_of(v, cells_per_axis_);
    buckets_[flat].push_back(i);
  }
}

std::vector<std::size_t> NeighborSearch::find(std::span<const double> x,
                                              const KnnConfig& cfg) const {
  require_in_unit_cube(x, data_->dim());
  if (cfg.k < 1) throw Error("k must be at least 1");
  if (cfg.k > data_->size()) throw Error("k exceeds sample size");
  return uses_grid() ? find_grid(x, cfg) : find_linear(x, cfg);
}

std::vector<std::size_t> NeighborSearch::find_linear(std::span<const double> x,
                                                     const KnnConfig& cfg) const {
  std::vector<Candidate> cands(data_->size());
  for (std::size_t i = 0; i < cands.size(); ++i)
    cands[i] = {squared_distance(x, data_->x(i)), i};
  return select_k(std::move(cands), cfg.k, cfg.tie_seed);
}

std::vector<std::size_t> NeighborSearch::find_grid(std::span<const double> x,
                                                   const KnnConfig& cfg) const {
  const std::size_t d = data_->dim();
  const std::size_t g = cells_per_axis_;
  const double w = 1.0 / static_cast<double>(g);
  std::vector<std::size_t> home(d);
  for (std::size_t j = 0; j < d; ++j) home[j] = cell_of(x[j], g);

  std::vector<Candidate> cands;
  std::vector<double> d2s;
  std::vector<std::size_t> lo(d), hi(d), cell(d);
  for (std::size_t r = 0; r < g; ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      lo[j] = home[j] >= r ? home[j] - r : 0;
      hi[j] = std::min(home[j] + r, g - 1);
    }
    // Visit cells of the block whose Chebyshev distance to home is exactly r.
    cell = lo;
    for (bool more = true; more;) {
      std::size_t cheb = 0;
      std::size_t flat = 0;
      for (std::size_t j = 0; j < d; ++j) {
        const std::size_t off = cell[j] > home[j] ? cell[j] - home[j] : home[j] - cell[j];
        cheb = std::max(cheb, off);
        flat = flat * g + cell[j];
      }
      if (cheb == r)
        for (std::size_t i : buckets_[flat]) cands.push_back({squared_distance(x, data_->x(i)), i});
      more = false;
      for (std::size_t j = d; j-- > 0;) {
        if (cell[j] < hi[j]) {
          ++cell[j];
          more = true;
          break;
        }
        cell[j] = lo[j];
      }
    }

    if (cands.size() < cfg.k) continue;
    // Unvisited points lie outside the block [lo, hi + 1) w; where the block
    // stops short of the cube boundary they are at least this far from x.
    double safe = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < d; ++j) {
      if (lo[j] > 0) safe = std::min(safe, x[j] - static_cast<double>(lo[j]) * w);
      if (hi[j] + 1 < g) safe = std::min(safe, static_cast<double>(hi[j] + 1) * w - x[j]);
    }
    if (std::isinf(safe)) break;
    safe -= 1e-12;  // cell assignment rounds v * g
    d2s.resize(cands.size());
    std::transform(cands.begin(), cands.end(), d2s.begin(), [](const Candidate& c) { return c.d2; });
    std::nth_element(d2s.begin(), d2s.begin() + static_cast<std::ptrdiff_t>(cfg.k - 1), d2s.end());
    if (d2s[cfg.k - 1] < safe * safe) break;
  }
  return select_k(std::move(cands), cfg.k, cfg.tie_seed);
}

StepCDF knn_predict(const NeighborSearch& search, const TrainingSet& data,
                    std::span<const double> x, const KnnConfig& cfg) {
  const std::vector<std::size_t> idx = search.find(x, cfg);
  std::vector<double> values(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) values[i] = data.y(idx[i]);
  return StepCDF::from_sample(values);
}

StepCDF knn_predict(const TrainingSet& data, std::span<const double> x, const KnnConfig& cfg) {
  const NeighborSearch search(data, std::numeric_limits<std::size_t>::max());
  return knn_predict(search, data, x, cfg);
}

StepCDF kernel_predict(const TrainingSet& data, std::span<const double> x,
                       const KernelConfig& cfg) {
  require_in_unit_cube(x, data.dim());
  if (!(cfg.bandwidth > 0.0)) throw Error("bandwidth must be positive");
  const double r2 = cfg.bandwidth * cfg.bandwidth;
  std::vector<double> values;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (squared_distance(x, data.x(i)) <= r2) values.push_back(data.y(i));
  if (values.empty()) return StepCDF::from_sample(data.ys());
  return StepCDF::from_sample(values);
}

// --- constants and bounds --------------------------------------------------

double unit_ball_volume(int d) {
  if (d < 1) throw Error("dimension d must be at least 1");
  const double half = 0.5 * d;
  return std::exp(half * std::log(std::numbers::pi) - std::lgamma(half + 1.0));
}

double knn_constant_cd(int d) {
  if (d < 2) throw Error("c_d defined for d >= 2");
  const double dd = d;
  const double root = 1.0 + std::sqrt(dd);
  return std::pow(2.0, 3.0 + 2.0 / dd) * root * root / std::pow(unit_ball_volume(d), 2.0 / dd);
}

double kernel_constant(int d) {
  if (d < 1) throw Error("dimension d must be at least 1");
  return std::pow(static_cast<double>(d), 0.5 * d);
}

namespace {

// Bias coefficient a and exponent e of the k-NN bound a (k/n)^e + M/k.
std::pair<double, double> knn_bias_terms(const ClassParams& cp) {
  validate(cp);
  const double c2 = cp.C * cp.C;
  if (cp.d == 1) return {std::pow(8.0, cp.h) * c2, cp.h};
  const int d = static_cast<int>(cp.d);
  return {std::pow(knn_constant_cd(d), cp.h) * c2, 2.0 * cp.h / cp.d};
}

double kernel_numerator(std::size_t n, const ClassParams& cp, double m_coef) {
  const double d = static_cast<double>(cp.d);
  return kernel_constant(static_cast<int>(cp.d)) *
         (m_coef * cp.M + cp.C * std::pow(d, cp.h / 2.0) + cp.M / static_cast<double>(n));
}

void require_sample_size(std::size_t n) {
  if (n < 1) throw Error("sample size n must be at least 1");
}

}  // namespace

double upper_bound_knn(std::size_t n, std::size_t k, const ClassParams& cp) {
  require_sample_size(n);
  if (k < 1 || k > n) throw Error("k must lie in [1, n]");
  return upper_bound_knn_real(n, static_cast<double>(k), cp);
}

double upper_bound_knn_real(std::size_t n, double k, const ClassParams& cp) {
  require_sample_size(n);
  if (!(k > 0.0)) throw Error("k must be positive");
  const auto [a, e] = knn_bias_terms(cp);
  return a * std::pow(k / static_cast<double>(n), e) + cp.M / k;
}

double optimal_k_real(std::size_t n, const ClassParams& cp) {
  require_sample_size(n);
  validate(cp);
  const double nn = static_cast<double>(n);
  const double c2 = cp.C * cp.C;
  if (cp.d == 1)
    return std::pow(cp.M / (cp.h * c2 * std::pow(8.0, cp.h)), 1.0 / (cp.h + 1.0)) *
           std::pow(nn, cp.h / (cp.h + 1.0));
  const double d = static_cast<double>(cp.d);
  const double cd = knn_constant_cd(static_cast<int>(cp.d));
  return std::pow(cp.M * d / (2.0 * cp.h * c2 * std::pow(cd, cp.h)), d / (2.0 * cp.h + d)) *
         std::pow(nn, 2.0 * cp.h / (2.0 * cp.h + d));
}

std::size_t optimal_k(std::size_t n, const ClassParams& cp) {
  const double k = std::round(optimal_k_real(n, cp));
  return static_cast<std::size_t>(std::clamp(k, 1.0, static_cast<double>(n)));
}

double knn_rate_exponent(const ClassParams& cp) {
  validate(cp);
  if (cp.d == 1) return cp.h / (cp.h + 1.0);
  return minimax_rate_exponent(cp);
}

double knn_rate_constant(const ClassParams& cp) {
  const auto [a, e] = knn_bias_terms(cp);
  // min over k of a k^e n^-e + M/k, written as B n^-(e/(1+e)).
  const double s = e / (1.0 + e);
  return std::pow(a, 1.0 - s) * std::pow(cp.M, s) *
         (std::pow(1.0 / e, s) + std::pow(e, 1.0 - s));
}

double upper_bound_kernel(std::size_t n, double bandwidth, const ClassParams& cp) {
  require_sample_size(n);
  validate(cp);
  if (!(bandwidth > 0.0)) throw Error("bandwidth must be positive");
  const double d = static_cast<double>(cp.d);
  return kernel_numerator(n, cp, 2.0) / (static_cast<double>(n) * std::pow(bandwidth, d)) +
         cp.C * cp.C * std::pow(bandwidth, 2.0 * cp.h);
}

namespace {
double bandwidth_rule(std::size_t n, const ClassParams& cp, double m_coef) {
  require_sample_size(n);
  validate(cp);
  const double d = static_cast<double>(cp.d);
  const double e = 1.0 / (2.0 * cp.h + d);
  return std::pow(d * kernel_numerator(n, cp, m_coef) / (2.0 * cp.h * cp.C * cp.C), e) *
         std::pow(static_cast<double>(n), -e);
}
}  // namespace

double optimal_bandwidth(std::size_t n, const ClassParams& cp) { return bandwidth_rule(n, cp, 1.0); }

double kernel_bound_argmin(std::size_t n, const ClassParams& cp) { return bandwidth_rule(n, cp, 2.0); }

double kernel_rate_constant(std::size_t n, const ClassParams& cp) {
  validate(cp);
  const double d = static_cast<double>(cp.d);
  const double s = 2.0 * cp.h / (2.0 * cp.h + d);
  const double ratio = d / (2.0 * cp.h);
  return std::pow(cp.C, 2.0 * d / (2.0 * cp.h + d)) * std::pow(kernel_numerator(n, cp, 2.0), s) *
         (std::pow(ratio, -d / (2.0 * cp.h + d)) + std::pow(ratio, s));
}

double minimax_rate_exponent(const ClassParams& cp) {
  validate(cp);
  return 2.0 * cp.h / (2.0 * cp.h + static_cast<double>(cp.d));
}

}  // namespace crpsreg
