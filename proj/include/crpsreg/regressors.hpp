#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "crpsreg/distributions.hpp"

namespace crpsreg {

/// n observations (X_i, Y_i) with X_i in [0,1]^d, stored row-major.
class TrainingSet {
 public:
  TrainingSet(std::size_t dim, std::vector<double> xs, std::vector<double> ys);

  std::size_t size() const { return ys_.size(); }
  std::size_t dim() const { return dim_; }
  std::span<const double> x(std::size_t i) const { return {xs_.data() + i * dim_, dim_}; }
  double y(std::size_t i) const { return ys_[i]; }
  std::span<const double> xs() const { return xs_; }
  std::span<const double> ys() const { return ys_; }

 private:
  std::size_t dim_;
  std::vector<double> xs_;
  std::vector<double> ys_;
};

/// Throws unless every coordinate of `x` lies in [0, 1] and x has `dim` entries.
void require_in_unit_cube(std::span<const double> x, std::size_t dim);

/// Parameters (h, C, M) of the Hölder class together with the dimension d.
struct ClassParams {
  double h = 1.0;
  double C = 1.0;
  double M = 1.0;
  std::size_t d = 1;
};

void validate(const ClassParams& cp);

struct KnnConfig {
  std::size_t k = 1;
  std::uint64_t tie_seed = 0;
};

struct KernelConfig {
  double bandwidth = 1.0;
};

/// Training sets above this size get the grid index in NeighborSearch.
inline constexpr std::size_t kGridIndexThreshold = 100000;

/// Exact k-nearest-neighbour search under the Euclidean norm.
///
/// Neighbours strictly closer than the k-th distance are always selected.
/// Points tied at the k-th distance fill the remaining slots by a seeded
/// uniform draw over the tied indices (taken in increasing index order), so
/// the result depends only on (data, x, k, tie_seed), not on the search path.
class NeighborSearch {
 public:
  explicit NeighborSearch(const TrainingSet& data,
                          std::size_t grid_threshold = kGridIndexThreshold);

  std::vector<std::size_t> find(std::span<const double> x, const KnnConfig& cfg) const;

  bool uses_grid() const { return cells_per_axis_ > 0; }

 private:
  std::vector<std::size_t> find_linear(std::span<const double> x, const KnnConfig& cfg) const;
  std::vector<std::size_t> find_grid(std::span<const double> x, const KnnConfig& cfg) const;

  const TrainingSet* data_;
  std::size_t cells_per_axis_ = 0;
  std::vector<std::vector<std::size_t>> buckets_;
};

/// Empirical distribution of the outcomes at the k nearest neighbours of x.
StepCDF knn_predict(const TrainingSet& data, std::span<const double> x, const KnnConfig& cfg);
StepCDF knn_predict(const NeighborSearch& search, const TrainingSet& data,
                    std::span<const double> x, const KnnConfig& cfg);

/// Empirical distribution of the outcomes whose covariates lie in the closed
/// ball of radius `bandwidth` around x; the full-sample empirical
/// distribution when that ball is empty.
StepCDF kernel_predict(const TrainingSet& data, std::span<const double> x, const KernelConfig& cfg);

double unit_ball_volume(int d);

/// c_d = 2^(3 + 2/d) (1 + sqrt d)^2 / V_d^(2/d), defined for d >= 2.
double knn_constant_cd(int d);

/// c~_d = d^(d/2).
double kernel_constant(int d);

/// Non-asymptotic excess-risk bound of the k-NN estimator on the class.
double upper_bound_knn(std::size_t n, std::size_t k, const ClassParams& cp);
/// Same expression for a real k > 0.
double upper_bound_knn_real(std::size_t n, double k, const ClassParams& cp);

/// Unrounded minimiser of upper_bound_knn over k.
double optimal_k_real(std::size_t n, const ClassParams& cp);

/// optimal_k_real rounded to the nearest integer and clamped to [1, n].
std::size_t optimal_k(std::size_t n, const ClassParams& cp);

/// Value B with upper_bound_knn(n, optimal_k_real(n)) = B n^(-rate).
double knn_rate_constant(const ClassParams& cp);

/// Exponent of the k-NN rate: h/(h+1) for d = 1, 2h/(2h+d) otherwise.
double knn_rate_exponent(const ClassParams& cp);

/// Non-asymptotic excess-risk bound of the uniform-kernel estimator.
double upper_bound_kernel(std::size_t n, double bandwidth, const ClassParams& cp);

/// Published bandwidth rule
/// (c~_d d (M + C d^(h/2) + M/n) / (2 h C^2))^(1/(2h+d)) n^(-1/(2h+d)).
double optimal_bandwidth(std::size_t n, const ClassParams& cp);

/// Exact minimiser of upper_bound_kernel over the bandwidth; the published
/// rule with 2M in place of M.
double kernel_bound_argmin(std::size_t n, const ClassParams& cp);

/// Value B with upper_bound_kernel(n, kernel_bound_argmin(n)) = B n^(-2h/(2h+d)).
double kernel_rate_constant(std::size_t n, const ClassParams& cp);

/// Minimax exponent 2h/(2h+d).
double minimax_rate_exponent(const ClassParams& cp);

}  // namespace crpsreg
