#pragma once

// Monte Carlo summaries, weighted least squares and a fixed-order parallel map.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace brownlab {

/// Monte Carlo mean with its standard error and the discretization used.
struct MCEstimate {
  double mean = 0.0;
  double std_error = 0.0;  ///< sample std / sqrt(replicas); infinite when replicas < 2
  std::size_t replicas = 0;
  double dt = 0.0;
  double h = 0.0;
  std::uint64_t seed = 0;
  double sample_std = 0.0;
};

/// Summarizes samples in index order, so the floating point sum is
/// independent of how the samples were produced.
MCEstimate summarize(std::span<const double> samples);

/// |a - b| / sqrt(se_a^2 + se_b^2).
double z_score(double a, double se_a, double b, double se_b);

/// Weighted least squares y ~ X beta with weights 1/sigma^2.
struct LinearFit {
  std::vector<double> coef;
  std::vector<double> coef_se;
  double chi2 = 0.0;     ///< weighted residual sum of squares
  std::size_t dof = 0;   ///< points - coefficients
  double condition = 0.0;  ///< condition number of the weighted design
};

/// `design` is row-major, rows = y.size(). Throws std::invalid_argument for a
/// rank-deficient or ill-conditioned design (condition above `max_condition`).
LinearFit weighted_least_squares(std::span<const double> design, std::size_t columns,
                                 std::span<const double> y, std::span<const double> sigma,
                                 double max_condition = 1e12);

/// Runs fn(i) for i in [0, n) on `threads` workers. Each index runs exactly
/// once; callers write results into slot i, so output order never depends on
/// scheduling. The first exception thrown by any task is rethrown.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace brownlab
