#pragma once

// Smallest Dirichlet eigenvalue of -Laplacian on the torus grid minus an
// obstacle, by block inverse iteration with conjugate-gradient solves.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "brownlab/geometry.hpp"
#include "brownlab/stochastic.hpp"

namespace brownlab {

/// (2m+1)-point finite-difference -Laplacian on the periodic g^m grid with
/// the rows and columns of obstacle voxels removed. Acts on vectors indexed
/// by free voxels in flat order.
class GridOperator {
 public:
  GridOperator(int m, int g, std::vector<std::uint8_t> obstacle);

  int m() const { return m_; }
  int g() const { return g_; }
  std::size_t size() const { return free_.size(); }
  std::size_t obstacle_cells() const { return total_ - free_.size(); }
  const std::vector<std::uint8_t>& obstacle() const { return obstacle_; }
  /// Flat grid index of each free unknown.
  const std::vector<std::uint32_t>& free_cells() const { return free_; }

  void apply(std::span<const double> x, std::span<double> y) const;

 private:
  int m_;
  int g_;
  std::size_t total_;
  std::vector<std::uint8_t> obstacle_;
  std::vector<std::uint32_t> free_;
  std::vector<std::int32_t> neighbours_;  ///< 2m per unknown; -1 for obstacle
};

struct SpectralOptions {
  double tol = 1e-6;           ///< relative residual |Av - lv| / (l |v|)
  std::size_t block = 4;
  std::size_t max_outer = 500;
  std::size_t max_inner = 0;   ///< CG iteration cap; 0 means 20 n
  std::uint64_t seed = 1;
};

struct SpectralResult {
  double lambda1 = 0.0;
  double residual = 0.0;   ///< |A v - lambda1 v| / |v|
  std::size_t iterations = 0;
  std::size_t inner_iterations = 0;
  int g = 0;
  bool empty_obstacle = false;  ///< no obstacle: lambda1 = 0, constant vector
  bool empty_domain = false;    ///< obstacle fills the grid: no eigenvalue
  std::vector<double> vector;   ///< unit eigenvector on the free unknowns
};

/// Throws ConvergenceError (with the last residual) when max_outer is reached.
SpectralResult smallest_eigenvalue(const GridOperator& op, const SpectralOptions& options = {});

/// Obstacle of voxels whose centers lie within torus distance eps of the origin.
std::vector<std::uint8_t> ball_obstacle(int m, int g, double eps);

/// Obstacle {x1 = 0}: the voxel layer with first index 0.
std::vector<std::uint8_t> slab_obstacle(int m, int g);

struct SmallBallRow {
  double eps = 0.0;
  double lambda1 = 0.0;
  double theory = 0.0;     ///< 2 pi / log(1/eps) for m = 2, kappa_m eps^{m-2} otherwise
  double relative_deviation = 0.0;
  double residual = 0.0;
  std::size_t voxels = 0;
  int g = 0;
};

/// Throws std::invalid_argument unless every eps lies in (h, 1/4).
std::vector<SmallBallRow> eigen_smallball_curve(int m, std::span<const double> eps_list, int g,
                                                const SpectralOptions& options = {});

struct ProbeConfig {
  int g = 32;
  double dt = 0.0;  ///< 0 selects h^2 / 8
  std::uint64_t seed = 1;
  unsigned threads = 1;
  SpectralOptions spectral;
};

struct ProbeRow {
  int m = 0;
  double s = 0.0;
  int g = 0;
  std::size_t replica = 0;
  double rho = 0.0;
  double lambda1 = 0.0;
  double residual = 0.0;
  std::uint64_t seed = 0;
  double ratio = 0.0;  ///< lambda1 rho^2 / pi^2
};

struct ProbeSummary {
  int m = 0;
  double s = 0.0;
  double mean_lambda1 = 0.0;
  double median_ratio = 0.0;
  double ratio_q1 = 0.0, ratio_q3 = 0.0;
  /// m = 3: (log s / s)^2 mean lambda1 against (2 pi)^4 / 9.
  /// m = 2: s^{-1/2} log(mean lambda1) against 2 sqrt(pi).
  double normalized = 0.0;
  double conjectured = 0.0;
};

struct ProbeTable {
  std::vector<ProbeRow> rows;  ///< ordered by (s, replica)
  std::vector<ProbeSummary> summary;
};

/// Per-trajectory pairs (rho(s), lambda1(s)) along shared path prefixes.
ProbeTable conjecture_probe(int m, std::span<const double> s_list, std::size_t replicas, const ProbeConfig& cfg);

}  // namespace brownlab
