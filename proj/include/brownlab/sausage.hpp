#pragma once

// Expected heat content of R^m minus a Brownian path, estimated as the mean
// volume of the sumset W(s,t) = beta1[0,s] + beta2[0,t] of two independent
// rasterized paths.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "brownlab/geometry.hpp"
#include "brownlab/stats.hpp"
#include "brownlab/stochastic.hpp"

namespace brownlab {

struct SumsetOptions {
  /// Bounding boxes up to this many cells use a dense bitmap; larger ones a
  /// hash set.
  std::size_t dense_cell_limit = std::size_t{1} << 31;
  /// Largest sumset (in cells) the hash fallback may build.
  std::size_t max_cells = std::size_t{1} << 28;
};

/// h^m |{u + v : u in a, v in b}| for free-space voxel sets at a common h.
/// Exactly symmetric in (a, b). Throws std::invalid_argument for periodic
/// inputs or mismatched m/h, ResourceError past the cell budget.
double sumset_volume(const VoxelSet& a, const VoxelSet& b, const SumsetOptions& options = {});

/// Free-space raster of a streamed walk: distinct voxels in first-visit order
/// and the number of distinct voxels after each requested step count.
struct OrderedRaster {
  int m = 0;
  double h = 0.0;
  std::vector<std::int32_t> cells;
  std::vector<std::size_t> counts;  ///< one per checkpoint
};

/// Samples a walk of max(checkpoints) steps (increments N(0, 2 dt)) from the
/// origin and rasterizes it on the fly. checkpoints must be nondecreasing.
OrderedRaster raster_walk(int m, double dt, double h, std::span<const std::size_t> checkpoints,
                          RngStream& rng);

/// Sumset cell counts of prefixes of `ordered` (first counts[k] cells) with
/// the fixed set `cells`, for every checkpoint k.
std::vector<std::size_t> sumset_profile(const OrderedRaster& ordered, std::span<const std::int32_t> cells,
                                        const SumsetOptions& options = {});

struct HeatContentOptions {
  std::uint64_t seed = 1;
  /// Separates independent estimates that share a seed.
  std::uint64_t purpose = purpose_tag("heat-content");
  unsigned threads = 1;
  SumsetOptions sumset;
};

/// Monte Carlo E(s,t) = E|W(s,t)| over independent replicas. Both paths use
/// step dt and voxel size h. Nontrivial for m in {2,3}; other m are accepted
/// (path capacity vanishes for m >= 4, so the estimate tends to zero).
MCEstimate estimate_heat_content(int m, double s, double t, std::size_t replicas, double dt, double h,
                                 const HeatContentOptions& options = {});

/// Discretization tied to the shorter horizon tau = min(s,t):
/// h = h_rel sqrt(tau) and sqrt(2 dt) = h/2. With it the estimator obeys
/// E(s,t) = (t/s)^{m/2} E(s, s^2/t) exactly, not only as h -> 0.
struct ScaledGrid {
  double h_rel = 0.1;
  double h(double s, double t) const;
  double dt(double s, double t) const;
};

/// E(s, t_k) for every t_k in t_grid from one pair of paths per replica:
/// by scaling, E(s,t) = t^{m/2} E(s/t, 1) at grid (h_rel, h_rel^2/8), so the
/// long path is shared through its prefixes and the short one is reused.
/// Points are positively correlated; their standard errors are marginal.
std::vector<MCEstimate> heat_content_small_t_curve(int m, double s, std::span<const double> t_grid,
                                                   std::size_t replicas, double h_rel,
                                                   const HeatContentOptions& options = {});

struct HeatContentFit {
  int m = 0;
  double s = 0.0;
  std::vector<double> t_grid;
  /// m = 3: coefficients of t^{1/2} and t. m = 2: extrapolated limit of
  /// E(s,t) log(1/t) / s, and the coefficient of its 1/log(1/t) correction.
  double c1 = 0.0, c1_se = 0.0;
  double c2 = 0.0, c2_se = 0.0;
  double chi2_per_dof = 0.0;
  bool accepted = false;  ///< residual diagnostic below the threshold
};

/// m = 3: weighted least squares of E(s,t) on (t^{1/2}, t, t^{3/2}).
/// m = 2: weighted fit E(s,t) log(1/t) / s = L + c / log(1/t).
/// Throws std::invalid_argument when the t grid spans less than a decade or
/// the basis is ill-conditioned.
HeatContentFit fit_small_t(int m, double s, std::span<const double> t_grid,
                           std::span<const MCEstimate> estimates, double max_chi2_per_dof = 4.0);

struct StrongLawRow {
  double t = 0.0;
  double mean = 0.0;           ///< mean conditional heat content over beta1
  double between_std = 0.0;    ///< raw std of conditional estimates
  double path_std = 0.0;       ///< between_std with inner Monte Carlo noise removed
  double relative_std = 0.0;   ///< path_std / mean
  double h = 0.0, dt = 0.0;
};

/// For each outer path beta1[0,s], estimates E_{beta1[0,s]}(t) by averaging
/// over `inner` paths beta2[0,t], on a grid scaled with t (ScaledGrid).
std::vector<StrongLawRow> strong_law_check(int m, double s, std::span<const double> t_grid,
                                           std::size_t outer, std::size_t inner, double h_rel,
                                           const HeatContentOptions& options = {});

}  // namespace brownlab
