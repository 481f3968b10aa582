#pragma once

// Voxel rasterization, exact periodic distance transforms, inradius and cover
// time of the unit torus cut by a path.
//
// Voxel i along an axis is centered at i*h and covers [(i-1/2)h, (i+1/2)h), so
// the origin is the center of voxel 0. On the torus h = 1/g and indices are
// taken modulo g.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "brownlab/stats.hpp"
#include "brownlab/stochastic.hpp"

namespace brownlab {

/// Index of the voxel containing coordinate x (unbounded lattice).
std::int64_t voxel_index(double x, double h);

/// Visits every voxel a straight segment from a to b passes through,
/// starting with a's voxel and ending with b's; consecutive voxels share a
/// face. Coordinates are in length units, cells are unbounded indices.
template <class Visit>
void for_each_segment_voxel(int m, const double* a, const double* b, double h, Visit&& visit);

/// A set of voxels, either on the periodic grid of the unit torus or on the
/// unbounded lattice of R^m.
struct VoxelSet {
  int m = 0;
  double h = 0.0;
  bool periodic = false;
  int g = 0;  ///< cells per axis when periodic, 0 otherwise
  /// Sorted, duplicate-free, m coordinates per cell.
  std::vector<std::int32_t> cells;

  std::size_t size() const { return m == 0 ? 0 : cells.size() / static_cast<std::size_t>(m); }
  bool empty() const { return cells.empty(); }
  std::span<const std::int32_t> cell(std::size_t i) const {
    return {cells.data() + i * static_cast<std::size_t>(m), static_cast<std::size_t>(m)};
  }
  bool contains(std::span<const std::int32_t> c) const;
};

/// Builds a set from arbitrary cell tuples; reduces periodic indices into
/// [0, g) and removes duplicates.
VoxelSet make_voxel_set(int m, double h, bool periodic, int g, std::vector<std::int32_t> flat_cells);

/// Periodic occupancy grid built incrementally from path samples; used for
/// rasterization and for prefix sweeps over a single trajectory.
class TorusRasterizer {
 public:
  TorusRasterizer(int m, int g);

  int m() const { return m_; }
  int g() const { return g_; }
  double h() const { return 1.0 / g_; }

  /// Marks the voxel of one point (unwrapped coordinates).
  void add_point(std::span<const double> p);
  /// Marks every voxel the segment a->b crosses (unwrapped coordinates).
  void add_segment(std::span<const double> a, std::span<const double> b);
  /// Adds points [from, to) of the path, with the segments joining each to its
  /// predecessor. from == 0 adds the start point alone.
  void add_path_range(const TorusPath& p, std::size_t from, std::size_t to);

  const std::vector<std::uint8_t>& mask() const { return mask_; }
  std::size_t occupied() const { return occupied_; }
  VoxelSet voxels() const;

 private:
  void mark(const std::int64_t* cell);

  int m_;
  int g_;
  std::vector<std::uint8_t> mask_;
  std::size_t occupied_ = 0;
};

/// Conservative supercover raster of the path on the g^m torus grid.
/// Throws std::invalid_argument for an empty path or g < 2.
VoxelSet rasterize(const TorusPath& p, int g);

/// Supercover raster of a free-space path at voxel size h (cells unbounded).
VoxelSet rasterize_free(const Path& p, double h);

/// Row-major flat index of a periodic cell, last coordinate fastest.
std::size_t flat_index(std::span<const std::int32_t> cell, int g);

/// Squared distances, in voxel units, from every voxel center of the torus grid
/// to the nearest obstacle voxel center.
struct DistanceField {
  int m = 0;
  int g = 0;
  std::vector<std::int64_t> d2;

  double h() const { return 1.0 / g; }
  double value(std::size_t flat) const;
  std::int64_t max_d2() const;
};

/// Length of a squared voxel-unit distance. Every comparison of a grid distance
/// against a radius goes through this one function, so the inradius and the
/// cover time agree exactly on the same grid.
double grid_length(std::int64_t d2, double h);

/// Exact Euclidean transform on the torus: one lower-envelope pass per axis on
/// a tripled copy of each line. Throws std::invalid_argument for an empty or
/// non-periodic obstacle.
DistanceField distance_field(const VoxelSet& obstacle);
DistanceField distance_field(std::span<const std::uint8_t> mask, int m, int g);

/// Largest distance from a voxel center to the obstacle.
double inradius(const DistanceField& f);

/// Quantization budget h*sqrt(m) reported next to every grid distance.
double quantization_bound(int m, double h);

struct CoverRecord {
  double epsilon = 0.0;
  double t_cover = std::numeric_limits<double>::infinity();
  std::size_t cover_step = 0;  ///< sample index at which coverage completed
  bool censored = true;        ///< path ended before coverage
  int g = 0;
};

/// First sample time at which every voxel center is within epsilon of a voxel
/// the path has rasterized into. Uncovered centers live in spatial buckets and
/// are removed as they get covered.
CoverRecord cover_time(const TorusPath& p, double epsilon, int g);

struct InradiusConfig {
  int g = 64;
  double dt = 0.0;  ///< 0 selects h^2/8, i.e. sqrt(2 dt) = h/2
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

struct InradiusRow {
  double s = 0.0;
  MCEstimate rho;
  double quantization = 0.0;
  /// (s/log s)^{1/(m-2)} E rho(s) for m >= 3; NaN otherwise.
  double leveled = std::numeric_limits<double>::quiet_NaN();
};

struct InradiusCurve {
  int m = 0;
  int g = 0;
  double dt = 0.0;
  std::vector<InradiusRow> rows;
  /// Per-replica inradius, rows x replicas, for CSV output.
  std::vector<std::vector<double>> samples;
  /// m >= 3: limit (m / ((m-2) kappa_m))^{1/(m-2)}.
  double theory_constant = std::numeric_limits<double>::quiet_NaN();
  /// m == 2: weighted slope of log E rho against sqrt(s), with its error.
  double slope = std::numeric_limits<double>::quiet_NaN();
  double slope_se = std::numeric_limits<double>::quiet_NaN();
};

/// Monte Carlo E rho(s) over one trajectory per replica, evaluated on its
/// prefixes at each s. s_list must be strictly increasing and positive.
InradiusCurve mean_inradius_curve(int m, std::span<const double> s_list, std::size_t replicas,
                                  const InradiusConfig& cfg);

/// Newtonian capacity of the unit ball in R^m, 4 pi^{m/2} / Gamma((m-2)/2).
double unit_ball_capacity(int m);

// ---------------------------------------------------------------------------

template <class Visit>
void for_each_segment_voxel(int m, const double* a, const double* b, double h, Visit&& visit) {
  constexpr int kMaxDim = 8;
  std::int64_t cell[kMaxDim];
  std::int64_t remaining[kMaxDim];
  int step[kMaxDim];
  double t_max[kMaxDim];
  double t_delta[kMaxDim];
  for (int k = 0; k < m; ++k) {
    cell[k] = voxel_index(a[k], h);
    const std::int64_t end = voxel_index(b[k], h);
    const double d = b[k] - a[k];
    remaining[k] = end > cell[k] ? end - cell[k] : cell[k] - end;
    step[k] = end > cell[k] ? 1 : -1;
    if (remaining[k] == 0 || d == 0.0) {
      t_max[k] = std::numeric_limits<double>::infinity();
      t_delta[k] = std::numeric_limits<double>::infinity();
    } else {
      const double boundary = (static_cast<double>(cell[k]) + 0.5 * step[k]) * h;
      t_max[k] = (boundary - a[k]) / d;
      t_delta[k] = h / (d > 0 ? d : -d);
    }
  }
  visit(static_cast<const std::int64_t*>(cell));
  for (;;) {
    int axis = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < m; ++k) {
      if (remaining[k] > 0 && (axis < 0 || t_max[k] < best)) {
        axis = k;
        best = t_max[k];
      }
    }
    if (axis < 0) break;
    cell[axis] += step[axis];
    --remaining[axis];
    t_max[axis] += t_delta[axis];
    visit(static_cast<const std::int64_t*>(cell));
  }
}

}  // namespace brownlab
