#pragma once

// Newtonian capacity in R^3 by walk-on-spheres from a launch sphere, with
// hitting points from infinity as samples of the equilibrium measure.
// Capacity is normalized so that the unit ball has capacity 4 pi.

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <vector>

#include "brownlab/stats.hpp"
#include "brownlab/stochastic.hpp"

namespace brownlab {

using Vec3 = std::array<double, 3>;

/// Compact set in R^3 seen through a distance function.
class Obstacle {
 public:
  virtual ~Obstacle() = default;
  /// Lower bound on the distance from x to the set. Exact whenever the
  /// returned value is below resolution().
  virtual double distance(const Vec3& x) const = 0;
  /// Distances below this are always exact.
  virtual double resolution() const { return std::numeric_limits<double>::infinity(); }
  /// Center and radius of a ball containing the set.
  virtual Vec3 center() const = 0;
  virtual double radius() const = 0;
};

class BallObstacle final : public Obstacle {
 public:
  BallObstacle(Vec3 center, double r);
  double distance(const Vec3& x) const override;
  Vec3 center() const override { return center_; }
  double radius() const override { return r_; }

 private:
  Vec3 center_;
  double r_;
};

/// Union of segments between consecutive points (or of the points alone when
/// `connected` is false). Distance queries go through a uniform cell index
/// with a precomputed distance-to-nearest-occupied-cell map.
class PolylineObstacle final : public Obstacle {
 public:
  PolylineObstacle(std::vector<Vec3> points, bool connected, double min_cell);
  double distance(const Vec3& x) const override;
  double resolution() const override { return cell_; }
  Vec3 center() const override { return center_; }
  double radius() const override { return radius_; }
  std::size_t size() const { return points_.size(); }

 private:
  double element_distance(std::size_t e, const Vec3& x) const;

  std::vector<Vec3> points_;
  bool connected_;
  Vec3 center_{};
  double radius_ = 0.0;
  double cell_ = 0.0;
  Vec3 origin_{};  ///< lower corner of the cell grid
  std::array<std::int64_t, 3> dims_{};
  std::vector<std::uint32_t> start_;     ///< CSR offsets per cell
  std::vector<std::uint32_t> elements_;  ///< element ids per cell
  std::vector<std::uint16_t> empty_ring_;  ///< Chebyshev distance to nearest occupied cell
  Vec3 box_lo_{}, box_hi_{};
};

/// Straight segment of the given length through the origin along x1.
std::unique_ptr<PolylineObstacle> make_segment(double length, double min_cell);

/// Path samples as a polyline.
std::unique_ptr<PolylineObstacle> make_path_obstacle(const Path& path, double min_cell);

struct CapacityConfig {
  double delta = 1e-3;          ///< hit when closer than this
  double launch_factor = 1.1;   ///< R_launch = launch_factor (radius + delta)
  double out_factor = 8.0;      ///< R_out = out_factor R_launch
  double step_fraction = 0.9;   ///< jump radius as a fraction of the distance
  std::size_t walkers = 100000;
  std::size_t max_steps = 1000000;  ///< walkers exceeding this count as escaped
  std::uint64_t seed = 1;
  std::uint64_t purpose = purpose_tag("capacity");
  unsigned threads = 1;
};

struct CapacityEstimate {
  double cap_mean = 0.0;
  double cap_se = 0.0;
  double p_hit = 0.0;
  std::size_t walkers = 0;
  std::size_t hits = 0;
  std::size_t starved = 0;  ///< walkers stopped by max_steps
  double delta = 0.0;
  double r_launch = 0.0;
  double r_out = 0.0;
  std::uint64_t seed = 0;
};

/// 4 pi R_launch P(hit the delta-tube from the launch sphere). Walkers beyond
/// R_out return with probability R_launch/|x| at a point drawn from the exact
/// exterior harmonic measure of the launch sphere, else escape.
/// Throws std::invalid_argument for delta <= 0, R_out < 4 R_launch or zero
/// walkers.
CapacityEstimate capacity(const Obstacle& k, const CapacityConfig& cfg);

struct CapacityMoments {
  double s = 0.0;
  double dt = 0.0;
  double delta = 0.0;
  std::size_t replicas = 0;
  std::array<double, 3> moment{};     ///< estimates of E cap^i, i = 1, 2, 3
  std::array<double, 3> moment_se{};
  std::vector<double> per_path;       ///< capacity estimate of each path
};

struct PathCapacityConfig {
  double dt = 1e-4;
  double delta_factor = 1.0;  ///< delta = delta_factor sqrt(2 dt)
  CapacityConfig walk;        ///< delta is overwritten
};

/// Capacities of `replicas` independent paths beta[0,s] and their first three
/// moments. Per-path binomial noise is removed from the higher moments with
/// falling factorials of the hit counts.
CapacityMoments capacity_moments(double s, std::size_t replicas, const PathCapacityConfig& cfg);

struct EquilibriumSample {
  std::vector<Vec3> points;
  std::size_t walkers_used = 0;
  double delta = 0.0;
};

/// First-hit points of walkers that hit the set; distributed as the
/// normalized equilibrium measure of the delta-tube. Throws ResourceError when
/// max_walkers launches yield fewer than n_points hits.
EquilibriumSample sample_equilibrium(const Obstacle& k, std::size_t n_points, const CapacityConfig& cfg,
                                     std::size_t max_walkers);

struct EnergyEstimate {
  double value = 0.0;  ///< cap^2 E|X - Y|, X, Y independent equilibrium points
  double se = 0.0;
  double cap = 0.0;
  double cap_se = 0.0;
  double mean_distance = 0.0;
  double mean_distance_se = 0.0;
};

/// Energy integral of the equilibrium measure against |x - y|, from
/// n_points equilibrium samples (all pairs) and a capacity run.
EnergyEstimate energy_integral(const Obstacle& k, std::size_t n_points, const CapacityConfig& cfg);

/// Third small-t coefficient for s = 1 from the capacity third moment and the
/// mean path energy: C3 / (4 pi)^2 - E(energy) / (8 pi).
struct CoefficientEstimate {
  double value = 0.0;
  double se = 0.0;
};
CoefficientEstimate assemble_c3(const CapacityMoments& moments, const MCEstimate& mean_energy);

/// Mean energy integral over independent paths beta[0,s].
MCEstimate mean_path_energy(double s, std::size_t replicas, std::size_t points_per_path,
                            const PathCapacityConfig& cfg);

}  // namespace brownlab
