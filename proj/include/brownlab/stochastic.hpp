#pragma once

// Reproducible random streams and Brownian path sampling.
//
// Brownian motion here has the Laplacian (not half of it) as generator, so each
// coordinate increment over a time step dt is N(0, 2 dt).

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace brownlab {

/// Variance per coordinate per unit time. Every time-dependent quantity in
/// the library (heat content, cover time, eigenvalues of -Laplacian) assumes it.
inline constexpr double kVariancePerUnitTime = 2.0;

/// Deterministic random stream identified by (master_seed, stream_id).
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard, and the Gaussian sampler is an in-house Marsaglia polar method,
/// so a stream reproduces bit-identical values on every conforming platform.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_id);

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1).
  double uniform_open();
  /// Standard normal, exact (polar rejection method).
  double normal();

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Bijective 64-bit mixer (SplitMix64 finalizer).
std::uint64_t mix64(std::uint64_t x);

/// Stream id for replica `index` of a named purpose. Distinct (purpose, index)
/// pairs map to distinct ids with overwhelming probability.
std::uint64_t stream_id_for(std::uint64_t purpose, std::uint64_t index);

/// Stable 64-bit tag for a purpose string (FNV-1a).
std::uint64_t purpose_tag(const char* name);

/// Discretized Brownian trajectory in R^m.
struct Path {
  int m = 0;
  double dt = 0.0;
  /// (n+1) points stored contiguously, m coordinates each.
  std::vector<double> coords;

  std::size_t size() const { return m == 0 ? 0 : coords.size() / static_cast<std::size_t>(m); }
  std::size_t steps() const { return size() == 0 ? 0 : size() - 1; }
  double duration() const { return dt * static_cast<double>(steps()); }
  std::span<const double> point(std::size_t i) const {
    return {coords.data() + i * static_cast<std::size_t>(m), static_cast<std::size_t>(m)};
  }
};

/// Brownian path wrapped onto the unit torus (-1/2, 1/2]^m.
struct TorusPath {
  int m = 0;
  double dt = 0.0;
  std::vector<double> coords;     ///< wrapped coordinates
  std::vector<double> unwrapped;  ///< the R^m path it came from

  std::size_t size() const { return m == 0 ? 0 : coords.size() / static_cast<std::size_t>(m); }
  std::size_t steps() const { return size() == 0 ? 0 : size() - 1; }
  double duration() const { return dt * static_cast<double>(steps()); }
  std::span<const double> point(std::size_t i) const {
    return {coords.data() + i * static_cast<std::size_t>(m), static_cast<std::size_t>(m)};
  }
  std::span<const double> unwrapped_point(std::size_t i) const {
    return {unwrapped.data() + i * static_cast<std::size_t>(m), static_cast<std::size_t>(m)};
  }
  /// Copy holding only the first `points` points (a path prefix).
  TorusPath prefix(std::size_t points) const;
};

struct SampleOptions {
  /// Largest number of points a single path may hold.
  std::size_t max_points = 50'000'000;
  /// Start point; empty means the origin.
  std::vector<double> start;
};

/// Streaming Brownian sampler. Consumes the random stream in exactly the order
/// sample_path does, so a walker and sample_path with equal streams visit the
/// same points.
class BrownianWalker {
 public:
  BrownianWalker(int m, double dt, RngStream& rng, std::span<const double> start = {});

  int m() const { return static_cast<int>(position_.size()); }
  std::span<const double> position() const { return position_; }
  void step();

 private:
  RngStream* rng_;
  double sigma_;
  std::vector<double> position_;
};

/// Number of steps used for total time s at step dt.
std::size_t step_count(double s, double dt);

/// Samples a path with n = round(s/dt) steps of N(0, 2 dt I) increments.
/// Throws std::invalid_argument for dt <= 0, s < 0 or m < 1, and
/// ResourceError if n+1 exceeds the point budget.
Path sample_path(int m, double s, double dt, RngStream& rng, const SampleOptions& options = {});

/// Reduces one coordinate into (-1/2, 1/2].
double wrap_coordinate(double x);

TorusPath wrap_to_torus(const Path& p);

/// Geodesic distance on the unit torus.
double torus_distance(std::span<const double> a, std::span<const double> b);

}  // namespace brownlab
