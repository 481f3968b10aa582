#include "brownlab/potential.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <stdexcept>
#include <string>

#include "brownlab/errors.hpp"

namespace brownlab {

namespace {

constexpr double kFourPi = 4.0 * std::numbers::pi;
constexpr std::size_t kBatch = 1024;  // walkers per RNG stream

double norm(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

Vec3 random_direction(RngStream& rng) {
  for (;;) {
    Vec3 u{rng.normal(), rng.normal(), rng.normal()};
    const double n = norm(u);
    if (n > 1e-12) return {u[0] / n, u[1] / n, u[2] / n};
  }
}

double point_segment_distance(const Vec3& x, const Vec3& a, const Vec3& b) {
  const Vec3 ab = sub(b, a), ax = sub(x, a);
  const double len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
  double u = len2 > 0.0 ? (ab[0] * ax[0] + ab[1] * ax[1] + ab[2] * ax[2]) / len2 : 0.0;
  u = std::clamp(u, 0.0, 1.0);
  const Vec3 d{ax[0] - u * ab[0], ax[1] - u * ab[1], ax[2] - u * ab[2]};
  return norm(d);
}

struct Geometry {
  Vec3 c;
  double r_launch, r_out;
};

Geometry launch_geometry(const Obstacle& k, const CapacityConfig& cfg, bool uses_walker_budget) {
  if (!(cfg.delta > 0.0)) throw std::invalid_argument("capacity: delta must be positive");
  if (uses_walker_budget && cfg.walkers == 0) throw std::invalid_argument("capacity: walker budget is zero");
  if (!(cfg.launch_factor > 1.0)) throw std::invalid_argument("capacity: launch sphere must enclose the tube");
  if (cfg.out_factor < 4.0) throw std::invalid_argument("capacity: R_out must be at least 4 R_launch");
  if (!(cfg.step_fraction > 0.0 && cfg.step_fraction <= 1.0)) {
    throw std::invalid_argument("capacity: step fraction must be in (0, 1]");
  }
  if (cfg.delta >= k.resolution()) {
    throw std::invalid_argument("capacity: delta exceeds the distance index resolution");
  }
  Geometry g;
  g.c = k.center();
  g.r_launch = cfg.launch_factor * (k.radius() + cfg.delta);
  g.r_out = cfg.out_factor * g.r_launch;
  return g;
}

enum class Fate { hit, escaped, starved };

// Point of the sphere |y - c| = R hit by a walker started at x outside it,
// conditioned on hitting: |x - y| has density proportional to |x - y|^{-2}.
Vec3 reenter(const Vec3& x, const Geometry& g, RngStream& rng) {
  const Vec3 y = sub(x, g.c);
  const double rho = norm(y);
  const double r = g.r_launch;
  const double inv_lo = 1.0 / (rho - r), inv_hi = 1.0 / (rho + r);
  const double u = 1.0 / (inv_lo - rng.uniform() * (inv_lo - inv_hi));
  const double cos_t = std::clamp((r * r + rho * rho - u * u) / (2.0 * r * rho), -1.0, 1.0);
  const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
  const Vec3 e0{y[0] / rho, y[1] / rho, y[2] / rho};
  // Orthonormal pair perpendicular to e0.
  Vec3 a = std::abs(e0[0]) < 0.9 ? Vec3{1.0, 0.0, 0.0} : Vec3{0.0, 1.0, 0.0};
  const double d = a[0] * e0[0] + a[1] * e0[1] + a[2] * e0[2];
  Vec3 e1{a[0] - d * e0[0], a[1] - d * e0[1], a[2] - d * e0[2]};
  const double n1 = norm(e1);
  for (double& v : e1) v /= n1;
  const Vec3 e2{e0[1] * e1[2] - e0[2] * e1[1], e0[2] * e1[0] - e0[0] * e1[2], e0[0] * e1[1] - e0[1] * e1[0]};
  const double phi = 2.0 * std::numbers::pi * rng.uniform();
  const double c1 = sin_t * std::cos(phi), c2 = sin_t * std::sin(phi);
  Vec3 out;
  for (int k = 0; k < 3; ++k) out[k] = g.c[k] + r * (cos_t * e0[k] + c1 * e1[k] + c2 * e2[k]);
  return out;
}

Fate run_walker(const Obstacle& k, const CapacityConfig& cfg, const Geometry& g, RngStream& rng, Vec3& hit) {
  const Vec3 u0 = random_direction(rng);
  Vec3 x{g.c[0] + g.r_launch * u0[0], g.c[1] + g.r_launch * u0[1], g.c[2] + g.r_launch * u0[2]};
  for (std::size_t step = 0; step < cfg.max_steps; ++step) {
    const double d = k.distance(x);
    if (d < cfg.delta) {
      hit = x;
      return Fate::hit;
    }
    const Vec3 u = random_direction(rng);
    const double r = cfg.step_fraction * d;
    for (int i = 0; i < 3; ++i) x[i] += r * u[i];
    const double rho = norm(sub(x, g.c));
    if (rho > g.r_out) {
      if (rng.uniform() >= g.r_launch / rho) return Fate::escaped;
      x = reenter(x, g, rng);
    }
  }
  return Fate::starved;
}

struct BatchResult {
  std::size_t hits = 0, starved = 0;
  std::vector<Vec3> points;
};

BatchResult run_batch(const Obstacle& k, const CapacityConfig& cfg, const Geometry& g, std::size_t batch,
                      std::size_t count, bool keep_points) {
  RngStream rng(cfg.seed, stream_id_for(cfg.purpose, batch));
  BatchResult out;
  Vec3 hit{};
  for (std::size_t w = 0; w < count; ++w) {
    switch (run_walker(k, cfg, g, rng, hit)) {
      case Fate::hit:
        ++out.hits;
        if (keep_points) out.points.push_back(hit);
        break;
      case Fate::starved:
        ++out.starved;
        break;
      case Fate::escaped:
        break;
    }
  }
  return out;
}

}  // namespace

BallObstacle::BallObstacle(Vec3 center, double r) : center_(center), r_(r) {
  if (!(r > 0.0)) throw std::invalid_argument("BallObstacle: radius must be positive");
}

double BallObstacle::distance(const Vec3& x) const { return std::max(0.0, norm(sub(x, center_)) - r_); }

PolylineObstacle::PolylineObstacle(std::vector<Vec3> points, bool connected, double min_cell)
    : points_(std::move(points)), connected_(connected) {
  if (points_.empty()) throw std::invalid_argument("PolylineObstacle: no points");
  if (!(min_cell > 0.0)) throw std::invalid_argument("PolylineObstacle: cell size must be positive");
  if (points_.size() > std::numeric_limits<std::uint32_t>::max() / 2) {
    throw ResourceError("PolylineObstacle: too many points");
  }
  connected_ = connected && points_.size() > 1;
  box_lo_ = box_hi_ = points_[0];
  for (const Vec3& p : points_)
    for (int k = 0; k < 3; ++k) {
      box_lo_[k] = std::min(box_lo_[k], p[k]);
      box_hi_[k] = std::max(box_hi_[k], p[k]);
    }
  for (int k = 0; k < 3; ++k) center_[k] = 0.5 * (box_lo_[k] + box_hi_[k]);
  for (const Vec3& p : points_) radius_ = std::max(radius_, norm(sub(p, center_)));

  const std::size_t n_elem = connected_ ? points_.size() - 1 : points_.size();
  double mean_len = 0.0;
  if (connected_) {
    for (std::size_t i = 0; i + 1 < points_.size(); ++i) mean_len += norm(sub(points_[i + 1], points_[i]));
    mean_len /= static_cast<double>(n_elem);
  }
  cell_ = std::max(min_cell, mean_len);
  const double cell_budget = std::max(8.0 * static_cast<double>(n_elem), double{1 << 18});
  auto cell_count = [&](double c) {
    double total = 1.0;
    for (int k = 0; k < 3; ++k) total *= std::ceil((box_hi_[k] - box_lo_[k]) / c) + 3.0;
    return total;
  };
  while (cell_count(cell_) > cell_budget) cell_ *= 1.25;
  for (int k = 0; k < 3; ++k) {
    origin_[k] = box_lo_[k] - cell_;
    dims_[k] = static_cast<std::int64_t>(std::ceil((box_hi_[k] - box_lo_[k]) / cell_)) + 3;
  }
  const auto total = static_cast<std::size_t>(dims_[0] * dims_[1] * dims_[2]);
  auto cell_of = [&](double v, int k) {
    return std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((v - origin_[k]) / cell_)), 0, dims_[k] - 1);
  };
  auto for_each_cell = [&](std::size_t e, auto&& fn) {
    const Vec3& a = points_[e];
    const Vec3& b = connected_ ? points_[e + 1] : points_[e];
    std::int64_t lo[3], hi[3];
    for (int k = 0; k < 3; ++k) {
      lo[k] = cell_of(std::min(a[k], b[k]), k);
      hi[k] = cell_of(std::max(a[k], b[k]), k);
    }
    for (std::int64_t i = lo[0]; i <= hi[0]; ++i)
      for (std::int64_t j = lo[1]; j <= hi[1]; ++j)
        for (std::int64_t l = lo[2]; l <= hi[2]; ++l)
          fn(static_cast<std::size_t>((i * dims_[1] + j) * dims_[2] + l));
  };
  start_.assign(total + 1, 0);
  for (std::size_t e = 0; e < n_elem; ++e) for_each_cell(e, [&](std::size_t c) { ++start_[c + 1]; });
  for (std::size_t c = 0; c < total; ++c) start_[c + 1] += start_[c];
  elements_.resize(start_[total]);
  std::vector<std::uint32_t> fill(start_.begin(), start_.end() - 1);
  for (std::size_t e = 0; e < n_elem; ++e)
    for_each_cell(e, [&](std::size_t c) { elements_[fill[c]++] = static_cast<std::uint32_t>(e); });

  // Multi-source breadth-first search over 26-neighbours.
  constexpr std::uint16_t kFar = std::numeric_limits<std::uint16_t>::max();
  empty_ring_.assign(total, kFar);
  std::deque<std::size_t> queue;
  for (std::size_t c = 0; c < total; ++c)
    if (start_[c + 1] > start_[c]) {
      empty_ring_[c] = 0;
      queue.push_back(c);
    }
  while (!queue.empty()) {
    const std::size_t c = queue.front();
    queue.pop_front();
    const std::int64_t i = static_cast<std::int64_t>(c) / (dims_[1] * dims_[2]);
    const std::int64_t j = (static_cast<std::int64_t>(c) / dims_[2]) % dims_[1];
    const std::int64_t l = static_cast<std::int64_t>(c) % dims_[2];
    const std::uint16_t next = empty_ring_[c] == kFar - 1 ? empty_ring_[c] : empty_ring_[c] + 1;
    for (std::int64_t di = -1; di <= 1; ++di)
      for (std::int64_t dj = -1; dj <= 1; ++dj)
        for (std::int64_t dl = -1; dl <= 1; ++dl) {
          const std::int64_t a = i + di, b = j + dj, d = l + dl;
          if (a < 0 || b < 0 || d < 0 || a >= dims_[0] || b >= dims_[1] || d >= dims_[2]) continue;
          const auto n = static_cast<std::size_t>((a * dims_[1] + b) * dims_[2] + d);
          if (empty_ring_[n] == kFar) {
            empty_ring_[n] = next;
            queue.push_back(n);
          }
        }
  }
}

double PolylineObstacle::element_distance(std::size_t e, const Vec3& x) const {
  if (!connected_) return norm(sub(x, points_[e]));
  return point_segment_distance(x, points_[e], points_[e + 1]);
}

double PolylineObstacle::distance(const Vec3& x) const {
  double box = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double d = std::max({box_lo_[k] - x[k], 0.0, x[k] - box_hi_[k]});
    box += d * d;
  }
  box = std::sqrt(box);
  std::int64_t c[3];
  for (int k = 0; k < 3; ++k) {
    const double f = std::floor((x[k] - origin_[k]) / cell_);
    if (f < 0.0 || f >= static_cast<double>(dims_[k])) return box;  // at least one cell from the box
    c[k] = static_cast<std::int64_t>(f);
  }
  const std::size_t here = static_cast<std::size_t>((c[0] * dims_[1] + c[1]) * dims_[2] + c[2]);
  const int ring = empty_ring_[here];
  if (ring >= 2) return std::max(box, (ring - 1) * cell_);
  double best = std::numeric_limits<double>::infinity();
  const int last = ring + 2;
  for (int r = 0; r <= last; ++r) {
    for (std::int64_t di = -r; di <= r; ++di) {
      const std::int64_t a = c[0] + di;
      if (a < 0 || a >= dims_[0]) continue;
      for (std::int64_t dj = -r; dj <= r; ++dj) {
        const std::int64_t b = c[1] + dj;
        if (b < 0 || b >= dims_[1]) continue;
        const bool edge = std::abs(di) == r || std::abs(dj) == r;
        for (std::int64_t dl = -r; dl <= r; dl += (edge ? 1 : 2 * std::max<std::int64_t>(r, 1))) {
          const std::int64_t d = c[2] + dl;
          if (d >= 0 && d < dims_[2]) {
            const auto n = static_cast<std::size_t>((a * dims_[1] + b) * dims_[2] + d);
            for (std::uint32_t p = start_[n]; p < start_[n + 1]; ++p) {
              best = std::min(best, element_distance(elements_[p], x));
            }
          }
          if (r == 0) break;
        }
      }
    }
    // Cells beyond ring r are at least r cells away.
    if (best <= r * cell_) return best;
  }
  return std::min(best, last * cell_);
}

std::unique_ptr<PolylineObstacle> make_segment(double length, double min_cell) {
  if (!(length > 0.0)) throw std::invalid_argument("make_segment: length must be positive");
  return std::make_unique<PolylineObstacle>(std::vector<Vec3>{{-0.5 * length, 0.0, 0.0}, {0.5 * length, 0.0, 0.0}},
                                            true, min_cell);
}

std::unique_ptr<PolylineObstacle> make_path_obstacle(const Path& path, double min_cell) {
  if (path.m != 3) throw std::invalid_argument("make_path_obstacle: capacity needs m = 3");
  std::vector<Vec3> pts(path.size());
  for (std::size_t i = 0; i < path.size(); ++i) {
    const auto p = path.point(i);
    pts[i] = {p[0], p[1], p[2]};
  }
  return std::make_unique<PolylineObstacle>(std::move(pts), true, min_cell);
}

CapacityEstimate capacity(const Obstacle& k, const CapacityConfig& cfg) {
  const Geometry g = launch_geometry(k, cfg, true);
  const std::size_t batches = (cfg.walkers + kBatch - 1) / kBatch;
  std::vector<BatchResult> results(batches);
  parallel_for(batches, cfg.threads, [&](std::size_t b) {
    const std::size_t count = std::min(kBatch, cfg.walkers - b * kBatch);
    results[b] = run_batch(k, cfg, g, b, count, false);
  });
  CapacityEstimate e;
  for (const auto& r : results) {
    e.hits += r.hits;
    e.starved += r.starved;
  }
  e.walkers = cfg.walkers;
  e.p_hit = static_cast<double>(e.hits) / static_cast<double>(e.walkers);
  const double scale = kFourPi * g.r_launch;
  e.cap_mean = scale * e.p_hit;
  e.cap_se = scale * std::sqrt(e.p_hit * (1.0 - e.p_hit) / static_cast<double>(e.walkers));
  e.delta = cfg.delta;
  e.r_launch = g.r_launch;
  e.r_out = g.r_out;
  e.seed = cfg.seed;
  return e;
}

CapacityMoments capacity_moments(double s, std::size_t replicas, const PathCapacityConfig& cfg) {
  if (!(s > 0.0)) throw std::invalid_argument("capacity_moments: s must be positive");
  if (replicas < 2) throw std::invalid_argument("capacity_moments: need at least 2 paths");
  if (cfg.walk.walkers < 3) throw std::invalid_argument("capacity_moments: need at least 3 walkers per path");
  CapacityMoments out;
  out.s = s;
  out.dt = cfg.dt;
  out.delta = cfg.delta_factor * std::sqrt(kVariancePerUnitTime * cfg.dt);
  out.replicas = replicas;
  const std::uint64_t path_purpose = mix64(cfg.walk.purpose ^ purpose_tag("capacity/path"));
  std::array<std::vector<double>, 3> terms;
  for (auto& t : terms) t.resize(replicas);
  out.per_path.resize(replicas);
  for (std::size_t r = 0; r < replicas; ++r) {
    RngStream rng(cfg.walk.seed, stream_id_for(path_purpose, r));
    const Path path = sample_path(3, s, cfg.dt, rng);
    const auto obstacle = make_path_obstacle(path, 2.0 * out.delta);
    CapacityConfig walk = cfg.walk;
    walk.delta = out.delta;
    walk.purpose = stream_id_for(mix64(cfg.walk.purpose ^ purpose_tag("capacity/walkers")), r);
    const CapacityEstimate e = capacity(*obstacle, walk);
    const double q = kFourPi * e.r_launch;
    const double k = static_cast<double>(e.hits), n = static_cast<double>(e.walkers);
    out.per_path[r] = e.cap_mean;
    terms[0][r] = q * k / n;
    terms[1][r] = q * q * k * (k - 1.0) / (n * (n - 1.0));
    terms[2][r] = q * q * q * k * (k - 1.0) * (k - 2.0) / (n * (n - 1.0) * (n - 2.0));
  }
  for (int i = 0; i < 3; ++i) {
    const MCEstimate m = summarize(terms[i]);
    out.moment[i] = m.mean;
    out.moment_se[i] = m.std_error;
  }
  return out;
}

EquilibriumSample sample_equilibrium(const Obstacle& k, std::size_t n_points, const CapacityConfig& cfg,
                                     std::size_t max_walkers) {
  const Geometry g = launch_geometry(k, cfg, false);
  EquilibriumSample out;
  out.delta = cfg.delta;
  const std::size_t group = std::max<unsigned>(1, cfg.threads) * 4;
  std::size_t batch = 0;
  while (out.points.size() < n_points) {
    if (out.walkers_used >= max_walkers) {
      throw ResourceError("sample_equilibrium: " + std::to_string(out.points.size()) + " hits after " +
                          std::to_string(out.walkers_used) + " walkers, wanted " + std::to_string(n_points));
    }
    std::vector<BatchResult> results(group);
    parallel_for(group, cfg.threads, [&](std::size_t i) { results[i] = run_batch(k, cfg, g, batch + i, kBatch, true); });
    batch += group;
    for (auto& r : results) {
      out.walkers_used += kBatch;
      out.points.insert(out.points.end(), r.points.begin(), r.points.end());
      if (out.points.size() >= n_points) break;
    }
  }
  out.points.resize(n_points);
  return out;
}

EnergyEstimate energy_integral(const Obstacle& k, std::size_t n_points, const CapacityConfig& cfg) {
  if (n_points < 3) throw std::invalid_argument("energy_integral: need at least 3 points");
  CapacityConfig sample_cfg = cfg;
  sample_cfg.purpose = mix64(cfg.purpose ^ purpose_tag("energy/sample"));
  const EquilibriumSample sample = sample_equilibrium(k, n_points, sample_cfg, 1000 * n_points + cfg.walkers);
  const CapacityEstimate cap = capacity(k, cfg);
  // U-statistic over all pairs; its error from the per-point projections.
  const std::size_t n = sample.points.size();
  std::vector<double> row(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = norm(sub(sample.points[i], sample.points[j]));
      row[i] += d;
      row[j] += d;
    }
  double total = 0.0;
  for (double& r : row) {
    total += r;
    r /= static_cast<double>(n - 1);
  }
  const MCEstimate proj = summarize(row);
  EnergyEstimate e;
  e.mean_distance = total / static_cast<double>(n * (n - 1));
  e.mean_distance_se = 2.0 * proj.std_error;
  e.cap = cap.cap_mean;
  e.cap_se = cap.cap_se;
  e.value = e.cap * e.cap * e.mean_distance;
  const double a = 2.0 * e.cap * e.cap_se * e.mean_distance, b = e.cap * e.cap * e.mean_distance_se;
  e.se = std::sqrt(a * a + b * b);
  return e;
}

CoefficientEstimate assemble_c3(const CapacityMoments& moments, const MCEstimate& mean_energy) {
  const double a = 1.0 / (kFourPi * kFourPi), b = 1.0 / (8.0 * std::numbers::pi);
  CoefficientEstimate c;
  c.value = a * moments.moment[2] - b * mean_energy.mean;
  c.se = std::hypot(a * moments.moment_se[2], b * mean_energy.std_error);
  return c;
}

MCEstimate mean_path_energy(double s, std::size_t replicas, std::size_t points_per_path,
                            const PathCapacityConfig& cfg) {
  if (replicas == 0) throw std::invalid_argument("mean_path_energy: replica budget is zero");
  const double delta = cfg.delta_factor * std::sqrt(kVariancePerUnitTime * cfg.dt);
  const std::uint64_t path_purpose = mix64(cfg.walk.purpose ^ purpose_tag("energy/path"));
  std::vector<double> values(replicas);
  for (std::size_t r = 0; r < replicas; ++r) {
    RngStream rng(cfg.walk.seed, stream_id_for(path_purpose, r));
    const Path path = sample_path(3, s, cfg.dt, rng);
    const auto obstacle = make_path_obstacle(path, 2.0 * delta);
    CapacityConfig walk = cfg.walk;
    walk.delta = delta;
    walk.purpose = stream_id_for(mix64(cfg.walk.purpose ^ purpose_tag("energy/walkers")), r);
    values[r] = energy_integral(*obstacle, points_per_path, walk).value;
  }
  MCEstimate e = summarize(values);
  e.dt = cfg.dt;
  e.h = delta;
  e.seed = cfg.walk.seed;
  return e;
}

}  // namespace brownlab
