#include "brownlab/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "brownlab/errors.hpp"

namespace brownlab {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_id_for(std::uint64_t purpose, std::uint64_t index) {
  return mix64(mix64(purpose) ^ index);
}

std::uint64_t purpose_tag(const char* name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char* c = name; *c != '\0'; ++c) {
    h ^= static_cast<unsigned char>(*c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
    : master_seed_(master_seed),
      stream_id_(stream_id),
      engine_(mix64(master_seed ^ mix64(stream_id ^ 0x5851f42d4c957f2dULL))) {}

double RngStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_open() {
  return (static_cast<double>(engine_() >> 12) + 0.5) * 0x1.0p-52;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, q;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    q = u * u + v * v;
  } while (q >= 1.0 || q == 0.0);
  const double f = std::sqrt(-2.0 * std::log(q) / q);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

std::size_t step_count(double s, double dt) {
  return static_cast<std::size_t>(std::llround(s / dt));
}

Path sample_path(int m, double s, double dt, RngStream& rng, const SampleOptions& options) {
  if (m < 1) throw std::invalid_argument("sample_path: dimension must be positive");
  if (!(dt > 0.0)) throw std::invalid_argument("sample_path: dt must be positive");
  if (!(s >= 0.0)) throw std::invalid_argument("sample_path: s must be nonnegative");
  const double n_real = std::round(s / dt);
  if (n_real + 1.0 > static_cast<double>(options.max_points)) {
    throw ResourceError("sample_path: " + std::to_string(n_real + 1.0) +
                        " points exceed the budget of " + std::to_string(options.max_points));
  }
  if (!options.start.empty() && options.start.size() != static_cast<std::size_t>(m)) {
    throw std::invalid_argument("sample_path: start point has wrong dimension");
  }
  const std::size_t n = static_cast<std::size_t>(n_real);
  const auto um = static_cast<std::size_t>(m);

  Path p;
  p.m = m;
  p.dt = dt;
  p.coords.resize((n + 1) * um);
  for (std::size_t k = 0; k < um; ++k) p.coords[k] = options.start.empty() ? 0.0 : options.start[k];

  BrownianWalker walker(m, dt, rng, std::span<const double>(p.coords.data(), um));
  for (std::size_t i = 1; i <= n; ++i) {
    walker.step();
    std::copy(walker.position().begin(), walker.position().end(), p.coords.begin() + static_cast<std::ptrdiff_t>(i * um));
  }
  return p;
}

BrownianWalker::BrownianWalker(int m, double dt, RngStream& rng, std::span<const double> start)
    : rng_(&rng), sigma_(std::sqrt(kVariancePerUnitTime * dt)), position_(static_cast<std::size_t>(m), 0.0) {
  if (!start.empty()) std::copy(start.begin(), start.end(), position_.begin());
}

void BrownianWalker::step() {
  for (double& x : position_) x += sigma_ * rng_->normal();
}

double wrap_coordinate(double x) {
  double y = x - std::ceil(x - 0.5);
  if (y <= -0.5) y += 1.0;
  if (y > 0.5) y -= 1.0;
  return y;
}

TorusPath wrap_to_torus(const Path& p) {
  TorusPath t;
  t.m = p.m;
  t.dt = p.dt;
  t.unwrapped = p.coords;
  t.coords.resize(p.coords.size());
  for (std::size_t i = 0; i < p.coords.size(); ++i) t.coords[i] = wrap_coordinate(p.coords[i]);
  return t;
}

TorusPath TorusPath::prefix(std::size_t points) const {
  TorusPath t;
  t.m = m;
  t.dt = dt;
  const std::size_t len = std::min(points, size()) * static_cast<std::size_t>(m);
  t.coords.assign(coords.begin(), coords.begin() + static_cast<std::ptrdiff_t>(len));
  t.unwrapped.assign(unwrapped.begin(), unwrapped.begin() + static_cast<std::ptrdiff_t>(len));
  return t;
}

double torus_distance(std::span<const double> a, std::span<const double> b) {
  double d2 = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    double d = std::abs(wrap_coordinate(a[k] - b[k]));
    d2 += d * d;
  }
  return std::sqrt(d2);
}

}  // namespace brownlab
