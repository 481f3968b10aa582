#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "brownlab/errors.hpp"
#include "brownlab/potential.hpp"
#include "doctest.h"

using namespace brownlab;

namespace {

constexpr double kPi = std::numbers::pi;

double dist(const Vec3& a, const Vec3& b) { return std::hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]); }

CapacityConfig quick(std::size_t walkers, std::uint64_t seed) {
  CapacityConfig c;
  c.walkers = walkers;
  c.seed = seed;
  c.delta = 1e-3;
  return c;
}

}  // namespace

TEST_CASE("ball capacity is 4 pi r") {
  for (double r : {1.0, 0.5, 2.0}) {
    BallObstacle ball({0.0, 0.0, 0.0}, r);
    CapacityConfig c = quick(20000, 3);
    c.delta = 1e-4 * r;
    c.launch_factor = 2.0;
    const CapacityEstimate e = capacity(ball, c);
    const double expected = 4.0 * kPi * (r + c.delta);
    CHECK(std::abs(e.cap_mean - expected) < 3.5 * e.cap_se);
    CHECK(e.starved == 0);
    CHECK(e.r_out == doctest::Approx(8.0 * e.r_launch));
  }
}

TEST_CASE("capacity is translation invariant and insensitive to R_out") {
  BallObstacle a({0.0, 0.0, 0.0}, 1.0), b({3.0, -2.0, 10.0}, 1.0);
  CapacityConfig c = quick(20000, 5);
  c.launch_factor = 3.0;
  const CapacityEstimate ea = capacity(a, c);
  CapacityConfig c2 = c;
  c2.purpose = purpose_tag("unit/shifted");
  const CapacityEstimate eb = capacity(b, c2);
  CHECK(std::abs(z_score(ea.cap_mean, ea.cap_se, eb.cap_mean, eb.cap_se)) < 3.5);
  CapacityConfig c3 = c;
  c3.out_factor = 16.0;
  c3.purpose = purpose_tag("unit/far");
  const CapacityEstimate ec = capacity(a, c3);
  CHECK(std::abs(z_score(ea.cap_mean, ea.cap_se, ec.cap_mean, ec.cap_se)) < 3.5);
}

TEST_CASE("capacity argument checks") {
  BallObstacle ball({0.0, 0.0, 0.0}, 1.0);
  CapacityConfig c = quick(10, 1);
  c.delta = 0.0;
  CHECK_THROWS_AS(capacity(ball, c), std::invalid_argument);
  c.delta = 1e-3;
  c.out_factor = 3.0;
  CHECK_THROWS_AS(capacity(ball, c), std::invalid_argument);
  c.out_factor = 8.0;
  c.walkers = 0;
  CHECK_THROWS_AS(capacity(ball, c), std::invalid_argument);
  PolylineObstacle cloud({{0.0, 0.0, 0.0}, {0.001, 0.0, 0.0}}, false, 0.01);
  CapacityConfig big = quick(10, 1);
  big.delta = 0.05;
  CHECK_THROWS_AS(capacity(cloud, big), std::invalid_argument);
}

TEST_CASE("polyline distance is a lower bound, exact at short range") {
  RngStream rng(7, 0);
  std::vector<Vec3> pts;
  Vec3 x{0.0, 0.0, 0.0};
  for (int i = 0; i < 400; ++i) {
    pts.push_back(x);
    for (double& v : x) v += 0.05 * rng.normal();
  }
  for (bool connected : {true, false}) {
    PolylineObstacle k(pts, connected, 0.02);
    for (int q = 0; q < 3000; ++q) {
      Vec3 y{k.center()[0] + 3.0 * (rng.uniform() - 0.5) * k.radius(),
             k.center()[1] + 3.0 * (rng.uniform() - 0.5) * k.radius(),
             k.center()[2] + 3.0 * (rng.uniform() - 0.5) * k.radius()};
      if (q % 2 == 0) {  // near the curve
        const Vec3& p = pts[static_cast<std::size_t>(rng.uniform() * pts.size())];
        for (int i = 0; i < 3; ++i) y[i] = p[i] + 0.03 * rng.normal();
      }
      double exact = 1e300;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (connected && i + 1 < pts.size()) {
          // Independent segment distance by dense sampling refined with a projection.
          const Vec3 &a = pts[i], &b = pts[i + 1];
          double best_u = 0.0, best = 1e300;
          for (int j = 0; j <= 64; ++j) {
            const double u = j / 64.0;
            const double d = dist(y, {a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1]), a[2] + u * (b[2] - a[2])});
            if (d < best) {
              best = d;
              best_u = u;
            }
          }
          for (double step = 1.0 / 128; step > 1e-12; step /= 2)
            for (double u : {best_u - step, best_u + step}) {
              if (u < 0.0 || u > 1.0) continue;
              const double d = dist(y, {a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1]), a[2] + u * (b[2] - a[2])});
              if (d < best) {
                best = d;
                best_u = u;
              }
            }
          exact = std::min(exact, best);
        } else if (!connected) {
          exact = std::min(exact, dist(y, pts[i]));
        }
      }
      const double got = k.distance(y);
      CHECK(got <= exact + 1e-9);
      if (got < k.resolution()) CHECK(got == doctest::Approx(exact).epsilon(1e-7));
    }
  }
}

TEST_CASE("segments are polar: tube capacity shrinks with delta") {
  const double length = 1.0;
  double previous = 1e9;
  for (double delta : {1e-1, 1e-2, 1e-3}) {
    auto seg = make_segment(length, 2.5 * delta);
    CapacityConfig c = quick(20000, 11);
    c.delta = delta;
    const CapacityEstimate e = capacity(*seg, c);
    CHECK(e.cap_mean < previous);
    previous = e.cap_mean;
  }
  // Slender-body value 4 pi L / (2 log(L / delta)) at delta = 1e-3 is near 0.91.
  CHECK(previous < 1.3);
  CHECK(previous > 0.6);
}

TEST_CASE("equilibrium measure of the sphere is uniform") {
  BallObstacle ball({0.0, 0.0, 0.0}, 1.0);
  CapacityConfig c = quick(0, 13);
  c.launch_factor = 2.0;
  const EquilibriumSample s = sample_equilibrium(ball, 4000, c, 100000);
  REQUIRE(s.points.size() == 4000);
  std::vector<double> octant(8, 0.0);
  for (const Vec3& p : s.points) {
    CHECK(ball.distance(p) < c.delta);
    octant[(p[0] > 0) + 2 * (p[1] > 0) + 4 * (p[2] > 0)] += 1.0;
  }
  double chi2 = 0.0;
  for (double o : octant) chi2 += (o - 500.0) * (o - 500.0) / 500.0;
  CHECK(chi2 < 24.3);  // 0.1% point of chi-square with 7 degrees of freedom

  // Oracle: mean distance of independent uniform points on the unit sphere.
  RngStream rng(17, 0);
  double oracle = 0.0;
  const int pairs = 200000;
  auto uniform_point = [&] {
    Vec3 u{rng.normal(), rng.normal(), rng.normal()};
    const double n = std::hypot(u[0], u[1], u[2]);
    return Vec3{u[0] / n, u[1] / n, u[2] / n};
  };
  for (int i = 0; i < pairs; ++i) oracle += dist(uniform_point(), uniform_point());
  oracle /= pairs;
  double mean = 0.0;
  for (std::size_t i = 0; i + 1 < s.points.size(); i += 2) mean += dist(s.points[i], s.points[i + 1]);
  mean /= static_cast<double>(s.points.size() / 2);
  CHECK(mean == doctest::Approx(oracle).epsilon(0.03));
  CHECK_THROWS_AS(sample_equilibrium(BallObstacle({0.0, 0.0, 0.0}, 0.01), 5000, c, 2048), ResourceError);
}

TEST_CASE("energy integral of the sphere") {
  BallObstacle ball({0.0, 0.0, 0.0}, 1.0);
  CapacityConfig c = quick(20000, 19);
  c.launch_factor = 2.0;
  const EnergyEstimate e = energy_integral(ball, 1500, c);
  // (4 pi)^2 times the mean chord 4/3 of the uniform sphere.
  CHECK(e.value == doctest::Approx(16.0 * kPi * kPi * 4.0 / 3.0).epsilon(0.05));
  CHECK(e.mean_distance == doctest::Approx(4.0 / 3.0).epsilon(0.03));
  CHECK(e.se > 0.0);
}

TEST_CASE("capacity moments of short paths") {
  PathCapacityConfig cfg;
  cfg.dt = 1e-3;
  cfg.walk.walkers = 2000;
  cfg.walk.seed = 23;
  const CapacityMoments m = capacity_moments(1.0, 12, cfg);
  CHECK(m.delta == doctest::Approx(std::sqrt(2e-3)));
  CHECK(m.moment[0] > 0.0);
  // Jensen.
  CHECK(m.moment[1] >= m.moment[0] * m.moment[0] - 3.0 * 2.0 * m.moment[0] * m.moment_se[0]);
  CHECK(m.moment[2] > 0.0);
  for (double c : m.per_path) CHECK(c > 0.0);
  const MCEstimate energy = mean_path_energy(1.0, 3, 200, cfg);
  CHECK(energy.mean > 0.0);
  const CoefficientEstimate c3 = assemble_c3(m, energy);
  CHECK(std::isfinite(c3.value));
  CHECK(c3.se > 0.0);
}
