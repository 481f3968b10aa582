#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "brownlab/errors.hpp"
#include "brownlab/spectral.hpp"
#include "doctest.h"

using namespace brownlab;

namespace {

std::vector<std::uint8_t> random_obstacle(int m, int g, double density, RngStream& rng) {
  std::size_t total = 1;
  for (int k = 0; k < m; ++k) total *= g;
  std::vector<std::uint8_t> mask(total, 0);
  for (auto& x : mask) x = rng.uniform() < density ? 1 : 0;
  mask[0] = 1;
  return mask;
}

// Dense matrix assembled entry by entry from the stencil definition.
Eigen::MatrixXd dense_dirichlet(int m, int g, const std::vector<std::uint8_t>& mask) {
  std::vector<int> free;
  for (std::size_t c = 0; c < mask.size(); ++c)
    if (!mask[c]) free.push_back(static_cast<int>(c));
  const int n = static_cast<int>(free.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  auto coords = [&](int c) {
    std::vector<int> x(m);
    for (int k = m - 1; k >= 0; --k) {
      x[k] = c % g;
      c /= g;
    }
    return x;
  };
  for (int i = 0; i < n; ++i) {
    const auto xi = coords(free[i]);
    for (int j = 0; j < n; ++j) {
      const auto xj = coords(free[j]);
      int diff_axes = 0, axis = -1;
      for (int k = 0; k < m; ++k)
        if (xi[k] != xj[k]) {
          ++diff_axes;
          axis = k;
        }
      if (diff_axes == 0) a(i, j) = 2.0 * m * g * g;
      if (diff_axes == 1) {
        const int d = (xi[axis] - xj[axis] + g) % g;
        if (d == 1 || d == g - 1) a(i, j) -= static_cast<double>(g) * g;
      }
    }
  }
  return a;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("empty obstacle gives zero with a constant vector") {
  GridOperator op(2, 8, std::vector<std::uint8_t>(64, 0));
  const SpectralResult r = smallest_eigenvalue(op);
  CHECK(r.empty_obstacle);
  CHECK(r.lambda1 == 0.0);
  REQUIRE(r.vector.size() == 64);
  for (double v : r.vector) CHECK(v == doctest::Approx(0.125));
}

TEST_CASE("full obstacle leaves no domain") {
  GridOperator op(2, 8, std::vector<std::uint8_t>(64, 1));
  const SpectralResult r = smallest_eigenvalue(op);
  CHECK(r.empty_domain);
  CHECK(std::isinf(r.lambda1));
}

TEST_CASE("operator is symmetric and positive definite") {
  RngStream rng(3, 0);
  GridOperator op(3, 10, random_obstacle(3, 10, 0.1, rng));
  std::vector<double> x(op.size()), y(op.size()), ax(op.size()), ay(op.size());
  for (int trial = 0; trial < 5; ++trial) {
    for (auto& v : x) v = rng.normal();
    for (auto& v : y) v = rng.normal();
    op.apply(x, ax);
    op.apply(y, ay);
    CHECK(dot(ax, y) == doctest::Approx(dot(x, ay)).epsilon(1e-12));
    CHECK(dot(ax, x) > 0.0);
  }
  CHECK_THROWS_AS(GridOperator(2, 8, std::vector<std::uint8_t>(10, 0)), std::invalid_argument);
}

TEST_CASE("matches dense diagonalization on small grids") {
  RngStream rng(5, 0);
  struct Case {
    int m, g;
    double density;
  };
  for (Case c : {Case{2, 8, 0.05}, Case{2, 7, 0.2}, Case{3, 6, 0.03}, Case{3, 5, 0.1}, Case{1, 8, 0.2}}) {
    for (int trial = 0; trial < 3; ++trial) {
      const auto mask = random_obstacle(c.m, c.g, c.density, rng);
      GridOperator op(c.m, c.g, mask);
      const SpectralResult r = smallest_eigenvalue(op);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense_dirichlet(c.m, c.g, mask));
      CHECK(r.lambda1 == doctest::Approx(es.eigenvalues()(0)).epsilon(1e-8));
    }
  }
}

TEST_CASE("slab eigenvalue equals the discrete Dirichlet interval value") {
  for (int m : {2, 3}) {
    const int g = m == 2 ? 64 : 24;
    GridOperator op(m, g, slab_obstacle(m, g));
    const SpectralResult r = smallest_eigenvalue(op);
    const double s = std::sin(std::numbers::pi / (2.0 * g));
    CHECK(r.lambda1 == doctest::Approx(4.0 * g * g * s * s).epsilon(1e-8));
    CHECK(r.lambda1 == doctest::Approx(std::numbers::pi * std::numbers::pi).epsilon(0.01));
  }
}

TEST_CASE("Rayleigh quotient of the returned vector is the eigenvalue") {
  GridOperator op(2, 32, ball_obstacle(2, 32, 0.1));
  SpectralOptions o;
  o.tol = 1e-8;
  const SpectralResult r = smallest_eigenvalue(op, o);
  std::vector<double> av(op.size());
  op.apply(r.vector, av);
  const double rq = dot(r.vector, av) / dot(r.vector, r.vector);
  CHECK(std::abs(rq - r.lambda1) <= r.residual + 1e-12 * r.lambda1);
  CHECK(r.residual <= o.tol * r.lambda1);
}

TEST_CASE("domain monotonicity") {
  RngStream rng(7, 0);
  auto mask = random_obstacle(2, 24, 0.01, rng);
  const double a = smallest_eigenvalue(GridOperator(2, 24, mask)).lambda1;
  for (auto& x : mask)
    if (rng.uniform() < 0.01) x = 1;
  const double b = smallest_eigenvalue(GridOperator(2, 24, mask)).lambda1;
  CHECK(b >= a * (1.0 - 1e-9));
}

TEST_CASE("small-ball curve is increasing in eps and validates eps") {
  const std::vector<double> eps = {0.05, 0.1, 0.2};
  const auto rows = eigen_smallball_curve(2, eps, 48);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].lambda1 < rows[1].lambda1);
  CHECK(rows[1].lambda1 < rows[2].lambda1);
  CHECK(rows[0].theory == doctest::Approx(2.0 * std::numbers::pi / std::log(20.0)));
  const std::vector<double> tiny = {0.01};
  CHECK_THROWS_AS(eigen_smallball_curve(2, tiny, 48), std::invalid_argument);
  const std::vector<double> big = {0.3};
  CHECK_THROWS_AS(eigen_smallball_curve(2, big, 48), std::invalid_argument);
  const auto r3 = eigen_smallball_curve(3, std::vector<double>{0.2}, 12);
  CHECK(r3[0].theory == doctest::Approx(4.0 * std::numbers::pi * 0.2));
}

TEST_CASE("non-convergence reports the last residual") {
  GridOperator op(2, 32, ball_obstacle(2, 32, 0.1));
  SpectralOptions o;
  o.max_outer = 1;
  o.tol = 1e-14;
  try {
    smallest_eigenvalue(op, o);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.last_residual() > 0.0);
  }
}

TEST_CASE("conjecture probe: eigenvalue grows along each trajectory") {
  ProbeConfig cfg;
  cfg.g = 16;
  cfg.seed = 9;
  const std::vector<double> s = {0.05, 0.1, 0.2};
  const ProbeTable t = conjecture_probe(3, s, 4, cfg);
  REQUIRE(t.rows.size() == 12);
  REQUIRE(t.summary.size() == 3);
  for (std::size_t r = 0; r < 4; ++r) {
    CHECK(t.rows[4 + r].lambda1 >= t.rows[r].lambda1 * (1.0 - 1e-6));
    CHECK(t.rows[8 + r].lambda1 >= t.rows[4 + r].lambda1 * (1.0 - 1e-6));
    CHECK(t.rows[8 + r].rho <= t.rows[r].rho);
  }
  for (const auto& row : t.rows) CHECK(row.ratio > 0.0);
  CHECK(t.summary[0].conjectured == doctest::Approx(std::pow(2.0 * std::numbers::pi, 4) / 9.0));
}
