#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "brownlab/errors.hpp"
#include "brownlab/sausage.hpp"
#include "doctest.h"

using namespace brownlab;

namespace {

std::vector<std::int32_t> random_cells(int m, int n, int spread, RngStream& rng) {
  std::vector<std::int32_t> out;
  for (int i = 0; i < n * m; ++i) out.push_back(static_cast<std::int32_t>(rng.uniform() * spread) - spread / 2);
  return out;
}

// Explicit set of pairwise sums.
std::size_t brute_sumset(const VoxelSet& a, const VoxelSet& b) {
  std::set<std::vector<std::int64_t>> out;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) {
      std::vector<std::int64_t> c(a.m);
      for (int k = 0; k < a.m; ++k) c[k] = a.cell(i)[k] + b.cell(j)[k];
      out.insert(c);
    }
  return out.size();
}

}  // namespace

TEST_CASE("sumset of two single voxels is one voxel") {
  const double h = 0.05;
  VoxelSet a = make_voxel_set(3, h, false, 0, {0, 0, 0});
  VoxelSet b = make_voxel_set(3, h, false, 0, {2, -1, 4});
  CHECK(sumset_volume(a, b) == doctest::Approx(h * h * h));
}

TEST_CASE("sumset with a point is a translate") {
  RngStream rng(3, 0);
  VoxelSet a = make_voxel_set(2, 0.1, false, 0, random_cells(2, 200, 30, rng));
  VoxelSet p = make_voxel_set(2, 0.1, false, 0, {7, -3});
  CHECK(sumset_volume(a, p) == doctest::Approx(0.01 * a.size()));
}

TEST_CASE("sumset matches brute force and is exactly symmetric") {
  RngStream rng(5, 0);
  SumsetOptions hashed;
  hashed.dense_cell_limit = 0;
  for (int m : {1, 2, 3}) {
    for (int trial = 0; trial < 6; ++trial) {
      VoxelSet a = make_voxel_set(m, 0.1, false, 0, random_cells(m, 40, 20, rng));
      VoxelSet b = make_voxel_set(m, 0.1, false, 0, random_cells(m, 15 + 10 * trial, 12, rng));
      const double expected = std::pow(0.1, m) * static_cast<double>(brute_sumset(a, b));
      const double ab = sumset_volume(a, b);
      CHECK(ab == doctest::Approx(expected));
      CHECK(ab == sumset_volume(b, a));
      CHECK(sumset_volume(a, b, hashed) == ab);
      CHECK(sumset_volume(b, a, hashed) == ab);
    }
  }
}

TEST_CASE("sumset rejects mismatched or periodic inputs") {
  VoxelSet a = make_voxel_set(2, 0.1, false, 0, {0, 0});
  VoxelSet b = make_voxel_set(2, 0.2, false, 0, {0, 0});
  VoxelSet c = make_voxel_set(3, 0.1, false, 0, {0, 0, 0});
  VoxelSet d = make_voxel_set(2, 0.1, true, 8, {0, 0});
  CHECK_THROWS_AS(sumset_volume(a, b), std::invalid_argument);
  CHECK_THROWS_AS(sumset_volume(a, c), std::invalid_argument);
  CHECK_THROWS_AS(sumset_volume(a, d), std::invalid_argument);
  RngStream rng(7, 0);
  VoxelSet big = make_voxel_set(2, 0.1, false, 0, random_cells(2, 300, 1000, rng));
  SumsetOptions tight;
  tight.dense_cell_limit = 0;
  tight.max_cells = 100;
  CHECK_THROWS_AS(sumset_volume(big, big, tight), ResourceError);
}

TEST_CASE("raster_walk agrees with rasterizing the sampled path") {
  const double dt = 1e-3, h = 0.02;
  const std::vector<std::size_t> checkpoints = {0, 100, 250, 500};
  RngStream a(11, 2), b(11, 2);
  OrderedRaster r = raster_walk(3, dt, h, checkpoints, a);
  Path p = sample_path(3, 0.5, dt, b);
  VoxelSet expected = rasterize_free(p, h);
  VoxelSet got = make_voxel_set(3, h, false, 0, r.cells);
  CHECK(got.cells == expected.cells);
  CHECK(r.cells.size() / 3 == expected.size());  // no duplicates in the ordered list
  REQUIRE(r.counts.size() == 4);
  CHECK(r.counts[0] == 1);
  CHECK(std::is_sorted(r.counts.begin(), r.counts.end()));
  CHECK(r.counts.back() == expected.size());
  RngStream c(11, 2);
  Path prefix = sample_path(3, 0.25, dt, c);
  CHECK(r.counts[2] == rasterize_free(prefix, h).size());
}

TEST_CASE("sumset_profile equals the sumset of each prefix") {
  const double dt = 2e-3, h = 0.05;
  const std::vector<std::size_t> checkpoints = {10, 40, 200};
  RngStream a(13, 0), b(13, 1);
  OrderedRaster longer = raster_walk(2, dt, h, checkpoints, a);
  const std::size_t n = 30;
  OrderedRaster shorter = raster_walk(2, dt, h, std::span<const std::size_t>(&n, 1), b);
  VoxelSet vb = make_voxel_set(2, h, false, 0, shorter.cells);
  const auto profile = sumset_profile(longer, shorter.cells);
  for (std::size_t k = 0; k < checkpoints.size(); ++k) {
    std::vector<std::int32_t> prefix(longer.cells.begin(), longer.cells.begin() + 2 * longer.counts[k]);
    VoxelSet va = make_voxel_set(2, h, false, 0, prefix);
    CHECK(static_cast<double>(profile[k]) * h * h == doctest::Approx(sumset_volume(va, vb)));
  }
}

TEST_CASE("heat content: zero times and argument checks") {
  const double h = 0.05;
  MCEstimate e = estimate_heat_content(3, 0.0, 0.0, 3, 1e-3, h);
  CHECK(e.mean == doctest::Approx(h * h * h));
  CHECK(e.std_error == doctest::Approx(0.0));
  CHECK_THROWS_AS(estimate_heat_content(3, 1.0, 1.0, 0, 1e-3, h), std::invalid_argument);
  CHECK_THROWS_AS(estimate_heat_content(3, -1.0, 1.0, 2, 1e-3, h), std::invalid_argument);
  CHECK_THROWS_AS(estimate_heat_content(3, 1.0, 1.0, 2, 0.0, h), std::invalid_argument);
}

TEST_CASE("heat content is reproducible and shrinks with t") {
  HeatContentOptions o;
  o.seed = 17;
  const double h = 0.04, dt = h * h / 8;
  MCEstimate a = estimate_heat_content(3, 0.2, 0.05, 20, dt, h, o);
  MCEstimate b = estimate_heat_content(3, 0.2, 0.05, 20, dt, h, o);
  CHECK(a.mean == b.mean);
  CHECK(a.seed == 17);
  // Same streams with a shorter second path: per-replica volumes are nested.
  MCEstimate c = estimate_heat_content(3, 0.2, 0.02, 20, dt, h, o);
  CHECK(c.mean <= a.mean);
}

TEST_CASE("heat content duality and scaling hold at small budgets") {
  const int m = 3;
  const ScaledGrid grid{0.15};
  const double s = 0.2, t = 0.05;
  HeatContentOptions o1, o2, o3;
  o1.purpose = purpose_tag("unit/dual-a");
  o2.purpose = purpose_tag("unit/dual-b");
  o3.purpose = purpose_tag("unit/scale");
  const std::size_t n = 150;
  MCEstimate st = estimate_heat_content(m, s, t, n, grid.dt(s, t), grid.h(s, t), o1);
  MCEstimate ts = estimate_heat_content(m, t, s, n, grid.dt(t, s), grid.h(t, s), o2);
  CHECK(std::abs(z_score(st.mean, st.std_error, ts.mean, ts.std_error)) < 4.0);
  const double t2 = s * s / t;
  MCEstimate sc = estimate_heat_content(m, s, t2, n, grid.dt(s, t2), grid.h(s, t2), o3);
  const double factor = std::pow(t / s, 0.5 * m);
  CHECK(std::abs(z_score(st.mean, st.std_error, factor * sc.mean, factor * sc.std_error)) < 4.0);
}

TEST_CASE("small-t curve agrees with direct estimates and is reproducible") {
  const int m = 3;
  const double s = 0.3, h_rel = 0.2;
  const std::vector<double> ts = {0.1, 0.03, 0.01};
  HeatContentOptions o;
  o.seed = 23;
  const auto curve = heat_content_small_t_curve(m, s, ts, 60, h_rel, o);
  const auto again = heat_content_small_t_curve(m, s, ts, 60, h_rel, o);
  REQUIRE(curve.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(curve[i].mean == again[i].mean);
  // Direct estimate on the same grid in unscaled units.
  const double t = ts[1];
  const double h = h_rel * std::sqrt(t);
  HeatContentOptions od;
  od.purpose = purpose_tag("unit/direct");
  MCEstimate direct = estimate_heat_content(m, s, t, 60, h * h / 8, h, od);
  CHECK(curve[1].h == doctest::Approx(h));
  CHECK(std::abs(z_score(curve[1].mean, curve[1].std_error, direct.mean, direct.std_error)) < 4.0);
}

TEST_CASE("fit_small_t recovers synthetic coefficients") {
  SUBCASE("m = 3") {
    const std::vector<double> ts = {1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2};
    std::vector<MCEstimate> est;
    for (double t : ts) {
      MCEstimate e;
      e.mean = 2.5 * std::sqrt(t) + 1.7 * t - 0.4 * t * std::sqrt(t);
      e.std_error = 1e-6;
      est.push_back(e);
    }
    HeatContentFit f = fit_small_t(3, 1.0, ts, est);
    CHECK(f.c1 == doctest::Approx(2.5).epsilon(1e-6));
    CHECK(f.c2 == doctest::Approx(1.7).epsilon(1e-4));
    CHECK(f.accepted);
  }
  SUBCASE("m = 2") {
    const std::vector<double> ts = {1e-5, 1e-4, 1e-3, 1e-2};
    const double s = 0.5;
    std::vector<MCEstimate> est;
    for (double t : ts) {
      const double l = std::log(1.0 / t);
      MCEstimate e;
      e.mean = s * (6.0 + 3.0 / l) / l;
      e.std_error = 1e-8;
      est.push_back(e);
    }
    HeatContentFit f = fit_small_t(2, s, ts, est);
    CHECK(f.c1 == doctest::Approx(6.0).epsilon(1e-6));
    CHECK(f.c2 == doctest::Approx(3.0).epsilon(1e-5));
  }
  SUBCASE("narrow grid is rejected") {
    const std::vector<double> ts = {0.01, 0.02, 0.05};
    std::vector<MCEstimate> est(3);
    for (auto& e : est) e.std_error = 1.0;
    CHECK_THROWS_AS(fit_small_t(3, 1.0, ts, est), std::invalid_argument);
  }
}

TEST_CASE("strong law: a zero-time first path gives identical conditional estimates") {
  const std::vector<double> ts = {0.01, 0.04};
  auto rows = strong_law_check(3, 0.0, ts, 4, 3, 0.2);
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    CHECK(r.between_std == 0.0);
    CHECK(r.path_std == 0.0);
    CHECK(r.mean > 0.0);
  }
  CHECK_THROWS_AS(strong_law_check(3, 0.1, ts, 1, 3, 0.2), std::invalid_argument);
}

TEST_CASE("strong law: path spread does not depend on the inner budget") {
  const std::vector<double> ts = {0.02};
  HeatContentOptions o;
  o.seed = 29;
  auto small = strong_law_check(3, 0.5, ts, 12, 4, 0.25, o);
  auto large = strong_law_check(3, 0.5, ts, 12, 16, 0.25, o);
  CHECK(small[0].relative_std > 0.0);
  CHECK(large[0].relative_std < 3.0 * small[0].relative_std + 0.02);
  CHECK(small[0].relative_std < 3.0 * large[0].relative_std + 0.02);
}
