#include "brownlab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace brownlab {

namespace {

constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;

std::int64_t positive_mod(std::int64_t a, std::int64_t g) {
  const std::int64_t r = a % g;
  return r < 0 ? r + g : r;
}

std::size_t grid_cells(int m, int g) {
  std::size_t n = 1;
  for (int k = 0; k < m; ++k) n *= static_cast<std::size_t>(g);
  return n;
}

// Lexicographic sort + dedupe of fixed-width tuples.
void normalize_cells(std::vector<std::int32_t>& flat, int m) {
  const auto um = static_cast<std::size_t>(m);
  const std::size_t n = flat.size() / um;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  auto less = [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(flat.begin() + a * um, flat.begin() + (a + 1) * um,
                                        flat.begin() + b * um, flat.begin() + (b + 1) * um);
  };
  std::sort(order.begin(), order.end(), less);
  std::vector<std::int32_t> out;
  out.reserve(flat.size());
  for (std::size_t idx = 0; idx < n; ++idx) {
    const std::size_t i = order[idx];
    if (!out.empty() && std::equal(flat.begin() + i * um, flat.begin() + (i + 1) * um, out.end() - m)) {
      continue;
    }
    out.insert(out.end(), flat.begin() + i * um, flat.begin() + (i + 1) * um);
  }
  flat.swap(out);
}

// d[q] = min_p (q - p)^2 + f[p] over a line (lower envelope of parabolas).
void envelope_1d(const std::int64_t* f, std::int64_t* d, int n, std::vector<int>& v,
                 std::vector<double>& z) {
  v.resize(static_cast<std::size_t>(n));
  z.resize(static_cast<std::size_t>(n) + 1);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] >= kInf) continue;
    const double fq = static_cast<double>(f[q]) + static_cast<double>(q) * q;
    while (k >= 0) {
      const int p = v[static_cast<std::size_t>(k)];
      const double fp = static_cast<double>(f[p]) + static_cast<double>(p) * p;
      const double s = (fq - fp) / (2.0 * (q - p));
      if (s <= z[static_cast<std::size_t>(k)]) {
        --k;
      } else {
        ++k;
        v[static_cast<std::size_t>(k)] = q;
        z[static_cast<std::size_t>(k)] = s;
        z[static_cast<std::size_t>(k) + 1] = std::numeric_limits<double>::infinity();
        break;
      }
    }
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -std::numeric_limits<double>::infinity();
      z[1] = std::numeric_limits<double>::infinity();
    }
  }
  if (k < 0) {
    std::fill(d, d + n, kInf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[static_cast<std::size_t>(j) + 1] < q) ++j;
    const std::int64_t p = v[static_cast<std::size_t>(j)];
    d[q] = (q - p) * (q - p) + f[p];
  }
}

}  // namespace

std::int64_t voxel_index(double x, double h) {
  return static_cast<std::int64_t>(std::floor(x / h + 0.5));
}

bool VoxelSet::contains(std::span<const std::int32_t> c) const {
  const auto um = static_cast<std::size_t>(m);
  std::size_t lo = 0, hi = size();
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    const auto* p = cells.data() + mid * um;
    if (std::lexicographical_compare(p, p + um, c.begin(), c.end())) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  return lo < size() && std::equal(c.begin(), c.end(), cells.data() + lo * um);
}

VoxelSet make_voxel_set(int m, double h, bool periodic, int g, std::vector<std::int32_t> flat_cells) {
  if (m < 1) throw std::invalid_argument("make_voxel_set: dimension must be positive");
  if (flat_cells.size() % static_cast<std::size_t>(m) != 0) {
    throw std::invalid_argument("make_voxel_set: cell array length is not a multiple of m");
  }
  if (periodic) {
    if (g < 1) throw std::invalid_argument("make_voxel_set: periodic set needs g >= 1");
    for (auto& c : flat_cells) c = static_cast<std::int32_t>(positive_mod(c, g));
  }
  normalize_cells(flat_cells, m);
  VoxelSet s;
  s.m = m;
  s.h = h;
  s.periodic = periodic;
  s.g = periodic ? g : 0;
  s.cells = std::move(flat_cells);
  return s;
}

TorusRasterizer::TorusRasterizer(int m, int g) : m_(m), g_(g) {
  if (m < 1 || m > 8) throw std::invalid_argument("TorusRasterizer: dimension must be in [1, 8]");
  if (g < 2) throw std::invalid_argument("TorusRasterizer: g must be at least 2");
  mask_.assign(grid_cells(m, g), 0);
}

void TorusRasterizer::mark(const std::int64_t* cell) {
  std::size_t idx = 0;
  for (int k = 0; k < m_; ++k) idx = idx * static_cast<std::size_t>(g_) + static_cast<std::size_t>(positive_mod(cell[k], g_));
  if (mask_[idx] == 0) {
    mask_[idx] = 1;
    ++occupied_;
  }
}

void TorusRasterizer::add_point(std::span<const double> p) {
  std::int64_t cell[8];
  for (int k = 0; k < m_; ++k) cell[k] = voxel_index(p[static_cast<std::size_t>(k)], h());
  mark(cell);
}

void TorusRasterizer::add_segment(std::span<const double> a, std::span<const double> b) {
  for_each_segment_voxel(m_, a.data(), b.data(), h(), [this](const std::int64_t* c) { mark(c); });
}

void TorusRasterizer::add_path_range(const TorusPath& p, std::size_t from, std::size_t to) {
  to = std::min(to, p.size());
  for (std::size_t i = from; i < to; ++i) {
    if (i == 0) {
      add_point(p.unwrapped_point(0));
    } else {
      add_segment(p.unwrapped_point(i - 1), p.unwrapped_point(i));
    }
  }
}

VoxelSet TorusRasterizer::voxels() const {
  std::vector<std::int32_t> flat;
  flat.reserve(occupied_ * static_cast<std::size_t>(m_));
  std::vector<std::int32_t> cell(static_cast<std::size_t>(m_));
  for (std::size_t idx = 0; idx < mask_.size(); ++idx) {
    if (!mask_[idx]) continue;
    std::size_t r = idx;
    for (int k = m_ - 1; k >= 0; --k) {
      cell[static_cast<std::size_t>(k)] = static_cast<std::int32_t>(r % static_cast<std::size_t>(g_));
      r /= static_cast<std::size_t>(g_);
    }
    flat.insert(flat.end(), cell.begin(), cell.end());
  }
  VoxelSet s;
  s.m = m_;
  s.h = h();
  s.periodic = true;
  s.g = g_;
  s.cells = std::move(flat);  // mask order is already lexicographic
  return s;
}

VoxelSet rasterize(const TorusPath& p, int g) {
  if (p.size() == 0) throw std::invalid_argument("rasterize: empty path");
  TorusRasterizer r(p.m, g);
  r.add_path_range(p, 0, p.size());
  return r.voxels();
}

VoxelSet rasterize_free(const Path& p, double h) {
  if (p.size() == 0) throw std::invalid_argument("rasterize_free: empty path");
  if (!(h > 0.0)) throw std::invalid_argument("rasterize_free: h must be positive");
  const int m = p.m;
  std::vector<std::int32_t> flat;
  auto push = [&](const std::int64_t* c) {
    for (int k = 0; k < m; ++k) flat.push_back(static_cast<std::int32_t>(c[k]));
  };
  std::int64_t start[8];
  for (int k = 0; k < m; ++k) start[k] = voxel_index(p.point(0)[static_cast<std::size_t>(k)], h);
  push(start);
  for (std::size_t i = 1; i < p.size(); ++i) {
    for_each_segment_voxel(m, p.point(i - 1).data(), p.point(i).data(), h, push);
    // Bound the scratch buffer on long paths.
    if (flat.size() > (1u << 24)) normalize_cells(flat, m);
  }
  return make_voxel_set(m, h, false, 0, std::move(flat));
}

std::size_t flat_index(std::span<const std::int32_t> cell, int g) {
  std::size_t idx = 0;
  for (auto c : cell) idx = idx * static_cast<std::size_t>(g) + static_cast<std::size_t>(c);
  return idx;
}

double grid_length(std::int64_t d2, double h) {
  return std::sqrt(static_cast<double>(d2)) * h;
}

double DistanceField::value(std::size_t flat) const { return grid_length(d2[flat], h()); }

std::int64_t DistanceField::max_d2() const {
  return d2.empty() ? 0 : *std::max_element(d2.begin(), d2.end());
}

DistanceField distance_field(std::span<const std::uint8_t> mask, int m, int g) {
  const std::size_t total = grid_cells(m, g);
  if (mask.size() != total) throw std::invalid_argument("distance_field: mask size does not match g^m");
  if (std::find(mask.begin(), mask.end(), std::uint8_t{1}) == mask.end()) {
    throw std::invalid_argument("distance_field: empty obstacle, distance undefined");
  }
  DistanceField f;
  f.m = m;
  f.g = g;
  f.d2.resize(total);
  for (std::size_t i = 0; i < total; ++i) f.d2[i] = mask[i] ? 0 : kInf;

  const auto ug = static_cast<std::size_t>(g);
  std::vector<std::int64_t> line(3 * ug), out(3 * ug);
  std::vector<int> v;
  std::vector<double> z;
  std::size_t stride = total / ug;  // stride of axis 0
  for (int axis = 0; axis < m; ++axis) {
    const std::size_t block = stride * ug;
    for (std::size_t outer = 0; outer < total; outer += block) {
      for (std::size_t inner = 0; inner < stride; ++inner) {
        const std::size_t base = outer + inner;
        bool any = false;
        for (std::size_t j = 0; j < ug; ++j) {
          const std::int64_t val = f.d2[base + j * stride];
          any = any || val < kInf;
          line[j] = line[j + ug] = line[j + 2 * ug] = val;
        }
        if (!any) continue;
        envelope_1d(line.data(), out.data(), 3 * g, v, z);
        for (std::size_t j = 0; j < ug; ++j) f.d2[base + j * stride] = out[j + ug];
      }
    }
    stride /= ug;
  }
  return f;
}

DistanceField distance_field(const VoxelSet& obstacle) {
  if (!obstacle.periodic) throw std::invalid_argument("distance_field: obstacle must be periodic");
  if (obstacle.empty()) throw std::invalid_argument("distance_field: empty obstacle, distance undefined");
  std::vector<std::uint8_t> mask(grid_cells(obstacle.m, obstacle.g), 0);
  for (std::size_t i = 0; i < obstacle.size(); ++i) mask[flat_index(obstacle.cell(i), obstacle.g)] = 1;
  return distance_field(mask, obstacle.m, obstacle.g);
}

double inradius(const DistanceField& f) { return grid_length(f.max_d2(), f.h()); }

double quantization_bound(int m, double h) { return h * std::sqrt(static_cast<double>(m)); }

namespace {

// Uncovered voxel centers grouped in cubic buckets of side `bucket` cells.
class CoverTracker {
 public:
  CoverTracker(int m, int g, std::int64_t reach2) : m_(m), g_(g), reach2_(reach2) {
    reach_ = static_cast<int>(std::floor(std::sqrt(static_cast<double>(reach2))));
    while (static_cast<std::int64_t>(reach_ + 1) * (reach_ + 1) <= reach2_) ++reach_;
    bucket_ = std::max(2, reach_);
    nb_ = (g_ + bucket_ - 1) / bucket_;
    buckets_.resize(grid_cells(m, nb_));
    const std::size_t total = grid_cells(m, g);
    remaining_ = total;
    visited_.assign(total, 0);
    std::vector<int> c(static_cast<std::size_t>(m));
    for (std::size_t idx = 0; idx < total; ++idx) {
      decode(idx, c.data());
      buckets_[bucket_of(c.data())].push_back(static_cast<std::uint32_t>(idx));
    }
  }

  std::size_t remaining() const { return remaining_; }

  // Covers all centers within reach of the obstacle voxel `cell` (unbounded
  // indices). Voxels seen before are skipped.
  void add_obstacle(const std::int64_t* cell) {
    int c[8];
    std::size_t idx = 0;
    for (int k = 0; k < m_; ++k) {
      c[k] = static_cast<int>(positive_mod(cell[k], g_));
      idx = idx * static_cast<std::size_t>(g_) + static_cast<std::size_t>(c[k]);
    }
    if (visited_[idx]) return;
    visited_[idx] = 1;
    if (remaining_ == 0) return;

    // Buckets touched along each axis.
    std::vector<int> axis_buckets[8];
    for (int k = 0; k < m_; ++k) {
      auto& list = axis_buckets[k];
      if (2 * reach_ + 1 >= g_) {
        for (int b = 0; b < nb_; ++b) list.push_back(b);
        continue;
      }
      for (int off = -reach_; off <= reach_; ++off) {
        const int b = static_cast<int>(positive_mod(c[k] + off, g_)) / bucket_;
        if (std::find(list.begin(), list.end(), b) == list.end()) list.push_back(b);
      }
    }
    int pos[8] = {0};
    for (;;) {
      std::size_t bidx = 0;
      for (int k = 0; k < m_; ++k) bidx = bidx * static_cast<std::size_t>(nb_) + static_cast<std::size_t>(axis_buckets[k][static_cast<std::size_t>(pos[k])]);
      sweep(buckets_[bidx], c);
      int k = m_ - 1;
      while (k >= 0 && ++pos[k] == static_cast<int>(axis_buckets[k].size())) {
        pos[k] = 0;
        --k;
      }
      if (k < 0) break;
    }
  }

 private:
  void decode(std::size_t idx, int* c) const {
    for (int k = m_ - 1; k >= 0; --k) {
      c[k] = static_cast<int>(idx % static_cast<std::size_t>(g_));
      idx /= static_cast<std::size_t>(g_);
    }
  }

  std::size_t bucket_of(const int* c) const {
    std::size_t b = 0;
    for (int k = 0; k < m_; ++k) b = b * static_cast<std::size_t>(nb_) + static_cast<std::size_t>(c[k] / bucket_);
    return b;
  }

  void sweep(std::vector<std::uint32_t>& list, const int* c) {
    int x[8];
    for (std::size_t i = 0; i < list.size();) {
      decode(list[i], x);
      std::int64_t d2 = 0;
      for (int k = 0; k < m_; ++k) {
        std::int64_t d = std::abs(x[k] - c[k]);
        d = std::min<std::int64_t>(d, g_ - d);
        d2 += d * d;
      }
      if (d2 <= reach2_) {
        list[i] = list.back();
        list.pop_back();
        --remaining_;
      } else {
        ++i;
      }
    }
  }

  int m_, g_;
  std::int64_t reach2_;
  int reach_ = 0;
  int bucket_ = 1;
  int nb_ = 1;
  std::vector<std::vector<std::uint32_t>> buckets_;
  std::vector<std::uint8_t> visited_;
  std::size_t remaining_ = 0;
};

}  // namespace

CoverRecord cover_time(const TorusPath& p, double epsilon, int g) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("cover_time: epsilon must be positive");
  if (g < 2) throw std::invalid_argument("cover_time: g must be at least 2");
  if (p.size() == 0) throw std::invalid_argument("cover_time: empty path");
  const int m = p.m;
  const double h = 1.0 / g;
  const std::int64_t largest = static_cast<std::int64_t>(m) * (g / 2) * (g / 2);
  // Largest squared voxel distance that still counts as within epsilon.
  std::int64_t reach2 = static_cast<std::int64_t>(std::floor((epsilon / h) * (epsilon / h)));
  reach2 = std::min(reach2, largest + 1);
  while (reach2 <= largest && grid_length(reach2 + 1, h) <= epsilon) ++reach2;
  while (reach2 >= 0 && grid_length(reach2, h) > epsilon) --reach2;

  CoverRecord rec;
  rec.epsilon = epsilon;
  rec.g = g;
  if (reach2 >= largest) {
    rec.t_cover = 0.0;
    rec.cover_step = 0;
    rec.censored = false;
    return rec;
  }
  CoverTracker tracker(m, g, reach2);
  auto add = [&](const std::int64_t* c) { tracker.add_obstacle(c); };
  std::int64_t start[8];
  for (int k = 0; k < m; ++k) start[k] = voxel_index(p.unwrapped_point(0)[static_cast<std::size_t>(k)], h);
  add(start);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i > 0) for_each_segment_voxel(m, p.unwrapped_point(i - 1).data(), p.unwrapped_point(i).data(), h, add);
    if (tracker.remaining() == 0) {
      rec.t_cover = p.dt * static_cast<double>(i);
      rec.cover_step = i;
      rec.censored = false;
      return rec;
    }
  }
  return rec;
}

double unit_ball_capacity(int m) {
  if (m < 3) throw std::invalid_argument("unit_ball_capacity: needs m >= 3");
  return 4.0 * std::pow(std::numbers::pi, m / 2.0) / std::tgamma((m - 2) / 2.0);
}

InradiusCurve mean_inradius_curve(int m, std::span<const double> s_list, std::size_t replicas,
                                  const InradiusConfig& cfg) {
  if (replicas == 0) throw std::invalid_argument("mean_inradius_curve: replica budget is zero");
  if (s_list.empty()) throw std::invalid_argument("mean_inradius_curve: empty s list");
  for (std::size_t i = 0; i < s_list.size(); ++i) {
    if (!(s_list[i] > 0.0) || (i > 0 && !(s_list[i] > s_list[i - 1]))) {
      throw std::invalid_argument("mean_inradius_curve: s list must be positive and increasing");
    }
  }
  const double h = 1.0 / cfg.g;
  const double dt = cfg.dt > 0.0 ? cfg.dt : h * h / 8.0;
  std::vector<std::size_t> checkpoints;
  for (double s : s_list) checkpoints.push_back(step_count(s, dt));

  std::vector<std::vector<double>> per_replica(replicas);
  const std::uint64_t purpose = purpose_tag("inradius");
  parallel_for(replicas, cfg.threads, [&](std::size_t r) {
    RngStream rng(cfg.seed, stream_id_for(purpose, r));
    BrownianWalker walker(m, dt, rng);
    TorusRasterizer raster(m, cfg.g);
    raster.add_point(walker.position());
    std::vector<double> prev(walker.position().begin(), walker.position().end());
    std::size_t step = 0;
    auto& out = per_replica[r];
    for (std::size_t target : checkpoints) {
      for (; step < target; ++step) {
        walker.step();
        raster.add_segment(prev, walker.position());
        std::copy(walker.position().begin(), walker.position().end(), prev.begin());
      }
      out.push_back(inradius(distance_field(raster.mask(), m, cfg.g)));
    }
  });

  InradiusCurve curve;
  curve.m = m;
  curve.g = cfg.g;
  curve.dt = dt;
  curve.samples.assign(s_list.size(), std::vector<double>(replicas));
  for (std::size_t i = 0; i < s_list.size(); ++i) {
    for (std::size_t r = 0; r < replicas; ++r) curve.samples[i][r] = per_replica[r][i];
    InradiusRow row;
    row.s = s_list[i];
    row.rho = summarize(curve.samples[i]);
    row.rho.dt = dt;
    row.rho.h = h;
    row.rho.seed = cfg.seed;
    row.quantization = quantization_bound(m, h);
    if (m >= 3) row.leveled = std::pow(row.s / std::log(row.s), 1.0 / (m - 2)) * row.rho.mean;
    curve.rows.push_back(row);
  }
  if (m >= 3) {
    curve.theory_constant = std::pow(m / ((m - 2) * unit_ball_capacity(m)), 1.0 / (m - 2));
  } else if (m == 2 && s_list.size() >= 2) {
    std::vector<double> design, y, sigma;
    for (const auto& row : curve.rows) {
      design.push_back(1.0);
      design.push_back(std::sqrt(row.s));
      y.push_back(std::log(row.rho.mean));
      const double rel = row.rho.std_error / row.rho.mean;
      sigma.push_back(rel > 0.0 && std::isfinite(rel) ? rel : 1e-12);
    }
    const LinearFit fit = weighted_least_squares(design, 2, y, sigma);
    curve.slope = fit.coef[1];
    curve.slope_se = fit.coef_se[1];
  }
  return curve;
}

}  // namespace brownlab
