#include "brownlab/sausage.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "brownlab/errors.hpp"

namespace brownlab {

namespace {

// Bits per axis used when packing a cell into a 64-bit key.
int key_bits(int m) { return std::min(64 / m, 32); }

std::uint64_t pack_cell(const std::int64_t* c, int m) {
  const int bits = key_bits(m);
  const std::int64_t bias = std::int64_t{1} << (bits - 1);
  std::uint64_t key = 0;
  for (int k = 0; k < m; ++k) {
    const std::int64_t v = c[k] + bias;
    if (v < 0 || v >= (std::int64_t{1} << bits) - 1) {
      throw ResourceError("sumset: voxel coordinate out of packable range");
    }
    key = (key << bits) | static_cast<std::uint64_t>(v);
  }
  return key;
}

// Sparse bitmap in cubic blocks, with the last touched block cached; a walk
// mostly stays in one block between consecutive voxels.
class BlockBitSet {
 public:
  explicit BlockBitSet(int m) : m_(m) {
    side_bits_ = std::max(1, 9 / m);
    words_per_block_ = std::max<std::size_t>(1, (std::size_t{1} << (side_bits_ * m)) / 64);
  }

  bool insert(const std::int64_t* cell) {
    std::int64_t block[8];
    std::size_t local = 0;
    const std::int64_t mask = (std::int64_t{1} << side_bits_) - 1;
    for (int k = 0; k < m_; ++k) {
      block[k] = cell[k] >> side_bits_;
      local = (local << side_bits_) | static_cast<std::size_t>(cell[k] & mask);
    }
    const std::uint64_t key = pack_cell(block, m_);
    if (!has_last_ || key != last_key_) {
      auto [it, fresh] = index_.try_emplace(key, words_.size());
      if (fresh) words_.resize(words_.size() + words_per_block_, 0);
      last_key_ = key;
      last_base_ = it->second;
      has_last_ = true;
    }
    std::uint64_t& w = words_[last_base_ + local / 64];
    const std::uint64_t bit = std::uint64_t{1} << (local % 64);
    if (w & bit) return false;
    w |= bit;
    return true;
  }

 private:
  int m_;
  int side_bits_;
  std::size_t words_per_block_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
  std::vector<std::uint64_t> words_;
  bool has_last_ = false;
  std::uint64_t last_key_ = 0;
  std::size_t last_base_ = 0;
};

struct Box {
  std::int64_t lo[8];
  std::int64_t hi[8];
};

Box bounding_box(std::span<const std::int32_t> flat, int m) {
  Box b;
  for (int k = 0; k < m; ++k) {
    b.lo[k] = std::numeric_limits<std::int64_t>::max();
    b.hi[k] = std::numeric_limits<std::int64_t>::min();
  }
  for (std::size_t i = 0; i < flat.size(); i += static_cast<std::size_t>(m)) {
    for (int k = 0; k < m; ++k) {
      b.lo[k] = std::min<std::int64_t>(b.lo[k], flat[i + k]);
      b.hi[k] = std::max<std::int64_t>(b.hi[k], flat[i + k]);
    }
  }
  return b;
}

// Union of translates of `small` by the first cells of `large`, reporting the
// distinct-cell count after each prefix length in `prefixes`.
class SumsetCounter {
 public:
  SumsetCounter(int m, std::span<const std::int32_t> large, std::span<const std::int32_t> small,
                const SumsetOptions& options)
      : m_(m), large_(large), small_(small), options_(options) {
    const Box a = bounding_box(large, m);
    const Box b = bounding_box(small, m);
    double total = 1.0;
    for (int k = 0; k < m; ++k) {
      lo_a_[k] = a.lo[k];
      lo_b_[k] = b.lo[k];
      ext_[k] = (a.hi[k] - a.lo[k]) + (b.hi[k] - b.lo[k]) + 1;
      total *= static_cast<double>(ext_[k]);
    }
    dense_ = total <= static_cast<double>(options.dense_cell_limit);
    if (dense_) {
      std::size_t stride = 1;
      for (int k = m - 1; k >= 0; --k) {
        stride_[k] = stride;
        stride *= static_cast<std::size_t>(ext_[k]);
      }
      bits_.assign((stride + 63) / 64, 0);
      offsets_.reserve(small.size() / static_cast<std::size_t>(m));
      for (std::size_t j = 0; j < small.size(); j += static_cast<std::size_t>(m)) {
        std::size_t off = 0;
        for (int k = 0; k < m; ++k) off += static_cast<std::size_t>(small[j + k] - lo_b_[k]) * stride_[k];
        offsets_.push_back(off);
      }
    }
  }

  // Adds large cells [from, to).
  void add(std::size_t from, std::size_t to) {
    const auto um = static_cast<std::size_t>(m_);
    if (dense_) {
      std::vector<std::size_t> bases;
      bases.reserve(to - from);
      for (std::size_t i = from; i < to; ++i) {
        std::size_t base = 0;
        for (int k = 0; k < m_; ++k) base += static_cast<std::size_t>(large_[i * um + k] - lo_a_[k]) * stride_[k];
        bases.push_back(base);
      }
      for (std::size_t off : offsets_) {
        for (std::size_t base : bases) {
          const std::size_t idx = base + off;
          std::uint64_t& w = bits_[idx >> 6];
          const std::uint64_t bit = std::uint64_t{1} << (idx & 63);
          count_ += (w & bit) == 0;
          w |= bit;
        }
      }
      return;
    }
    std::int64_t c[8];
    for (std::size_t i = from; i < to; ++i) {
      for (std::size_t j = 0; j < small_.size(); j += um) {
        for (int k = 0; k < m_; ++k) c[k] = std::int64_t{large_[i * um + k]} + small_[j + k];
        if (hashed_.insert(pack_cell(c, m_)).second) {
          ++count_;
          if (count_ > options_.max_cells) {
            throw ResourceError("sumset: output exceeds " + std::to_string(options_.max_cells) + " cells");
          }
        }
      }
    }
  }

  std::size_t count() const { return count_; }

 private:
  int m_;
  std::span<const std::int32_t> large_, small_;
  SumsetOptions options_;
  std::int64_t lo_a_[8], lo_b_[8], ext_[8];
  std::size_t stride_[8];
  bool dense_ = false;
  std::vector<std::uint64_t> bits_;
  std::vector<std::size_t> offsets_;
  std::unordered_set<std::uint64_t> hashed_;
  std::size_t count_ = 0;
};

bool same_spacing(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(a, b); }

}  // namespace

double sumset_volume(const VoxelSet& a, const VoxelSet& b, const SumsetOptions& options) {
  if (a.periodic || b.periodic) throw std::invalid_argument("sumset_volume: inputs must be free-space sets");
  if (a.m != b.m) throw std::invalid_argument("sumset_volume: dimension mismatch");
  if (!same_spacing(a.h, b.h)) throw std::invalid_argument("sumset_volume: voxel size mismatch");
  if (a.empty() || b.empty()) return 0.0;
  // The larger set is swept, the smaller one is the stencil; the choice does
  // not depend on argument order.
  const bool a_large = a.size() != b.size() ? a.size() > b.size() : !(a.cells < b.cells);
  const VoxelSet& large = a_large ? a : b;
  const VoxelSet& small = a_large ? b : a;
  SumsetCounter counter(a.m, large.cells, small.cells, options);
  counter.add(0, large.size());
  return std::pow(a.h, a.m) * static_cast<double>(counter.count());
}

OrderedRaster raster_walk(int m, double dt, double h, std::span<const std::size_t> checkpoints, RngStream& rng) {
  if (m < 1 || m > 8) throw std::invalid_argument("raster_walk: dimension must be in [1, 8]");
  if (!(h > 0.0) || !(dt > 0.0)) throw std::invalid_argument("raster_walk: h and dt must be positive");
  if (!std::is_sorted(checkpoints.begin(), checkpoints.end())) {
    throw std::invalid_argument("raster_walk: checkpoints must be nondecreasing");
  }
  OrderedRaster out;
  out.m = m;
  out.h = h;
  BlockBitSet seen(m);
  auto visit = [&](const std::int64_t* c) {
    if (seen.insert(c)) {
      for (int k = 0; k < m; ++k) out.cells.push_back(static_cast<std::int32_t>(c[k]));
    }
  };
  BrownianWalker walker(m, dt, rng);
  std::vector<double> prev(static_cast<std::size_t>(m), 0.0);
  std::int64_t origin[8] = {0};
  visit(origin);
  std::size_t step = 0;
  const auto um = static_cast<std::size_t>(m);
  for (std::size_t target : checkpoints) {
    for (; step < target; ++step) {
      walker.step();
      for_each_segment_voxel(m, prev.data(), walker.position().data(), h, visit);
      std::copy(walker.position().begin(), walker.position().end(), prev.begin());
    }
    out.counts.push_back(out.cells.size() / um);
  }
  return out;
}

std::vector<std::size_t> sumset_profile(const OrderedRaster& ordered, std::span<const std::int32_t> cells,
                                        const SumsetOptions& options) {
  std::vector<std::size_t> result;
  if (cells.empty() || ordered.cells.empty()) {
    result.assign(ordered.counts.size(), 0);
    return result;
  }
  SumsetCounter counter(ordered.m, ordered.cells, cells, options);
  std::size_t done = 0;
  for (std::size_t target : ordered.counts) {
    counter.add(done, target);
    done = std::max(done, target);
    result.push_back(counter.count());
  }
  return result;
}

MCEstimate estimate_heat_content(int m, double s, double t, std::size_t replicas, double dt, double h,
                                 const HeatContentOptions& options) {
  if (!(s >= 0.0) || !(t >= 0.0)) throw std::invalid_argument("estimate_heat_content: s, t must be nonnegative");
  if (!(dt > 0.0) || !(h > 0.0)) throw std::invalid_argument("estimate_heat_content: dt, h must be positive");
  if (replicas == 0) throw std::invalid_argument("estimate_heat_content: replica budget is zero");
  if (m != 2 && m != 3) {
    std::clog << "warning: heat content for m = " << m << " is trivial (path capacity vanishes for m >= 4)\n";
  }
  const std::size_t ns = step_count(s, dt), nt = step_count(t, dt);
  std::vector<double> samples(replicas);
  parallel_for(replicas, options.threads, [&](std::size_t r) {
    RngStream rng1(options.seed, stream_id_for(options.purpose, 2 * r));
    RngStream rng2(options.seed, stream_id_for(options.purpose, 2 * r + 1));
    OrderedRaster a = raster_walk(m, dt, h, std::span<const std::size_t>(&ns, 1), rng1);
    OrderedRaster b = raster_walk(m, dt, h, std::span<const std::size_t>(&nt, 1), rng2);
    VoxelSet va = make_voxel_set(m, h, false, 0, std::move(a.cells));
    VoxelSet vb = make_voxel_set(m, h, false, 0, std::move(b.cells));
    samples[r] = sumset_volume(va, vb, options.sumset);
  });
  MCEstimate e = summarize(samples);
  e.dt = dt;
  e.h = h;
  e.seed = options.seed;
  return e;
}

double ScaledGrid::h(double s, double t) const { return h_rel * std::sqrt(std::min(s, t)); }

double ScaledGrid::dt(double s, double t) const {
  const double hh = h(s, t);
  return hh * hh / 8.0;
}

std::vector<MCEstimate> heat_content_small_t_curve(int m, double s, std::span<const double> t_grid,
                                                   std::size_t replicas, double h_rel,
                                                   const HeatContentOptions& options) {
  if (replicas == 0) throw std::invalid_argument("heat_content_small_t_curve: replica budget is zero");
  if (!(s > 0.0) || !(h_rel > 0.0)) throw std::invalid_argument("heat_content_small_t_curve: s, h_rel must be positive");
  for (double t : t_grid)
    if (!(t > 0.0)) throw std::invalid_argument("heat_content_small_t_curve: t must be positive");
  const double h0 = h_rel;
  const double dt0 = h0 * h0 / 8.0;
  // Long path of time s/t in scaled units, visited in increasing order.
  std::vector<std::size_t> order(t_grid.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return t_grid[i] > t_grid[j]; });
  std::vector<std::size_t> checkpoints;
  for (std::size_t i : order) checkpoints.push_back(step_count(s / t_grid[i], dt0));
  const std::size_t n_short = step_count(1.0, dt0);

  std::vector<std::vector<double>> samples(t_grid.size(), std::vector<double>(replicas));
  parallel_for(replicas, options.threads, [&](std::size_t r) {
    RngStream rng_long(options.seed, stream_id_for(options.purpose, 2 * r));
    RngStream rng_short(options.seed, stream_id_for(options.purpose, 2 * r + 1));
    OrderedRaster shorter = raster_walk(m, dt0, h0, std::span<const std::size_t>(&n_short, 1), rng_short);
    OrderedRaster longer = raster_walk(m, dt0, h0, checkpoints, rng_long);
    const std::vector<std::size_t> counts = sumset_profile(longer, shorter.cells, options.sumset);
    for (std::size_t k = 0; k < order.size(); ++k) {
      const double t = t_grid[order[k]];
      samples[order[k]][r] = std::pow(t, 0.5 * m) * std::pow(h0, m) * static_cast<double>(counts[k]);
    }
  });
  std::vector<MCEstimate> out;
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    MCEstimate e = summarize(samples[i]);
    e.h = h0 * std::sqrt(t_grid[i]);
    e.dt = dt0 * t_grid[i];
    e.seed = options.seed;
    out.push_back(e);
  }
  return out;
}

HeatContentFit fit_small_t(int m, double s, std::span<const double> t_grid, std::span<const MCEstimate> estimates,
                           double max_chi2_per_dof) {
  if (t_grid.size() != estimates.size()) throw std::invalid_argument("fit_small_t: grid and estimates differ in size");
  if (m != 2 && m != 3) throw std::invalid_argument("fit_small_t: only m = 2 or 3");
  if (t_grid.empty()) throw std::invalid_argument("fit_small_t: empty t grid");
  const auto [tmin, tmax] = std::minmax_element(t_grid.begin(), t_grid.end());
  if (!(*tmin > 0.0) || *tmax < 10.0 * *tmin * (1.0 - 1e-9)) {
    throw std::invalid_argument("fit_small_t: t grid must span at least a decade (ill-conditioned basis)");
  }
  HeatContentFit fit;
  fit.m = m;
  fit.s = s;
  fit.t_grid.assign(t_grid.begin(), t_grid.end());
  std::vector<double> design, y, sigma;
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    const double t = t_grid[i];
    const double se = estimates[i].std_error > 0.0 && std::isfinite(estimates[i].std_error)
                          ? estimates[i].std_error
                          : std::max(1e-12, 1e-6 * std::abs(estimates[i].mean));
    if (m == 3) {
      design.insert(design.end(), {std::sqrt(t), t, t * std::sqrt(t)});
      y.push_back(estimates[i].mean);
      sigma.push_back(se);
    } else {
      if (!(t < 1.0)) throw std::invalid_argument("fit_small_t: m = 2 needs t < 1");
      const double l = std::log(1.0 / t);
      design.insert(design.end(), {1.0, 1.0 / l});
      y.push_back(estimates[i].mean * l / s);
      sigma.push_back(se * l / s);
    }
  }
  const std::size_t columns = m == 3 ? 3 : 2;
  const LinearFit lf = weighted_least_squares(design, columns, y, sigma, 1e10);
  fit.c1 = lf.coef[0];
  fit.c1_se = lf.coef_se[0];
  fit.c2 = lf.coef[1];
  fit.c2_se = lf.coef_se[1];
  fit.chi2_per_dof = lf.dof > 0 ? lf.chi2 / static_cast<double>(lf.dof) : 0.0;
  fit.accepted = fit.chi2_per_dof <= max_chi2_per_dof;
  return fit;
}

std::vector<StrongLawRow> strong_law_check(int m, double s, std::span<const double> t_grid, std::size_t outer,
                                           std::size_t inner, double h_rel, const HeatContentOptions& options) {
  if (outer < 2 || inner < 2) throw std::invalid_argument("strong_law_check: need at least 2 outer and 2 inner replicas");
  if (!(s >= 0.0) || t_grid.empty()) throw std::invalid_argument("strong_law_check: bad s or empty t grid");
  const ScaledGrid grid{h_rel};
  const double t_min = *std::min_element(t_grid.begin(), t_grid.end());
  if (!(t_min > 0.0)) throw std::invalid_argument("strong_law_check: t must be positive");
  // beta1 is sampled once, at the finest step any t needs.
  const double dt_fine = grid.dt(t_min, t_min);
  const std::uint64_t outer_purpose = mix64(options.purpose ^ purpose_tag("strong-law/outer"));
  const std::uint64_t inner_purpose = mix64(options.purpose ^ purpose_tag("strong-law/inner"));

  std::vector<Path> paths(outer);
  parallel_for(outer, options.threads, [&](std::size_t o) {
    RngStream rng(options.seed, stream_id_for(outer_purpose, o));
    paths[o] = sample_path(m, s, dt_fine, rng);
  });

  std::vector<StrongLawRow> rows;
  for (double t : t_grid) {
    const double h = grid.h(t, t);
    const double dt = grid.dt(t, t);
    const std::size_t nt = step_count(t, dt);
    // Inner paths are shared by every beta1 (common random numbers), so the
    // spread across beta1 carries no independent inner noise.
    std::vector<VoxelSet> second(inner);
    for (std::size_t i = 0; i < inner; ++i) {
      RngStream rng(options.seed, stream_id_for(inner_purpose, i));
      OrderedRaster b = raster_walk(m, dt, h, std::span<const std::size_t>(&nt, 1), rng);
      second[i] = make_voxel_set(m, h, false, 0, std::move(b.cells));
    }
    std::vector<std::vector<double>> f(outer, std::vector<double>(inner));
    parallel_for(outer, options.threads, [&](std::size_t o) {
      const VoxelSet first = rasterize_free(paths[o], h);
      for (std::size_t i = 0; i < inner; ++i) f[o][i] = sumset_volume(first, second[i], options.sumset);
    });
    // Two-way decomposition f = mu + a_o + b_i + (ab)_oi. Outer means carry
    // a_o plus the interaction averaged over inner draws; remove the latter.
    // Working with f_oi - f_0i leaves both terms unchanged and makes them
    // exactly zero when every beta1 gives the same row.
    double grand = 0.0;
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < inner; ++i) grand += f[o][i];
    grand /= static_cast<double>(outer * inner);
    for (std::size_t o = outer; o-- > 0;)
      for (std::size_t i = 0; i < inner; ++i) f[o][i] -= f[0][i];
    std::vector<double> row_mean(outer, 0.0), col_mean(inner, 0.0);
    double shifted = 0.0;
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < inner; ++i) {
        row_mean[o] += f[o][i];
        col_mean[i] += f[o][i];
        shifted += f[o][i];
      }
    for (double& r : row_mean) r /= static_cast<double>(inner);
    for (double& c : col_mean) c /= static_cast<double>(outer);
    shifted /= static_cast<double>(outer * inner);
    double between = 0.0;
    for (double r : row_mean) between += (r - shifted) * (r - shifted);
    between /= static_cast<double>(outer - 1);
    double interaction = 0.0;
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < inner; ++i) {
        const double e = f[o][i] - row_mean[o] - col_mean[i] + shifted;
        interaction += e * e;
      }
    interaction /= static_cast<double>((outer - 1) * (inner - 1));

    StrongLawRow row;
    row.t = t;
    row.h = h;
    row.dt = dt;
    row.mean = grand;
    row.between_std = std::sqrt(between);
    row.path_std = std::sqrt(std::max(0.0, between - interaction / static_cast<double>(inner)));
    row.relative_std = grand > 0.0 ? row.path_std / grand : 0.0;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace brownlab
