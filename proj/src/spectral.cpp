#include "brownlab/spectral.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "brownlab/errors.hpp"
#include "brownlab/stats.hpp"

namespace brownlab {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void apply_col(const GridOperator& op, const VectorXd& x, VectorXd& y) {
  y.resize(x.size());
  op.apply(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
           std::span<double>(y.data(), static_cast<std::size_t>(y.size())));
}

// Conjugate gradients for A x = b from the initial guess in x.
std::size_t conjugate_gradient(const GridOperator& op, const VectorXd& b, VectorXd& x, double rel_tol,
                               std::size_t max_iter) {
  VectorXd ax;
  apply_col(op, x, ax);
  VectorXd r = b - ax;
  VectorXd p = r;
  VectorXd ap;
  const double target = rel_tol * b.norm();
  double rr = r.squaredNorm();
  std::size_t it = 0;
  while (std::sqrt(rr) > target && it < max_iter) {
    apply_col(op, p, ap);
    const double alpha = rr / p.dot(ap);
    x += alpha * p;
    r -= alpha * ap;
    const double rr_new = r.squaredNorm();
    p = r + (rr_new / rr) * p;
    rr = rr_new;
    ++it;
  }
  return it;
}

MatrixXd orthonormal_basis(const MatrixXd& w) {
  Eigen::HouseholderQR<MatrixXd> qr(w);
  return qr.householderQ() * MatrixXd::Identity(w.rows(), w.cols());
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

GridOperator::GridOperator(int m, int g, std::vector<std::uint8_t> obstacle)
    : m_(m), g_(g), obstacle_(std::move(obstacle)) {
  if (m < 1 || m > 8) throw std::invalid_argument("GridOperator: dimension must be in [1, 8]");
  if (g < 3) throw std::invalid_argument("GridOperator: g must be at least 3");
  total_ = 1;
  for (int k = 0; k < m; ++k) total_ *= static_cast<std::size_t>(g);
  if (obstacle_.size() != total_) throw std::invalid_argument("GridOperator: mask size is not g^m");
  if (total_ > std::numeric_limits<std::int32_t>::max()) throw ResourceError("GridOperator: grid too large");
  std::vector<std::int32_t> index(total_, -1);
  for (std::size_t c = 0; c < total_; ++c)
    if (!obstacle_[c]) {
      index[c] = static_cast<std::int32_t>(free_.size());
      free_.push_back(static_cast<std::uint32_t>(c));
    }
  const auto two_m = static_cast<std::size_t>(2 * m);
  neighbours_.resize(free_.size() * two_m);
  for (std::size_t u = 0; u < free_.size(); ++u) {
    const std::size_t c = free_[u];
    std::size_t stride = 1;
    for (int k = m - 1; k >= 0; --k) {
      const std::size_t coord = (c / stride) % static_cast<std::size_t>(g);
      const std::size_t base = c - coord * stride;
      const std::size_t up = base + ((coord + 1) % g) * stride;
      const std::size_t down = base + ((coord + g - 1) % g) * stride;
      neighbours_[u * two_m + 2 * k] = index[up];
      neighbours_[u * two_m + 2 * k + 1] = index[down];
      stride *= static_cast<std::size_t>(g);
    }
  }
}

void GridOperator::apply(std::span<const double> x, std::span<double> y) const {
  const double g2 = static_cast<double>(g_) * g_;
  const auto two_m = static_cast<std::size_t>(2 * m_);
  const double diag = 2.0 * m_;
  for (std::size_t u = 0; u < free_.size(); ++u) {
    double acc = diag * x[u];
    const std::int32_t* nb = &neighbours_[u * two_m];
    for (std::size_t k = 0; k < two_m; ++k)
      if (nb[k] >= 0) acc -= x[static_cast<std::size_t>(nb[k])];
    y[u] = g2 * acc;
  }
}

SpectralResult smallest_eigenvalue(const GridOperator& op, const SpectralOptions& options) {
  if (!(options.tol > 0.0)) throw std::invalid_argument("smallest_eigenvalue: tolerance must be positive");
  SpectralResult out;
  out.g = op.g();
  const std::size_t n = op.size();
  if (n == 0) {
    out.empty_domain = true;
    out.lambda1 = std::numeric_limits<double>::infinity();
    return out;
  }
  if (op.obstacle_cells() == 0) {
    out.empty_obstacle = true;
    out.vector.assign(n, 1.0 / std::sqrt(static_cast<double>(n)));
    return out;
  }
  const auto p = static_cast<Eigen::Index>(std::max<std::size_t>(1, std::min(options.block, n)));
  const auto rows = static_cast<Eigen::Index>(n);
  const std::size_t max_inner = options.max_inner ? options.max_inner : 20 * n;

  RngStream rng(options.seed, stream_id_for(purpose_tag("spectral/start"), n));
  MatrixXd v(rows, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) v(i, j) = j == 0 ? 1.0 + 0.1 * rng.normal() : rng.normal();
  v = orthonormal_basis(v);
  VectorXd theta = VectorXd::Ones(p);
  MatrixXd w(rows, p), av(rows, p);
  VectorXd col, acol;
  double residual = std::numeric_limits<double>::infinity();
  for (std::size_t it = 1; it <= options.max_outer; ++it) {
    for (Eigen::Index j = 0; j < p; ++j) {
      col = v.col(j) / std::max(theta(j), 1e-300);
      out.inner_iterations += conjugate_gradient(op, v.col(j), col, options.tol / 10.0, max_inner);
      w.col(j) = col;
    }
    const MatrixXd q = orthonormal_basis(w);
    for (Eigen::Index j = 0; j < p; ++j) {
      apply_col(op, q.col(j), acol);
      av.col(j) = acol;
    }
    MatrixXd h = q.transpose() * av;
    h = 0.5 * (h + h.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(h);
    theta = es.eigenvalues();
    v = q * es.eigenvectors();
    av = av * es.eigenvectors();
    residual = (av.col(0) - theta(0) * v.col(0)).norm() / v.col(0).norm();
    out.iterations = it;
    if (residual <= options.tol * std::abs(theta(0))) {
      out.lambda1 = theta(0);
      out.residual = residual;
      out.vector.assign(v.col(0).data(), v.col(0).data() + n);
      return out;
    }
  }
  throw ConvergenceError("smallest_eigenvalue: no convergence after " + std::to_string(options.max_outer) +
                             " outer iterations, residual " + std::to_string(residual),
                         residual);
}

std::vector<std::uint8_t> ball_obstacle(int m, int g, double eps) {
  std::size_t total = 1;
  for (int k = 0; k < m; ++k) total *= static_cast<std::size_t>(g);
  std::vector<std::uint8_t> mask(total, 0);
  const double h = 1.0 / g;
  for (std::size_t c = 0; c < total; ++c) {
    std::size_t rest = c;
    double d2 = 0.0;
    for (int k = 0; k < m; ++k) {
      const auto i = static_cast<int>(rest % static_cast<std::size_t>(g));
      rest /= static_cast<std::size_t>(g);
      const double d = std::min(i, g - i) * h;
      d2 += d * d;
    }
    mask[c] = d2 <= eps * eps ? 1 : 0;
  }
  return mask;
}

std::vector<std::uint8_t> slab_obstacle(int m, int g) {
  std::size_t layer = 1;
  for (int k = 1; k < m; ++k) layer *= static_cast<std::size_t>(g);
  std::vector<std::uint8_t> mask(layer * static_cast<std::size_t>(g), 0);
  std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(layer), 1);
  return mask;
}

std::vector<SmallBallRow> eigen_smallball_curve(int m, std::span<const double> eps_list, int g,
                                                const SpectralOptions& options) {
  if (m < 2) throw std::invalid_argument("eigen_smallball_curve: m must be at least 2");
  const double h = 1.0 / g;
  for (double eps : eps_list) {
    if (!(eps > h && eps < 0.25)) {
      throw std::invalid_argument("eigen_smallball_curve: eps = " + std::to_string(eps) + " outside (h, 1/4)");
    }
  }
  std::vector<SmallBallRow> rows;
  for (double eps : eps_list) {
    GridOperator op(m, g, ball_obstacle(m, g, eps));
    const SpectralResult r = smallest_eigenvalue(op, options);
    SmallBallRow row;
    row.eps = eps;
    row.g = g;
    row.lambda1 = r.lambda1;
    row.residual = r.residual;
    row.voxels = op.obstacle_cells();
    row.theory = m == 2 ? 2.0 * std::numbers::pi / std::log(1.0 / eps) : unit_ball_capacity(m) * std::pow(eps, m - 2);
    row.relative_deviation = (row.lambda1 - row.theory) / row.theory;
    rows.push_back(row);
  }
  return rows;
}

ProbeTable conjecture_probe(int m, std::span<const double> s_list, std::size_t replicas, const ProbeConfig& cfg) {
  if (m != 2 && m != 3) throw std::invalid_argument("conjecture_probe: m must be 2 or 3");
  if (replicas == 0) throw std::invalid_argument("conjecture_probe: replica budget is zero");
  if (s_list.empty() || !std::is_sorted(s_list.begin(), s_list.end()) || !(s_list.front() > 0.0)) {
    throw std::invalid_argument("conjecture_probe: s_list must be positive and increasing");
  }
  const double h = 1.0 / cfg.g;
  const double dt = cfg.dt > 0.0 ? cfg.dt : h * h / 8.0;
  const std::uint64_t purpose = purpose_tag("conjecture-probe");
  std::vector<std::vector<ProbeRow>> per_replica(replicas);
  parallel_for(replicas, cfg.threads, [&](std::size_t r) {
    RngStream rng(cfg.seed, stream_id_for(purpose, r));
    BrownianWalker walker(m, dt, rng);
    TorusRasterizer raster(m, cfg.g);
    raster.add_point(walker.position());
    std::vector<double> prev(walker.position().begin(), walker.position().end());
    std::size_t step = 0;
    for (double s : s_list) {
      for (const std::size_t target = step_count(s, dt); step < target; ++step) {
        walker.step();
        raster.add_segment(prev, walker.position());
        std::copy(walker.position().begin(), walker.position().end(), prev.begin());
      }
      ProbeRow row;
      row.m = m;
      row.s = s;
      row.g = cfg.g;
      row.replica = r;
      row.seed = cfg.seed;
      row.rho = inradius(distance_field(raster.mask(), m, cfg.g));
      const SpectralResult e = smallest_eigenvalue(GridOperator(m, cfg.g, raster.mask()), cfg.spectral);
      row.lambda1 = e.lambda1;
      row.residual = e.residual;
      row.ratio = e.empty_domain ? std::numeric_limits<double>::quiet_NaN()
                                 : row.lambda1 * row.rho * row.rho / (std::numbers::pi * std::numbers::pi);
      per_replica[r].push_back(row);
    }
  });
  ProbeTable table;
  for (std::size_t i = 0; i < s_list.size(); ++i) {
    std::vector<double> ratios;
    double sum = 0.0;
    for (std::size_t r = 0; r < replicas; ++r) {
      const ProbeRow& row = per_replica[r][i];
      table.rows.push_back(row);
      sum += row.lambda1;
      if (std::isfinite(row.ratio)) ratios.push_back(row.ratio);
    }
    ProbeSummary s;
    s.m = m;
    s.s = s_list[i];
    s.mean_lambda1 = sum / static_cast<double>(replicas);
    s.median_ratio = quantile(ratios, 0.5);
    s.ratio_q1 = quantile(ratios, 0.25);
    s.ratio_q3 = quantile(ratios, 0.75);
    if (m == 3) {
      const double f = std::log(s.s) / s.s;
      s.normalized = f * f * s.mean_lambda1;
      s.conjectured = std::pow(2.0 * std::numbers::pi, 4) / 9.0;
    } else {
      s.normalized = std::log(s.mean_lambda1) / std::sqrt(s.s);
      s.conjectured = 2.0 * std::sqrt(std::numbers::pi);
    }
    table.summary.push_back(s);
  }
  return table;
}

}  // namespace brownlab
