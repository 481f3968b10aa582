#include "brownlab/stats.hpp"

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace brownlab {

MCEstimate summarize(std::span<const double> samples) {
  MCEstimate e;
  e.replicas = samples.size();
  if (samples.empty()) return e;
  double sum = 0.0;
  for (double x : samples) sum += x;
  e.mean = sum / static_cast<double>(samples.size());
  if (samples.size() < 2) {
    e.std_error = std::numeric_limits<double>::infinity();
    e.sample_std = std::numeric_limits<double>::infinity();
    return e;
  }
  double ss = 0.0;
  for (double x : samples) ss += (x - e.mean) * (x - e.mean);
  e.sample_std = std::sqrt(ss / static_cast<double>(samples.size() - 1));
  e.std_error = e.sample_std / std::sqrt(static_cast<double>(samples.size()));
  return e;
}

double z_score(double a, double se_a, double b, double se_b) {
  const double s = std::sqrt(se_a * se_a + se_b * se_b);
  if (s == 0.0) return a == b ? 0.0 : std::numeric_limits<double>::infinity();
  return std::abs(a - b) / s;
}

LinearFit weighted_least_squares(std::span<const double> design, std::size_t columns,
                                 std::span<const double> y, std::span<const double> sigma,
                                 double max_condition) {
  const std::size_t rows = y.size();
  if (columns == 0 || rows < columns || design.size() != rows * columns || sigma.size() != rows) {
    throw std::invalid_argument("weighted_least_squares: inconsistent sizes or too few points");
  }
  Eigen::MatrixXd a(rows, columns);
  Eigen::VectorXd b(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!(sigma[i] > 0.0)) throw std::invalid_argument("weighted_least_squares: sigma must be positive");
    const double w = 1.0 / sigma[i];
    for (std::size_t j = 0; j < columns; ++j) a(i, j) = design[i * columns + j] * w;
    b(i) = y[i] * w;
  }
  // Column equilibration keeps the condition estimate about the geometry of
  // the basis, not the units of each column.
  Eigen::VectorXd scale(columns);
  for (std::size_t j = 0; j < columns; ++j) {
    scale(j) = a.col(j).norm();
    if (scale(j) == 0.0) throw std::invalid_argument("weighted_least_squares: zero design column");
    a.col(j) /= scale(j);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cond = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1)
                                              : std::numeric_limits<double>::infinity();
  if (!(cond <= max_condition)) {
    throw std::invalid_argument("weighted_least_squares: degenerate design (condition " +
                                std::to_string(cond) + ")");
  }
  Eigen::VectorXd x = svd.solve(b);
  Eigen::MatrixXd vs = svd.matrixV() * sv.cwiseInverse().asDiagonal();
  Eigen::MatrixXd cov = vs * vs.transpose();

  LinearFit fit;
  fit.coef.resize(columns);
  fit.coef_se.resize(columns);
  for (std::size_t j = 0; j < columns; ++j) {
    fit.coef[j] = x(j) / scale(j);
    fit.coef_se[j] = std::sqrt(cov(j, j)) / scale(j);
  }
  fit.chi2 = (a * x - b).squaredNorm();
  fit.dof = rows - columns;
  fit.condition = cond;
  return fit;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned count = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  pool.reserve(count);
  for (unsigned t = 0; t < count; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace brownlab
