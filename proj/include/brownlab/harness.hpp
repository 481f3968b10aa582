#pragma once

// Experiment orchestration: JSON configuration, runs that write CSV tables,
// JSON summaries and SVG plots, and the weighted fits used for the limit
// constants.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace brownlab {

enum class ExperimentKind { heat_content, inradius, cover_time, capacity, spectrum, conjecture_probe };

std::string kind_name(ExperimentKind kind);
/// Throws std::invalid_argument for an unknown name.
ExperimentKind kind_from_name(const std::string& name);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::heat_content;
  int m = 3;
  std::vector<double> s_list, t_list, eps_list;
  std::size_t replicas = 100;
  std::size_t walkers = 100000;
  std::optional<double> dt;     ///< derived from h (or g) when absent
  std::optional<double> h;      ///< heat content voxel size; scaled with min(s,t) when absent
  std::optional<double> delta;  ///< capacity tube radius; sqrt(2 dt) when absent
  int g = 64;
  std::string shape = "path";   ///< capacity: ball | segment | path
  double tol = 1e-6;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::filesystem::path out = "out";
};

/// Unknown keys and wrong types are errors.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Kind-specific checks; throws std::invalid_argument before any compute.
void validate(const ExperimentConfig& c);

struct RunResult {
  std::vector<std::filesystem::path> files;  ///< every file written, in order
  nlohmann::json summary;
};

/// Runs the experiment and writes `<kind>.csv`, `<kind>_summary.json` and
/// SVG plots into c.out (conjecture probes use a `probe_` prefix).
/// Identical configs give byte-identical files.
RunResult run(const ExperimentConfig& c);

struct FitPoint {
  double x = 0.0;
  double y = 0.0;
  double sigma = 0.0;
};

enum class FitModel {
  constant,    ///< y = C
  power,       ///< y = A x^b, fitted as log y on log x
  power_log,   ///< y (x / log x)^{1/(m-2)} = C (leveled inradius, m >= 3)
  log_linear,  ///< log y = a + b sqrt(x)
};

std::string model_name(FitModel model);

struct FitResult {
  std::string model;
  std::vector<std::string> names;
  std::vector<double> coef, coef_se;
  double chi2_per_dof = 0.0;
  std::size_t points = 0;
  /// Set only for theorem-backed constants; refers to coef[theory_index].
  std::optional<double> theory;
  std::size_t theory_index = 0;
  std::optional<double> relative_deviation;
};

/// Weighted least squares in the model's transformed coordinates. Needs at
/// least 3 points (1 for the constant model) with positive sigma; throws
/// std::invalid_argument otherwise or for a degenerate design.
FitResult fit_power_law(std::span<const FitPoint> points, FitModel model, int m = 3);

/// Attaches a theorem value to coefficient `index`.
void attach_theory(FitResult& fit, std::size_t index, double value);

nlohmann::json fit_to_json(const FitResult& fit);

struct PlotSeries {
  std::string label;
  std::vector<double> x, y, err;  ///< err may be empty
};

struct PlotSpec {
  std::string title;
  std::string x_label, y_label;
  bool log_x = false, log_y = false;
  std::function<double(double)> theory;  ///< optional overlay
  std::string theory_label;
};

/// Self-contained SVG scatter plot with error bars and optional theory
/// curve. Throws std::invalid_argument when there are no points.
std::string render_svg(const std::vector<PlotSeries>& series, const PlotSpec& spec);
void emit_plot(const std::vector<PlotSeries>& series, const PlotSpec& spec, const std::filesystem::path& file);

/// Fixed-format CSV number: shortest round-trip-safe text, '.' decimal.
std::string csv_number(double v);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  void add(std::vector<std::string> row);
  std::size_t rows() const { return rows_.size(); }
  std::string str() const;
  void write(const std::filesystem::path& file) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace brownlab
