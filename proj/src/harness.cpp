#include "brownlab/harness.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "brownlab/geometry.hpp"
#include "brownlab/potential.hpp"
#include "brownlab/sausage.hpp"
#include "brownlab/spectral.hpp"
#include "brownlab/stats.hpp"
#include "brownlab/stochastic.hpp"

namespace brownlab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::map<std::string, ExperimentKind>& kind_table() {
  static const std::map<std::string, ExperimentKind> table = {
      {"heat-content", ExperimentKind::heat_content},   {"inradius", ExperimentKind::inradius},
      {"cover-time", ExperimentKind::cover_time},       {"capacity", ExperimentKind::capacity},
      {"spectrum", ExperimentKind::spectrum},           {"conjecture-probe", ExperimentKind::conjecture_probe},
  };
  return table;
}

std::uint64_t point_purpose(const char* tag, double a, double b) {
  return mix64(purpose_tag(tag) ^ mix64(std::bit_cast<std::uint64_t>(a)) ^
               mix64(mix64(std::bit_cast<std::uint64_t>(b))));
}

json estimate_json(const MCEstimate& e) {
  return json{{"mean", e.mean}, {"std_error", e.std_error}, {"replicas", e.replicas},
              {"dt", e.dt},     {"h", e.h},                 {"seed", e.seed}};
}

std::string num(double v) { return csv_number(v); }
std::string num(std::size_t v) { return std::to_string(v); }
std::string num(int v) { return std::to_string(v); }
std::string num(std::uint64_t v, int) { return std::to_string(v); }

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + file.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed: " + file.string());
}

void write_summary(RunResult& result, const fs::path& file) {
  write_text(file, result.summary.dump(2) + "\n");
  result.files.push_back(file);
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string tick_label(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Per-kind runs.

RunResult run_heat_content(const ExperimentConfig& c) {
  RunResult result;
  CsvTable table({"m", "s", "t", "dt", "h", "replicas", "mean", "std_error", "seed"});
  std::map<std::pair<double, double>, MCEstimate> estimates;
  for (double s : c.s_list) {
    for (double t : c.t_list) {
      double h, dt;
      if (c.h) {
        h = *c.h;
        dt = c.dt ? *c.dt : h * h / 8.0;
      } else if (c.dt) {
        dt = *c.dt;
        h = 2.0 * std::sqrt(kVariancePerUnitTime * dt);
      } else {
        const ScaledGrid grid{0.1};
        h = grid.h(s, t);
        dt = grid.dt(s, t);
      }
      HeatContentOptions o;
      o.seed = c.seed;
      o.threads = c.threads;
      o.purpose = point_purpose("heat-content", s, t);
      const MCEstimate e = estimate_heat_content(c.m, s, t, c.replicas, dt, h, o);
      estimates[{s, t}] = e;
      table.add({num(c.m), num(s), num(t), num(dt), num(h), num(e.replicas), num(e.mean), num(e.std_error),
                 num(c.seed, 0)});
    }
  }
  const fs::path csv = c.out / "heat-content.csv";
  table.write(csv);
  result.files.push_back(csv);

  json rows = json::array();
  for (const auto& [key, e] : estimates) {
    json r = estimate_json(e);
    r["s"] = key.first;
    r["t"] = key.second;
    rows.push_back(r);
  }
  json duality = json::array(), scaling = json::array();
  for (const auto& [key, e] : estimates) {
    const auto [s, t] = key;
    if (s < t) {
      auto it = estimates.find({t, s});
      if (it != estimates.end()) {
        duality.push_back({{"s", s},
                           {"t", t},
                           {"E_st", e.mean},
                           {"E_ts", it->second.mean},
                           {"z", z_score(e.mean, e.std_error, it->second.mean, it->second.std_error)}});
      }
    }
    if (s != t) {
      auto it = estimates.find({s, s * s / t});
      if (it != estimates.end()) {
        const double f = std::pow(s / t, 0.5 * c.m);
        scaling.push_back({{"s", s},
                           {"t", t},
                           {"scaled_E_st", f * e.mean},
                           {"E_s_s2_over_t", it->second.mean},
                           {"z", z_score(f * e.mean, f * e.std_error, it->second.mean, it->second.std_error)}});
      }
    }
  }
  json fits = json::array();
  for (double s : c.s_list) {
    std::vector<double> ts;
    std::vector<MCEstimate> es;
    for (double t : c.t_list) {
      if (t < 1.0) {
        ts.push_back(t);
        es.push_back(estimates[{s, t}]);
      }
    }
    if (ts.size() < static_cast<std::size_t>(c.m == 3 ? 4 : 3) || (c.m != 2 && c.m != 3)) continue;
    try {
      const HeatContentFit f = fit_small_t(c.m, s, ts, es);
      fits.push_back({{"s", s},
                      {"c1", f.c1},
                      {"c1_se", f.c1_se},
                      {"c2", f.c2},
                      {"c2_se", f.c2_se},
                      {"chi2_per_dof", f.chi2_per_dof},
                      {"accepted", f.accepted},
                      {"target", c.m == 2 ? json(4.0 * std::numbers::pi) : json("E cap(beta[0,1]) from capacity runs")}});
    } catch (const std::invalid_argument& e) {
      fits.push_back({{"s", s}, {"skipped", e.what()}});
    }
  }
  result.summary = {{"kind", "heat-content"}, {"config", config_to_json(c)}, {"estimates", rows},
                    {"duality", duality},     {"scaling", scaling},           {"small_t_fits", fits}};
  write_summary(result, c.out / "heat-content_summary.json");

  std::vector<PlotSeries> series;
  for (double s : c.s_list) {
    PlotSeries p;
    p.label = "s = " + tick_label(s);
    for (double t : c.t_list) {
      const MCEstimate& e = estimates[{s, t}];
      p.x.push_back(t);
      p.y.push_back(e.mean);
      p.err.push_back(e.std_error);
    }
    series.push_back(p);
  }
  PlotSpec spec;
  spec.title = "Expected heat content E(s,t), m = " + std::to_string(c.m);
  spec.x_label = "t";
  spec.y_label = "E(s,t)";
  spec.log_x = spec.log_y = true;
  const fs::path svg = c.out / "heat-content.svg";
  emit_plot(series, spec, svg);
  result.files.push_back(svg);
  return result;
}

RunResult run_inradius(const ExperimentConfig& c) {
  RunResult result;
  InradiusConfig cfg;
  cfg.g = c.g;
  cfg.dt = c.dt.value_or(0.0);
  cfg.seed = c.seed;
  cfg.threads = c.threads;
  const InradiusCurve curve = mean_inradius_curve(c.m, c.s_list, c.replicas, cfg);
  CsvTable table({"m", "s", "dt", "g", "replica", "rho", "t_cover", "epsilon", "seed"});
  for (std::size_t i = 0; i < curve.rows.size(); ++i)
    for (std::size_t r = 0; r < c.replicas; ++r)
      table.add({num(c.m), num(curve.rows[i].s), num(curve.dt), num(c.g), num(r), num(curve.samples[i][r]), "", "",
                 num(c.seed, 0)});
  const fs::path csv = c.out / "inradius.csv";
  table.write(csv);
  result.files.push_back(csv);

  json rows = json::array();
  std::vector<FitPoint> points;
  for (const auto& row : curve.rows) {
    json r = estimate_json(row.rho);
    r["s"] = row.s;
    r["quantization"] = row.quantization;
    if (std::isfinite(row.leveled)) r["leveled"] = row.leveled;
    rows.push_back(r);
    if (row.rho.mean > 0.0 && row.rho.std_error > 0.0 && (c.m == 2 || row.s > 1.0)) {
      points.push_back({row.s, row.rho.mean, row.rho.std_error});
    }
  }
  json fit;
  try {
    fit = fit_to_json(fit_power_law(points, c.m >= 3 ? FitModel::power_log : FitModel::log_linear, c.m));
  } catch (const std::invalid_argument& e) {
    fit = {{"skipped", e.what()}};
  }
  result.summary = {{"kind", "inradius"}, {"config", config_to_json(c)}, {"dt", curve.dt}, {"rows", rows}, {"fit", fit}};
  if (c.m >= 3) result.summary["theory_constant"] = curve.theory_constant;
  write_summary(result, c.out / "inradius_summary.json");

  PlotSeries p;
  p.label = "E rho(s), g = " + std::to_string(c.g);
  for (const auto& row : curve.rows) {
    p.x.push_back(row.s);
    p.y.push_back(row.rho.mean);
    p.err.push_back(row.rho.std_error);
  }
  PlotSpec spec;
  spec.title = "Mean inradius, m = " + std::to_string(c.m);
  spec.x_label = "s";
  spec.y_label = "E rho(s)";
  spec.log_x = true;
  spec.log_y = true;
  if (c.m >= 3) {
    const double k = curve.theory_constant;
    const double e = 1.0 / (c.m - 2);
    spec.theory = [k, e](double s) { return s > 1.0 ? k * std::pow(std::log(s) / s, e) : std::nan(""); };
    spec.theory_label = "limit constant x (log s / s)^{1/(m-2)}";
  }
  const fs::path svg = c.out / "inradius.svg";
  emit_plot({p}, spec, svg);
  result.files.push_back(svg);
  return result;
}

RunResult run_cover_time(const ExperimentConfig& c) {
  RunResult result;
  const double horizon = *std::max_element(c.s_list.begin(), c.s_list.end());
  const double h = 1.0 / c.g;
  const double dt = c.dt.value_or(h * h / 8.0);
  std::vector<double> eps = c.eps_list;
  std::sort(eps.begin(), eps.end());
  struct Row {
    double rho;
    std::vector<CoverRecord> records;
  };
  std::vector<Row> rows(c.replicas);
  const std::uint64_t purpose = purpose_tag("cover-time");
  parallel_for(c.replicas, c.threads, [&](std::size_t r) {
    RngStream rng(c.seed, stream_id_for(purpose, r));
    const TorusPath p = wrap_to_torus(sample_path(c.m, horizon, dt, rng));
    rows[r].rho = inradius(distance_field(rasterize(p, c.g)));
    for (double e : eps) rows[r].records.push_back(cover_time(p, e, c.g));
  });
  CsvTable table({"m", "s", "dt", "g", "replica", "rho", "t_cover", "epsilon", "seed"});
  std::size_t agree = 0, total = 0;
  const double duration = static_cast<double>(step_count(horizon, dt)) * dt;
  json per_eps = json::array();
  std::vector<std::size_t> covered(eps.size(), 0);
  for (std::size_t r = 0; r < c.replicas; ++r) {
    for (std::size_t k = 0; k < eps.size(); ++k) {
      const CoverRecord& rec = rows[r].records[k];
      table.add({num(c.m), num(horizon), num(dt), num(c.g), num(r), num(rows[r].rho), num(rec.t_cover), num(eps[k]),
                 num(c.seed, 0)});
      agree += (rows[r].rho > eps[k]) == (rec.t_cover > duration);
      ++total;
      covered[k] += !rec.censored;
    }
  }
  for (std::size_t k = 0; k < eps.size(); ++k) {
    per_eps.push_back({{"epsilon", eps[k]},
                       {"covered_fraction", static_cast<double>(covered[k]) / static_cast<double>(c.replicas)}});
  }
  const fs::path csv = c.out / "cover-time.csv";
  table.write(csv);
  result.files.push_back(csv);
  result.summary = {{"kind", "cover-time"},
                    {"config", config_to_json(c)},
                    {"horizon", horizon},
                    {"dt", dt},
                    {"identity_checks", total},
                    {"identity_agreements", agree},
                    {"per_epsilon", per_eps}};
  write_summary(result, c.out / "cover-time_summary.json");

  PlotSeries p;
  p.label = "P(T_eps <= s)";
  for (std::size_t k = 0; k < eps.size(); ++k) {
    const double q = static_cast<double>(covered[k]) / static_cast<double>(c.replicas);
    p.x.push_back(eps[k]);
    p.y.push_back(q);
    p.err.push_back(std::sqrt(q * (1.0 - q) / static_cast<double>(c.replicas)));
  }
  PlotSpec spec;
  spec.title = "Coverage by time s = " + tick_label(horizon) + ", m = " + std::to_string(c.m);
  spec.x_label = "epsilon";
  spec.y_label = "fraction covered";
  const fs::path svg = c.out / "cover-time.svg";
  emit_plot({p}, spec, svg);
  result.files.push_back(svg);
  return result;
}

RunResult run_capacity(const ExperimentConfig& c) {
  RunResult result;
  CsvTable table({"shape", "m", "s", "delta", "walkers", "replica", "cap", "cap_se", "r_launch", "r_out", "seed"});
  json rows = json::array();
  PlotSeries p;
  p.label = c.shape;
  PlotSpec spec;
  spec.title = "Capacity (" + c.shape + ")";
  spec.x_label = c.shape == "path" ? "s" : (c.shape == "ball" ? "radius" : "length");
  spec.y_label = "capacity";
  for (double s : c.s_list) {
    if (c.shape == "path") {
      PathCapacityConfig cfg;
      if (c.dt) cfg.dt = *c.dt;
      else if (c.delta) cfg.dt = *c.delta * *c.delta / kVariancePerUnitTime;
      if (c.delta) cfg.delta_factor = *c.delta / std::sqrt(kVariancePerUnitTime * cfg.dt);
      cfg.walk.walkers = c.walkers;
      cfg.walk.seed = c.seed;
      cfg.walk.threads = c.threads;
      cfg.walk.purpose = point_purpose("capacity/path", s, 0.0);
      const CapacityMoments mom = capacity_moments(s, c.replicas, cfg);
      for (std::size_t r = 0; r < mom.per_path.size(); ++r) {
        table.add({c.shape, "3", num(s), num(mom.delta), num(c.walkers), num(r), num(mom.per_path[r]), "", "", "",
                   num(c.seed, 0)});
      }
      rows.push_back({{"s", s},
                      {"dt", mom.dt},
                      {"delta", mom.delta},
                      {"paths", mom.replicas},
                      {"C1", mom.moment[0]},
                      {"C1_se", mom.moment_se[0]},
                      {"C2", mom.moment[1]},
                      {"C2_se", mom.moment_se[1]},
                      {"C3", mom.moment[2]},
                      {"C3_se", mom.moment_se[2]}});
      p.x.push_back(s);
      p.y.push_back(mom.moment[0]);
      p.err.push_back(mom.moment_se[0]);
      continue;
    }
    CapacityConfig cfg;
    cfg.walkers = c.walkers;
    cfg.seed = c.seed;
    cfg.threads = c.threads;
    cfg.purpose = point_purpose("capacity/shape", s, 0.0);
    CapacityEstimate e;
    json row;
    if (c.shape == "ball") {
      cfg.delta = c.delta.value_or(1e-3 * s);
      cfg.launch_factor = 2.0;
      e = capacity(BallObstacle({0.0, 0.0, 0.0}, s), cfg);
      const double theory = 4.0 * std::numbers::pi * s;
      row = {{"radius", s}, {"theory", theory}, {"relative_deviation", (e.cap_mean - theory) / theory}};
      spec.theory = [](double r) { return 4.0 * std::numbers::pi * r; };
      spec.theory_label = "4 pi r";
    } else {
      cfg.delta = c.delta.value_or(1e-3);
      const auto seg = make_segment(s, 2.5 * cfg.delta);
      e = capacity(*seg, cfg);
      row = {{"length", s}, {"fraction_of_unit_ball", e.cap_mean / (4.0 * std::numbers::pi)}};
    }
    row["cap"] = e.cap_mean;
    row["cap_se"] = e.cap_se;
    row["delta"] = e.delta;
    row["walkers"] = e.walkers;
    row["starved"] = e.starved;
    rows.push_back(row);
    table.add({c.shape, "3", num(s), num(e.delta), num(e.walkers), "0", num(e.cap_mean), num(e.cap_se),
               num(e.r_launch), num(e.r_out), num(c.seed, 0)});
    p.x.push_back(s);
    p.y.push_back(e.cap_mean);
    p.err.push_back(e.cap_se);
  }
  const fs::path csv = c.out / "capacity.csv";
  table.write(csv);
  result.files.push_back(csv);
  result.summary = {{"kind", "capacity"}, {"config", config_to_json(c)}, {"shape", c.shape}, {"rows", rows}};
  write_summary(result, c.out / "capacity_summary.json");
  const fs::path svg = c.out / "capacity.svg";
  emit_plot({p}, spec, svg);
  result.files.push_back(svg);
  return result;
}

ProbeTable probe_rows(const ExperimentConfig& c) {
  ProbeConfig cfg;
  cfg.g = c.g;
  cfg.dt = c.dt.value_or(0.0);
  cfg.seed = c.seed;
  cfg.threads = c.threads;
  cfg.spectral.tol = c.tol;
  return conjecture_probe(c.m, c.s_list, c.replicas, cfg);
}

RunResult run_spectrum(const ExperimentConfig& c) {
  RunResult result;
  result.summary = {{"kind", "spectrum"}, {"config", config_to_json(c)}};
  if (!c.s_list.empty()) {
    const ProbeTable t = probe_rows(c);
    CsvTable table({"m", "s", "g", "replica", "rho", "lambda1", "residual", "seed"});
    for (const auto& r : t.rows) {
      table.add({num(r.m), num(r.s), num(r.g), num(r.replica), num(r.rho), num(r.lambda1), num(r.residual),
                 num(r.seed, 0)});
    }
    const fs::path csv = c.out / "spectrum.csv";
    table.write(csv);
    result.files.push_back(csv);
    json rows = json::array();
    PlotSeries p;
    p.label = "mean lambda1";
    for (const auto& s : t.summary) {
      rows.push_back({{"s", s.s}, {"mean_lambda1", s.mean_lambda1}});
      p.x.push_back(s.s);
      p.y.push_back(s.mean_lambda1);
    }
    result.summary["path_obstacles"] = rows;
    PlotSpec spec;
    spec.title = "Smallest Dirichlet eigenvalue off the path, m = " + std::to_string(c.m);
    spec.x_label = "s";
    spec.y_label = "lambda1";
    spec.log_x = spec.log_y = true;
    const fs::path svg = c.out / "spectrum.svg";
    emit_plot({p}, spec, svg);
    result.files.push_back(svg);
  }
  if (!c.eps_list.empty()) {
    SpectralOptions o;
    o.tol = c.tol;
    o.seed = c.seed;
    const auto rows = eigen_smallball_curve(c.m, c.eps_list, c.g, o);
    CsvTable table({"m", "epsilon", "g", "lambda1", "theory", "relative_deviation", "residual", "voxels", "seed"});
    json js = json::array();
    PlotSeries p;
    p.label = "lambda1, g = " + std::to_string(c.g);
    for (const auto& r : rows) {
      table.add({num(c.m), num(r.eps), num(r.g), num(r.lambda1), num(r.theory), num(r.relative_deviation),
                 num(r.residual), num(r.voxels), num(c.seed, 0)});
      js.push_back({{"epsilon", r.eps},
                    {"lambda1", r.lambda1},
                    {"theory", r.theory},
                    {"relative_deviation", r.relative_deviation}});
      p.x.push_back(r.eps);
      p.y.push_back(r.lambda1);
    }
    const fs::path csv = c.out / "spectrum_smallball.csv";
    table.write(csv);
    result.files.push_back(csv);
    result.summary["small_ball"] = js;
    PlotSpec spec;
    spec.title = "Small-ball eigenvalue, m = " + std::to_string(c.m);
    spec.x_label = "epsilon";
    spec.y_label = "lambda1";
    const int m = c.m;
    spec.theory = [m](double e) {
      return m == 2 ? 2.0 * std::numbers::pi / std::log(1.0 / e) : unit_ball_capacity(m) * std::pow(e, m - 2);
    };
    spec.theory_label = m == 2 ? "2 pi / log(1/eps)" : "kappa_m eps^{m-2}";
    const fs::path svg = c.out / "spectrum_smallball.svg";
    emit_plot({p}, spec, svg);
    result.files.push_back(svg);
  }
  write_summary(result, c.out / "spectrum_summary.json");
  return result;
}

RunResult run_probe(const ExperimentConfig& c) {
  RunResult result;
  const ProbeTable t = probe_rows(c);
  CsvTable table({"m", "s", "g", "replica", "rho", "lambda1", "residual", "ratio", "seed"});
  for (const auto& r : t.rows) {
    table.add({num(r.m), num(r.s), num(r.g), num(r.replica), num(r.rho), num(r.lambda1), num(r.residual), num(r.ratio),
               num(r.seed, 0)});
  }
  const fs::path csv = c.out / "probe_conjectures.csv";
  table.write(csv);
  result.files.push_back(csv);
  json rows = json::array();
  PlotSeries ratio, normalized;
  ratio.label = "median lambda1 rho^2 / pi^2 (bars: interquartile half-width)";
  normalized.label = c.m == 3 ? "(log s / s)^2 mean lambda1" : "s^{-1/2} log mean lambda1";
  for (const auto& s : t.summary) {
    rows.push_back({{"s", s.s},
                    {"mean_lambda1", s.mean_lambda1},
                    {"median_ratio", s.median_ratio},
                    {"ratio_q1", s.ratio_q1},
                    {"ratio_q3", s.ratio_q3},
                    {"normalized", s.normalized},
                    {"conjectured_value", s.conjectured}});
    ratio.x.push_back(s.s);
    ratio.y.push_back(s.median_ratio);
    ratio.err.push_back(0.5 * (s.ratio_q3 - s.ratio_q1));
    normalized.x.push_back(s.s);
    normalized.y.push_back(s.normalized);
  }
  result.summary = {{"kind", "conjecture-probe"},
                    {"status", "PROBE: conjectural constants, reported only and never gated"},
                    {"config", config_to_json(c)},
                    {"rows", rows}};
  write_summary(result, c.out / "probe_summary.json");

  PlotSpec rs;
  rs.title = "PROBE: lambda1 rho^2 / pi^2 per trajectory, m = " + std::to_string(c.m);
  rs.x_label = "s";
  rs.y_label = "ratio";
  rs.log_x = true;
  const fs::path svg1 = c.out / "probe_ratio.svg";
  emit_plot({ratio}, rs, svg1);
  result.files.push_back(svg1);

  PlotSpec ns;
  ns.title = "PROBE: normalized mean eigenvalue, m = " + std::to_string(c.m);
  ns.x_label = "s";
  ns.y_label = "normalized";
  ns.log_x = true;
  const double conj = t.summary.front().conjectured;
  ns.theory = [conj](double) { return conj; };
  ns.theory_label = "conjectured value (not a theorem)";
  const fs::path svg2 = c.out / "probe_normalized.svg";
  emit_plot({normalized}, ns, svg2);
  result.files.push_back(svg2);
  return result;
}

}  // namespace

std::string kind_name(ExperimentKind kind) {
  for (const auto& [name, k] : kind_table())
    if (k == kind) return name;
  throw std::invalid_argument("unknown experiment kind");
}

ExperimentKind kind_from_name(const std::string& name) {
  auto it = kind_table().find(name);
  if (it == kind_table().end()) throw std::invalid_argument("unknown experiment kind '" + name + "'");
  return it->second;
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
  static const std::vector<std::string> known = {"kind",     "m",     "s_list", "t_list", "eps_list", "replicas",
                                                 "walkers",  "dt",    "h",      "delta",  "g",        "shape",
                                                 "tol",      "seed",  "threads", "out"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw std::invalid_argument("config: unknown key '" + key + "'");
    }
  }
  ExperimentConfig c;
  try {
    if (!j.contains("kind")) throw std::invalid_argument("config: 'kind' is required");
    c.kind = kind_from_name(j.at("kind").get<std::string>());
    if (j.contains("m")) c.m = j.at("m").get<int>();
    if (j.contains("s_list")) c.s_list = j.at("s_list").get<std::vector<double>>();
    if (j.contains("t_list")) c.t_list = j.at("t_list").get<std::vector<double>>();
    if (j.contains("eps_list")) c.eps_list = j.at("eps_list").get<std::vector<double>>();
    if (j.contains("replicas")) c.replicas = j.at("replicas").get<std::size_t>();
    if (j.contains("walkers")) c.walkers = j.at("walkers").get<std::size_t>();
    if (j.contains("dt")) c.dt = j.at("dt").get<double>();
    if (j.contains("h")) c.h = j.at("h").get<double>();
    if (j.contains("delta")) c.delta = j.at("delta").get<double>();
    if (j.contains("g")) c.g = j.at("g").get<int>();
    if (j.contains("shape")) c.shape = j.at("shape").get<std::string>();
    if (j.contains("tol")) c.tol = j.at("tol").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("threads")) c.threads = j.at("threads").get<unsigned>();
    if (j.contains("out")) c.out = j.at("out").get<std::string>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j = {{"kind", kind_name(c.kind)}, {"m", c.m},         {"s_list", c.s_list}, {"t_list", c.t_list},
            {"eps_list", c.eps_list},    {"replicas", c.replicas}, {"walkers", c.walkers}, {"g", c.g},
            {"shape", c.shape},          {"tol", c.tol},     {"seed", c.seed}};
  if (c.dt) j["dt"] = *c.dt;
  if (c.h) j["h"] = *c.h;
  if (c.delta) j["delta"] = *c.delta;
  return j;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void validate(const ExperimentConfig& c) {
  auto fail = [](const std::string& why) { throw std::invalid_argument("invalid config: " + why); };
  auto positive_list = [&](const std::vector<double>& v, const char* name) {
    if (v.empty()) fail(std::string(name) + " must be nonempty");
    for (double x : v)
      if (!(x > 0.0) || !std::isfinite(x)) fail(std::string(name) + " entries must be positive");
  };
  if (c.replicas == 0) fail("replicas must be positive");
  if (c.walkers == 0) fail("walkers must be positive");
  if (c.dt && !(*c.dt > 0.0)) fail("dt must be positive");
  if (c.h && !(*c.h > 0.0)) fail("h must be positive");
  if (c.delta && !(*c.delta > 0.0)) fail("delta must be positive");
  if (!(c.tol > 0.0)) fail("tol must be positive");
  if (c.threads == 0) fail("threads must be positive");
  switch (c.kind) {
    case ExperimentKind::heat_content:
      if (c.m < 1 || c.m > 8) fail("heat-content needs 1 <= m <= 8");
      positive_list(c.s_list, "s_list");
      positive_list(c.t_list, "t_list");
      break;
    case ExperimentKind::inradius:
      if (c.m < 2 || c.m > 8) fail("inradius needs 2 <= m <= 8");
      if (c.g < 2) fail("g must be at least 2");
      positive_list(c.s_list, "s_list");
      if (!std::is_sorted(c.s_list.begin(), c.s_list.end()) ||
          std::adjacent_find(c.s_list.begin(), c.s_list.end()) != c.s_list.end()) {
        fail("s_list must be strictly increasing");
      }
      break;
    case ExperimentKind::cover_time:
      if (c.m < 1 || c.m > 8) fail("cover-time needs 1 <= m <= 8");
      if (c.g < 2) fail("g must be at least 2");
      positive_list(c.s_list, "s_list");
      positive_list(c.eps_list, "eps_list");
      break;
    case ExperimentKind::capacity:
      if (c.m != 3) fail("capacity is implemented for m = 3");
      if (c.shape != "ball" && c.shape != "segment" && c.shape != "path") fail("shape must be ball, segment or path");
      positive_list(c.s_list, "s_list");
      if (c.shape == "path" && c.replicas < 2) fail("path capacity needs at least 2 replicas");
      if (c.shape == "path" && c.walkers < 3) fail("path capacity needs at least 3 walkers");
      break;
    case ExperimentKind::spectrum:
      if (c.m < 2 || c.m > 3) fail("spectrum needs m = 2 or 3");
      if (c.g < 3) fail("g must be at least 3");
      if (c.s_list.empty() && c.eps_list.empty()) fail("spectrum needs s_list or eps_list");
      if (!c.s_list.empty()) positive_list(c.s_list, "s_list");
      if (!c.eps_list.empty()) positive_list(c.eps_list, "eps_list");
      break;
    case ExperimentKind::conjecture_probe:
      if (c.m < 2 || c.m > 3) fail("conjecture-probe needs m = 2 or 3");
      if (c.g < 3) fail("g must be at least 3");
      positive_list(c.s_list, "s_list");
      if (!std::is_sorted(c.s_list.begin(), c.s_list.end())) fail("s_list must be increasing");
      break;
  }
}

RunResult run(const ExperimentConfig& c) {
  validate(c);
  fs::create_directories(c.out);
  switch (c.kind) {
    case ExperimentKind::heat_content: return run_heat_content(c);
    case ExperimentKind::inradius: return run_inradius(c);
    case ExperimentKind::cover_time: return run_cover_time(c);
    case ExperimentKind::capacity: return run_capacity(c);
    case ExperimentKind::spectrum: return run_spectrum(c);
    case ExperimentKind::conjecture_probe: return run_probe(c);
  }
  throw std::logic_error("unhandled experiment kind");
}

// ---------------------------------------------------------------------------
// Fits.

std::string model_name(FitModel model) {
  switch (model) {
    case FitModel::constant: return "constant";
    case FitModel::power: return "power";
    case FitModel::power_log: return "power+log";
    case FitModel::log_linear: return "log-linear";
  }
  return "unknown";
}

FitResult fit_power_law(std::span<const FitPoint> points, FitModel model, int m) {
  const std::size_t min_points = model == FitModel::constant ? 1 : 3;
  if (points.size() < min_points) {
    throw std::invalid_argument("fit_power_law: need at least " + std::to_string(min_points) + " points");
  }
  std::vector<double> design, y, sigma;
  std::size_t columns = 1;
  for (const FitPoint& p : points) {
    if (!(p.sigma > 0.0)) throw std::invalid_argument("fit_power_law: sigma must be positive");
    switch (model) {
      case FitModel::constant:
        design.push_back(1.0);
        y.push_back(p.y);
        sigma.push_back(p.sigma);
        break;
      case FitModel::power:
        if (!(p.x > 0.0 && p.y > 0.0)) throw std::invalid_argument("fit_power_law: power model needs x, y > 0");
        columns = 2;
        design.insert(design.end(), {1.0, std::log(p.x)});
        y.push_back(std::log(p.y));
        sigma.push_back(p.sigma / p.y);
        break;
      case FitModel::power_log: {
        if (m < 3) throw std::invalid_argument("fit_power_law: leveled model needs m >= 3");
        if (!(p.x > 1.0)) throw std::invalid_argument("fit_power_law: leveled model needs x > 1");
        const double f = std::pow(p.x / std::log(p.x), 1.0 / (m - 2));
        design.push_back(1.0);
        y.push_back(p.y * f);
        sigma.push_back(p.sigma * f);
        break;
      }
      case FitModel::log_linear:
        if (!(p.x >= 0.0 && p.y > 0.0)) throw std::invalid_argument("fit_power_law: log-linear model needs y > 0");
        columns = 2;
        design.insert(design.end(), {1.0, std::sqrt(p.x)});
        y.push_back(std::log(p.y));
        sigma.push_back(p.sigma / p.y);
        break;
    }
  }
  const LinearFit lf = weighted_least_squares(design, columns, y, sigma);
  FitResult f;
  f.model = model_name(model);
  f.points = points.size();
  f.coef = lf.coef;
  f.coef_se = lf.coef_se;
  f.chi2_per_dof = lf.dof > 0 ? lf.chi2 / static_cast<double>(lf.dof) : 0.0;
  switch (model) {
    case FitModel::constant: f.names = {"constant"}; break;
    case FitModel::power:
      f.names = {"prefactor", "exponent"};
      f.coef[0] = std::exp(lf.coef[0]);
      f.coef_se[0] = f.coef[0] * lf.coef_se[0];
      break;
    case FitModel::power_log:
      f.names = {"constant"};
      attach_theory(f, 0, std::pow(m / ((m - 2) * unit_ball_capacity(m)), 1.0 / (m - 2)));
      break;
    case FitModel::log_linear:
      f.names = {"intercept", "slope"};
      if (m == 2) attach_theory(f, 1, -std::sqrt(std::numbers::pi));
      break;
  }
  return f;
}

void attach_theory(FitResult& fit, std::size_t index, double value) {
  if (index >= fit.coef.size()) throw std::invalid_argument("attach_theory: no such coefficient");
  fit.theory = value;
  fit.theory_index = index;
  fit.relative_deviation = (fit.coef[index] - value) / std::abs(value);
}

json fit_to_json(const FitResult& fit) {
  json j = {{"model", fit.model}, {"chi2_per_dof", fit.chi2_per_dof}, {"points", fit.points}};
  json coefs = json::array();
  for (std::size_t i = 0; i < fit.coef.size(); ++i) {
    coefs.push_back({{"name", fit.names[i]}, {"value", fit.coef[i]}, {"se", fit.coef_se[i]}});
  }
  j["coefficients"] = coefs;
  if (fit.theory) {
    j["theory"] = {{"coefficient", fit.names[fit.theory_index]},
                   {"value", *fit.theory},
                   {"relative_deviation", *fit.relative_deviation}};
  }
  return j;
}

// ---------------------------------------------------------------------------
// Output.

std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvTable::add(std::vector<std::string> row) {
  if (row.size() != header_.size()) throw std::invalid_argument("CsvTable: row width differs from header");
  rows_.push_back(std::move(row));
}

std::string CsvTable::str() const {
  auto field = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << field(r[i]);
    out << '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out.str();
}

void CsvTable::write(const fs::path& file) const { write_text(file, str()); }

std::string render_svg(const std::vector<PlotSeries>& series, const PlotSpec& spec) {
  std::size_t count = 0;
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo, y_lo = x_lo, y_hi = -x_lo;
  auto tx = [&](double x) { return spec.log_x ? std::log10(x) : x; };
  auto ty = [&](double y) { return spec.log_y ? std::log10(y) : y; };
  auto usable = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!spec.log_x || x > 0.0) && (!spec.log_y || y > 0.0);
  };
  for (const auto& s : series) {
    if (s.x.size() != s.y.size() || (!s.err.empty() && s.err.size() != s.y.size())) {
      throw std::invalid_argument("render_svg: series columns differ in length");
    }
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!usable(s.x[i], s.y[i])) continue;
      ++count;
      x_lo = std::min(x_lo, tx(s.x[i]));
      x_hi = std::max(x_hi, tx(s.x[i]));
      const double e = s.err.empty() || !std::isfinite(s.err[i]) ? 0.0 : s.err[i];
      const double lo = spec.log_y && s.y[i] - e <= 0.0 ? s.y[i] : s.y[i] - e;
      y_lo = std::min(y_lo, ty(lo));
      y_hi = std::max(y_hi, ty(s.y[i] + e));
    }
  }
  if (count == 0) throw std::invalid_argument("render_svg: empty table");
  std::vector<std::pair<double, double>> curve;
  if (spec.theory) {
    for (int i = 0; i <= 200; ++i) {
      const double u = x_lo + (x_hi - x_lo) * i / 200.0;
      const double x = spec.log_x ? std::pow(10.0, u) : u;
      const double y = spec.theory(x);
      if (!usable(x, y)) continue;
      curve.emplace_back(u, ty(y));
      y_lo = std::min(y_lo, ty(y));
      y_hi = std::max(y_hi, ty(y));
    }
  }
  if (x_hi - x_lo < 1e-12) {
    x_lo -= 0.5;
    x_hi += 0.5;
  }
  if (y_hi - y_lo < 1e-12) {
    y_lo -= 0.5;
    y_hi += 0.5;
  }
  const double pad_y = 0.05 * (y_hi - y_lo);
  y_lo -= pad_y;
  y_hi += pad_y;
  const double W = 640, H = 420, left = 70, right = 20, top = 40, bottom = 60;
  auto px = [&](double u) { return left + (u - x_lo) / (x_hi - x_lo) * (W - left - right); };
  auto py = [&](double v) { return H - bottom - (v - y_lo) / (y_hi - y_lo) * (H - top - bottom); };
  static const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(spec.title)
    << "</text>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << H - bottom << "\" x2=\"" << W - right << "\" y2=\"" << H - bottom
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << H - bottom
    << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double u = x_lo + (x_hi - x_lo) * i / 4.0, v = y_lo + (y_hi - y_lo) * i / 4.0;
    o << "<text x=\"" << fixed(px(u)) << "\" y=\"" << H - bottom + 16 << "\" text-anchor=\"middle\">"
      << tick_label(spec.log_x ? std::pow(10.0, u) : u) << "</text>\n";
    o << "<text x=\"" << left - 6 << "\" y=\"" << fixed(py(v) + 4) << "\" text-anchor=\"end\">"
      << tick_label(spec.log_y ? std::pow(10.0, v) : v) << "</text>\n";
  }
  o << "<text x=\"" << W / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">"
    << xml_escape(spec.x_label + (spec.log_x ? " (log scale)" : "")) << "</text>\n";
  o << "<text transform=\"translate(16," << H / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << xml_escape(spec.y_label + (spec.log_y ? " (log scale)" : "")) << "</text>\n";
  if (!curve.empty()) {
    o << "<polyline fill=\"none\" stroke=\"#555555\" stroke-dasharray=\"6,4\" points=\"";
    for (std::size_t i = 0; i < curve.size(); ++i) {
      o << (i ? " " : "") << fixed(px(curve[i].first)) << ',' << fixed(py(curve[i].second));
    }
    o << "\"/>\n";
  }
  double legend_y = top + 8;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* colour = colours[k % 6];
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!usable(s.x[i], s.y[i])) continue;
      const double cx = px(tx(s.x[i])), cy = py(ty(s.y[i]));
      if (!s.err.empty() && std::isfinite(s.err[i]) && s.err[i] > 0.0) {
        const double lo = spec.log_y && s.y[i] - s.err[i] <= 0.0 ? s.y[i] : s.y[i] - s.err[i];
        o << "<line x1=\"" << fixed(cx) << "\" y1=\"" << fixed(py(ty(lo))) << "\" x2=\"" << fixed(cx) << "\" y2=\""
          << fixed(py(ty(s.y[i] + s.err[i]))) << "\" stroke=\"" << colour << "\"/>\n";
      }
      o << "<circle cx=\"" << fixed(cx) << "\" cy=\"" << fixed(cy) << "\" r=\"3.5\" fill=\"" << colour << "\"/>\n";
    }
    o << "<circle cx=\"" << W - right - 230 << "\" cy=\"" << fixed(legend_y - 4) << "\" r=\"3.5\" fill=\"" << colour
      << "\"/><text x=\"" << W - right - 222 << "\" y=\"" << fixed(legend_y) << "\">" << xml_escape(s.label)
      << "</text>\n";
    legend_y += 16;
  }
  if (!curve.empty()) {
    o << "<line x1=\"" << W - right - 236 << "\" y1=\"" << fixed(legend_y - 4) << "\" x2=\"" << W - right - 224
      << "\" y2=\"" << fixed(legend_y - 4) << "\" stroke=\"#555555\" stroke-dasharray=\"6,4\"/><text x=\""
      << W - right - 222 << "\" y=\"" << fixed(legend_y) << "\">" << xml_escape(spec.theory_label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

void emit_plot(const std::vector<PlotSeries>& series, const PlotSpec& spec, const fs::path& file) {
  write_text(file, render_svg(series, spec));
}

}  // namespace brownlab
