#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "brownlab/harness.hpp"
#include "doctest.h"

using namespace brownlab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("brownlab_test_harness_" + name);
  fs::remove_all(dir);
  return dir;
}

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("csv numbers are the shortest text that round-trips") {
  CHECK(csv_number(0.1) == "0.1");
  CHECK(csv_number(2.0) == "2");
  CHECK(csv_number(-1.5e-7) == "-1.5e-07");
  CHECK(csv_number(std::nan("")) == "nan");
  CHECK(csv_number(-INFINITY) == "-inf");
  for (double v : {1.0 / 3.0, std::numbers::pi, 1e-300, 6.02214076e23, 0.30000000000000004}) {
    CHECK(std::strtod(csv_number(v).c_str(), nullptr) == v);
  }
}

TEST_CASE("csv table quotes fields and checks row width") {
  CsvTable t({"a", "b"});
  t.add({"1", "x,y"});
  t.add({"say \"hi\"", ""});
  CHECK(t.str() == "a,b\n1,\"x,y\"\n\"say \"\"hi\"\"\",\n");
  CHECK_THROWS_AS(t.add({"only one"}), std::invalid_argument);
  CHECK(t.rows() == 2);
}

TEST_CASE("constant model recovers a constant exactly") {
  std::vector<FitPoint> pts = {{1, 4.25, 0.1}, {2, 4.25, 0.2}, {3, 4.25, 0.3}};
  const FitResult f = fit_power_law(pts, FitModel::constant);
  CHECK(f.coef[0] == doctest::Approx(4.25).epsilon(1e-14));
  CHECK(f.chi2_per_dof == doctest::Approx(0.0).epsilon(1e-20));
  CHECK_FALSE(f.theory.has_value());
  const std::vector<FitPoint> one = {{1, 2.0, 0.5}};
  CHECK(fit_power_law(one, FitModel::constant).coef_se[0] == doctest::Approx(0.5));
}

TEST_CASE("leveled inradius model recovers its constant and attaches the limit") {
  const double k = 3.0 / (4.0 * std::numbers::pi);
  std::vector<FitPoint> pts;
  for (double s : {4.0, 16.0, 64.0, 256.0}) pts.push_back({s, k * std::log(s) / s, 1e-4 * std::log(s) / s});
  const FitResult f = fit_power_law(pts, FitModel::power_log, 3);
  CHECK(f.coef[0] == doctest::Approx(0.2387).epsilon(2e-4));
  REQUIRE(f.theory.has_value());
  CHECK(*f.theory == doctest::Approx(k).epsilon(1e-14));
  CHECK(std::abs(*f.relative_deviation) < 1e-12);
  const json j = fit_to_json(f);
  CHECK(j["model"] == "power+log");
  CHECK(j["theory"]["coefficient"] == "constant");
}

TEST_CASE("log-linear model recovers the slope") {
  std::vector<FitPoint> pts;
  for (double s : {1.0, 4.0, 9.0, 16.0}) {
    const double y = 0.3 * std::exp(-std::sqrt(std::numbers::pi * s));
    pts.push_back({s, y, 0.01 * y});
  }
  const FitResult f = fit_power_law(pts, FitModel::log_linear, 2);
  CHECK(f.coef[1] == doctest::Approx(-1.7725).epsilon(1e-4));
  CHECK(f.coef[0] == doctest::Approx(std::log(0.3)).epsilon(1e-10));
  REQUIRE(f.theory.has_value());
  CHECK(f.theory_index == 1);
  CHECK_FALSE(fit_power_law(pts, FitModel::log_linear, 3).theory.has_value());
}

TEST_CASE("power model recovers prefactor and exponent") {
  std::vector<FitPoint> pts;
  for (double x : {0.5, 1.0, 2.0, 8.0}) pts.push_back({x, 3.0 * std::pow(x, -0.5), 0.01});
  const FitResult f = fit_power_law(pts, FitModel::power);
  CHECK(f.coef[0] == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(f.coef[1] == doctest::Approx(-0.5).epsilon(1e-10));
}

TEST_CASE("fits reject too few points and bad sigma") {
  std::vector<FitPoint> two = {{2, 1, 0.1}, {3, 1, 0.1}};
  CHECK_THROWS_AS(fit_power_law(two, FitModel::power), std::invalid_argument);
  CHECK_THROWS_AS(fit_power_law(std::vector<FitPoint>{}, FitModel::constant), std::invalid_argument);
  std::vector<FitPoint> bad = {{2, 1, 0.0}, {3, 1, 0.1}, {4, 1, 0.1}};
  CHECK_THROWS_AS(fit_power_law(bad, FitModel::power), std::invalid_argument);
  std::vector<FitPoint> small_x = {{0.5, 1, 0.1}, {3, 1, 0.1}, {4, 1, 0.1}};
  CHECK_THROWS_AS(fit_power_law(small_x, FitModel::power_log, 3), std::invalid_argument);
}

TEST_CASE("svg: empty input errors, a single point gives a valid document") {
  PlotSpec spec;
  spec.title = "t < 1 & more";
  CHECK_THROWS_AS(render_svg({}, spec), std::invalid_argument);
  CHECK_THROWS_AS(render_svg({PlotSeries{"a", {}, {}, {}}}, spec), std::invalid_argument);
  spec.log_y = true;
  CHECK_THROWS_AS(render_svg({PlotSeries{"a", {1.0}, {-1.0}, {}}}, spec), std::invalid_argument);
  const std::string svg = render_svg({PlotSeries{"a", {1.0}, {2.0}, {0.5}}}, spec);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("t &lt; 1 &amp; more") != std::string::npos);
  CHECK(count_of(svg, "<circle") == 2);  // point and legend marker
  CHECK(svg.find("nan") == std::string::npos);
}

TEST_CASE("svg draws a theory overlay and skips unusable points") {
  PlotSpec spec;
  spec.log_x = spec.log_y = true;
  spec.theory = [](double x) { return 1.0 / x; };
  spec.theory_label = "1/x";
  const std::string svg = render_svg({PlotSeries{"p", {0.0, 1.0, 10.0}, {1.0, 1.0, 0.1}, {}}}, spec);
  CHECK(count_of(svg, "<polyline") == 1);
  CHECK(count_of(svg, "<circle") == 3);
  CHECK(svg.find("1/x") != std::string::npos);
}

TEST_CASE("config parsing is strict and round-trips") {
  const json j = {{"kind", "heat-content"}, {"m", 2}, {"s_list", {1.0}}, {"t_list", {0.5}}, {"dt", 1e-3}, {"seed", 9}};
  const ExperimentConfig c = config_from_json(j);
  CHECK(c.kind == ExperimentKind::heat_content);
  CHECK(c.m == 2);
  CHECK(*c.dt == 1e-3);
  CHECK_FALSE(c.h.has_value());
  CHECK(config_from_json(config_to_json(c)).seed == 9);
  CHECK_THROWS_AS(config_from_json({{"kind", "heat-content"}, {"bogus", 1}}), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json({{"kind", "nope"}}), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json({{"kind", "inradius"}, {"m", "three"}}), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json({{"m", 3}}), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(json::array()), std::invalid_argument);
  for (const char* name : {"heat-content", "inradius", "cover-time", "capacity", "spectrum", "conjecture-probe"}) {
    CHECK(kind_name(kind_from_name(name)) == name);
  }
}

TEST_CASE("validation rejects bad configs before compute") {
  ExperimentConfig c;
  c.kind = ExperimentKind::heat_content;
  c.s_list = {1.0};
  c.t_list = {1.0};
  CHECK_NOTHROW(validate(c));
  c.t_list = {-1.0};
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c.t_list = {1.0};
  c.replicas = 0;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c.replicas = 10;
  c.m = 9;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c.kind = ExperimentKind::capacity;
  c.m = 2;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c.m = 3;
  c.shape = "cube";
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c.kind = ExperimentKind::inradius;
  c.s_list = {2.0, 1.0};
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c.kind = ExperimentKind::spectrum;
  c.s_list.clear();
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
}

TEST_CASE("heat-content run writes tables, duality rows and reruns byte-identically") {
  ExperimentConfig c;
  c.kind = ExperimentKind::heat_content;
  c.m = 3;
  c.s_list = {1.0, 2.0};
  c.t_list = {2.0, 1.0, 4.0};
  c.replicas = 12;
  c.out = scratch("heat_a");
  const RunResult a = run(c);
  REQUIRE(a.files.size() == 3);
  const std::string csv = slurp(c.out / "heat-content.csv");
  CHECK(csv.rfind("m,s,t,dt,h,replicas,mean,std_error,seed\n", 0) == 0);
  CHECK(count_of(csv, "\n") == 7);
  CHECK(a.summary["duality"].size() == 1);
  CHECK(a.summary["scaling"].size() == 2);

  ExperimentConfig again = c;
  again.out = scratch("heat_b");
  again.threads = 3;
  run(again);
  for (const char* f : {"heat-content.csv", "heat-content.svg"}) CHECK(slurp(c.out / f) == slurp(again.out / f));
  const json sa = json::parse(slurp(c.out / "heat-content_summary.json"));
  const json sb = json::parse(slurp(again.out / "heat-content_summary.json"));
  CHECK(sa["estimates"] == sb["estimates"]);
  fs::remove_all(c.out);
  fs::remove_all(again.out);
}

TEST_CASE("small runs of every kind produce their files") {
  ExperimentConfig c;
  c.m = 3;
  c.replicas = 4;
  c.seed = 5;

  c.kind = ExperimentKind::inradius;
  c.s_list = {1.5, 2.0, 3.0};
  c.g = 24;
  c.out = scratch("inradius");
  RunResult r = run(c);
  CHECK(fs::exists(c.out / "inradius.csv"));
  CHECK(fs::exists(c.out / "inradius.svg"));
  CHECK(r.summary["fit"]["model"] == "power+log");

  c.kind = ExperimentKind::cover_time;
  c.s_list = {2.0};
  c.eps_list = {0.1, 0.2, 0.4};
  c.out = scratch("cover");
  r = run(c);
  CHECK(r.summary["identity_agreements"] == r.summary["identity_checks"]);
  CHECK(r.summary["identity_checks"] == 12);

  c.kind = ExperimentKind::capacity;
  c.shape = "ball";
  c.s_list = {1.0};
  c.walkers = 4000;
  c.out = scratch("capacity");
  r = run(c);
  const double cap = r.summary["rows"][0]["cap"];
  CHECK(cap == doctest::Approx(4.0 * std::numbers::pi).epsilon(0.1));

  c.kind = ExperimentKind::spectrum;
  c.s_list = {};
  c.eps_list = {0.2};
  c.g = 12;
  c.out = scratch("spectrum");
  r = run(c);
  CHECK(fs::exists(c.out / "spectrum_smallball.csv"));
  CHECK_FALSE(fs::exists(c.out / "spectrum.csv"));

  c.kind = ExperimentKind::conjecture_probe;
  c.s_list = {0.5, 1.0};
  c.replicas = 2;
  c.out = scratch("probe");
  r = run(c);
  for (const auto& f : r.files) CHECK(f.filename().string().rfind("probe_", 0) == 0);
  CHECK(r.summary["status"].get<std::string>().find("PROBE") == 0);

  for (const char* d : {"inradius", "cover", "capacity", "spectrum", "probe"}) fs::remove_all(scratch(d));
}
