// Command-line front end: one subcommand per experiment, plus a quick selftest.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "brownlab/harness.hpp"
#include "brownlab/potential.hpp"
#include "brownlab/sausage.hpp"
#include "brownlab/spectral.hpp"
#include "brownlab/stats.hpp"

using namespace brownlab;
using nlohmann::json;

namespace {

struct Flags {
  std::string config;
  std::uint64_t seed = 1;
  std::size_t replicas = 100;
  std::size_t walkers = 100000;
  std::string out = "out";
  unsigned threads = 1;
  int m = 3;
  std::vector<double> s, t, eps;
  double dt = 0.0, h = 0.0, delta = 0.0, tol = 1e-6;
  int g = 64;
  std::string shape = "path";
};

struct Command {
  CLI::App* app;
  ExperimentKind kind;
};

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "JSON config; flags given on the command line override it");
  app->add_option("--seed", f.seed, "master seed");
  app->add_option("--replicas", f.replicas, "independent replicas");
  app->add_option("--out", f.out, "output directory");
  app->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
  app->add_option("--m", f.m, "dimension");
}

bool given(const CLI::App* app, const std::string& name) {
  try {
    return app->get_option(name)->count() > 0;
  } catch (const CLI::OptionNotFound&) {
    return false;
  }
}

ExperimentConfig build_config(const CLI::App* app, ExperimentKind kind, const Flags& f) {
  ExperimentConfig c;
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw std::runtime_error("cannot read config " + f.config);
    json j = json::parse(in);
    if (!j.contains("kind")) j["kind"] = kind_name(kind);
    c = config_from_json(j);
    if (c.kind != kind) {
      throw std::invalid_argument("config kind '" + kind_name(c.kind) + "' does not match subcommand '" +
                                  kind_name(kind) + "'");
    }
  }
  c.kind = kind;
  if (given(app, "--seed")) c.seed = f.seed;
  if (given(app, "--replicas")) c.replicas = f.replicas;
  if (given(app, "--walkers")) c.walkers = f.walkers;
  if (given(app, "--out") || f.config.empty()) c.out = f.out;
  if (given(app, "--threads")) c.threads = f.threads;
  if (given(app, "--m")) c.m = f.m;
  if (given(app, "--s")) c.s_list = f.s;
  if (given(app, "--t")) c.t_list = f.t;
  if (given(app, "--eps")) c.eps_list = f.eps;
  if (given(app, "--dt")) c.dt = f.dt;
  if (given(app, "--grid-h")) c.h = f.h;
  if (given(app, "--delta")) c.delta = f.delta;
  if (given(app, "--grid") || given(app, "--g")) c.g = f.g;
  if (given(app, "--tol")) c.tol = f.tol;
  if (given(app, "--shape")) c.shape = f.shape;
  return c;
}

// Quick end-to-end checks against closed forms; each prints one line.
int selftest() {
  int failures = 0;
  auto report = [&](const std::string& name, bool ok, const std::string& detail) {
    std::printf("%s %-34s %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    failures += !ok;
  };
  char buf[256];

  {
    const GridOperator op(2, 32, slab_obstacle(2, 32));
    const double lam = smallest_eigenvalue(op).lambda1;
    const double exact = 4.0 * 32 * 32 * std::pow(std::sin(std::numbers::pi / 64.0), 2);
    std::snprintf(buf, sizeof buf, "lambda1 %.10g, discrete exact %.10g", lam, exact);
    report("slab eigenvalue", std::abs(lam - exact) < 1e-6 * exact, buf);
  }
  {
    CapacityConfig cfg;
    cfg.walkers = 20000;
    cfg.launch_factor = 2.0;
    const CapacityEstimate e = capacity(BallObstacle({0, 0, 0}, 1.0), cfg);
    const double exact = 4.0 * std::numbers::pi * (1.0 + cfg.delta);
    std::snprintf(buf, sizeof buf, "cap %.4f +- %.4f, exact %.4f", e.cap_mean, e.cap_se, exact);
    report("unit ball capacity", std::abs(e.cap_mean - exact) < 4.0 * e.cap_se, buf);
  }
  {
    HeatContentOptions o;
    const ScaledGrid grid{0.2};
    o.purpose = 11;
    const MCEstimate a = estimate_heat_content(3, 0.5, 1.0, 100, grid.dt(0.5, 1.0), grid.h(0.5, 1.0), o);
    o.purpose = 12;
    const MCEstimate b = estimate_heat_content(3, 1.0, 0.5, 100, grid.dt(1.0, 0.5), grid.h(1.0, 0.5), o);
    const double z = z_score(a.mean, a.std_error, b.mean, b.std_error);
    std::snprintf(buf, sizeof buf, "E(0.5,1) %.4f, E(1,0.5) %.4f, z %.2f", a.mean, b.mean, z);
    report("heat content duality", z < 4.0, buf);
  }
  {
    // Row of 5 cells plus an L of 4 cells: rows of 6, 5 and 5 cells.
    const VoxelSet a = make_voxel_set(2, 1.0, false, 0, {0, 0, 1, 0, 2, 0, 3, 0, 4, 0});
    const VoxelSet b = make_voxel_set(2, 1.0, false, 0, {0, 0, 1, 0, 0, 1, 0, 2});
    const double ab = sumset_volume(a, b), ba = sumset_volume(b, a);
    std::snprintf(buf, sizeof buf, "|A+B| %g, |B+A| %g, expected 16", ab, ba);
    report("sumset count and symmetry", ab == 16.0 && ba == 16.0, buf);
  }
  std::printf("%s\n", failures == 0 ? "selftest passed" : "selftest FAILED");
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo experiments on Brownian paths and sausages"};
  app.require_subcommand(1);
  Flags f;
  std::vector<Command> commands;

  auto* heat = app.add_subcommand("heat-content", "expected heat content E(s,t) of the path complement");
  add_common(heat, f);
  heat->add_option("--s", f.s, "path durations")->expected(1, -1);
  heat->add_option("--t", f.t, "heat times")->expected(1, -1);
  heat->add_option("--dt", f.dt, "time step");
  heat->add_option("--grid-h", f.h, "voxel size");
  commands.push_back({heat, ExperimentKind::heat_content});

  auto* inr = app.add_subcommand("inradius", "inradius of the torus complement along the path");
  add_common(inr, f);
  inr->add_option("--s", f.s, "increasing path durations")->expected(1, -1);
  inr->add_option("--g,--grid", f.g, "grid points per side");
  inr->add_option("--dt", f.dt, "time step");
  commands.push_back({inr, ExperimentKind::inradius});

  auto* cover = app.add_subcommand("cover-time", "epsilon cover times of the torus");
  add_common(cover, f);
  cover->add_option("--s", f.s, "path duration (largest value used)")->expected(1, -1);
  cover->add_option("--eps", f.eps, "cover radii")->expected(1, -1);
  cover->add_option("--g,--grid", f.g, "grid points per side");
  cover->add_option("--dt", f.dt, "time step");
  commands.push_back({cover, ExperimentKind::cover_time});

  auto* cap = app.add_subcommand("capacity", "Newtonian capacity by walk on spheres (m = 3)");
  add_common(cap, f);
  cap->add_option("--shape", f.shape, "ball | segment | path")->check(CLI::IsMember({"ball", "segment", "path"}));
  cap->add_option("--s", f.s, "radius, length or path duration")->expected(1, -1);
  cap->add_option("--delta", f.delta, "absorption distance");
  cap->add_option("--walkers", f.walkers, "walkers per obstacle");
  cap->add_option("--dt", f.dt, "path time step");
  commands.push_back({cap, ExperimentKind::capacity});

  auto* spec = app.add_subcommand("spectrum", "smallest Dirichlet eigenvalue off an obstacle");
  add_common(spec, f);
  spec->add_option("--s", f.s, "path durations")->expected(1, -1);
  spec->add_option("--eps", f.eps, "small-ball radii")->expected(1, -1);
  spec->add_option("--grid,--g", f.g, "grid points per side");
  spec->add_option("--tol", f.tol, "relative residual tolerance");
  spec->add_option("--dt", f.dt, "time step");
  commands.push_back({spec, ExperimentKind::spectrum});

  auto* probe = app.add_subcommand("probe-conjectures", "report-only probe of conjectural eigenvalue constants");
  add_common(probe, f);
  probe->add_option("--s", f.s, "path durations")->expected(1, -1);
  probe->add_option("--grid,--g", f.g, "grid points per side");
  probe->add_option("--tol", f.tol, "relative residual tolerance");
  probe->add_option("--dt", f.dt, "time step");
  commands.push_back({probe, ExperimentKind::conjecture_probe});

  auto* self = app.add_subcommand("selftest", "quick checks against closed forms");

  CLI11_PARSE(app, argc, argv);
  try {
    if (self->parsed()) return selftest();
    for (const auto& cmd : commands) {
      if (!cmd.app->parsed()) continue;
      const ExperimentConfig c = build_config(cmd.app, cmd.kind, f);
      const RunResult r = run(c);
      for (const auto& file : r.files) std::cout << file.string() << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
