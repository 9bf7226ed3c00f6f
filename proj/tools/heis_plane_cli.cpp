// Batch verification front end: runs the library's suites and emits
// machine-readable reports (JSON, schema "heis-plane/1") and plot-ready CSV.
//
// Exit codes: 0 success, 2 tolerance failure, 3 degenerate input,
// 4 budget exhausted.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "heis/heis_core.hpp"
#include "heis/kernels.hpp"
#include "heis/quadrature.hpp"
#include "heis/reconstruct.hpp"

using namespace heis;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitTolerance = 2;
constexpr int kExitDegenerate = 3;
constexpr int kExitBudget = 4;

struct CommonOpts {
  std::uint64_t seed = kDefaultSeed;
  double budget = 1e6;
  std::string method = "adaptive";
  std::string out;
};

Method parse_method(const std::string& m) {
  if (m == "mc") return Method::MonteCarlo;
  return Method::AdaptiveProduct;
}

QuadratureSpec make_spec(const CommonOpts& c) {
  QuadratureSpec spec;
  spec.seed = c.seed;
  spec.budget = c.budget;
  spec.method = parse_method(c.method);
  return spec;
}

json config_json(const CommonOpts& c) {
  return {{"seed", c.seed}, {"budget", c.budget}, {"method", c.method}};
}

void emit(const json& report, const std::string& out) {
  if (out.empty()) {
    std::cout << report.dump(2) << "\n";
  } else {
    std::ofstream f(out);
    f << report.dump(2) << "\n";
  }
}

void emit_text(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(out);
    f << text;
  }
}

// Flat key=value configuration file: applied before flag parsing, so flags
// override the file and the file overrides built-in defaults.
void apply_config_file(const std::string& path, CommonOpts& c, long long* points) {
  std::ifstream f(path);
  if (!f) {
    std::cerr << "config: cannot open " << path << "\n";
    std::exit(kExitDegenerate);
  }
  std::string line;
  while (std::getline(f, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string v) {
      v.erase(0, v.find_first_not_of(" \t"));
      auto e = v.find_last_not_of(" \t\r");
      v.erase(e == std::string::npos ? 0 : e + 1);
      return v;
    };
    std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
    if (key == "seed") c.seed = std::stoull(val);
    else if (key == "budget") c.budget = std::stod(val);
    else if (key == "method") c.method = val;
    else if (key == "out") c.out = val;
    else if (key == "points" && points) *points = std::stoll(val);
  }
}

void add_common(CLI::App* cmd, CommonOpts& c) {
  cmd->add_option("--seed", c.seed, "random seed");
  cmd->add_option("--budget", c.budget, "evaluation/sample budget");
  cmd->add_option("--method", c.method, "mc|adaptive")->check(CLI::IsMember({"mc", "adaptive"}));
  cmd->add_option("--out", c.out, "write the report here instead of stdout");
}

// ---- constant ----

int cmd_constant(const CommonOpts& c) {
  double closed = compute_constant_closed_form();
  QuadratureSpec mc = make_spec(c);
  mc.method = Method::MonteCarlo;
  QuadratureSpec ad = make_spec(c);
  ad.method = Method::AdaptiveProduct;
  IntegralEstimate vm, va;
  try {
    vm = compute_constant(mc);
    va = compute_constant(ad);
  } catch (const BudgetExhausted&) {
    return kExitBudget;
  }
  bool methods_agree = std::fabs(vm.value - va.value) <=
                       3.0 * (vm.error_indicator + va.error_indicator);
  bool closed_agree = std::fabs(va.value - closed) <= 1e-3 * closed;
  json rep = {{"schema", "heis-plane/1"},
              {"command", "constant"},
              {"config", config_json(c)},
              {"closed_form", closed},
              {"monte_carlo",
               {{"value", vm.value}, {"error", vm.error_indicator}, {"samples", vm.samples_used}}},
              {"adaptive",
               {{"value", va.value}, {"error", va.error_indicator}, {"evals", va.samples_used}}},
              {"methods_agree_3sigma", methods_agree},
              {"closed_form_agree_1e-3", closed_agree},
              {"pinned_normalizer", gamma_normalizer()}};
  emit(rep, c.out);
  return methods_agree && closed_agree ? kExitOk : kExitTolerance;
}

// ---- identities ----

struct IdentityStats {
  double worst = 0.0;
  Vec4 witness_y{};
  double witness_z1 = 0.0;
};

int cmd_identities(const CommonOpts& c, long long points, bool inject_sign_flip) {
  Rng rng(c.seed);
  std::map<std::string, IdentityStats> stats;
  auto upd = [&](const std::string& name, double got, double want, double scale, const Vec4& y,
                 double z1) {
    double res = std::fabs(got - want) / std::max({std::fabs(want), scale, 1e-30});
    auto& s = stats[name];
    if (res > s.worst) {
      s.worst = res;
      s.witness_y = y;
      s.witness_z1 = z1;
    }
  };
  for (long long i = 0; i < points; ++i) {
    Vec4 y;
    double z1;
    while (true) {
      y = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
      z1 = rng.uniform(0.05, 2.0);
      if (norm(y) >= 1e-2 && plane_dist(y, {z1, 0, 0, 0}) >= 1e-2) break;
    }
    Vec4 z{z1, 0, 0, 0};
    RTerms r = r_terms(y, z1);
    double d4 = plane_dist4(y, z);
    Vec4 g = grad_d4_axis(y, z1);
    double r21 = inject_sign_flip ? -r.r21 : r.r21;  // negative-control fixture
    upd("gradient-square-split", dot(g, g), r.r11 + r.r12 + r.r13, std::fabs(r.r12), y, z1);
    ScalarField d4f = make_field([z](const JetCoords& q) {
      Jet2 w0 = q[0] - z[0];
      Jet2 wn = w0 * w0 + q[1] * q[1] + q[2] * q[2] + q[3] * q[3];
      return wn * wn + (4.0 * z[0] * z[0]) * (q[2] * q[2]);
    });
    double sum_tt = 0;
    for (int k = 1; k <= 4; ++k) sum_tt += apply_TT(k, k, d4f, y, z);
    upd("second-order-split", sum_tt, r.r21 + r.r22 + r.r23, std::fabs(r.r22), y, z1);
    upd("leading-cancellation", -1.75 * r.r11 + d4 * r21, 0.0, std::fabs(d4 * r.r21), y, z1);
    upd("quartic-collapse", -1.75 * r.r12 + d4 * r.r22 + d4 * r.r32,
        -112.0 * std::pow(y[2] * z1, 4.0), std::fabs(d4 * r.r22), y, z1);
    Vec4 x{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
    if (norm(x) > 1e-2) {
      double d = plane_dist(x, y);
      upd("frame-distance-form", plane_dist_via_frame(x, y), d, d, y, z1);
      RotationFrame fr = rotation_matrix(x);
      upd("rotation-scaling", plane_dist(fr.apply(y), fr.apply(z)), norm(x) * plane_dist(y, z),
          norm(x) * plane_dist(y, z), y, z1);
    }
    upd("gauge-restriction", gauge_dist(embed(x), embed(y)), plane_dist(x, y), plane_dist(x, y),
        y, z1);
  }
  double worst = 0.0;
  json per;
  std::string worst_name;
  for (const auto& [name, s] : stats) {
    per[name] = {{"max_residual", s.worst},
                 {"witness_y", {s.witness_y[0], s.witness_y[1], s.witness_y[2], s.witness_y[3]}},
                 {"witness_z1", s.witness_z1}};
    if (s.worst > worst) {
      worst = s.worst;
      worst_name = name;
    }
  }
  bool pass = worst <= 1e-9;
  json rep = {{"schema", "heis-plane/1"},
              {"command", "identities"},
              {"config", config_json(c)},
              {"points", points},
              {"identities", per},
              {"max_residual", worst},
              {"worst_identity", worst_name},
              {"pass", pass}};
  emit(rep, c.out);
  return pass ? kExitOk : kExitTolerance;
}

// ---- flux ----

int cmd_flux(const CommonOpts& c, const std::vector<double>& eps_grid,
             const std::vector<double>& zv) {
  Vec4 z{zv[0], zv[1], zv[2], zv[3]};
  if (norm2(z) == 0.0) {
    std::cerr << "flux: the pole must be away from the characteristic point\n";
    return kExitDegenerate;
  }
  QuadratureSpec spec = make_spec(c);
  std::ostringstream csv;
  csv << "eps,value,error,gap_to_minus_one\n";
  double prev_gap = -1.0;
  bool decreasing = true;
  double final_gap = 0.0;
  for (double e : eps_grid) {
    auto est = flux(z, e, spec);
    double gap = std::fabs(est.value + 1.0);
    csv << e << "," << est.value << "," << est.error_indicator << "," << gap << "\n";
    if (prev_gap >= 0 && gap > prev_gap) decreasing = false;
    prev_gap = gap;
    final_gap = gap;
  }
  emit_text(csv.str(), c.out);
  return decreasing && final_gap <= 0.05 ? kExitOk : kExitTolerance;
}

// ---- reconstruct ----

int cmd_reconstruct(const CommonOpts& c, const std::string& csv_out) {
  BumpFunction u{{2, 0, 0, 0}, 1.0, 1.0};
  struct Cfg {
    std::string name;
    Vec4 z;
  };
  std::vector<Cfg> cfgs = {{"center", {2, 0, 0, 0}},
                           {"off-center", {2.5, 0.3, 0, 0}},
                           {"outside", {3.2, 0, 0, 0}},
                           {"origin", {0, 0, 0, 0}},
                           {"rotated", {2.05, 0.35, 0.2, -0.15}}};
  json runs = json::array();
  std::ostringstream csv;
  csv << "config,budget,reconstructed,target,abs_error,indicator\n";
  bool pass = true;
  for (const auto& cfg : cfgs) {
    QuadratureSpec spec = make_spec(c);
    ReconstructionReport r;
    try {
      r = reconstruct(u, cfg.z, spec);
    } catch (const BudgetExhausted&) {
      return kExitBudget;
    }
    double err = std::fabs(r.reconstructed - r.target);
    if (err > 0.02 * u.amplitude) pass = false;
    runs.push_back({{"config", cfg.name},
                    {"z", {cfg.z[0], cfg.z[1], cfg.z[2], cfg.z[3]}},
                    {"target", r.target},
                    {"reconstructed", r.reconstructed},
                    {"term_gradient", r.term_gradient},
                    {"term_zero_order", r.term_zero_order},
                    {"abs_error", err},
                    {"error_indicator", r.error_indicator}});
    for (double b : {c.budget / 8, c.budget / 4, c.budget / 2, c.budget}) {
      QuadratureSpec s2 = make_spec(c);
      s2.budget = b;
      auto rr = reconstruct(u, cfg.z, s2);
      csv << cfg.name << "," << b << "," << rr.reconstructed << "," << rr.target << ","
          << std::fabs(rr.reconstructed - rr.target) << "," << rr.error_indicator << "\n";
    }
  }
  json rep = {{"schema", "heis-plane/1"},
              {"command", "reconstruct"},
              {"config", config_json(c)},
              {"bump", {{"center", {2, 0, 0, 0}}, {"radius", 1.0}, {"amplitude", 1.0}}},
              {"tolerance", 0.02},
              {"runs", runs},
              {"pass", pass}};
  emit(rep, c.out);
  if (!csv_out.empty()) emit_text(csv.str(), csv_out);
  return pass ? kExitOk : kExitTolerance;
}

// ---- ball-volume ----

int cmd_ball_volume(const CommonOpts& c, const std::vector<double>& radii,
                    const std::vector<double>& center) {
  if (radii.size() < 4) {
    std::cerr << "ball-volume: need at least 4 radii for a log-log fit\n";
    return kExitDegenerate;
  }
  Vec4 cc{center[0], center[1], center[2], center[3]};
  QuadratureSpec spec = make_spec(c);
  json rows = json::array();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (double r : radii) {
    auto est = mu_ball(cc, r, spec);
    rows.push_back({{"r", r}, {"volume", est.value}, {"error", est.error_indicator}});
    double lx = std::log(r), ly = std::log(est.value);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  double n = static_cast<double>(radii.size());
  double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  bool pass = std::fabs(slope - 5.0) <= 0.05;
  json rep = {{"schema", "heis-plane/1"},
              {"command", "ball-volume"},
              {"config", config_json(c)},
              {"center", {cc[0], cc[1], cc[2], cc[3]}},
              {"rows", rows},
              {"slope", slope},
              {"band", {{"target", 5.0}, {"tolerance", 0.05}}},
              {"pass", pass}};
  emit(rep, c.out);
  return pass ? kExitOk : kExitTolerance;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"verification suite for the characteristic-plane calculus"};
  app.require_subcommand(1);

  std::string cfg1, cfg2, cfg3, cfg4, cfg5;

  auto* constant = app.add_subcommand("constant", "moment constant by quadrature and closed form");
  CommonOpts c1;
  c1.budget = 1e7;
  add_common(constant, c1);
  constant->add_option("--config", cfg1, "flat key=value file; flags override it");

  auto* identities = app.add_subcommand("identities", "exact identity residual scan");
  CommonOpts c2;
  long long points = 10000;
  bool inject = false;
  add_common(identities, c2);
  identities->add_option("--config", cfg2, "flat key=value file; flags override it");
  identities->add_option("--points", points, "number of sample points");
  identities->add_flag("--inject-sign-flip", inject,
                       "negative-control fixture: flip one sign and expect a witness");

  auto* fluxcmd = app.add_subcommand("flux", "small-sphere flux along an eps grid (CSV)");
  CommonOpts c3;
  c3.budget = 6e5;
  std::vector<double> eps_grid = {0.1, std::pow(10.0, -1.5), 0.01};
  std::vector<double> zv = {1, 0, 0, 0};
  add_common(fluxcmd, c3);
  fluxcmd->add_option("--config", cfg3, "flat key=value file; flags override it");
  fluxcmd->add_option("--eps-grid", eps_grid, "eps values")->delimiter(',');
  fluxcmd->add_option("--z", zv, "pole (4 reals)")->expected(4);

  auto* rec = app.add_subcommand("reconstruct", "representation-formula configurations");
  CommonOpts c4;
  c4.budget = 1.6e6;
  std::string csv_out;
  add_common(rec, c4);
  rec->add_option("--config", cfg4, "flat key=value file; flags override it");
  rec->add_option("--csv", csv_out, "write the budget-series CSV here");

  auto* ball = app.add_subcommand("ball-volume", "metric ball volumes and growth exponent");
  CommonOpts c5;
  c5.budget = 3e5;
  std::vector<double> radii = {1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625};
  std::vector<double> center = {0, 0, 0, 0};
  add_common(ball, c5);
  ball->add_option("--config", cfg5, "flat key=value file; flags override it");
  ball->add_option("--radii", radii, "fit radii")->delimiter(',');
  ball->add_option("--center", center, "ball center (4 reals)")->expected(4);

  // first pass resolves config files, second applies flags on top
  CLI11_PARSE(app, argc, argv);
  bool any_config = !cfg1.empty() || !cfg2.empty() || !cfg3.empty() || !cfg4.empty() ||
                    !cfg5.empty();
  if (any_config) {
    if (!cfg1.empty()) apply_config_file(cfg1, c1, nullptr);
    if (!cfg2.empty()) apply_config_file(cfg2, c2, &points);
    if (!cfg3.empty()) apply_config_file(cfg3, c3, nullptr);
    if (!cfg4.empty()) apply_config_file(cfg4, c4, nullptr);
    if (!cfg5.empty()) apply_config_file(cfg5, c5, nullptr);
    app.clear();
    CLI11_PARSE(app, argc, argv);
  }

  try {
    if (constant->parsed()) return cmd_constant(c1);
    if (identities->parsed()) return cmd_identities(c2, points, inject);
    if (fluxcmd->parsed()) return cmd_flux(c3, eps_grid, zv);
    if (rec->parsed()) return cmd_reconstruct(c4, csv_out);
    if (ball->parsed()) return cmd_ball_volume(c5, radii, center);
  } catch (const DegeneratePoint& e) {
    std::cerr << e.what() << "\n";
    return kExitDegenerate;
  } catch (const BudgetExhausted& e) {
    std::cerr << e.what() << "\n";
    return kExitBudget;
  }
  return kExitOk;
}
