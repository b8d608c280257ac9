#pragma once

// Command-line front end. run_command() is the whole CLI minus process
// plumbing, so tests can drive it in-process.
//
// Exit codes: 0 success / pass, 1 a check failed, 2 bad input.

#include <poisson3d/builtin_systems.hpp>
#include <poisson3d/casimir.hpp>
#include <poisson3d/darboux.hpp>
#include <poisson3d/dynamics.hpp>
#include <poisson3d/error.hpp>
#include <poisson3d/family.hpp>
#include <poisson3d/spec_file.hpp>
#include <poisson3d/verification.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace poisson3d::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitBadInput = 2;
inline constexpr std::uint64_t kDefaultSeed = 42;

inline std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      double v = std::stod(item, &used);
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw Error(ErrorKind::precondition, "cannot parse " + what + " value '" + item + "'");
    }
  }
  return out;
}

inline Point parse_point(const std::string& text, const std::string& what) {
  auto v = parse_list(text, what);
  if (v.size() != 3) throw Error(ErrorKind::precondition, what + " needs three comma-separated values");
  return {v[0], v[1], v[2]};
}

inline nlohmann::json to_json(const Point& p) { return nlohmann::json::array({p[0], p[1], p[2]}); }

struct SystemOptions {
  std::string system;
  std::string spec_path;
  std::string inertia = "1,2,3";
  std::string box;
};

inline void add_system_options(CLI::App* cmd, SystemOptions& o) {
  auto* sys = cmd->add_option("--system", o.system, "built-in system: halphen, circle-maps, euler-top");
  auto* spec = cmd->add_option("--spec", o.spec_path, "JSON system-spec file");
  sys->excludes(spec);
  cmd->add_option("--I", o.inertia, "euler-top moments of inertia I1,I2,I3")->capture_default_str();
  cmd->add_option("--box", o.box, "built-in domain box: lo,hi (all axes) or l1,h1,l2,h2,l3,h3");
}

inline std::optional<std::array<Interval, 3>> parse_box(const std::string& text) {
  if (text.empty()) return std::nullopt;
  auto v = parse_list(text, "--box");
  if (v.size() == 2) return std::array<Interval, 3>{Interval{v[0], v[1]}, Interval{v[0], v[1]}, Interval{v[0], v[1]}};
  if (v.size() == 6) return std::array<Interval, 3>{Interval{v[0], v[1]}, Interval{v[2], v[3]}, Interval{v[4], v[5]}};
  throw Error(ErrorKind::precondition, "--box needs 2 or 6 values");
}

inline SystemDefinition resolve_system(const SystemOptions& o) {
  if (!o.spec_path.empty()) return load_system_spec(o.spec_path);
  if (o.system.empty()) throw Error(ErrorKind::precondition, "one of --system or --spec is required");
  auto box = parse_box(o.box);
  SystemDefinition def;
  def.name = o.system;
  if (o.system == "halphen" || o.system == "circle-maps") {
    DomainBox domain = box ? halphen_domain(*box) : default_halphen_domain();
    def.family = o.system == "halphen" ? halphen_structure(domain) : circle_maps_structure(domain);
    def.hamiltonian = linear_sum_hamiltonian();
  } else if (o.system == "euler-top") {
    Point inertia = parse_point(o.inertia, "--I");
    EulerTopParams params = EulerTopParams::from_inertia(inertia[0], inertia[1], inertia[2]);
    DomainBox domain = box ? DomainBox(*box) : default_euler_top_domain();
    def.family = euler_top_structure(params, domain);
    def.hamiltonian = rigid_body_hamiltonian(params);
  } else {
    throw Error(ErrorKind::precondition, "unknown system '" + o.system + "' (see `list`)");
  }
  def.domain = def.family->domain();
  return def;
}

inline const PoissonFamilySpec& require_family(const SystemDefinition& def, const char* command) {
  if (!def.family)
    throw Error(ErrorKind::invalid_spec, std::string(command) + " needs a family spec, not a raw matrix field");
  return *def.family;
}

inline std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("POISSON3D_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw Error(ErrorKind::precondition, "POISSON3D_SEED is not an unsigned integer");
    }
  }
  return kDefaultSeed;
}

inline int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Poisson structures of the three-function family: verification, Casimirs, Darboux charts, dynamics"};
  app.require_subcommand(1);

  SystemOptions sys;

  // verify
  auto* verify = app.add_subcommand("verify", "check the Jacobi identity on sampled domain points");
  add_system_options(verify, sys);
  std::size_t samples = 1000;
  double tol = 1e-6;
  std::optional<std::uint64_t> seed_flag;
  std::string scheme = "analytic";
  unsigned workers = 1;
  verify->add_option("--samples", samples)->capture_default_str();
  verify->add_option("--tol", tol)->capture_default_str();
  verify->add_option("--seed", seed_flag);
  verify->add_option("--scheme", scheme)->check(CLI::IsMember({"analytic", "fd"}))->capture_default_str();
  verify->add_option("--workers", workers)->capture_default_str();

  // casimir
  auto* cas = app.add_subcommand("casimir", "Casimir value, gradient and annihilation residual at a point");
  add_system_options(cas, sys);
  int k = 0;
  std::string point_text;
  cas->add_option("--k", k)->required()->check(CLI::Range(1, 3));
  cas->add_option("--point", point_text)->required();

  // darboux
  auto* darb = app.add_subcommand("darboux", "build the global Darboux chart and check the canonical form");
  add_system_options(darb, sys);
  std::optional<int> chart_k;
  std::size_t check_samples = 1000;
  darb->add_option("--k", chart_k)->check(CLI::Range(1, 3));
  darb->add_option("--check-samples", check_samples)->capture_default_str();
  darb->add_option("--point", point_text);
  darb->add_option("--seed", seed_flag);

  // simulate
  auto* sim = app.add_subcommand("simulate", "integrate dx/dt = J grad H and write a CSV trajectory");
  add_system_options(sim, sys);
  std::string x0_text, method_text = "rk4", hamiltonian_text, out_path;
  double t_end = 0.0, dt = 0.0;
  bool reduced = false;
  sim->add_option("--x0", x0_text)->required();
  sim->add_option("--t-end", t_end, "end time (tau_end with --reduced)")->required();
  sim->add_option("--dt", dt, "step (dtau with --reduced)")->required();
  sim->add_option("--method", method_text)->check(CLI::IsMember({"rk4", "midpoint"}))->capture_default_str();
  sim->add_option("--hamiltonian", hamiltonian_text);
  sim->add_flag("--reduced", reduced);
  sim->add_option("--k", chart_k)->check(CLI::Range(1, 3));
  sim->add_option("--out", out_path)->required();

  app.add_subcommand("list", "list built-in systems");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, eo;
    int code = app.exit(e, o, eo);
    out << o.str();
    err << eo.str();
    return code == 0 ? kExitOk : kExitBadInput;
  }

  try {
    if (app.got_subcommand("list")) {
      for (const auto& n : builtin_system_names()) out << n << '\n';
      return kExitOk;
    }

    SystemDefinition def = resolve_system(sys);
    nlohmann::json report;
    report["system"] = def.name;
    int code = kExitOk;

    if (app.got_subcommand(verify)) {
      MatrixField3 field = def.raw_matrix ? MatrixField3::from_expressions(*def.raw_matrix)
                                          : MatrixField3::from_family(*def.family);
      std::uint64_t seed = resolve_seed(seed_flag);
      auto s = scheme == "fd" ? DerivativeScheme::finite_difference : DerivativeScheme::analytic;
      VerificationReport r = verify_structure(field, def.domain, samples, tol, seed, s, workers);
      report["command"] = "verify";
      report["samples"] = r.samples;
      report["max_abs_residual"] = r.max_abs_residual;
      report["max_raw_residual"] = r.max_raw_residual;
      report["residual_scale"] = "1 + max|J| * max|dJ|";
      report["worst_point"] = to_json(r.worst_point);
      report["verdict"] = r.pass ? "pass" : "fail";
      report["derivative_scheme"] = std::string(to_string(r.scheme));
      report["seed"] = r.seed;
      report["tol"] = r.tol;
      report["skew_symmetry"] = "by representation";
      if (!r.pass) code = kExitCheckFailed;
    } else if (app.got_subcommand(cas)) {
      const auto& spec = require_family(def, "casimir");
      Point x = parse_point(point_text, "--point");
      AnnihilationResult a = annihilation_check(spec, k, x);
      report["command"] = "casimir";
      report["k"] = k;
      report["point"] = to_json(x);
      report["value"] = casimir_value(spec, k, x);
      report["gradient"] = to_json(casimir_gradient(spec, k, x));
      report["annihilation_residual"] = a.residual;
      report["annihilation_scale"] = a.scale;
      if (!a.within(1e-9)) code = kExitCheckFailed;
    } else if (app.got_subcommand(darb)) {
      const auto& spec = require_family(def, "darboux");
      DarbouxChart chart = build_chart(spec, chart_k);
      std::uint64_t seed = resolve_seed(seed_flag);
      report["command"] = "darboux";
      report["k"] = chart.k();
      report["i"] = chart.i();
      report["j"] = chart.j();
      if (chart.sign_branch()) {
        const auto& sb = *chart.sign_branch();
        report["sign_branch"] = nlohmann::json::array({sb[0], sb[1], sb[2]});
      } else {
        report["sign_branch"] = nullptr;
      }
      CanonicalReport c = canonical_check(chart, check_samples, seed);
      report["check"] = {{"samples", c.samples},
                         {"seed", seed},
                         {"max_deviation", c.max_deviation},
                         {"max_decoupling", c.max_decoupling},
                         {"max_factor_mismatch", c.max_factor_mismatch},
                         {"max_roundtrip_error", c.max_roundtrip_error},
                         {"factor_sign_constant", c.factor_sign_constant},
                         {"worst_point", to_json(c.worst_point)},
                         {"tol", c.tol},
                         {"verdict", c.pass ? "pass" : "fail"}};
      if (!point_text.empty()) {
        Point x = parse_point(point_text, "--point");
        Point y = forward_map(chart, x);
        report["point"] = {{"x", to_json(x)},
                           {"y", to_json(y)},
                           {"x_of_y", to_json(inverse_map(chart, y))},
                           {"factor", reparam_factor(chart, y)}};
      }
      if (!c.pass) code = kExitCheckFailed;
    } else if (app.got_subcommand(sim)) {
      const auto& spec = require_family(def, "simulate");
      Expr h_expr = !hamiltonian_text.empty() ? parse_restricted(hamiltonian_text, kSpatialVars, "--hamiltonian")
                    : def.hamiltonian        ? *def.hamiltonian
                                             : throw Error(ErrorKind::precondition, "no Hamiltonian: pass --hamiltonian");
      HamiltonianField h = HamiltonianField::from_expression(h_expr);
      Point x0 = parse_point(x0_text, "--x0");
      Method method = method_text == "midpoint" ? Method::midpoint : Method::rk4;
      Trajectory traj;
      if (reduced) {
        DarbouxChart chart = build_chart(spec, chart_k);
        traj = integrate_reduced(chart, h, forward_map(chart, x0), t_end, dt, method);
      } else {
        traj = integrate(spec, h, x0, t_end, dt, method, chart_k);
      }
      std::ofstream csv(out_path, std::ios::binary);
      if (!csv) throw Error(ErrorKind::precondition, "cannot write " + out_path);
      write_trajectory_csv(traj, csv);
      DriftReport d = invariant_drift(traj);
      report["command"] = "simulate";
      report["reduced"] = reduced;
      report["method"] = std::string(to_string(method));
      report["hamiltonian"] = to_string(h_expr);
      report["k"] = traj.casimir_k ? nlohmann::json(*traj.casimir_k) : nlohmann::json(nullptr);
      report["samples"] = traj.samples.size();
      report["t_final"] = traj.samples.back().t;
      report["drift"] = {{"max_abs_h", d.max_abs_h},
                         {"max_rel_h", d.max_rel_h},
                         {"max_abs_casimir", d.max_abs_casimir},
                         {"max_rel_casimir", d.max_rel_casimir}};
      report["out"] = out_path;
    }
    out << report.dump(2) << '\n';
    return code;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitBadInput;
  }
}

}  // namespace poisson3d::cli
