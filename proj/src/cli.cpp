#include "liftlab/cli.hpp"

#include "liftlab/divergence.hpp"
#include "liftlab/flow_poincare.hpp"
#include "liftlab/generators.hpp"
#include "liftlab/io.hpp"
#include "liftlab/lift_check.hpp"
#include "liftlab/simulate.hpp"
#include "liftlab/spectral.hpp"
#include "liftlab/studies.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <ostream>
#include <set>

namespace liftlab {

namespace {

enum class Kind { Str, Num, Int, UInt, NumList };

struct KeySpec {
  const char* key;
  Kind kind;
  const char* help;
  const char* default_text;
};

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs{
      {"process", Kind::Str, "rtp | sticky-bm | overdamped-1d | zigzag-1d | zigzag | forward", "per subcommand"},
      {"preset", Kind::Str, "study preset: rtp-scaling | gamma-zigzag | gamma-forward", "required for study"},
      {"velocity-law", Kind::Str, "Zig-Zag velocity law: gaussian | hypercube | coords", "hypercube"},
      {"omega", Kind::Num, "tumble rate omega > 0", "required for rtp / sticky-bm"},
      {"length", Kind::Num, "interval length L > 0", "1"},
      {"gamma", Kind::Num, "refresh rate gamma >= 0", "1"},
      {"m", Kind::Num, "curvature of U(x) = m |x|^2 / 2", "1"},
      {"T", Kind::Num, "flow-Poincare horizon T > 0", "auto = m_hat^{-1/2}"},
      {"d", Kind::Int, "dimension for Zig-Zag / Forward, 1..8", "2"},
      {"n-interior", Kind::Int, "interior grid nodes", "200"},
      {"n-quad", Kind::Int, "Gauss-Legendre nodes in time", "64"},
      {"t-end", Kind::Num, "simulation horizon", "required for simulate"},
      {"n-replicas", Kind::Int, "replicas for empirical decay rates", "1000"},
      {"n-samples", Kind::Int, "random right-hand sides for divergence-check", "10"},
      {"seed", Kind::UInt, "random seed", "42"},
      {"threads", Kind::Int, "worker cap, 0 = all cores", "0"},
      {"out", Kind::Str, "output directory", "$LIFTLAB_OUT_DIR or ./liftlab_out"},
      {"omegas", Kind::NumList, "study omega grid, comma separated", "preset"},
      {"gammas", Kind::NumList, "study gamma grid, comma separated", "preset"},
  };
  return specs;
}

const KeySpec* find_key(const std::string& k) {
  for (const auto& s : key_specs())
    if (k == s.key) return &s;
  return nullptr;
}

const std::vector<std::string> kSubcommands{"simulate", "spectrum", "lift-check", "flow-poincare", "divergence-check",
                                            "study"};

[[noreturn]] void type_error(const std::string& key, const std::string& what) {
  throw Error("TypeError", "key '" + key + "': " + what);
}

double parse_number(const std::string& key, const std::string& s) {
  double v = 0;
  const char* b = s.data();
  const char* e = b + s.size();
  auto r = std::from_chars(b, e, v);
  if (r.ec != std::errc() || r.ptr != e || !std::isfinite(v)) type_error(key, "expected a number, got '" + s + "'");
  return v;
}

nlohmann::json flag_value(const KeySpec& spec, const std::string& s) {
  switch (spec.kind) {
    case Kind::Str: return s;
    case Kind::Num: return parse_number(spec.key, s);
    case Kind::Int: {
      long long v = 0;
      auto r = std::from_chars(s.data(), s.data() + s.size(), v);
      if (r.ec != std::errc() || r.ptr != s.data() + s.size()) type_error(spec.key, "expected an integer");
      return v;
    }
    case Kind::UInt: {
      unsigned long long v = 0;
      auto r = std::from_chars(s.data(), s.data() + s.size(), v);
      if (r.ec != std::errc() || r.ptr != s.data() + s.size()) type_error(spec.key, "expected an unsigned integer");
      return v;
    }
    case Kind::NumList: {
      nlohmann::json a = nlohmann::json::array();
      std::size_t pos = 0;
      while (pos <= s.size()) {
        std::size_t c = s.find(',', pos);
        if (c == std::string::npos) c = s.size();
        a.push_back(parse_number(spec.key, s.substr(pos, c - pos)));
        pos = c + 1;
      }
      return a;
    }
  }
  return nullptr;
}

double get_num(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number()) type_error(key, "expected a number");
  return v.get<double>();
}

long long get_int(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number_integer()) type_error(key, "expected an integer");
  return v.get<long long>();
}

std::string get_str(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_string()) type_error(key, "expected a string");
  return v.get<std::string>();
}

std::vector<double> get_list(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_array()) type_error(key, "expected a list of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) type_error(key, "expected a list of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

bool process_needs_omega(const std::string& p) { return p == "rtp" || p == "sticky-bm"; }

}  // namespace

nlohmann::json render_config(const RunConfig& c) {
  nlohmann::json j;
  j["subcommand"] = c.subcommand;
  if (!c.process.empty()) j["process"] = c.process;
  if (!c.preset.empty()) j["preset"] = c.preset;
  j["velocity-law"] = c.velocity_law;
  if (c.omega) j["omega"] = *c.omega;
  j["length"] = c.length;
  j["gamma"] = c.gamma;
  j["m"] = c.m;
  if (c.T) j["T"] = *c.T;
  j["d"] = c.d;
  j["n-interior"] = c.n_interior;
  j["n-quad"] = c.n_quad;
  if (c.t_end) j["t-end"] = *c.t_end;
  j["n-replicas"] = c.n_replicas;
  j["n-samples"] = c.n_samples;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  if (!c.out.empty()) j["out"] = c.out;
  if (!c.omegas.empty()) j["omegas"] = c.omegas;
  if (!c.gammas.empty()) j["gammas"] = c.gammas;
  return j;
}

RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error("TypeError", "config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "subcommand" && !find_key(it.key())) throw Error("UnknownKey", "unknown key '" + it.key() + "'");
  RunConfig c;
  if (!j.contains("subcommand")) throw Error("MissingRequired", "missing required key 'subcommand'");
  c.subcommand = get_str(j, "subcommand");
  if (std::find(kSubcommands.begin(), kSubcommands.end(), c.subcommand) == kSubcommands.end())
    type_error("subcommand", "unknown subcommand '" + c.subcommand + "'");
  if (j.contains("process")) c.process = get_str(j, "process");
  if (j.contains("preset")) c.preset = get_str(j, "preset");
  if (j.contains("velocity-law")) c.velocity_law = get_str(j, "velocity-law");
  if (j.contains("omega")) c.omega = get_num(j, "omega");
  if (j.contains("length")) c.length = get_num(j, "length");
  if (j.contains("gamma")) c.gamma = get_num(j, "gamma");
  if (j.contains("m")) c.m = get_num(j, "m");
  if (j.contains("T")) c.T = get_num(j, "T");
  if (j.contains("d")) c.d = static_cast<int>(get_int(j, "d"));
  if (j.contains("n-interior")) c.n_interior = static_cast<int>(get_int(j, "n-interior"));
  if (j.contains("n-quad")) c.n_quad = static_cast<int>(get_int(j, "n-quad"));
  if (j.contains("t-end")) c.t_end = get_num(j, "t-end");
  if (j.contains("n-replicas")) c.n_replicas = static_cast<int>(get_int(j, "n-replicas"));
  if (j.contains("n-samples")) c.n_samples = static_cast<int>(get_int(j, "n-samples"));
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned() && !(j.at("seed").is_number_integer() && j.at("seed").get<long long>() >= 0))
      type_error("seed", "expected an unsigned integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("threads")) c.threads = static_cast<int>(get_int(j, "threads"));
  if (j.contains("out")) c.out = get_str(j, "out");
  if (j.contains("omegas")) c.omegas = get_list(j, "omegas");
  if (j.contains("gammas")) c.gammas = get_list(j, "gammas");

  // per-subcommand processes
  static const std::map<std::string, std::vector<std::string>> allowed{
      {"simulate", {"rtp", "zigzag", "forward"}},
      {"spectrum", {"sticky-bm", "rtp", "overdamped-1d", "zigzag-1d"}},
      {"lift-check", {"rtp"}},
      {"flow-poincare", {"rtp", "zigzag-1d"}},
      {"divergence-check", {"sticky-bm"}},
      {"study", {}},
  };
  const auto& ok = allowed.at(c.subcommand);
  if (c.subcommand == "lift-check" && c.process.empty()) c.process = "rtp";
  if (c.subcommand == "divergence-check" && c.process.empty()) c.process = "sticky-bm";
  if (c.subcommand == "study") {
    if (c.preset.empty()) throw Error("MissingRequired", "missing required key 'preset'");
    if (c.preset != "rtp-scaling" && c.preset != "gamma-zigzag" && c.preset != "gamma-forward")
      type_error("preset", "unknown preset '" + c.preset + "'");
    if (!c.process.empty()) type_error("process", "study takes a preset, not a process");
  } else {
    if (c.process.empty()) throw Error("MissingRequired", "missing required key 'process'");
    if (std::find(ok.begin(), ok.end(), c.process) == ok.end())
      type_error("process", "'" + c.process + "' is not valid for " + c.subcommand);
    if (!c.preset.empty()) type_error("preset", "only the study subcommand takes a preset");
  }
  if (process_needs_omega(c.process) && !c.omega) throw Error("MissingRequired", "missing required key 'omega'");
  if (c.subcommand == "simulate" && !c.t_end) throw Error("MissingRequired", "missing required key 't-end'");

  auto positive = [](const char* key, double v) {
    if (!(v > 0)) type_error(key, "must be positive");
  };
  if (c.omega) positive("omega", *c.omega);
  positive("length", c.length);
  if (!(c.gamma >= 0)) type_error("gamma", "must be nonnegative");
  positive("m", c.m);
  if (c.T) positive("T", *c.T);
  if (c.t_end) positive("t-end", *c.t_end);
  if (c.d < 1 || c.d > 8) type_error("d", "must lie in 1..8");
  if (c.n_interior < 2) type_error("n-interior", "must be at least 2");
  if (c.n_quad < 1) type_error("n-quad", "must be at least 1");
  if (c.n_replicas < 2) type_error("n-replicas", "must be at least 2");
  if (c.n_samples < 1) type_error("n-samples", "must be at least 1");
  if (c.threads < 0) type_error("threads", "must be nonnegative");
  for (double w : c.omegas) positive("omegas", w);
  for (double g : c.gammas) positive("gammas", g);
  if (c.velocity_law != "gaussian" && c.velocity_law != "hypercube" && c.velocity_law != "coords")
    type_error("velocity-law", "expected gaussian, hypercube or coords");
  return c;
}

std::string run_config_hash(const RunConfig& c) {
  nlohmann::json j = render_config(c);
  j.erase("out");
  j.erase("threads");
  return config_hash(j);
}

namespace {

[[noreturn]] void usage_error(const std::string& what) { throw Error("UsageError", what); }

RunConfig parse_argv(int argc, const char* const* argv) {
  CLI::App app{"liftlab: lifts, flow Poincare inequalities and PDMP samplers"};
  app.require_subcommand(1, 1);
  std::map<std::string, std::string> values;
  std::string config_path;
  std::map<std::string, CLI::App*> subs;
  const std::map<std::string, std::string> desc{
      {"simulate", "exact event-driven simulation (rtp, zigzag, forward)"},
      {"spectrum", "eigenvalues and gap of a discretized generator"},
      {"lift-check", "first/second-order lift identities on the RTP / sticky BM pair"},
      {"flow-poincare", "flow Poincare constant and decay check"},
      {"divergence-check", "solve d_t h - 2Lg = f and report the bound ratios"},
      {"study", "parameter sweeps: rtp-scaling, gamma-zigzag, gamma-forward"},
  };
  for (const auto& name : kSubcommands) {
    CLI::App* s = app.add_subcommand(name, desc.at(name));
    s->add_option("--config", config_path, "JSON config file; keys mirror the flags, flags win");
    for (const auto& spec : key_specs())
      s->add_option(std::string("--") + spec.key, values[spec.key], spec.help)->default_str(spec.default_text);
    subs[name] = s;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    throw;
  } catch (const CLI::ExtrasError& e) {
    throw Error("UnknownKey", e.what());
  } catch (const CLI::ParseError& e) {
    usage_error(e.what());
  }
  std::string sub;
  for (const auto& [name, s] : subs)
    if (s->parsed()) sub = name;
  nlohmann::json merged = nlohmann::json::object();
  if (!config_path.empty()) {
    nlohmann::json file;
    try {
      file = nlohmann::json::parse(read_file(config_path));
    } catch (const nlohmann::json::exception& e) {
      throw Error("TypeError", "config file is not valid JSON: " + std::string(e.what()));
    }
    if (!file.is_object()) throw Error("TypeError", "config file must hold a JSON object");
    for (auto it = file.begin(); it != file.end(); ++it) {
      if (it.key() == "subcommand") {
        if (it.value() != sub) type_error("subcommand", "config file names a different subcommand");
        continue;
      }
      if (!find_key(it.key())) throw Error("UnknownKey", "unknown key '" + it.key() + "' in config file");
      merged[it.key()] = it.value();
    }
  }
  CLI::App* s = subs.at(sub);
  for (const auto& spec : key_specs())
    if (s->count(std::string("--") + spec.key) > 0) merged[spec.key] = flag_value(spec, values[spec.key]);
  merged["subcommand"] = sub;
  return config_from_json(merged);
}

std::string help_text() {
  std::string h = "usage: liftlab <subcommand> [flags]\nsubcommands:";
  for (const auto& s : kSubcommands) h += " " + s;
  h += "\nflags (all subcommands):\n  --config FILE  JSON config; keys mirror the flags\n";
  for (const auto& spec : key_specs()) {
    h += "  --" + std::string(spec.key) + "  " + spec.help + " [default: " + spec.default_text + "]\n";
  }
  return h;
}

// ---------- subcommands ----------

struct Ctx {
  const RunConfig& c;
  std::string hash;
  std::filesystem::path dir;
  nlohmann::json artifacts = nlohmann::json::array();
  nlohmann::json metrics = nlohmann::json::object();

  void write(const std::string& name, const std::string& content) {
    std::filesystem::path p = dir / name;
    atomic_write(p.string(), content);
    artifacts.push_back(p.string());
  }
  void write_csv(const std::string& name, const CsvTable& t) { write(name, render_csv(t, hash)); }
  void write_json(const std::string& name, nlohmann::json j) {
    j["config_hash"] = hash;
    j["code_version"] = kCodeVersion;
    j["config"] = render_config(c);
    j["config"].erase("out");
    j["config"].erase("threads");
    write(name, j.dump(2) + "\n");
  }
};

Potential quadratic_potential(double m, int d) { return Potential::quadratic_diag(Vec::Constant(d, m)); }

// Discretized collapse and lift for the 1D processes used by spectrum / flow-poincare.
struct Pair1D {
  Grid1D grid;
  OperatorMatrix collapse;
  SplitGenerator split;
  std::vector<std::vector<double>> patterns;
};

Pair1D build_pair(const RunConfig& c, bool need_lift) {
  Pair1D p;
  if (c.process == "rtp" || c.process == "sticky-bm") {
    p.grid = make_grid(c.length, c.n_interior);
    p.collapse = sticky_bm_generator(p.grid, *c.omega).first;
    if (need_lift) p.split = rtp_generator(p.grid, {*c.omega, c.length});
    p.patterns = {{1.0, 0.0, -1.0}, {1.0, -2.0, 1.0}};
  } else {
    Potential U = quadratic_potential(c.m, 1);
    double a = truncation_half_width(U);
    p.grid = make_grid(2 * a, c.n_interior, -a);
    p.collapse = overdamped_generator_1d(p.grid, U).first;
    if (need_lift) p.split = zigzag_generator_1d(p.grid, U, c.gamma);
    p.patterns = {{1.0, -1.0}};
  }
  return p;
}

double collapse_gap(const OperatorMatrix& collapse) {
  try {
    return low_modes(collapse, 1).gap;
  } catch (const Error& e) {
    if (e.code() != "NotTridiagonal") throw;
    return spectral_gap(collapse);
  }
}

void run_simulate(Ctx& x) {
  const RunConfig& c = x.c;
  RngStream rng(c.seed);
  Trajectory tr;
  if (c.process == "rtp") {
    RtpParams params{*c.omega, c.length};
    auto [x0, v0] = sample_rtp_stationary(params, rng);
    tr = simulate_rtp(params, x0, v0, *c.t_end, rng);
    Grid1D cells = make_grid(c.length, 49);
    WeightedMeasure occ = rtp_occupation(tr, cells);
    WeightedMeasure exact = rtp_exact_occupation(params, cells);
    CsvTable t;
    t.header = {"state", "x_lo", "x_hi", "v", "is_atom", "mass", "exact"};
    const int nc = cells.size() - 1;
    for (int i = 0; i < nc + 2; ++i)
      for (int k = 0; k < 3; ++k) {
        int s = 3 * i + k;
        double lo = i == 0 ? 0.0 : (i == nc + 1 ? c.length : cells.x(i - 1));
        double hi = i == 0 ? 0.0 : (i == nc + 1 ? c.length : cells.x(i));
        t.add({std::to_string(s), fmt_num(lo), fmt_num(hi), fmt_num(kRtpVelocities[static_cast<std::size_t>(k)]),
               occ.is_atom[static_cast<std::size_t>(s)] ? "1" : "0", fmt_num(occ.weights[s]), fmt_num(exact.weights[s])});
      }
    x.write_csv("simulate-occupation.csv", t);
    x.metrics["tv_occupation"] = total_variation(occ, exact);
    x.metrics["atom_L_plus2"] = occ.weights[3 * (nc + 1) + 0];
    x.metrics["atom_0_minus2"] = occ.weights[2];
  } else {
    Potential U = quadratic_potential(c.m, c.d);
    Vec x0 = sample_gaussian_target(U, rng);
    if (c.process == "zigzag")
      tr = simulate_zigzag(U, parse_velocity_law(c.velocity_law), c.gamma, x0, *c.t_end, rng);
    else
      tr = simulate_forward(U, c.gamma, x0, *c.t_end, rng);
    Mat cov = tr.covariance();
    std::vector<double> var;
    for (int k = 0; k < c.d; ++k) var.push_back(cov(k, k));
    x.metrics["variance"] = var;
    x.metrics["variance_exact"] = 1.0 / c.m;
  }
  x.metrics["n_events"] = tr.n_events;
  x.write_csv("simulate-trajectory.csv", trajectory_table(tr));
  x.write("simulate-trajectory.bin", encode_event_log(tr));
}

void run_spectrum(Ctx& x) {
  const RunConfig& c = x.c;
  const bool lifted = c.process == "rtp" || c.process == "zigzag-1d";
  Pair1D p = build_pair(c, lifted);
  const OperatorMatrix& op = lifted ? p.split.full : p.collapse;
  SpectralData sd = decompose(op, {.vectors = false});
  CsvTable t;
  t.header = {"k", "re", "im"};
  for (int k = 0; k < sd.size(); ++k)
    t.add({std::to_string(k), fmt_num(sd.eigenvalues[static_cast<std::size_t>(k)].real()),
           fmt_num(sd.eigenvalues[static_cast<std::size_t>(k)].imag())});
  x.write_csv("spectrum.csv", t);
  x.write_json("spectrum.json", to_json(sd));
  x.metrics["gap"] = sd.gap;
  x.metrics["gap_imag"] = sd.gap_imag;
  x.metrics["self_adjoint"] = sd.is_self_adjoint;
  x.metrics["dim"] = op.dim();
  if (!lifted) x.metrics["poincare_constant"] = poincare_constant(op);
}

void run_lift_check(Ctx& x) {
  const RunConfig& c = x.c;
  LiftReport r = rtp_lift_report({*c.omega, c.length}, c.n_interior, 10, 10, c.seed);
  x.write_json("lift-check.json", to_json(r));
  x.metrics = to_json(r);
  x.metrics["second_order_x_expected"] = *c.omega * c.length / (2.0 + *c.omega * c.length);
}

void run_flow_poincare(Ctx& x) {
  const RunConfig& c = x.c;
  Pair1D p = build_pair(c, true);
  const double m = collapse_gap(p.collapse);
  const double T = c.T ? *c.T : 1.0 / std::sqrt(m);
  RngStream rng(c.seed);
  Mat ev;
  try {
    ev = low_modes(p.collapse, 6).vectors;
  } catch (const Error& e) {
    if (e.code() != "NotTridiagonal") throw;
    ev = decompose(p.collapse).vectors.leftCols(7);
  }
  const int nv = p.split.n_velocities;
  Mat rnd = random_smooth_lifted(p.grid, nv, 4, p.split.full.reference_measure, rng);
  Mat probes = lifted_probe_family(ev, p.split.projection, nv, p.patterns, rnd, p.split.full.reference_measure);
  FlowOptions fo;
  fo.n_quad = c.n_quad;
  fo.exact_minimizer = p.split.full.dim() <= 2500;
  fo.decay_periods = 10;
  FlowReport rep = best_nu(p.split.full, T, probes, fo);
  UpperBoundCheck ub = lifting_upper_bound_check(rep.nu_hat, std::exp(rep.nu_hat * T), m);
  CsvTable t;
  t.header = {"probe", "ratio"};
  for (int i = 0; i < rep.ratios.size(); ++i) t.add({std::to_string(i), fmt_num(rep.ratios[i])});
  x.write_csv("flow-poincare.csv", t);
  nlohmann::json j = to_json(rep);
  j["gap_collapse"] = m;
  j["upper_bound"] = ub.bound;
  j["upper_bound_ok"] = ub.ok;
  x.write_json("flow-poincare.json", j);
  x.metrics["nu_hat"] = rep.nu_hat;
  x.metrics["T"] = T;
  x.metrics["gap_collapse"] = m;
  x.metrics["decay_check_margin"] = rep.decay_check_margin;
  x.metrics["upper_bound_ok"] = ub.ok;
  x.metrics["exact_minimizer"] = fo.exact_minimizer;
}

void run_divergence(Ctx& x) {
  const RunConfig& c = x.c;
  Grid1D grid = make_grid(c.length, c.n_interior);
  OperatorMatrix collapse = sticky_bm_generator(grid, *c.omega).first;
  SpectralData sd = decompose(collapse);
  const double m = sd.gap;
  const double T = c.T ? *c.T : 1.0 / std::sqrt(m);
  HarmonicBasis b = build_harmonic_basis(collapse, sd, T);
  RngStream rng(c.seed);
  CsvTable t;
  t.header = {"sample", "case", "norm_f", "r1", "r2", "r3", "residual"};
  double worst_res = 0, worst_ratio = 0;
  for (int i = 0; i < c.n_samples; ++i) {
    Mat f = random_space_time_field(b, rng, b.size() - 1);
    DivComponents parts = decompose_rhs(f, b);
    const std::vector<std::pair<std::string, const Mat*>> cases{
        {"mixed", &f}, {"perp", &parts.perp}, {"low-anti", &parts.la}, {"low-sym", &parts.ls},
        {"high-anti", &parts.ha}, {"high-sym", &parts.hs}};
    for (const auto& [name, F] : cases) {
      double nf = st_norm(*F, b);
      if (nf < 1e-12) continue;
      DivergenceSolution s = solve_divergence(*F, b, m);
      t.add({std::to_string(i), name, fmt_num(nf), fmt_num(s.r1), fmt_num(s.r2), fmt_num(s.r3), fmt_num(s.residual)});
      worst_res = std::max(worst_res, s.residual);
      if (name == "mixed") worst_ratio = std::max({worst_ratio, s.r1, s.r2, s.r3});
    }
  }
  x.write_csv("divergence-check.csv", t);
  x.metrics["T"] = T;
  x.metrics["gap_collapse"] = m;
  x.metrics["max_residual"] = worst_res;
  x.metrics["max_mixed_ratio"] = worst_ratio;
}

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> g;
  for (int i = 0; i < n; ++i) g.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
  return g;
}

void run_study(Ctx& x) {
  const RunConfig& c = x.c;
  if (c.preset == "rtp-scaling") {
    RtpScalingOptions o;
    o.omegas = c.omegas.empty() ? std::vector<double>{0.01, 0.02, 0.05, 0.1, 1.0, 40.0, 80.0, 160.0} : c.omegas;
    o.length_L = c.length;
    o.n_min = c.n_interior;
    o.n_quad = c.n_quad;
    o.n_replicas = c.n_replicas;
    o.seed = c.seed;
    RtpScalingResult r = rtp_scaling_study(o);
    CsvTable t;
    t.header = {"omega", "L", "T", "nu_hat", "nu_sim", "gap_collapse", "upper_bound_ok"};
    for (const auto& row : r.rows)
      t.add({fmt_num(row.omega), fmt_num(row.length_L), fmt_num(row.T), fmt_num(row.nu_hat), fmt_num(row.nu_sim),
             fmt_num(row.gap_collapse), row.upper_bound_ok ? "1" : "0"});
    x.write_csv("study-rtp-scaling.csv", t);
    nlohmann::json j;
    auto fit = [](const std::optional<LinearFit>& f) -> nlohmann::json {
      if (!f) return nullptr;
      return {{"slope", f->slope}, {"slope_se", f->slope_se}, {"n", f->n}};
    };
    j["small_fit"] = fit(r.small_fit);
    j["large_fit"] = fit(r.large_fit);
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows)
      rows.push_back({{"omega", row.omega}, {"n_interior", row.n_interior}, {"nu_hat", row.nu_hat},
                      {"nu_sim", std::isfinite(row.nu_sim) ? nlohmann::json(row.nu_sim) : nlohmann::json(nullptr)},
                      {"nu_sim_status", row.nu_sim_status}, {"upper_bound", row.upper_bound}});
    j["rows"] = rows;
    x.write_json("study-rtp-scaling.json", j);
    x.metrics["small_slope"] = j["small_fit"].is_null() ? nlohmann::json(nullptr) : j["small_fit"]["slope"];
    x.metrics["large_slope"] = j["large_fit"].is_null() ? nlohmann::json(nullptr) : j["large_fit"]["slope"];
    bool all_ok = true;
    for (const auto& row : r.rows) all_ok = all_ok && row.upper_bound_ok;
    x.metrics["upper_bound_ok"] = all_ok;
    return;
  }
  GammaStudyOptions o;
  o.curvature = c.m;
  o.n_quad = c.n_quad;
  o.n_replicas = c.n_replicas;
  o.seed = c.seed;
  if (c.preset == "gamma-zigzag") {
    o.process = GammaProcess::ZigZag1dDiscrete;
    o.d = 1;
    o.n_interior = c.n_interior;
    o.gammas = c.gammas.empty() ? log_grid(0.01, 100.0, 9) : c.gammas;
  } else {
    o.process = GammaProcess::ForwardSim;
    o.d = c.d;
    o.gammas = c.gammas.empty() ? log_grid(0.05, 20.0, 7) : c.gammas;
  }
  GammaStudyResult r = gamma_study(o);
  CsvTable t;
  t.header = {"gamma", "nu_hat", "nu_formula", "status"};
  for (const auto& row : r.rows) t.add({fmt_num(row.gamma), fmt_num(row.nu_hat), fmt_num(row.nu_formula), row.status});
  const std::string stem = "study-" + c.preset;
  x.write_csv(stem + ".csv", t);
  nlohmann::json j{{"process", gamma_process_name(o.process)},
                   {"m_hat", r.m_hat},
                   {"T", r.T},
                   {"C1", r.C1},
                   {"gamma_star", r.gamma_star},
                   {"nu_star", r.nu_star},
                   {"optimal_gamma_formula", r.optimal_gamma_formula},
                   {"ratio_left", r.ratio_left},
                   {"ratio_right", r.ratio_right},
                   {"spearman", r.spearman_rho},
                   {"argmax_ok", r.argmax_ok},
                   {"extremes_ok", r.extremes_ok},
                   {"spearman_ok", r.spearman_ok}};
  x.write_json(stem + ".json", j);
  x.metrics = j;
}

}  // namespace

RunConfig parse_config(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"liftlab"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return parse_argv(static_cast<int>(argv.size()), argv.data());
}

nlohmann::json run(const RunConfig& c) {
  set_thread_count(c.threads);
  std::string dir = c.out;
  if (dir.empty()) {
    const char* env = std::getenv("LIFTLAB_OUT_DIR");
    dir = env && *env ? env : "liftlab_out";
  }
  Ctx x{c, run_config_hash(c), dir};
  if (c.subcommand == "simulate") run_simulate(x);
  else if (c.subcommand == "spectrum") run_spectrum(x);
  else if (c.subcommand == "lift-check") run_lift_check(x);
  else if (c.subcommand == "flow-poincare") run_flow_poincare(x);
  else if (c.subcommand == "divergence-check") run_divergence(x);
  else if (c.subcommand == "study") run_study(x);
  else throw Error("UsageError", "unknown subcommand");
  return {{"subcommand", c.subcommand}, {"config_hash", x.hash}, {"metrics", x.metrics}, {"artifacts", x.artifacts}};
}

int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  static const std::set<std::string> usage_codes{"UnknownKey", "MissingRequired", "TypeError", "UsageError"};
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    if (a == "--help" || a == "-h") {
      out << help_text();
      return 0;
    }
  }
  if (argc < 2) {
    err << help_text();
    return 2;
  }
  try {
    RunConfig c = parse_argv(argc, argv);
    out << run(c).dump() << "\n";
    return 0;
  } catch (const Error& e) {
    err << "liftlab: " << e.what() << "\n";
    return usage_codes.count(e.code()) ? 2 : 1;
  } catch (const CLI::Error& e) {
    err << "liftlab: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "liftlab: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace liftlab
