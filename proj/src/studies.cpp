#include "liftlab/studies.hpp"

#include "liftlab/flow_poincare.hpp"
#include "liftlab/generators.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace liftlab {

namespace {

std::uint64_t key_of(double x) { return splitmix64(std::bit_cast<std::uint64_t>(x)); }

const std::vector<std::vector<double>> kRtpPatterns{{1.0, 0.0, -1.0}, {1.0, -2.0, 1.0}};

}  // namespace

int rtp_scaling_nodes(const RtpScalingOptions& o, double omega) {
  double want = std::ceil(o.cells_per_unit * omega * o.length_L);
  return static_cast<int>(std::clamp(want, static_cast<double>(o.n_min), static_cast<double>(o.n_max)));
}

RtpScalingRow rtp_scaling_row(const RtpScalingOptions& o, double omega) {
  RtpParams params{omega, o.length_L};
  params.validate();
  RtpScalingRow row;
  row.omega = omega;
  row.length_L = o.length_L;
  row.n_interior = rtp_scaling_nodes(o, omega);
  Grid1D grid = make_grid(o.length_L, row.n_interior);
  auto [collapse, mu] = sticky_bm_generator(grid, omega);
  SpectralData lm = low_modes(collapse, o.n_eigen);
  row.gap_collapse = lm.gap;
  row.T = 1.0 / std::sqrt(lm.gap);
  SplitGenerator split = rtp_generator(grid, params);
  RngStream rng = RngStream(o.seed).split(key_of(omega));
  Mat rnd = random_smooth_lifted(grid, 3, o.n_random, split.full.reference_measure, rng);
  Mat probes = lifted_probe_family(lm.vectors, split.projection, 3, kRtpPatterns, rnd, split.full.reference_measure);
  FlowOptions fo;
  fo.n_quad = o.n_quad;
  FlowReport rep = best_nu(split.full, row.T, probes, fo);
  row.nu_hat = rep.nu_hat;
  UpperBoundCheck ub = lifting_upper_bound_check(row.nu_hat, std::exp(row.nu_hat * row.T), row.gap_collapse);
  row.upper_bound_ok = ub.ok;
  row.upper_bound = ub.bound;
  row.nu_sim_status = "skipped";
  if (o.simulate && row.nu_hat > 0) {
    std::vector<double> tg;
    const int nt = 40;
    const double t_max = 3.0 / row.nu_hat;
    for (int j = 0; j < nt; ++j) tg.push_back(t_max * j / (nt - 1));
    const double half = 0.5 * o.length_L;
    auto sampler = rtp_replica_sampler(params, [half](double x, double) { return x - half; });
    try {
      DecayEstimate est = empirical_decay_rate(sampler, o.n_replicas, tg, key_of(omega) ^ o.seed);
      row.nu_sim = est.nu_sim;
      row.nu_sim_status = "ok";
    } catch (const Error& e) {
      row.nu_sim_status = e.code();
    }
  }
  return row;
}

RtpScalingResult rtp_scaling_study(const RtpScalingOptions& o) {
  if (o.omegas.empty()) throw Error("InvalidParameter", "empty omega grid");
  std::vector<double> om = o.omegas;
  std::sort(om.begin(), om.end());
  om.erase(std::unique(om.begin(), om.end()), om.end());
  RtpScalingResult res;
  res.rows.resize(om.size());
  // rows in parallel; the heavy rows go first
  std::vector<int> order(om.size());
  for (std::size_t i = 0; i < om.size(); ++i) order[i] = static_cast<int>(om.size() - 1 - i);
  parallel_for(static_cast<int>(om.size()), [&](int i) {
    int r = order[static_cast<std::size_t>(i)];
    res.rows[static_cast<std::size_t>(r)] = rtp_scaling_row(o, om[static_cast<std::size_t>(r)]);
  });
  std::vector<double> xs, ys, xl, yl;
  for (const auto& r : res.rows) {
    double wl = r.omega * r.length_L;
    if (r.nu_hat <= 0) continue;
    if (wl <= o.small_cut) {
      xs.push_back(r.omega);
      ys.push_back(r.nu_hat);
    }
    if (wl >= o.large_cut) {
      xl.push_back(r.omega);
      yl.push_back(r.nu_hat);
    }
  }
  if (xs.size() >= 2) res.small_fit = loglog_fit(xs, ys);
  if (xl.size() >= 2) res.large_fit = loglog_fit(xl, yl);
  return res;
}

GammaProcess parse_gamma_process(const std::string& s) {
  if (s == "zigzag_1d_discrete") return GammaProcess::ZigZag1dDiscrete;
  if (s == "zigzag_sim") return GammaProcess::ZigZagSim;
  if (s == "forward_sim") return GammaProcess::ForwardSim;
  throw Error("UnknownProcess", "unknown gamma-study process '" + s + "'");
}

const char* gamma_process_name(GammaProcess p) {
  switch (p) {
    case GammaProcess::ZigZag1dDiscrete: return "zigzag_1d_discrete";
    case GammaProcess::ZigZagSim: return "zigzag_sim";
    case GammaProcess::ForwardSim: return "forward_sim";
  }
  return "unknown";
}

namespace {

double discrete_zigzag_nu(const Grid1D& grid, const Potential& U, double gamma, double T, const Mat& collapse_vecs,
                          const GammaStudyOptions& o) {
  SplitGenerator split = zigzag_generator_1d(grid, U, gamma);
  RngStream rng = RngStream(o.seed).split(key_of(gamma));
  Mat rnd = random_smooth_lifted(grid, 2, 2, split.full.reference_measure, rng);
  Mat probes = lifted_probe_family(collapse_vecs, split.projection, 2, {{1.0, -1.0}}, rnd,
                                   split.full.reference_measure);
  FlowOptions fo;
  fo.n_quad = o.n_quad;
  fo.exact_minimizer = o.exact_minimizer;
  return best_nu(split.full, T, probes, fo).nu_hat;
}

double simulated_nu(const GammaStudyOptions& o, const Potential& U, double gamma, double m_hat) {
  const double t_max = 10.0 / std::sqrt(m_hat);
  std::vector<double> tg;
  for (int j = 0; j < o.n_times; ++j) tg.push_back(t_max * j / (o.n_times - 1));
  const bool forward = o.process == GammaProcess::ForwardSim;
  ReplicaSampler sampler = [&U, gamma, forward](RngStream& rng, const std::vector<double>& times, double& f0,
                                                std::vector<double>& ft) {
    Vec x0 = sample_gaussian_target(U, rng);
    SimOptions so;
    Trajectory tr = forward ? simulate_forward(U, gamma, x0, times.back(), rng, RateBound::exact(), so)
                            : simulate_zigzag(U, VelocityLaw::Hypercube, gamma, x0, times.back(), rng,
                                              RateBound::exact(), so);
    f0 = x0[0];
    ft.resize(times.size());
    for (std::size_t j = 0; j < times.size(); ++j) ft[j] = tr.state_at(times[j]).first[0];
  };
  return empirical_decay_rate(sampler, o.n_replicas, tg, o.seed ^ key_of(gamma)).nu_sim;
}

}  // namespace

GammaStudyResult gamma_study(const GammaStudyOptions& o) {
  if (o.gammas.size() < 3) throw Error("InvalidParameter", "gamma grid needs at least three points");
  if (!(o.curvature > 0)) throw Error("InvalidParameter", "curvature must be positive");
  std::vector<double> gs = o.gammas;
  std::sort(gs.begin(), gs.end());
  gs.erase(std::unique(gs.begin(), gs.end()), gs.end());
  GammaStudyResult res;
  res.rows.resize(gs.size());
  PotentialBounds pb;
  pb.K = 0.0;
  pb.hess_L = o.curvature;
  pb.a = 0.0;
  pb.b = 0.0;
  ProcessId pid = ProcessId::ZigZagHypercube;

  if (o.process == GammaProcess::ZigZag1dDiscrete) {
    if (o.d != 1) throw Error("InvalidParameter", "the discrete Zig-Zag study is one-dimensional");
    Potential U = Potential::quadratic_diag(Vec::Constant(1, o.curvature));
    const double a = truncation_half_width(U);
    Grid1D grid = make_grid(2 * a, o.n_interior, -a);
    auto [collapse, mu] = overdamped_generator_1d(grid, U);
    SpectralData lm = low_modes(collapse, 4);
    res.m_hat = lm.gap;
    res.T = 1.0 / std::sqrt(res.m_hat);
    pb.d = 1;
    parallel_for(static_cast<int>(gs.size()), [&](int i) {
      GammaRow& r = res.rows[static_cast<std::size_t>(i)];
      r.gamma = gs[static_cast<std::size_t>(i)];
      r.nu_hat = discrete_zigzag_nu(grid, U, r.gamma, res.T, lm.vectors, o);
    });
  } else {
    if (o.d < 1 || o.d > 8) throw Error("InvalidParameter", "d must lie in [1, 8]");
    if (o.process == GammaProcess::ForwardSim) pid = ProcessId::Forward;
    Potential U = Potential::quadratic_diag(Vec::Constant(o.d, o.curvature));
    res.m_hat = 0.5 * o.curvature;  // gap of (Delta - grad U . grad)/2
    res.T = 1.0 / std::sqrt(res.m_hat);
    pb.d = o.d;
    for (std::size_t i = 0; i < gs.size(); ++i) {
      GammaRow& r = res.rows[i];
      r.gamma = gs[i];
      try {
        r.nu_hat = simulated_nu(o, U, r.gamma, res.m_hat);
      } catch (const Error& e) {
        r.nu_hat = std::numeric_limits<double>::quiet_NaN();
        r.status = e.code();
      }
    }
  }
  for (auto& r : res.rows) {
    AssumptionConstants c = assumption_constants(pid, pb, res.m_hat, r.gamma, res.T);
    r.nu_formula = c.nu;
    res.C1 = c.C1;
    res.optimal_gamma_formula = optimal_gamma(c);
  }
  std::vector<double> meas, pred;
  std::size_t arg = 0;
  bool any = false;
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    const auto& r = res.rows[i];
    if (!std::isfinite(r.nu_hat)) continue;
    meas.push_back(r.nu_hat);
    pred.push_back(r.nu_formula);
    if (!any || r.nu_hat > res.rows[arg].nu_hat) arg = i;
    any = true;
  }
  if (!any) throw Error("NoiseFloor", "no grid point produced a rate");
  res.gamma_star = res.rows[arg].gamma;
  res.nu_star = res.rows[arg].nu_hat;
  res.ratio_left = res.rows.front().nu_hat / res.nu_star;
  res.ratio_right = res.rows.back().nu_hat / res.nu_star;
  const double sm = std::sqrt(res.m_hat);
  res.argmax_ok = res.gamma_star >= 0.2 * sm && res.gamma_star <= 5.0 * sm;
  res.extremes_ok = res.ratio_left <= 0.5 && res.ratio_right <= 0.5;
  res.spearman_rho = meas.size() >= 2 ? spearman(meas, pred) : 0.0;
  res.spearman_ok = res.spearman_rho >= 0.9;
  return res;
}

nlohmann::json constants_report(const std::vector<ConstantsQuery>& queries) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& q : queries) {
    AssumptionConstants c = assumption_constants(q.process, q.bounds, q.m, q.gamma, q.T);
    nlohmann::json j;
    j["process"] = process_name(q.process);
    j["m"] = c.m;
    j["m_v"] = c.m_v;
    j["C1"] = c.C1;
    j["C2"] = c.C2;
    j["gamma"] = c.gamma;
    j["T"] = c.T;
    j["d"] = c.d;
    j["nu_formula"] = c.nu;
    j["optimal_gamma"] = optimal_gamma(c);
    j["scaling_only"] = c.scaling_only;
    if (c.K) j["K"] = *c.K;
    if (c.hess_L) j["hess_L"] = *c.hess_L;
    if (c.a) j["a"] = *c.a;
    if (c.b) j["b"] = *c.b;
    if (q.process == ProcessId::Rtp) {
      const double wl = q.omega * q.length_L;
      j["omega"] = q.omega;
      j["L"] = q.length_L;
      j["nu_corollary"] = q.omega / (1.0 + wl * wl);
    }
    if (q.measured) j["nu_measured"] = *q.measured;
    else j["nu_measured"] = nullptr;
    out.push_back(j);
  }
  return out;
}

}  // namespace liftlab
