// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include "liftlab/divergence.hpp"
#include "liftlab/flow_poincare.hpp"
#include "liftlab/generators.hpp"
#include "liftlab/io.hpp"
#include "liftlab/lift_check.hpp"
#include "liftlab/simulate.hpp"
#include "liftlab/spectral.hpp"
#include "liftlab/stats.hpp"
#include "liftlab/studies.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

using namespace liftlab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void need(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [fail: " << what << "]";
    }
  }
};

int failures = 0;

void criterion(int id, const char* name, double budget_s, const std::function<void(Outcome&)>& body) {
  Outcome o;
  auto t0 = std::chrono::steady_clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << " [exception: " << e.what() << "]";
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  o.need(secs <= budget_s, "runtime " + std::to_string(secs) + " s over " + std::to_string(budget_s) + " s");
  if (!o.pass) ++failures;
  std::printf("%s criterion %d (%s): %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.str().c_str(),
              secs);
  std::fflush(stdout);
}

std::string num(double x) { return fmt_num(x); }

// ---------- 1 ----------
void invariant_measure(Outcome& o) {
  RtpParams p{1.0, 2.0};
  RngStream rng(20240601);
  auto [x0, v0] = sample_rtp_stationary(p, rng);
  Trajectory tr = simulate_rtp(p, x0, v0, 1e5, rng);
  Grid1D cells = make_grid(p.length_L, 39);
  WeightedMeasure occ = rtp_occupation(tr, cells);
  const int nc = cells.size() - 1, right = 3 * (nc + 1);
  double worst_atom = 0;
  for (int s : {1, 2, right, right + 1}) worst_atom = std::max(worst_atom, std::abs(occ.weights[s] - 0.125));
  // interior densities per unit length against (1/16, 1/8, 1/16)
  const std::array<double, 3> dens{1.0 / 16, 1.0 / 8, 1.0 / 16};
  double tv = 0;
  for (int c = 0; c < nc; ++c)
    for (int k = 0; k < 3; ++k) tv += std::abs(occ.weights[3 * (c + 1) + k] - dens[static_cast<std::size_t>(k)] * cells.h);
  tv *= 0.5;
  const double massless = occ.weights[0] + occ.weights[right + 2];
  o.detail << "max atom error " << num(worst_atom) << ", interior TV " << num(tv) << ", massless atoms "
           << num(massless);
  o.need(worst_atom <= 0.01, "atom error > 0.01");
  o.need(tv <= 0.02, "interior TV > 0.02");
}

// ---------- 2 ----------
void velocity_poincare_check(Outcome& o) {
  VelocityKernel k = rtp_velocity_kernel(1.0);
  Eigen::Vector3d r = k.weight_matrix.diagonal().cwiseSqrt();
  Eigen::Matrix3d M = r.asDiagonal() * k.q_matrix * r.cwiseInverse().asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(0.5 * (M + M.transpose()));
  Eigen::Vector3d ev = es.eigenvalues();  // ascending
  double err = std::max({std::abs(ev[0] + 4), std::abs(ev[1] + 2), std::abs(ev[2])});
  double asym = (k.weight_matrix * k.q_matrix - (k.weight_matrix * k.q_matrix).transpose()).cwiseAbs().maxCoeff();
  double mv = velocity_poincare(k);
  o.detail << "eigenvalues " << num(ev[2]) << ", " << num(ev[1]) << ", " << num(ev[0]) << "; m_v " << num(mv);
  o.need(err <= 1e-12, "eigenvalues off by more than 1e-12");
  o.need(asym <= 1e-12, "Q not S-symmetric");
  o.need(std::abs(mv - 2.0) <= 1e-12, "m_v != 2");
}

// ---------- 3 ----------
void sticky_poincare(Outcome& o) {
  double g200 = spectral_gap(sticky_bm_generator(make_grid(1.0, 200), 1.0).first);
  double g400 = spectral_gap(sticky_bm_generator(make_grid(1.0, 400), 1.0).first);
  double change = std::abs(g400 - g200) / g400;
  o.detail << "1/m(400) " << num(1.0 / g400) << ", gap change 200->400 " << num(100 * change) << "%";
  o.need(1.0 / g400 <= 1.98, "1/m > 1.98");
  o.need(change < 0.01, "gap change >= 1%");
}

// ---------- 4 ----------
void lift_identities(Outcome& o) {
  RtpParams p{1.0, 1.0};
  LiftReport a = rtp_lift_report(p, 200), b = rtp_lift_report(p, 400);
  double f1 = a.first_order_residual / b.first_order_residual;
  double f2 = a.second_order_residual / b.second_order_residual;
  double f3 = a.antisymmetry_residual / b.antisymmetry_residual;
  double expected = p.omega * p.length_L / (2 + p.omega * p.length_L);
  double rel = std::abs(b.second_order_x - expected) / expected;
  o.detail << "reduction factors " << num(f1) << ", " << num(f2) << ", " << num(f3) << "; second-order x "
           << num(b.second_order_x) << " vs " << num(expected);
  o.need(f1 >= 1.8 && f2 >= 1.8 && f3 >= 1.8, "a residual shrank by less than 1.8");
  o.need(rel <= 0.02, "second-order identity off by more than 2%");
}

// ---------- 5 ----------
void flow_decay(Outcome& o) {
  RtpParams p{1.0, 1.0};
  Grid1D g = make_grid(1.0, 200);
  OperatorMatrix collapse = sticky_bm_generator(g, p.omega).first;
  SplitGenerator s = rtp_generator(g, p);
  SpectralData lm = low_modes(collapse, 6);
  const double T = 1.0 / std::sqrt(lm.gap);
  RngStream rng(5);
  Mat rnd = random_smooth_lifted(g, 3, 6, s.full.reference_measure, rng);
  Mat probes = lifted_probe_family(lm.vectors, s.projection, 3, {{1, 0, -1}, {1, -2, 1}}, rnd,
                                   s.full.reference_measure);
  FlowOptions fo;
  fo.exact_minimizer = true;
  fo.decay_periods = 10;
  FlowReport rep = best_nu(s.full, T, probes, fo);
  std::vector<double> tg;
  for (int k = 0; k <= 10; ++k) tg.push_back(k * T);
  double margin = rep.decay_check_margin;
  for (int c = 0; c < probes.cols(); ++c)
    margin = std::min(margin, decay_check(s.full, probes.col(c), T, rep.nu_hat, tg));
  std::vector<double> pts;
  for (int k = 0; k <= 400; ++k) pts.push_back(20 * T * k / 400);
  double worst = 0;
  for (int c = 0; c < probes.cols(); ++c)
    worst = std::max(worst, pointwise_decay_bound(s.full, probes.col(c), rep.nu_hat, T, pts).worst_ratio);
  worst = std::max(worst, pointwise_decay_bound(s.full, rep.worst_probe, rep.nu_hat, T, pts).worst_ratio);
  o.detail << "nu_hat " << num(rep.nu_hat) << ", T " << num(T) << ", min decay margin " << num(margin)
           << ", max pointwise ratio " << num(worst);
  o.need(rep.nu_hat > 0, "nu_hat not positive");
  o.need(margin >= -1e-8, "decay margin below -1e-8");
  o.need(worst <= 1.0 + 1e-12, "pointwise bound violated");
}

// ---------- 6 ----------
void divergence(Outcome& o) {
  Grid1D g = make_grid(1.0, 200);
  OperatorMatrix collapse = sticky_bm_generator(g, 1.0).first;
  SpectralData sd = decompose(collapse);
  const double m = sd.gap, T = 1.0 / std::sqrt(m);
  HarmonicBasis b = build_harmonic_basis(collapse, sd, T);
  const double e = std::exp(1.0), c3 = 10.0 / (std::sqrt(m) * T), tol = 1e-6;
  RngStream rng(77);
  double res = 0, mixed = 0, p1 = 0, p1b = 0, p2 = 0, p3a = 0, p3b = 0;
  for (int i = 0; i < 100; ++i) {
    Mat f = random_space_time_field(b, rng, b.size() - 1);
    DivergenceSolution s = solve_divergence(f, b, m);
    res = std::max(res, s.residual);
    mixed = std::max({mixed, s.r1, s.r2, s.r3});
    DivComponents parts = decompose_rhs(f, b);
    DivergenceSolution sp = solve_divergence(parts.perp, b, m);
    DivergenceSolution sa = solve_divergence(parts.la, b, m);
    DivergenceSolution ss = solve_divergence(parts.ls, b, m);
    res = std::max({res, sp.residual, sa.residual, ss.residual});
    p1 = std::max(p1, sp.r1);
    p1b = std::max(p1b, sp.r2);
    p2 = std::max(p2, sa.r2);
    p3a = std::max(p3a, ss.r1);
    p3b = std::max(p3b, ss.raw3);
  }
  o.detail << "max residual " << num(res) << "; case 1 " << num(p1) << ", " << num(p1b) << "; case 2 " << num(p2)
           << "; case 3 " << num(p3a) << " (<= " << num(1 + e) << "), " << num(p3b) << " (<= " << num(c3)
           << "); mixed " << num(mixed);
  o.need(res <= 1e-8, "residual > 1e-8");
  o.need(p1 <= 1 + tol && p1b <= 1 + tol, "case 1 constant exceeded");
  o.need(p2 <= 2 + tol, "case 2 constant exceeded");
  o.need(p3a <= 1 + e + tol && p3b <= c3 + tol, "case 3 constant exceeded");
  o.need(mixed <= 50, "mixed ratio > 50");
}

// ---------- 7 ----------
void rtp_scaling(Outcome& o) {
  RtpScalingOptions opt;
  opt.omegas = {0.01, 0.02, 0.05, 0.1, 1.0, 40.0, 80.0, 160.0};
  opt.simulate = false;
  RtpScalingResult r = rtp_scaling_study(opt);
  bool ub = true;
  for (const auto& row : r.rows) ub = ub && row.upper_bound_ok;
  if (!r.small_fit || !r.large_fit) {
    o.need(false, "a regime has fewer than two rows");
    return;
  }
  o.detail << "small slope " << num(r.small_fit->slope) << " (se " << num(r.small_fit->slope_se)
           << "), large slope " << num(r.large_fit->slope) << " (se " << num(r.large_fit->slope_se)
           << "), upper bound on all rows " << (ub ? "yes" : "no");
  o.need(std::abs(r.small_fit->slope - 1) <= 0.15, "small-omega slope outside 1 +- 0.15");
  o.need(std::abs(r.large_fit->slope + 1) <= 0.15, "large-omega slope outside -1 +- 0.15");
  o.need(ub, "upper bound violated");
}

// ---------- 8 ----------
void samplers(Outcome& o) {
  Potential U = Potential::quadratic_diag((Vec(2) << 1.0, 2.0).finished());
  U.grad_lipschitz = 2.0;
  RngStream rng(8);
  Trajectory zz = simulate_zigzag(U, VelocityLaw::Hypercube, 1.0, sample_gaussian_target(U, rng), 2e5, rng,
                                  RateBound::exact(), {.store_events = false});
  Mat C = zz.covariance();
  double zz_err = std::max(std::abs(C(0, 0) - 1.0), std::abs(C(1, 1) - 0.5) / 0.5);
  SimOptions gaps{.store_events = false, .record_flip_gaps = true};
  RngStream r1(81), r2(82);
  Vec x0 = Vec::Zero(2);
  Trajectory ex = simulate_zigzag(U, VelocityLaw::Hypercube, 0.0, x0, 5e4, r1, RateBound::exact(), gaps);
  Trajectory th = simulate_zigzag(U, VelocityLaw::Hypercube, 0.0, x0, 5e4, r2, RateBound::lipschitz(), gaps);
  double p_thin = ks_two_sample(ex.flip_gaps, th.flip_gaps).p_value;

  RngStream rf(88);
  Vec grad(2);
  grad << 0.3, -1.7;
  Vec n = grad.normalized();
  std::vector<double> radial;
  for (int i = 0; i < 20000; ++i) radial.push_back(-forward_jump_velocity(grad, rf).dot(n));
  double p_ray = ks_one_sample(radial, [](double s) { return s <= 0 ? 0.0 : 1.0 - std::exp(-0.5 * s * s); }).p_value;
  Trajectory fw = simulate_forward(U, 1.0, sample_gaussian_target(U, rf), 2e5, rf, RateBound::exact(),
                                   {.store_events = false});
  Mat F = fw.covariance();
  double fw_err = std::max(std::abs(F(0, 0) - 1.0), std::abs(F(1, 1) - 0.5) / 0.5);
  o.detail << "Zig-Zag variance rel. error " << num(zz_err) << ", thinning KS p " << num(p_thin)
           << ", Forward radial KS p " << num(p_ray) << ", Forward variance rel. error " << num(fw_err);
  o.need(zz_err <= 0.02, "Zig-Zag variances off by more than 2%");
  o.need(p_thin > 0.01, "thinned and exact clocks differ");
  o.need(p_ray > 0.01, "jump kernel radial law rejected");
  o.need(fw_err <= 0.02, "Forward moments off by more than 2%");
}

// ---------- 9 ----------
void gamma_scaling(Outcome& o) {
  GammaStudyOptions opt;
  for (int i = 0; i < 9; ++i) opt.gammas.push_back(0.01 * std::pow(10.0, 0.5 * i));
  GammaStudyResult r = gamma_study(opt);
  o.detail << "gamma* " << num(r.gamma_star) << " (sqrt m " << num(std::sqrt(r.m_hat)) << "), end ratios "
           << num(r.ratio_left) << " / " << num(r.ratio_right) << ", Spearman " << num(r.spearman_rho);
  o.need(r.argmax_ok, "argmax outside [0.2, 5] sqrt(m)");
  o.need(r.extremes_ok, "an extreme exceeds half the peak");
  o.need(r.spearman_ok, "Spearman rho < 0.9");
}

// ---------- 10 ----------
int run_cli(const std::string& args) {
  int rc = std::system((std::string(LIFTLAB_CLI_PATH) + " " + args + " > /dev/null").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

void determinism(Outcome& o) {
  const std::vector<std::string> cmds{
      "simulate --process rtp --omega 1 --length 2 --t-end 2000 --seed 3",
      "simulate --process zigzag --d 2 --t-end 500 --seed 4",
      "simulate --process forward --d 2 --t-end 500 --seed 4",
      "spectrum --process rtp --omega 2 --n-interior 60",
      "lift-check --omega 1 --n-interior 100",
      "flow-poincare --process zigzag-1d --n-interior 60",
      "divergence-check --omega 1 --n-interior 60 --n-samples 2",
      "study --preset gamma-zigzag --n-interior 60 --gammas 0.1,1,10",
  };
  fs::path base = fs::temp_directory_path() / "liftlab_acceptance_det";
  fs::remove_all(base);
  int files = 0, diffs = 0;
  for (std::size_t i = 0; i < cmds.size(); ++i) {
    fs::path a = base / (std::to_string(i) + "a"), b = base / (std::to_string(i) + "b");
    if (run_cli(cmds[i] + " --out " + a.string()) != 0 || run_cli(cmds[i] + " --out " + b.string() + " --threads 1") != 0) {
      o.need(false, "command failed: " + cmds[i]);
      continue;
    }
    for (const auto& entry : fs::directory_iterator(a)) {
      ++files;
      fs::path other = b / entry.path().filename();
      if (!fs::exists(other) || read_file(entry.path().string()) != read_file(other.string())) {
        ++diffs;
        o.need(false, "artifact differs: " + entry.path().filename().string());
      }
    }
  }
  o.detail << files << " artifacts from " << cmds.size() << " subcommand runs compared, " << diffs << " differ";
  o.need(files > 0, "no artifacts produced");
  fs::remove_all(base);
}

}  // namespace

int main() {
  criterion(1, "invariant measure", 60, invariant_measure);
  criterion(2, "velocity Poincare constant", 1, velocity_poincare_check);
  criterion(3, "sticky BM Poincare bound", 30, sticky_poincare);
  criterion(4, "lift identities", 60, lift_identities);
  criterion(5, "flow Poincare implies decay", 120, flow_decay);
  criterion(6, "divergence lemma", 180, divergence);
  criterion(7, "RTP regime scaling", 900, rtp_scaling);
  criterion(8, "sampler correctness", 600, samplers);
  criterion(9, "gamma optimization", 600, gamma_scaling);
  criterion(10, "determinism", 600, determinism);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
