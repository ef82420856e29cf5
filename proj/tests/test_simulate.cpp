#include "liftlab/io.hpp"
#include "liftlab/simulate.hpp"
#include "liftlab/stats.hpp"

#include <doctest.h>

#include <cmath>
#include <map>

using namespace liftlab;

namespace {

double rayleigh_cdf(double s) { return s <= 0 ? 0.0 : 1.0 - std::exp(-0.5 * s * s); }

}  // namespace

TEST_CASE("Kolmogorov survival function at tabulated points") {
  CHECK(kolmogorov_q(1.0) == doctest::Approx(0.2699996716735).epsilon(1e-9));
  CHECK(kolmogorov_q(1.36) == doctest::Approx(0.0494).epsilon(0.01));
  CHECK(kolmogorov_q(0.0) == 1.0);
  CHECK(kolmogorov_q(5.0) < 1e-20);
}

TEST_CASE("KS tests accept the right law and reject a wrong one") {
  RngStream rng(1);
  std::vector<double> u, e;
  for (int i = 0; i < 5000; ++i) {
    u.push_back(rng.uniform());
    e.push_back(rng.exponential(1.0));
  }
  CHECK(ks_one_sample(u, [](double x) { return std::clamp(x, 0.0, 1.0); }).p_value > 0.01);
  CHECK(ks_one_sample(e, [](double x) { return std::clamp(x, 0.0, 1.0); }).p_value < 1e-6);
  std::vector<double> u2;
  for (int i = 0; i < 3000; ++i) u2.push_back(rng.uniform());
  CHECK(ks_two_sample(u, u2).p_value > 0.01);
  CHECK(ks_two_sample(u, e).p_value < 1e-6);
}

TEST_CASE("chi-square, ranks, Spearman and fits") {
  ChiSquareResult c = chi_square_test({25, 25, 50}, {0.25, 0.25, 0.5});
  CHECK(c.statistic == doctest::Approx(0.0));
  CHECK(c.p_value == doctest::Approx(1.0));
  CHECK(c.dof == 2);
  ChiSquareResult c2 = chi_square_test({30, 20}, {0.5, 0.5});
  CHECK(c2.statistic == doctest::Approx(2.0));
  CHECK(c2.p_value == doctest::Approx(0.1572992).epsilon(1e-6));
  std::vector<double> r = ranks({3.0, 1.0, 3.0, 2.0});
  CHECK(r == std::vector<double>{3.5, 1.0, 3.5, 2.0});
  CHECK(spearman({1, 2, 3, 4}, {10, 20, 25, 100}) == doctest::Approx(1.0));
  CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(spearman({1, 1, 1}, {1, 2, 3}), Error);
  LinearFit f = loglog_fit({1, 10, 100}, {2, 0.2, 0.02});
  CHECK(f.slope == doctest::Approx(-1.0));
  CHECK(f.slope_se < 1e-12);
}

TEST_CASE("affine first passage inverts the integrated rate") {
  RngStream rng(2);
  for (int i = 0; i < 200; ++i) {
    double a = rng.gaussian(), b = rng.gaussian(), e = rng.exponential(1.0);
    double s = affine_first_passage(a, b, e);
    if (!std::isfinite(s)) {
      CHECK(b <= 0);
      continue;
    }
    // midpoint integration of (a + b u)_+ over [0, s]
    const int M = 20000;
    double acc = 0;
    for (int j = 0; j < M; ++j) acc += std::max(0.0, a + b * (s * (j + 0.5) / M)) * s / M;
    CHECK(acc == doctest::Approx(e).epsilon(1e-5));
  }
  CHECK(std::isinf(affine_first_passage(-1.0, 0.0, 1.0)));
}

TEST_CASE("RTP long run reproduces the stationary atoms and densities") {
  RtpParams p{1.0, 2.0};
  RngStream rng(42);
  Trajectory tr = simulate_rtp(p, 1.0, 0.0, 2e4, rng, {.store_events = true});
  Grid1D cells = make_grid(2.0, 19);
  WeightedMeasure occ = rtp_occupation(tr, cells);
  WeightedMeasure ex = rtp_exact_occupation(p, cells);
  CHECK(ex.weights[1] == doctest::Approx(0.125));
  CHECK(ex.total_mass() == doctest::Approx(1.0));
  const int last = 3 * (cells.size());
  for (int s : {1, 2, last, last + 1}) CHECK(std::abs(occ.weights[s] - 0.125) < 0.02);
  CHECK(occ.weights[0] < 1e-12);
  CHECK(occ.weights[last + 2] < 1e-12);
  CHECK(total_variation(occ, ex) < 0.05);
  // positions stay in [0, L]
  for (double x : tr.x) {
    CHECK(x >= 0.0);
    CHECK(x <= 2.0);
  }
}

TEST_CASE("RTP holding times: interior runs last Exp(2 omega)") {
  RtpParams p{1.5, 50.0};
  RngStream rng(9);
  Trajectory tr = simulate_rtp(p, 25.0, 2.0, 3000.0, rng);
  std::vector<double> gaps;
  double last = -1;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    if (tr.kind[i] != EventKind::Flip) {
      last = -1;
      continue;
    }
    double x = tr.x[i];
    if (last >= 0 && x > 0 && x < p.length_L) gaps.push_back(tr.t[i] - last);
    last = tr.t[i];
  }
  REQUIRE(gaps.size() > 1000);
  KsResult ks = ks_one_sample(gaps, [&](double s) { return 1.0 - std::exp(-2 * p.omega * s); });
  CHECK(ks.p_value > 0.01);
}

TEST_CASE("stationary RTP sampler matches the atom and velocity probabilities") {
  RtpParams p{0.7, 1.3};
  RngStream rng(3);
  const double Z = 2 + p.omega * p.length_L;
  std::map<std::pair<int, int>, double> count;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    auto [x, v] = sample_rtp_stationary(p, rng);
    int where = x == 0.0 ? 0 : (x == p.length_L ? 2 : 1);
    count[{where, static_cast<int>(v)}] += 1;
  }
  std::vector<double> obs, prob;
  const double a = 0.5 / Z, in = p.omega * p.length_L / Z;
  for (auto [key, pr] : std::vector<std::pair<std::pair<int, int>, double>>{
           {{0, 0}, a}, {{0, -2}, a}, {{2, 2}, a}, {{2, 0}, a}, {{1, 2}, in / 4}, {{1, 0}, in / 2}, {{1, -2}, in / 4}}) {
    obs.push_back(count[key]);
    prob.push_back(pr);
  }
  CHECK(chi_square_test(obs, prob).p_value > 0.01);
}

TEST_CASE("Zig-Zag on a quadratic target has the right variances") {
  Potential U = Potential::quadratic_diag((Vec(2) << 1.0, 4.0).finished());
  RngStream rng(11);
  Vec x0 = sample_gaussian_target(U, rng);
  for (VelocityLaw law : {VelocityLaw::Hypercube, VelocityLaw::Gaussian}) {
    Trajectory tr = simulate_zigzag(U, law, 0.5, x0, 4e4, rng, RateBound::exact(), {.store_events = false});
    Mat C = tr.covariance();
    CHECK(C(0, 0) == doctest::Approx(1.0).epsilon(0.05));
    CHECK(C(1, 1) == doctest::Approx(0.25).epsilon(0.05));
    CHECK(tr.size() == 1);  // only the End record
  }
}

TEST_CASE("thinned and exact Zig-Zag event clocks agree in law") {
  Potential U = Potential::quadratic_diag(Vec::Constant(2, 1.0));
  U.grad_lipschitz = 1.0;
  RngStream r1(5), r2(6);
  Vec x0 = Vec::Zero(2);
  SimOptions o{.store_events = false, .record_flip_gaps = true};
  Trajectory a = simulate_zigzag(U, VelocityLaw::Hypercube, 0.0, x0, 2e4, r1, RateBound::exact(), o);
  Trajectory b = simulate_zigzag(U, VelocityLaw::Hypercube, 0.0, x0, 2e4, r2, RateBound::lipschitz(), o);
  CHECK(b.n_proposals > b.n_accepted);
  CHECK(b.max_accept_ratio <= 1.0 + 1e-9);
  CHECK(ks_two_sample(a.flip_gaps, b.flip_gaps).p_value > 0.01);
}

TEST_CASE("a bound below the true rate is reported") {
  Potential U = Potential::quadratic_diag(Vec::Constant(1, 1.0));
  RateBound tiny;
  tiny.kind = RateBound::Kind::Custom;
  tiny.custom = [](const Vec&, const Vec&, int) { return AffineBound{1e-3, 0.0, 0.5}; };
  RngStream rng(1);
  Vec x0 = Vec::Constant(1, 3.0);
  SimOptions o;
  o.v0 = Vec::Constant(1, 1.0);
  CHECK_THROWS_AS(simulate_zigzag(U, VelocityLaw::Hypercube, 0.0, x0, 1e4, rng, tiny, o), Error);
}

TEST_CASE("Forward jump kernel: Rayleigh against the gradient, Gaussian across") {
  RngStream rng(17);
  Vec grad(3);
  grad << 1.0, -2.0, 0.5;
  Vec n = grad.normalized();
  std::vector<double> radial, across;
  for (int i = 0; i < 20000; ++i) {
    Vec w = forward_jump_velocity(grad, rng);
    radial.push_back(-w.dot(n));
    Vec perp = w - w.dot(n) * n;
    across.push_back(perp[0] / std::sqrt(1 - n[0] * n[0]));
  }
  CHECK(*std::min_element(radial.begin(), radial.end()) > 0);
  CHECK(ks_one_sample(radial, rayleigh_cdf).p_value > 0.01);
  CHECK(ks_one_sample(across, [](double s) { return 0.5 * std::erfc(-s / std::sqrt(2.0)); }).p_value > 0.01);
  CHECK_THROWS_AS(forward_jump_velocity(Vec::Zero(3), rng), Error);
}

TEST_CASE("Forward process keeps the Gaussian target") {
  Potential U = Potential::quadratic_diag((Vec(2) << 1.0, 2.0).finished());
  RngStream rng(23);
  Trajectory tr = simulate_forward(U, 1.0, sample_gaussian_target(U, rng), 4e4, rng, RateBound::exact(),
                                   {.store_events = false});
  Mat C = tr.covariance();
  CHECK(C(0, 0) == doctest::Approx(1.0).epsilon(0.05));
  CHECK(C(1, 1) == doctest::Approx(0.5).epsilon(0.05));
  CHECK(std::abs(tr.mean()[0]) < 0.05);
}

TEST_CASE("AR(1) integrated autocorrelation time is (1 + phi)/(1 - phi)") {
  RngStream rng(4);
  const double phi = 0.9;
  std::vector<double> s(400000);
  double x = 0;
  for (double& v : s) {
    x = phi * x + rng.gaussian();
    v = x;
  }
  Autocorrelation ac = autocorrelation(s, 2000);
  CHECK(ac.acf[1] == doctest::Approx(phi).epsilon(0.01));
  CHECK(ac.tau_int == doctest::Approx(19.0).epsilon(0.1));
  CHECK_THROWS_AS(autocorrelation(std::vector<double>(100, 1.0), 5), Error);
  CHECK_THROWS_AS(autocorrelation(s, 100000), Error);
}

TEST_CASE("two-state chain decays at twice its flip rate") {
  std::vector<double> tg;
  for (int j = 0; j < 30; ++j) tg.push_back(0.05 * j);
  DecayEstimate d = empirical_decay_rate(two_state_sampler(1.0), 20000, tg, 7);
  CHECK(d.nu_sim == doctest::Approx(2.0).epsilon(0.05));
  DecayEstimate d2 = empirical_decay_rate(two_state_sampler(1.0), 20000, tg, 7);
  CHECK(d2.nu_sim == d.nu_sim);
}

TEST_CASE("trajectory records interpolate and round-trip through the event log") {
  RtpParams p{2.0, 1.0};
  RngStream rng(31);
  Trajectory tr = simulate_rtp(p, 0.5, 2.0, 5.0, rng);
  auto [x, v] = tr.state_at(0.0);
  CHECK(x[0] == 0.5);
  CHECK(v[0] == 2.0);
  auto [xe, ve] = tr.state_at(5.0);
  CHECK(xe[0] == doctest::Approx(tr.x.back()));
  std::string bytes = encode_event_log(tr);
  CHECK(bytes.substr(0, 4) == "LLEV");
  Trajectory back = decode_event_log(bytes);
  CHECK(back.t == tr.t);
  CHECK(back.x == tr.x);
  CHECK(back.v == tr.v);
  CHECK(back.kind == tr.kind);
  CHECK_THROWS_AS(decode_event_log(bytes.substr(0, 10)), Error);
  CHECK(tr.kind.back() == EventKind::End);
}

TEST_CASE("RTP rejects states outside its state space") {
  RngStream rng(1);
  CHECK_THROWS_AS(simulate_rtp({1.0, 1.0}, 2.0, 0.0, 1.0, rng), Error);
  CHECK_THROWS_AS(simulate_rtp({1.0, 1.0}, 0.5, 1.0, 1.0, rng), Error);
  CHECK_THROWS_AS(parse_velocity_law("uniform"), Error);
}
