#include "liftlab/flow_poincare.hpp"
#include "liftlab/generators.hpp"
#include "liftlab/lift_check.hpp"

#include <doctest.h>

#include <cmath>

using namespace liftlab;

TEST_CASE("flow ratio of an eigenfunction is its eigenvalue") {
  Grid1D g = make_grid(1.0, 120);
  auto [op, mu] = sticky_bm_generator(g, 1.0);
  SpectralData sd = low_modes(op, 3);
  for (int k = 1; k <= 3; ++k)
    for (double T : {0.1, 1.0, 5.0})
      CHECK(flow_ratio(op, sd.vectors.col(k), T) == doctest::Approx(sd.rate(k)).epsilon(1e-9));
}

TEST_CASE("for a reversible generator the flow minimizer recovers the spectral gap") {
  Grid1D g = make_grid(1.0, 60);
  auto [op, mu] = sticky_bm_generator(g, 2.0);
  auto sg = make_semigroup(op);
  for (double T : {0.3, 2.0}) {
    FlowMinimizer fm = flow_minimizer(op, *sg, T, 48);
    CHECK(fm.nu == doctest::Approx(spectral_gap(op)).epsilon(1e-7));
    CHECK(flow_ratio(op, fm.f, T, 48) == doctest::Approx(fm.nu).epsilon(1e-7));
  }
}

TEST_CASE("two-state chain: the only mean-zero direction decays at rate a + b") {
  const double a = 0.4, b = 1.1;
  Mat A(2, 2);
  A << -a, a, b, -b;
  Vec w(2);
  w << b / (a + b), a / (a + b);
  OperatorMatrix op = make_operator(A, make_measure(w, {}, true), true);
  Vec f(2);
  f << a, -b;  // mean zero under w
  CHECK(flow_ratio(op, f, 0.7) == doctest::Approx(a + b));
  FlowReport r = best_nu(op, 0.7, f, {.n_quad = 32, .exact_minimizer = true});
  CHECK(r.nu_hat == doctest::Approx(a + b));
}

TEST_CASE("RTP flow Poincare constant gives decay over windows and pointwise") {
  Grid1D g = make_grid(1.0, 100);
  RtpParams p{1.0, 1.0};
  auto [collapse, mu] = sticky_bm_generator(g, p.omega);
  SplitGenerator s = rtp_generator(g, p);
  SpectralData lm = low_modes(collapse, 4);
  const double T = 1.0 / std::sqrt(lm.gap);
  RngStream rng(3);
  Mat rnd = random_smooth_lifted(g, 3, 4, s.full.reference_measure, rng);
  Mat probes = lifted_probe_family(lm.vectors, s.projection, 3, {{1, 0, -1}, {1, -2, 1}}, rnd,
                                   s.full.reference_measure);
  FlowOptions fo;
  fo.decay_periods = 10;
  fo.exact_minimizer = true;
  FlowReport r = best_nu(s.full, T, probes, fo);
  CHECK(r.nu_hat > 0);
  CHECK(r.decay_check_margin >= -1e-8);
  // every probe separately, not only the worst
  std::vector<double> tg;
  for (int k = 0; k <= 10; ++k) tg.push_back(k * T);
  for (int c = 0; c < probes.cols(); c += 5) CHECK(decay_check(s.full, probes.col(c), T, r.nu_hat, tg) >= -1e-8);
  std::vector<double> pts;
  for (int k = 0; k <= 80; ++k) pts.push_back(k * 20 * T / 80);
  PointwiseCheck pc = pointwise_decay_bound(s.full, r.worst_probe, r.nu_hat, T, pts);
  CHECK(pc.ok);
  // ratios of all probes sit above the reported minimum
  CHECK(r.ratios.minCoeff() == doctest::Approx(r.nu_hat));
  UpperBoundCheck ub = lifting_upper_bound_check(r.nu_hat, std::exp(r.nu_hat * T), lm.gap);
  CHECK(ub.ok);
}

TEST_CASE("upper bound check arithmetic and errors") {
  UpperBoundCheck u = lifting_upper_bound_check(0.5, std::exp(1.0), 2.0);
  CHECK(u.bound == doctest::Approx(2.0 * 2.0));
  CHECK(u.slack == doctest::Approx(3.5));
  CHECK_THROWS_AS(lifting_upper_bound_check(0.5, 0.9, 1.0), Error);
  Grid1D g = make_grid(1.0, 20);
  auto [op, mu] = sticky_bm_generator(g, 1.0);
  CHECK_THROWS_AS(flow_ratio(op, Vec::Ones(op.dim()), 1.0), Error);
}

TEST_CASE("probe family columns are centered and normalized") {
  Grid1D g = make_grid(1.0, 50);
  auto [collapse, mu] = sticky_bm_generator(g, 1.0);
  SplitGenerator s = rtp_generator(g, {1.0, 1.0});
  SpectralData lm = low_modes(collapse, 3);
  Mat P = lifted_probe_family(lm.vectors, s.projection, 3, {{1, 0, -1}}, Mat(s.full.dim(), 0), s.full.reference_measure);
  CHECK(P.cols() == 6);
  for (int c = 0; c < P.cols(); ++c) {
    CHECK(norm(P.col(c), s.full.reference_measure) == doctest::Approx(1.0));
    CHECK(std::abs(mean(P.col(c), s.full.reference_measure)) < 1e-12);
  }
}
