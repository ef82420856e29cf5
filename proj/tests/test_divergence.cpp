#include "liftlab/divergence.hpp"
#include "liftlab/generators.hpp"

#include <doctest.h>

#include <cmath>

using namespace liftlab;

namespace {

struct Setup {
  Grid1D grid;
  OperatorMatrix collapse;
  SpectralData sd;
  double m, T;
  HarmonicBasis basis;
};

Setup make_setup(int n = 100, double omega = 1.0) {
  Setup s;
  s.grid = make_grid(1.0, n);
  s.collapse = sticky_bm_generator(s.grid, omega).first;
  s.sd = decompose(s.collapse);
  s.m = s.sd.gap;
  s.T = 1.0 / std::sqrt(s.m);
  s.basis = build_harmonic_basis(s.collapse, s.sd, s.T, 128);
  return s;
}

const Setup& shared() {
  static Setup s = make_setup();
  return s;
}

}  // namespace

TEST_CASE("time grid integrates and differentiates smooth functions") {
  TimeGrid tg = make_time_grid(2.0, 64);
  CHECK(tg.w.sum() == doctest::Approx(2.0));
  Vec f = tg.t.array().sin(), df = tg.t.array().cos();
  CHECK((tg.D * f - df).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(tg.w.dot(f) == doctest::Approx(1.0 - std::cos(2.0)).epsilon(1e-13));
}

TEST_CASE("harmonic fields satisfy (d_tt + 2L) H = 0") {
  const HarmonicBasis& b = shared().basis;
  const Mat& D = b.time.D;
  for (int k : {0, 1, 2, 5}) {
    Mat H = b.anti(k);
    Mat res = H * (D * D).transpose() + 2.0 * (b.collapse.entries * H);
    CHECK(res.cwiseAbs().maxCoeff() < 1e-6 * std::max(1.0, b.alpha2[k]) * H.cwiseAbs().maxCoeff() + 1e-9);
    CHECK((D * b.anti_profile(k) - b.anti_profile_dot(k)).cwiseAbs().maxCoeff() < 1e-8 * (1 + b.beta(k)));
    if (k >= 1) {
      Mat S = b.sym(k);
      Mat rs = S * (D * D).transpose() + 2.0 * (b.collapse.entries * S);
      CHECK(rs.cwiseAbs().maxCoeff() < 1e-6 * b.alpha2[k] * S.cwiseAbs().maxCoeff());
    }
  }
  CHECK(b.beta(3) == doctest::Approx(std::sqrt(2.0 * b.alpha2[3])));
}

TEST_CASE("low modes are those with alpha <= 2/T") {
  const Setup& s = shared();
  for (int k = 0; k < s.basis.size(); ++k) CHECK(bool(s.basis.low[static_cast<std::size_t>(k)]) == (s.basis.alpha(k) <= 2.0 / s.T + 1e-12));
  CHECK(s.basis.low[0]);
}

TEST_CASE("rhs decomposition is an orthogonal resolution of f") {
  const Setup& s = shared();
  RngStream rng(8);
  for (int rep = 0; rep < 3; ++rep) {
    Mat f = random_space_time_field(s.basis, rng, 12);
    DivComponents c = decompose_rhs(f, s.basis);
    CHECK((c.sum() - f).cwiseAbs().maxCoeff() < 1e-10);
    std::vector<const Mat*> parts{&c.perp, &c.la, &c.ls, &c.ha, &c.hs};
    double pyth = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      pyth += std::pow(st_norm(*parts[i], s.basis), 2);
      for (std::size_t j = i + 1; j < parts.size(); ++j)
        CHECK(std::abs(st_inner(*parts[i], *parts[j], s.basis)) < 1e-9);
    }
    CHECK(pyth == doctest::Approx(std::pow(st_norm(f, s.basis), 2)).epsilon(1e-10));
    // projections are idempotent
    DivComponents again = decompose_rhs(c.ls, s.basis);
    CHECK((again.ls - c.ls).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(st_norm(again.perp, s.basis) < 1e-10);
  }
}

TEST_CASE("constant field is rejected") {
  const Setup& s = shared();
  Mat f = Mat::Ones(s.collapse.dim(), s.basis.time.size());
  CHECK_THROWS_AS(decompose_rhs(f, s.basis), Error);
}

TEST_CASE("solutions satisfy the equation, the boundary conditions and the case bounds") {
  const Setup& s = shared();
  RngStream rng(21);
  const double e = std::exp(1.0);
  for (int rep = 0; rep < 5; ++rep) {
    Mat f = random_space_time_field(s.basis, rng, s.basis.size() - 1);
    DivergenceSolution sol = solve_divergence(f, s.basis, s.m);
    CHECK(sol.residual < 1e-8);
    CHECK(sol.bc_error < 1e-8);
    CHECK(std::max({sol.r1, sol.r2, sol.r3}) <= 50.0);
    DivComponents c = decompose_rhs(f, s.basis);
    DivergenceSolution p = solve_divergence(c.perp, s.basis, s.m);
    CHECK(p.r1 <= 1 + 1e-6);
    CHECK(p.r2 <= 1 + 1e-6);
    DivergenceSolution la = solve_divergence(c.la, s.basis, s.m);
    CHECK(la.r1 < 1e-12);
    CHECK(la.r2 <= 2 + 1e-6);
    DivergenceSolution ls = solve_divergence(c.ls, s.basis, s.m);
    CHECK(ls.r1 <= 1 + e + 1e-6);
    CHECK(ls.raw3 <= 10.0 / (std::sqrt(s.m) * s.T) + 1e-6);
    for (const Mat* hp : {&c.ha, &c.hs}) {
      DivergenceSolution hsol = solve_divergence(*hp, s.basis, s.m);
      CHECK(hsol.residual < 1e-8);
    }
  }
}

TEST_CASE("solver is linear in f") {
  const Setup& s = shared();
  RngStream rng(4);
  Mat f1 = random_space_time_field(s.basis, rng, 8), f2 = random_space_time_field(s.basis, rng, 8);
  DivergenceSolution a = solve_divergence(f1, s.basis, s.m), b = solve_divergence(f2, s.basis, s.m);
  DivergenceSolution ab = solve_divergence(2.0 * f1 - f2, s.basis, s.m);
  CHECK((ab.h - (2.0 * a.h - b.h)).cwiseAbs().maxCoeff() < 1e-8 * (1 + ab.h.cwiseAbs().maxCoeff()));
  CHECK((ab.g - (2.0 * a.g - b.g)).cwiseAbs().maxCoeff() < 1e-8 * (1 + ab.g.cwiseAbs().maxCoeff()));
}

TEST_CASE("space-time identity links the lift to the collapse") {
  Setup s = make_setup(60);
  SplitGenerator lift = rtp_generator(s.grid, {1.0, 1.0});
  RngStream rng(5);
  Mat f = random_space_time_field(s.basis, rng, 6);
  DivergenceSolution sol = solve_divergence(f, s.basis, s.m);
  double defect = space_time_identity_check(lift, s.collapse, f, sol.g, sol.h, s.basis.time);
  // discretization defect of the lift identities is O(h)
  CHECK(defect < 20 * s.grid.h * st_norm(f, s.basis));
}
