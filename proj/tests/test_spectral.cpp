#include "liftlab/generators.hpp"
#include "liftlab/spectral.hpp"

#include <doctest.h>

#include <cmath>

using namespace liftlab;

namespace {

// Reflecting walk on {0..n-1}, unit rates: eigenvalues -2 + 2 cos(pi k / n).
OperatorMatrix path_walk(int n) {
  GeneratorBuilder b(n);
  for (int i = 0; i + 1 < n; ++i) {
    b.add_rate(i, i + 1, 1.0);
    b.add_rate(i + 1, i, 1.0);
  }
  return make_operator(b.build(), make_measure(Vec::Constant(n, 1.0 / n), {}, true), true);
}

// One-way 3-cycle: eigenvalues 0 and -3/2 +- i sqrt(3)/2.
OperatorMatrix cycle3() {
  GeneratorBuilder b(3);
  b.add_rate(0, 1, 1.0);
  b.add_rate(1, 2, 1.0);
  b.add_rate(2, 0, 1.0);
  return make_operator(b.build(), make_measure(Vec::Constant(3, 1.0 / 3), {}, true), true);
}

}  // namespace

TEST_CASE("reflecting walk spectrum matches the cosine formula") {
  const int n = 30;
  SpectralData sd = decompose(path_walk(n));
  REQUIRE(sd.is_self_adjoint);
  for (int k = 0; k < n; ++k)
    CHECK(sd.eigenvalues[static_cast<std::size_t>(k)].real() ==
          doctest::Approx(-2.0 + 2.0 * std::cos(M_PI * k / n)).epsilon(1e-12));
  CHECK(sd.gap == doctest::Approx(2.0 - 2.0 * std::cos(M_PI / n)));
  // mu-orthonormal eigenvectors
  Mat G = sd.vectors.transpose() * (Vec::Constant(n, 1.0 / n).asDiagonal() * sd.vectors);
  CHECK((G - Mat::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(poincare_constant(path_walk(n)) == doctest::Approx(1.0 / sd.gap));
}

TEST_CASE("non-reversible cycle gives a complex gap") {
  SpectralData sd = decompose(cycle3());
  CHECK_FALSE(sd.is_self_adjoint);
  CHECK(sd.gap == doctest::Approx(1.5));
  CHECK(sd.gap_imag == doctest::Approx(std::sqrt(3.0) / 2));
  CHECK(std::abs(sd.eigenvalues[0]) < 1e-12);
}

TEST_CASE("low_modes agrees with the dense decomposition") {
  Grid1D g = make_grid(1.0, 300);
  OperatorMatrix op = sticky_bm_generator(g, 2.0).first;
  SpectralData full = decompose(op);
  SpectralData lm = low_modes(op, 5);
  REQUIRE(lm.size() == 6);
  for (int k = 0; k <= 5; ++k) {
    CHECK(lm.eigenvalues[static_cast<std::size_t>(k)].real() ==
          doctest::Approx(full.eigenvalues[static_cast<std::size_t>(k)].real()).epsilon(1e-9));
    // same vector up to sign
    double c = full.vectors.col(k).dot(op.reference_measure.weights.asDiagonal() * lm.vectors.col(k));
    CHECK(std::abs(c) == doctest::Approx(1.0).epsilon(1e-8));
  }
  CHECK(lm.gap == doctest::Approx(full.gap).epsilon(1e-10));
  CHECK_THROWS_AS(low_modes(cycle3(), 1), Error);
}

TEST_CASE("Dirichlet form equals the sum of squared jumps for the walk") {
  const int n = 10;
  OperatorMatrix op = path_walk(n);
  Vec f = Vec::LinSpaced(n, 0.0, 1.0).array().square();
  double direct = 0;
  for (int i = 0; i + 1 < n; ++i) direct += std::pow(f[i + 1] - f[i], 2) / n;
  CHECK(dirichlet_form(op, f, f) == doctest::Approx(direct));
}

TEST_CASE("semigroup methods agree with the two-state closed form") {
  // rates a: 0->1, b: 1->0. P_t f(0) = f(0) + a/(a+b) (1 - e^{-(a+b)t}) (f(1) - f(0))
  const double a = 0.7, b = 1.9;
  Mat A(2, 2);
  A << -a, a, b, -b;
  Vec w(2);
  w << b / (a + b), a / (a + b);
  OperatorMatrix op = make_operator(A, make_measure(w, {}, true), true);
  Vec f(2);
  f << 1.0, -2.0;
  for (double t : {0.0, 0.3, 2.0}) {
    double e = std::exp(-(a + b) * t);
    double p0 = f[0] + a / (a + b) * (1 - e) * (f[1] - f[0]);
    double p1 = f[1] + b / (a + b) * (1 - e) * (f[0] - f[1]);
    for (auto m : {SemigroupMethod::Eigen, SemigroupMethod::Pade, SemigroupMethod::Uniformization}) {
      Vec P = semigroup_apply(op, f, t, m);
      CHECK(P[0] == doctest::Approx(p0).epsilon(1e-10));
      CHECK(P[1] == doctest::Approx(p1).epsilon(1e-10));
    }
  }
}

TEST_CASE("semigroup methods agree on the RTP generator") {
  Grid1D g = make_grid(1.0, 40);
  SplitGenerator s = rtp_generator(g, {2.0, 1.0});
  Vec f = Vec::LinSpaced(s.full.dim(), -1.0, 1.0);
  Vec pade = semigroup_apply(s.full, f, 0.4, SemigroupMethod::Pade);
  Vec unif = semigroup_apply(s.full, f, 0.4, SemigroupMethod::Uniformization);
  CHECK((pade - unif).cwiseAbs().maxCoeff() < 1e-10);
  // mean is conserved under mu
  CHECK(mean(pade, s.full.reference_measure) == doctest::Approx(mean(f, s.full.reference_measure)).epsilon(1e-12));
  auto sg = make_semigroup(s.full, SemigroupMethod::Uniformization);
  int visits = 0;
  sg->march(f.replicate(1, 2), {0.0, 0.1, 0.4}, [&](int j, const Mat& P) {
    ++visits;
    if (j == 2) CHECK((P.col(1) - pade).cwiseAbs().maxCoeff() < 1e-10);
  });
  CHECK(visits == 3);
  CHECK_THROWS_AS(sg->march(f, {0.5, 0.1}, [](int, const Mat&) {}), Error);
}

TEST_CASE("expm of a nilpotent block") {
  Mat N = Mat::Zero(3, 3);
  N(0, 1) = 1.0;
  N(1, 2) = 1.0;
  Mat E = expm(N, 2.0);
  CHECK(E(0, 1) == doctest::Approx(2.0));
  CHECK(E(0, 2) == doctest::Approx(2.0));
  CHECK(E(1, 2) == doctest::Approx(2.0));
  CHECK(E(0, 0) == doctest::Approx(1.0));
}
