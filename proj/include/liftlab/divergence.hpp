#pragma once

#include "liftlab/core.hpp"
#include "liftlab/generators.hpp"
#include "liftlab/quadrature.hpp"
#include "liftlab/spectral.hpp"

#include <memory>

namespace liftlab {

// Space-time fields are matrices: rows = collapse states, columns = time nodes.
struct TimeGrid {
  double T = 0;
  Vec t;  // Chebyshev-Lobatto nodes on [0, T]
  Vec w;  // Clenshaw-Curtis weights
  Mat D;  // differentiation matrix
  int size() const { return static_cast<int>(t.size()); }
};

TimeGrid make_time_grid(double T, int n = 256);

enum class DivCase { Perp = 1, LowAnti = 2, LowSym = 3, HighAnti = 4, HighSym = 5 };

struct HarmonicBasis {
  double T = 0;
  TimeGrid time;
  OperatorMatrix collapse;
  Vec alpha2;  // alpha_k^2 = -eigenvalue_k, alpha_0 = 0
  Mat E;       // L2(mu)-orthonormal eigenvectors, column 0 constant
  std::vector<std::uint8_t> low;  // alpha_k <= 2/T
  int size() const { return static_cast<int>(alpha2.size()); }
  double alpha(int k) const { return std::sqrt(std::max(0.0, alpha2[k])); }
  // Time decay rate of the harmonic modes: sqrt(2) alpha_k, so that
  // (d_tt + 2L) H = 0 holds for H = exp(-sqrt(2) alpha_k t) e_k.
  double beta(int k) const { return std::sqrt(2.0) * alpha(k); }
  Vec anti_profile(int k) const;  // on the time nodes
  Vec sym_profile(int k) const;
  Vec anti_profile_dot(int k) const;
  Vec sym_profile_dot(int k) const;
  Mat anti(int k) const;  // H_k^a as a space-time field
  Mat sym(int k) const;   // H_k^s, k >= 1

  // Per-mode time solvers, built on first use and shared between copies.
  struct Cache;
  std::shared_ptr<Cache> cache;
};

HarmonicBasis build_harmonic_basis(const OperatorMatrix& collapse, const SpectralData& spec, double T,
                                   int n_time = 256);

struct DivComponents {
  Mat perp, la, ls, ha, hs;
  Mat sum() const { return perp + la + ls + ha + hs; }
};

// L2(lambda x mu) inner product and norm of space-time fields.
double st_inner(const Mat& A, const Mat& B, const HarmonicBasis& basis);
double st_norm(const Mat& A, const HarmonicBasis& basis);

DivComponents decompose_rhs(const Mat& f, const HarmonicBasis& basis);

struct DivergenceSolution {
  Mat h, g;
  double residual = 0;  // ||d_t h - 2Lg - f|| / ||f||
  double r1 = 0, r2 = 0, r3 = 0;
  double raw3 = 0;      // sqrt(2 E_T(d_t g)) / ||f||, before the (1 + 1/(T sqrt m)) normalization
  double bc_error = 0;  // max |h|, |g| at t = 0 and t = T
};

DivergenceSolution solve_divergence(const Mat& f, const HarmonicBasis& basis, double m);

struct BoundRatios {
  double r1 = 0, r2 = 0, r3 = 0, raw3 = 0;
};
BoundRatios verify_divergence_bounds(const DivergenceSolution& sol, const Mat& f, const HarmonicBasis& basis,
                                     double m);

// |<A(f o pi), h o pi + L_tr(g o pi)> - (-<h, d_t f> + 2 E_T(f, g))| with A = -d_t + L_tr.
double space_time_identity_check(const SplitGenerator& lift, const OperatorMatrix& collapse, const Mat& f,
                                 const Mat& g, const Mat& h, const TimeGrid& time);

// Random smooth mean-zero field: modes 0..max_mode with N(0,1) weights and
// Legendre-like time profiles of degree <= time_degree.
Mat random_space_time_field(const HarmonicBasis& basis, RngStream& rng, int max_mode, int time_degree = 6);

}  // namespace liftlab
