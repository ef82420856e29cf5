#pragma once

#include "liftlab/core.hpp"
#include "liftlab/quadrature.hpp"
#include "liftlab/spectral.hpp"

namespace liftlab {

struct FlowOptions {
  int n_quad = 64;
  SemigroupMethod method = SemigroupMethod::Auto;
  // Add the exact minimizer of the discrete ratio (dense, dim <= ~2500).
  bool exact_minimizer = false;
  // Also run decay_check on the worst probe over {0, T, ..., decay_periods*T}.
  int decay_periods = 0;
};

struct FlowReport {
  double T = 0;
  double nu_hat = 0;
  int worst_probe_id = -1;  // == probes.cols() when the exact minimizer wins
  Quadrature time_quadrature;
  double decay_check_margin = 0;
  Vec ratios;
  std::string method;
  Vec worst_probe;
};

// Ratio int <P_t f, -L P_t f> / int ||P_t f||^2 over [0, T], Gauss-Legendre in time.
double flow_ratio(const OperatorMatrix& op, const Vec& f, double T, int n_quad = 64,
                  SemigroupMethod method = SemigroupMethod::Auto);
Vec flow_ratios(const OperatorMatrix& op, const Semigroup& sg, const Mat& F, double T, int n_quad);

FlowReport best_nu(const OperatorMatrix& op, double T, const Mat& probes, const FlowOptions& opts = {});

struct FlowMinimizer {
  double nu = 0;
  Vec f;
};
// Global minimum of the discrete ratio over mean-zero f supported on positive-weight states:
// smallest generalized eigenvalue of N = (W - P_T^T W P_T)/2 against G = int P_t^T W P_t dt.
FlowMinimizer flow_minimizer(const OperatorMatrix& op, const Semigroup& sg, double T, int n_quad);

// min over t of e^{-2 nu t} int_0^T ||P_s f||^2 ds - int_t^{t+T} ||P_s f||^2 ds
double decay_check(const OperatorMatrix& op, const Vec& f, double T, double nu, const std::vector<double>& t_grid,
                   int n_quad = 64, SemigroupMethod method = SemigroupMethod::Auto);

struct PointwiseCheck {
  double C = 1;
  bool ok = true;
  double worst_ratio = 0;  // max ||P_t f|| / (C e^{-nu t} ||f||)
};
PointwiseCheck pointwise_decay_bound(const OperatorMatrix& op, const Vec& f, double nu, double T,
                                     const std::vector<double>& t_grid,
                                     SemigroupMethod method = SemigroupMethod::Auto);

struct UpperBoundCheck {
  bool ok = true;
  double bound = 0;  // (1 + log C) sqrt(2 m)
  double slack = 0;  // bound - nu
};
UpperBoundCheck lifting_upper_bound_check(double nu, double C, double collapse_gap);

// Probe family: lifted collapse eigenvectors e_1..e_k, velocity patterns p(v) e_j(x)
// for j = 0..k-1, and random smooth lifted functions. All centered and normalized.
Mat lifted_probe_family(const Mat& collapse_vectors, const std::vector<int>& projection, int n_velocities,
                        const std::vector<std::vector<double>>& patterns, const Mat& random_lifted,
                        const WeightedMeasure& mu_lift);

}  // namespace liftlab
