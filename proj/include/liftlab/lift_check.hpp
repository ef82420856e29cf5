#pragma once

#include "liftlab/core.hpp"
#include "liftlab/generators.hpp"

#include <optional>
#include <string>

namespace liftlab {

// f o pi for each column of a collapse-state matrix.
Mat lift_functions(const Mat& F, const std::vector<int>& projection);

struct FirstOrderResidual {
  double full = 0;       // max |<L_hat (f o pi), g o pi>|
  double transport = 0;  // same with L_tr
  double max() const { return std::max(full, transport); }
};

FirstOrderResidual check_first_order(const SplitGenerator& split, const OperatorMatrix& collapse,
                                     const Mat& probes);
double check_second_order(const SplitGenerator& split, const OperatorMatrix& collapse, const Mat& probes);
// max |<L_tr (f o pi), u> + <f o pi, L_tr u>| over probe columns f and lifted-space columns u.
double check_weak_antisymmetry(const OperatorMatrix& transport, const std::vector<int>& projection,
                               const Mat& probes, const Mat& u);

// Smooth random functions: sum_{j<=modes} c_j cos(j pi (x - x0)/L) with
// c_j ~ N(0, 1/j^2), one independent draw per velocity, normalized in L2(mu).
Mat random_smooth_lifted(const Grid1D& grid, int n_velocities, int count, const WeightedMeasure& mu,
                         RngStream& rng, int modes = 6);
Mat random_smooth_collapse(const Grid1D& grid, int count, const WeightedMeasure& mu, RngStream& rng,
                           int modes = 6);

// First k nonconstant collapse eigenvectors (L2(mu)-orthonormal columns).
Mat collapse_eigenvectors(const OperatorMatrix& collapse, int k);

struct LiftReport {
  double first_order_residual = 0;
  double first_order_transport = 0;
  double second_order_residual = 0;
  double antisymmetry_residual = 0;
  double second_order_x = 0;  // (1/2)<L_hat x, L_hat x> for the coordinate function
  double dirichlet_x = 0;     // E(x, x) of the collapse
  double h = 0;
  int probe_count = 0;
};

// Full report for the RTP / sticky Brownian motion pair.
LiftReport rtp_lift_report(const RtpParams& params, int n_interior, int n_eigen = 10, int n_random = 10,
                           std::uint64_t seed = 42);

// Velocity Poincare constant: smallest nonzero |eigenvalue| of -Q in L2(S).
double velocity_poincare(const Eigen::MatrixXd& Q, const Eigen::VectorXd& s_weights);
double velocity_poincare(const VelocityKernel& kernel);

enum class ProcessId { Rtp, Langevin, ZigZagGaussian, ZigZagHypercube, ZigZagCoords, Forward };
std::string process_name(ProcessId p);
ProcessId parse_process_id(const std::string& s);

struct PotentialBounds {
  std::optional<double> K, a, b, hess_L;
  int d = 1;
};

struct AssumptionConstants {
  ProcessId process = ProcessId::Rtp;
  double m = 1, m_v = 1, C1 = 0, C2 = 0, gamma = 1, T = 1;
  std::optional<double> K, a, b, hess_L;
  int d = 1;
  double nu = 0;
  bool scaling_only = false;
  void validate() const;
};

// Closed-form constants with every universal constant set to 1.
AssumptionConstants assumption_constants(ProcessId process, const PotentialBounds& bounds, double m,
                                         double gamma, double T);

// 1/nu = C gamma^{-1} (gamma^2 C2^2 + C1^2 + (1/m_v)(1 + 1/(m T^2))), with C = 1.
double rate_formula(const AssumptionConstants& c, double universal_C = 1.0);
// gamma* = (1 + C1) sqrt(m)
double optimal_gamma(const AssumptionConstants& c);

}  // namespace liftlab
