#pragma once

#include "liftlab/core.hpp"

#include <array>

namespace liftlab {

struct RtpParams {
  double omega = 1.0;
  double length_L = 1.0;
  void validate() const;
};

// Relative-velocity chain on {+2, 0, -2} (index 0, 1, 2).
struct VelocityKernel {
  std::array<double, 3> states{2.0, 0.0, -2.0};
  Eigen::Matrix3d rate_matrix;  // lambda, includes omega
  Eigen::Matrix3d weight_matrix;  // S = diag(1/4, 1/2, 1/4)
  Eigen::Matrix3d q_matrix;  // lambda / omega
};

VelocityKernel rtp_velocity_kernel(double omega);

struct SplitGenerator {
  OperatorMatrix full;
  OperatorMatrix transport;
  OperatorMatrix refresh;
  double gamma = 1.0;
  int n_velocities = 1;
  // state -> collapse state (position node)
  std::vector<int> projection;
};

inline constexpr std::array<double, 3> kRtpVelocities{2.0, 0.0, -2.0};
inline int rtp_state(int node, int k) { return 3 * node + k; }

std::pair<OperatorMatrix, WeightedMeasure> sticky_bm_generator(const Grid1D& grid, double omega);

SplitGenerator rtp_generator(const Grid1D& grid, const RtpParams& params);

// Invariant probability of the RTP discretization (atoms at the boundary nodes).
WeightedMeasure rtp_invariant_measure(const Grid1D& grid, const RtpParams& params);

// Conditional velocity law at node i.
std::array<double, 3> rtp_kappa(const Grid1D& grid, int node);

std::pair<OperatorMatrix, WeightedMeasure> overdamped_generator_1d(const Grid1D& grid, const Potential& U);

// States (node, v) with index 2*node + (v == +1 ? 0 : 1).
SplitGenerator zigzag_generator_1d(const Grid1D& grid, const Potential& U, double gamma);

// Half-width a such that the mass of exp(-U) outside [-a, a] is below tol.
double truncation_half_width(const Potential& U, double tol = 1e-10);

// transport + gamma * refresh
SpMat combine(const SpMat& transport, const SpMat& refresh, double gamma);

}  // namespace liftlab
