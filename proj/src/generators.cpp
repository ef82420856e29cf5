#include "liftlab/generators.hpp"

#include <algorithm>
#include <cmath>

namespace liftlab {

void RtpParams::validate() const {
  if (!(omega > 0) || !std::isfinite(omega)) throw Error("InvalidParams", "omega must be positive");
  if (!(length_L > 0) || !std::isfinite(length_L)) throw Error("InvalidParams", "L must be positive");
}

VelocityKernel rtp_velocity_kernel(double omega) {
  if (!(omega > 0)) throw Error("InvalidParams", "omega must be positive");
  VelocityKernel k;
  k.q_matrix << -2, 2, 0,
                1, -2, 1,
                0, 2, -2;
  k.rate_matrix = omega * k.q_matrix;
  k.weight_matrix = Eigen::Vector3d(0.25, 0.5, 0.25).asDiagonal();
  return k;
}

SpMat combine(const SpMat& transport, const SpMat& refresh, double gamma) {
  SpMat A = transport + gamma * refresh;
  A.makeCompressed();
  return A;
}

std::pair<OperatorMatrix, WeightedMeasure> sticky_bm_generator(const Grid1D& grid, double omega) {
  if (!(omega > 0) || !std::isfinite(omega)) throw Error("InvalidParams", "omega must be positive");
  const int N = grid.size();
  const double h = grid.h;
  GeneratorBuilder b(N);
  b.add_rate(0, 1, omega / h);
  b.add_rate(N - 1, N - 2, omega / h);
  for (int i = 1; i < N - 1; ++i) {
    b.add_rate(i, i - 1, 1.0 / (h * h));
    b.add_rate(i, i + 1, 1.0 / (h * h));
  }
  // Normalizer 2 + omega*n*h: the interior nodes cover n*h of length, so the
  // discrete measure is an exact probability and exactly reversible.
  const double Z = 2.0 + omega * grid.n_interior * h;
  Vec w(N);
  std::vector<std::uint8_t> atom(static_cast<std::size_t>(N), 0);
  for (int i = 0; i < N; ++i) w[i] = omega * h / Z;
  w[0] = w[N - 1] = 1.0 / Z;
  atom.front() = atom.back() = 1;
  w /= w.sum();
  WeightedMeasure mu = make_measure(w, atom, true);
  return {make_operator(b.build(), mu, true), mu};
}

WeightedMeasure rtp_invariant_measure(const Grid1D& grid, const RtpParams& params) {
  params.validate();
  const int N = grid.size();
  const double om = params.omega, h = grid.h;
  const double Z = 2.0 + om * grid.n_interior * h;
  Vec w(3 * N);
  std::vector<std::uint8_t> atom(static_cast<std::size_t>(3 * N), 0);
  for (int i = 0; i < N; ++i) {
    for (int k = 0; k < 3; ++k) {
      double v;
      if (i == 0) {
        v = (k == 0) ? 0.0 : 0.5 / Z;
        atom[static_cast<std::size_t>(rtp_state(i, k))] = 1;
      } else if (i == N - 1) {
        v = (k == 2) ? 0.0 : 0.5 / Z;
        atom[static_cast<std::size_t>(rtp_state(i, k))] = 1;
      } else {
        v = (k == 1 ? 0.5 : 0.25) * om / Z * h;
      }
      w[rtp_state(i, k)] = v;
    }
  }
  w /= w.sum();
  return make_measure(w, atom, true);
}

std::array<double, 3> rtp_kappa(const Grid1D& grid, int node) {
  if (node < 0 || node >= grid.size()) throw Error("IndexOutOfRange", "node outside grid");
  if (node == 0) return {0.0, 0.5, 0.5};
  if (node == grid.size() - 1) return {0.5, 0.5, 0.0};
  return {0.25, 0.5, 0.25};
}

SplitGenerator rtp_generator(const Grid1D& grid, const RtpParams& params) {
  params.validate();
  const int N = grid.size();
  const int D = 3 * N;
  const double om = params.omega, h = grid.h;
  GeneratorBuilder tr(D), rf(D);
  for (int i = 0; i < N; ++i) {
    const bool left = (i == 0), right = (i == N - 1);
    // upwind transport; +2 moves right, -2 moves left, nothing leaves [0, L]
    if (!right) tr.add_rate(rtp_state(i, 0), rtp_state(i + 1, 0), 2.0 / h);
    if (!left) tr.add_rate(rtp_state(i, 2), rtp_state(i - 1, 2), 2.0 / h);
    // boundary velocity jumps at rate omega. The jump into the massless state
    // ((L,-2) or (0,+2)) is sent to the neighbouring node instead, where that
    // velocity would carry the particle within one transport step.
    if (right) {
      tr.add_rate(rtp_state(i, 0), rtp_state(i, 1), om);
      tr.add_rate(rtp_state(i, 1), rtp_state(i - 1, 2), om);
    }
    if (left) {
      tr.add_rate(rtp_state(i, 2), rtp_state(i, 1), om);
      tr.add_rate(rtp_state(i, 1), rtp_state(i + 1, 0), om);
    }
    // refresh part, rates divided by omega; the boundary rows drop the
    // transitions that the transport part now carries
    rf.add_rate(rtp_state(i, 0), rtp_state(i, 1), right ? 1.0 : 2.0);
    if (!left) rf.add_rate(rtp_state(i, 1), rtp_state(i, 0), 1.0);
    if (!right) rf.add_rate(rtp_state(i, 1), rtp_state(i, 2), 1.0);
    rf.add_rate(rtp_state(i, 2), rtp_state(i, 1), left ? 1.0 : 2.0);
  }
  WeightedMeasure mu = rtp_invariant_measure(grid, params);
  SplitGenerator s;
  s.gamma = om;
  s.n_velocities = 3;
  s.transport = make_operator(tr.build(), mu, true);
  s.refresh = make_operator(rf.build(), mu, true);
  s.full = make_operator(combine(s.transport.entries, s.refresh.entries, om), mu, true);
  s.projection.resize(static_cast<std::size_t>(D));
  for (int st = 0; st < D; ++st) s.projection[static_cast<std::size_t>(st)] = st / 3;
  return s;
}

namespace {

Vec boltzmann_weights(const Grid1D& grid, const Potential& U, Vec* Uvals) {
  const int N = grid.size();
  Vec u(N);
  for (int i = 0; i < N; ++i) {
    Vec x(1);
    x[0] = grid.x(i);
    u[i] = U.value(x);
  }
  double umin = u.minCoeff();
  Vec w(N);
  for (int i = 0; i < N; ++i) w[i] = std::exp(-(u[i] - umin)) * grid.h;
  w /= w.sum();
  if (Uvals) *Uvals = u;
  return w;
}

}  // namespace

std::pair<OperatorMatrix, WeightedMeasure> overdamped_generator_1d(const Grid1D& grid, const Potential& U) {
  if (U.d != 1) throw Error("InvalidDimension", "overdamped discretization is one-dimensional");
  const int N = grid.size();
  Vec u;
  Vec w = boltzmann_weights(grid, U, &u);
  const double c = 1.0 / (2.0 * grid.h * grid.h);
  GeneratorBuilder b(N);
  for (int i = 0; i < N; ++i) {
    if (i + 1 < N) b.add_rate(i, i + 1, c * std::exp(-(u[i + 1] - u[i]) / 2));
    if (i > 0) b.add_rate(i, i - 1, c * std::exp(-(u[i - 1] - u[i]) / 2));
  }
  WeightedMeasure mu = make_measure(w, {}, true);
  return {make_operator(b.build(), mu, true), mu};
}

SplitGenerator zigzag_generator_1d(const Grid1D& grid, const Potential& U, double gamma) {
  if (U.d != 1) throw Error("InvalidDimension", "Zig-Zag discretization is one-dimensional");
  if (!(gamma >= 0) || !std::isfinite(gamma)) throw Error("InvalidParams", "gamma must be nonnegative");
  const int N = grid.size();
  const double h = grid.h;
  Vec mu = boltzmann_weights(grid, U, nullptr);
  GeneratorBuilder tr(2 * N), rf(2 * N);
  for (int i = 0; i < N; ++i) {
    const int up = 2 * i, dn = 2 * i + 1;
    // move with probability min(1, mu_next/mu_here) per attempt, flip otherwise;
    // flip rate -> (v U')_+ as h -> 0 and mu x uniform stays exactly invariant
    double rho = (i + 1 < N) ? std::min(1.0, mu[i + 1] / mu[i]) : 0.0;
    if (i + 1 < N) tr.add_rate(up, 2 * (i + 1), rho / h);
    tr.add_rate(up, dn, (1.0 - rho) / h);
    rho = (i > 0) ? std::min(1.0, mu[i - 1] / mu[i]) : 0.0;
    if (i > 0) tr.add_rate(dn, 2 * (i - 1) + 1, rho / h);
    tr.add_rate(dn, up, (1.0 - rho) / h);
    rf.add_rate(up, dn, 0.5);
    rf.add_rate(dn, up, 0.5);
  }
  Vec w(2 * N);
  for (int i = 0; i < N; ++i) w[2 * i] = w[2 * i + 1] = 0.5 * mu[i];
  WeightedMeasure m = make_measure(w, {}, true);
  SplitGenerator s;
  s.gamma = gamma;
  s.n_velocities = 2;
  s.transport = make_operator(tr.build(), m, true);
  s.refresh = make_operator(rf.build(), m, true);
  s.full = make_operator(combine(s.transport.entries, s.refresh.entries, gamma), m, true);
  s.projection.resize(static_cast<std::size_t>(2 * N));
  for (int st = 0; st < 2 * N; ++st) s.projection[static_cast<std::size_t>(st)] = st / 2;
  return s;
}

double truncation_half_width(const Potential& U, double tol) {
  if (U.d != 1) throw Error("InvalidDimension", "truncation is one-dimensional");
  auto u = [&](double x) {
    Vec v(1);
    v[0] = x;
    return U.value(v);
  };
  const double u0 = u(0.0);
  double X = 1.0;
  while (X < 1e6 && (u(X) - u0 < 60 || u(-X) - u0 < 60)) X *= 2;
  const int M = 200000;
  const double dx = 2 * X / M;
  std::vector<double> dens(static_cast<std::size_t>(M) + 1);
  double total = 0;
  for (int j = 0; j <= M; ++j) {
    dens[static_cast<std::size_t>(j)] = std::exp(-(u(-X + j * dx) - u0));
    total += dens[static_cast<std::size_t>(j)];
  }
  // shrink symmetrically while the two tails together stay below tol
  double tail = 0;
  int j = 0;
  for (; j < M / 2; ++j) {
    double add = dens[static_cast<std::size_t>(j)] + dens[static_cast<std::size_t>(M - j)];
    if ((tail + add) / total > tol) break;
    tail += add;
  }
  return X - j * dx;
}

}  // namespace liftlab
