#include "liftlab/lift_check.hpp"

#include "liftlab/spectral.hpp"

#include <cmath>
#include <numbers>

namespace liftlab {

Mat lift_functions(const Mat& F, const std::vector<int>& projection) {
  Mat out(static_cast<Eigen::Index>(projection.size()), F.cols());
  for (std::size_t s = 0; s < projection.size(); ++s) {
    int i = projection[s];
    if (i < 0 || i >= F.rows()) throw Error("StateMapMismatch", "projection points outside collapse states");
    out.row(static_cast<Eigen::Index>(s)) = F.row(i);
  }
  return out;
}

namespace {

// Gram matrix <A_i, B_j>_mu
Mat gram(const Mat& A, const Mat& B, const Vec& w) { return A.transpose() * (w.asDiagonal() * B); }

void check_split(const SplitGenerator& split, const OperatorMatrix& collapse) {
  if (static_cast<int>(split.projection.size()) != split.full.dim())
    throw Error("StateMapMismatch", "projection size differs from lifted dimension");
  for (int i : split.projection)
    if (i < 0 || i >= collapse.dim()) throw Error("StateMapMismatch", "projection leaves collapse state set");
}

}  // namespace

FirstOrderResidual check_first_order(const SplitGenerator& split, const OperatorMatrix& collapse,
                                     const Mat& probes) {
  check_split(split, collapse);
  if (probes.rows() != collapse.dim()) throw Error("DimensionMismatch", "probes live on collapse states");
  Mat F = lift_functions(probes, split.projection);
  const Vec& w = split.full.reference_measure.weights;
  FirstOrderResidual r;
  r.full = gram(Mat(split.full.entries * F), F, w).cwiseAbs().maxCoeff();
  r.transport = gram(Mat(split.transport.entries * F), F, w).cwiseAbs().maxCoeff();
  return r;
}

double check_second_order(const SplitGenerator& split, const OperatorMatrix& collapse, const Mat& probes) {
  check_split(split, collapse);
  if (probes.rows() != collapse.dim()) throw Error("DimensionMismatch", "probes live on collapse states");
  Mat F = lift_functions(probes, split.projection);
  Mat LF = split.full.entries * F;
  Mat lhs = 0.5 * gram(LF, LF, split.full.reference_measure.weights);
  Mat E = -gram(probes, Mat(collapse.entries * probes), collapse.reference_measure.weights);
  return (lhs - E).cwiseAbs().maxCoeff();
}

double check_weak_antisymmetry(const OperatorMatrix& transport, const std::vector<int>& projection,
                               const Mat& probes, const Mat& u) {
  if (static_cast<int>(projection.size()) != transport.dim() || u.rows() != transport.dim())
    throw Error("DimensionMismatch", "antisymmetry operands differ from transport size");
  Mat F = lift_functions(probes, projection);
  const Vec& w = transport.reference_measure.weights;
  Mat a = gram(Mat(transport.entries * F), u, w);
  Mat b = gram(F, Mat(transport.entries * u), w);
  return (a + b).cwiseAbs().maxCoeff();
}

Mat random_smooth_lifted(const Grid1D& grid, int n_velocities, int count, const WeightedMeasure& mu,
                         RngStream& rng, int modes) {
  const int N = grid.size();
  if (mu.dim() != N * n_velocities) throw Error("DimensionMismatch", "measure does not match lifted grid");
  Mat U(N * n_velocities, count);
  for (int c = 0; c < count; ++c) {
    for (int v = 0; v < n_velocities; ++v) {
      std::vector<double> coef(static_cast<std::size_t>(modes) + 1);
      for (int j = 0; j <= modes; ++j) coef[static_cast<std::size_t>(j)] = rng.gaussian() / std::max(1, j);
      for (int i = 0; i < N; ++i) {
        double y = (grid.x(i) - grid.origin) / grid.length_L;
        double s = 0;
        for (int j = 0; j <= modes; ++j) s += coef[static_cast<std::size_t>(j)] * std::cos(j * std::numbers::pi * y);
        U(i * n_velocities + v, c) = s;
      }
    }
    double nrm = norm(U.col(c), mu);
    if (nrm > 0) U.col(c) /= nrm;
  }
  return U;
}

Mat random_smooth_collapse(const Grid1D& grid, int count, const WeightedMeasure& mu, RngStream& rng,
                           int modes) {
  return random_smooth_lifted(grid, 1, count, mu, rng, modes);
}

Mat collapse_eigenvectors(const OperatorMatrix& collapse, int k) {
  if (!is_self_adjoint(collapse)) throw Error("NotSelfAdjoint", "collapse generator must be self-adjoint");
  k = std::min(k, collapse.dim() - 1);
  SpectralData sd;
  try {
    sd = low_modes(collapse, k);
  } catch (const Error& e) {
    if (e.code() != "NotTridiagonal") throw;
    sd = decompose(collapse);
  }
  return sd.vectors.middleCols(1, k);
}

LiftReport rtp_lift_report(const RtpParams& params, int n_interior, int n_eigen, int n_random,
                           std::uint64_t seed) {
  Grid1D grid = make_grid(params.length_L, n_interior);
  auto [collapse, mu] = sticky_bm_generator(grid, params.omega);
  SplitGenerator split = rtp_generator(grid, params);
  RngStream rng(seed);
  Mat eig = collapse_eigenvectors(collapse, n_eigen);
  Mat rnd = random_smooth_collapse(grid, n_random, mu, rng);
  // light heat-semigroup smoothing, then renormalize
  auto sg = make_semigroup(collapse);
  rnd = sg->apply(rnd, 0.01);
  for (int c = 0; c < rnd.cols(); ++c) rnd.col(c) /= norm(rnd.col(c), mu);
  Mat probes(grid.size(), eig.cols() + rnd.cols());
  probes << eig, rnd;
  Mat u = random_smooth_lifted(grid, 3, n_random, split.full.reference_measure, rng);

  LiftReport rep;
  FirstOrderResidual fo = check_first_order(split, collapse, probes);
  rep.first_order_residual = fo.full;
  rep.first_order_transport = fo.transport;
  rep.second_order_residual = check_second_order(split, collapse, probes);
  rep.antisymmetry_residual = check_weak_antisymmetry(split.transport, split.projection, probes, u);
  Vec x(grid.size());
  for (int i = 0; i < grid.size(); ++i) x[i] = grid.x(i);
  Mat X = lift_functions(x, split.projection);
  Vec LX = split.full.entries * X.col(0);
  rep.second_order_x = 0.5 * inner_product(LX, LX, split.full.reference_measure);
  rep.dirichlet_x = dirichlet_form(collapse, x, x);
  rep.h = grid.h;
  rep.probe_count = static_cast<int>(probes.cols());
  return rep;
}

double velocity_poincare(const Eigen::MatrixXd& Q, const Eigen::VectorXd& s) {
  const int n = static_cast<int>(Q.rows());
  if (Q.cols() != n || s.size() != n) throw Error("DimensionMismatch", "Q and S sizes differ");
  if (s.minCoeff() <= 0) throw Error("NotSelfAdjoint", "S weights must be positive");
  Mat SQ = s.asDiagonal() * Q;
  double scale = std::max(1e-300, SQ.cwiseAbs().maxCoeff());
  if ((SQ - SQ.transpose()).cwiseAbs().maxCoeff() > 1e-14 * std::max(1.0, scale))
    throw Error("NotSelfAdjoint", "Q is not self-adjoint in L2(S)");
  Vec r = s.cwiseSqrt();
  Mat M = -(r.asDiagonal() * Q * r.cwiseInverse().asDiagonal());
  M = 0.5 * (M + M.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Mat> es(M, Eigen::EigenvaluesOnly);
  const Vec& ev = es.eigenvalues();
  double tol = 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (int i = 0; i < n; ++i)
    if (ev[i] > tol) return ev[i];
  throw Error("NoGap", "Q has no nonzero eigenvalue");
}

double velocity_poincare(const VelocityKernel& kernel) {
  return velocity_poincare(kernel.q_matrix, kernel.weight_matrix.diagonal());
}

std::string process_name(ProcessId p) {
  switch (p) {
    case ProcessId::Rtp: return "rtp";
    case ProcessId::Langevin: return "langevin";
    case ProcessId::ZigZagGaussian: return "zigzag-gaussian";
    case ProcessId::ZigZagHypercube: return "zigzag-hypercube";
    case ProcessId::ZigZagCoords: return "zigzag-coords";
    case ProcessId::Forward: return "forward";
  }
  return "unknown";
}

ProcessId parse_process_id(const std::string& s) {
  for (ProcessId p : {ProcessId::Rtp, ProcessId::Langevin, ProcessId::ZigZagGaussian, ProcessId::ZigZagHypercube,
                      ProcessId::ZigZagCoords, ProcessId::Forward})
    if (process_name(p) == s) return p;
  throw Error("UnknownProcess", "unknown process '" + s + "'");
}

void AssumptionConstants::validate() const {
  auto pos = [](double x, const char* n) {
    if (!(x > 0)) throw Error("InvalidConstants", std::string(n) + " must be positive");
  };
  pos(m, "m");
  pos(m_v, "m_v");
  pos(gamma, "gamma");
  pos(T, "T");
  if (C1 < 0 || C2 < 0) throw Error("InvalidConstants", "C1, C2 must be nonnegative");
  if (K && *K < 0) throw Error("InvalidConstants", "K must be nonnegative");
  if (a && !(*a >= 0 && *a < 1)) throw Error("InvalidConstants", "a must lie in [0,1)");
  if (b && *b < 0) throw Error("InvalidConstants", "b must be nonnegative");
}

AssumptionConstants assumption_constants(ProcessId process, const PotentialBounds& bounds, double m,
                                         double gamma, double T) {
  AssumptionConstants c;
  c.process = process;
  c.m = m;
  c.gamma = gamma;
  c.T = T;
  c.K = bounds.K;
  c.a = bounds.a;
  c.b = bounds.b;
  c.hess_L = bounds.hess_L;
  c.d = bounds.d;
  c.C2 = 1.0 / std::sqrt(2.0 * m);
  c.m_v = 1.0;
  auto need = [&](const std::optional<double>& v, const char* name) {
    if (!v) throw Error("MissingBound", std::string("process ") + process_name(process) + " needs " + name);
    return *v;
  };
  switch (process) {
    case ProcessId::Rtp:
      c.C1 = 1.0;
      c.m_v = 2.0;
      break;
    case ProcessId::Langevin:
      c.C1 = std::sqrt(2.0 + need(bounds.K, "K"));
      break;
    case ProcessId::ZigZagGaussian:
    case ProcessId::ZigZagHypercube: {
      double K = need(bounds.K, "K"), L = need(bounds.hess_L, "hess_L");
      c.C1 = std::sqrt(44.0 * (1 + K) + 20.0 * L / m);
      break;
    }
    case ProcessId::ZigZagCoords: {
      double K = need(bounds.K, "K"), L = need(bounds.hess_L, "hess_L");
      double d = bounds.d;
      c.C1 = std::sqrt(18.0 * d * (1 + K) + 8.0 * d * L / m);
      break;
    }
    case ProcessId::Forward: {
      double K = need(bounds.K, "K"), a = need(bounds.a, "a"), b = need(bounds.b, "b");
      c.C1 = std::sqrt((b + (1 + K) * m) / (m * (1 - a) * (1 - a)));
      c.scaling_only = true;
      break;
    }
  }
  c.validate();
  c.nu = rate_formula(c);
  return c;
}

double rate_formula(const AssumptionConstants& c, double universal_C) {
  double inv = universal_C / c.gamma *
               (c.gamma * c.gamma * c.C2 * c.C2 + c.C1 * c.C1 + (1.0 / c.m_v) * (1.0 + 1.0 / (c.m * c.T * c.T)));
  return 1.0 / inv;
}

double optimal_gamma(const AssumptionConstants& c) { return (1.0 + c.C1) * std::sqrt(c.m); }

}  // namespace liftlab
