#include "liftlab/flow_poincare.hpp"

#include "liftlab/kernels.hpp"
#include "liftlab/lift_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace liftlab {

namespace {

void check_probe(const Vec& f, const WeightedMeasure& mu) {
  double nf = norm(f, mu);
  if (!(nf > 0)) throw Error("ZeroFunction", "probe has zero norm");
  if (std::abs(inner_product(f, Vec::Ones(f.size()), mu)) > 1e-10 * std::max(1.0, nf))
    throw Error("NotMeanZero", "probe is not mean-zero under the reference measure");
}

double col_wnorm2(const Mat& P, int c, const Vec& w) {
  return kernels::wdot(P.col(c).data(), P.col(c).data(), w.data(), static_cast<std::size_t>(P.rows()));
}

}  // namespace

Vec flow_ratios(const OperatorMatrix& op, const Semigroup& sg, const Mat& F, double T, int n_quad) {
  if (!(T > 0)) throw Error("InvalidParameter", "T must be positive");
  const Vec& w = op.reference_measure.weights;
  for (int c = 0; c < F.cols(); ++c) check_probe(F.col(c), op.reference_measure);
  Quadrature q = gauss_legendre(n_quad, 0.0, T);
  std::vector<double> times(q.nodes.data(), q.nodes.data() + q.nodes.size());
  Vec num = Vec::Zero(F.cols()), den = Vec::Zero(F.cols());
  sg.march(F, times, [&](int j, const Mat& P) {
    Mat LP = op.entries * P;
    for (int c = 0; c < P.cols(); ++c) {
      const std::size_t n = static_cast<std::size_t>(P.rows());
      num[c] -= q.weights[j] * kernels::wdot(P.col(c).data(), LP.col(c).data(), w.data(), n);
      den[c] += q.weights[j] * col_wnorm2(P, c, w);
    }
  });
  return num.cwiseQuotient(den);
}

double flow_ratio(const OperatorMatrix& op, const Vec& f, double T, int n_quad, SemigroupMethod method) {
  auto sg = make_semigroup(op, method);
  return flow_ratios(op, *sg, f, T, n_quad)[0];
}

FlowMinimizer flow_minimizer(const OperatorMatrix& op, const Semigroup& sg, double T, int n_quad) {
  const Vec& w = op.reference_measure.weights;
  std::vector<int> keep;
  for (int i = 0; i < w.size(); ++i)
    if (w[i] > 0) keep.push_back(i);
  const int D = op.dim(), n = static_cast<int>(keep.size());
  // columns: unit vectors of the kept states
  Mat F = Mat::Zero(D, n);
  for (int a = 0; a < n; ++a) F(keep[static_cast<std::size_t>(a)], a) = 1.0;
  Quadrature q = gauss_legendre(n_quad, 0.0, T);
  std::vector<double> times(q.nodes.data(), q.nodes.data() + q.nodes.size());
  times.push_back(T);
  Mat G = Mat::Zero(n, n), N = Mat::Zero(n, n);
  Vec ws = w.cwiseSqrt();
  sg.march(F, times, [&](int j, const Mat& P) {
    Mat SP = ws.asDiagonal() * P;
    if (j < n_quad) {
      G.noalias() += q.weights[j] * SP.transpose() * SP;
    } else {
      N.noalias() -= 0.5 * SP.transpose() * SP;
    }
  });
  for (int a = 0; a < n; ++a) N(a, a) += 0.5 * w[keep[static_cast<std::size_t>(a)]];
  // restrict to the mean-zero subspace: orthonormal complement of c = w_keep
  Vec c(n);
  for (int a = 0; a < n; ++a) c[a] = w[keep[static_cast<std::size_t>(a)]];
  Eigen::HouseholderQR<Mat> qr(c);
  Mat Q = qr.householderQ();
  Mat B = Q.rightCols(n - 1);
  Mat GB = B.transpose() * G * B, NB = B.transpose() * N * B;
  GB = 0.5 * (GB + GB.transpose()).eval();
  NB = 0.5 * (NB + NB.transpose()).eval();
  // G is nearly singular once the fast modes die out before the first
  // quadrature node, so solve G x = (1/nu) N x against the well-conditioned N.
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(GB, NB);
  if (es.info() != Eigen::Success) throw Error("EigenFailure", "generalized eigensolver failed");
  const Eigen::Index top = es.eigenvalues().size() - 1;
  FlowMinimizer out;
  out.nu = 1.0 / es.eigenvalues()[top];
  Vec y = B * es.eigenvectors().col(top);
  out.f = Vec::Zero(D);
  for (int a = 0; a < n; ++a) out.f[keep[static_cast<std::size_t>(a)]] = y[a];
  out.f /= norm(out.f, op.reference_measure);
  // exact zero mean (the QR basis is orthogonal to c up to rounding)
  double mz = inner_product(out.f, Vec::Ones(D), op.reference_measure);
  for (int a = 0; a < n; ++a) out.f[keep[static_cast<std::size_t>(a)]] -= mz;
  out.f /= norm(out.f, op.reference_measure);
  return out;
}

FlowReport best_nu(const OperatorMatrix& op, double T, const Mat& probes, const FlowOptions& opts) {
  if (probes.cols() == 0 && !opts.exact_minimizer) throw Error("EmptyProbeSet", "no probes given");
  auto sg = make_semigroup(op, opts.method);
  FlowReport rep;
  rep.T = T;
  rep.method = sg->method();
  rep.time_quadrature = gauss_legendre(opts.n_quad, 0.0, T);
  Mat F = probes;
  if (opts.exact_minimizer) {
    FlowMinimizer fm = flow_minimizer(op, *sg, T, opts.n_quad);
    F.conservativeResize(op.dim(), probes.cols() + 1);
    F.col(probes.cols()) = fm.f;
  }
  rep.ratios = flow_ratios(op, *sg, F, T, opts.n_quad);
  Eigen::Index arg = 0;
  rep.nu_hat = std::max(0.0, rep.ratios.minCoeff(&arg));
  rep.worst_probe_id = static_cast<int>(arg);
  rep.worst_probe = F.col(arg);
  if (opts.decay_periods > 0) {
    std::vector<double> tg;
    for (int k = 0; k <= opts.decay_periods; ++k) tg.push_back(k * T);
    rep.decay_check_margin = decay_check(op, rep.worst_probe, T, rep.nu_hat, tg, opts.n_quad, opts.method);
  }
  return rep;
}

double decay_check(const OperatorMatrix& op, const Vec& f, double T, double nu, const std::vector<double>& t_grid,
                   int n_quad, SemigroupMethod method) {
  check_probe(f, op.reference_measure);
  if (t_grid.empty()) throw Error("InvalidParameter", "empty time grid");
  const Vec& w = op.reference_measure.weights;
  Quadrature q = gauss_legendre(n_quad, 0.0, T);
  std::vector<double> tg = t_grid;
  std::sort(tg.begin(), tg.end());
  // all evaluation times, with their (window, weight) owners
  struct Node {
    double t;
    int window;
    double wq;
  };
  std::vector<Node> nodes;
  nodes.reserve((tg.size() + 1) * static_cast<std::size_t>(n_quad));
  for (int j = 0; j < n_quad; ++j) nodes.push_back({q.nodes[j], -1, q.weights[j]});
  for (std::size_t k = 0; k < tg.size(); ++k)
    for (int j = 0; j < n_quad; ++j) nodes.push_back({tg[k] + q.nodes[j], static_cast<int>(k), q.weights[j]});
  std::stable_sort(nodes.begin(), nodes.end(), [](const Node& a, const Node& b) { return a.t < b.t; });
  std::vector<double> times;
  times.reserve(nodes.size());
  for (const Node& nd : nodes) times.push_back(nd.t);
  auto sg = make_semigroup(op, method);
  double base = 0;
  std::vector<double> win(tg.size(), 0.0);
  sg->march(f, times, [&](int j, const Mat& P) {
    double v = nodes[static_cast<std::size_t>(j)].wq * col_wnorm2(P, 0, w);
    int owner = nodes[static_cast<std::size_t>(j)].window;
    if (owner < 0) base += v;
    else win[static_cast<std::size_t>(owner)] += v;
  });
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < tg.size(); ++k)
    margin = std::min(margin, std::exp(-2 * nu * tg[k]) * base - win[k]);
  return margin;
}

PointwiseCheck pointwise_decay_bound(const OperatorMatrix& op, const Vec& f, double nu, double T,
                                     const std::vector<double>& t_grid, SemigroupMethod method) {
  PointwiseCheck pc;
  pc.C = std::exp(nu * T);
  const double nf = norm(f, op.reference_measure);
  std::vector<double> tg = t_grid;
  std::sort(tg.begin(), tg.end());
  auto sg = make_semigroup(op, method);
  sg->march(f, tg, [&](int j, const Mat& P) {
    double r = std::sqrt(col_wnorm2(P, 0, op.reference_measure.weights)) /
               (pc.C * std::exp(-nu * tg[static_cast<std::size_t>(j)]) * nf);
    pc.worst_ratio = std::max(pc.worst_ratio, r);
  });
  pc.ok = pc.worst_ratio <= 1.0 + 1e-12;
  return pc;
}

UpperBoundCheck lifting_upper_bound_check(double nu, double C, double collapse_gap) {
  if (C < 1) throw Error("CBelowOne", "C must be at least 1");
  UpperBoundCheck u;
  u.bound = (1.0 + std::log(C)) * std::sqrt(2.0 * collapse_gap);
  u.slack = u.bound - nu;
  u.ok = nu <= u.bound;
  return u;
}

Mat lifted_probe_family(const Mat& collapse_vectors, const std::vector<int>& projection, int n_velocities,
                        const std::vector<std::vector<double>>& patterns, const Mat& random_lifted,
                        const WeightedMeasure& mu_lift) {
  const int D = static_cast<int>(projection.size());
  const int k = static_cast<int>(collapse_vectors.cols()) - 1;  // column 0 is the constant
  std::vector<Vec> cols;
  Mat lifted = lift_functions(collapse_vectors, projection);
  for (int j = 1; j <= k; ++j) cols.push_back(lifted.col(j));
  for (const auto& p : patterns) {
    if (static_cast<int>(p.size()) != n_velocities) throw Error("DimensionMismatch", "pattern length");
    for (int j = 0; j < k; ++j) {
      Vec f(D);
      for (int s = 0; s < D; ++s) f[s] = p[static_cast<std::size_t>(s % n_velocities)] * lifted(s, j);
      cols.push_back(f);
    }
  }
  for (int c = 0; c < random_lifted.cols(); ++c) cols.push_back(random_lifted.col(c));
  Mat out(D, static_cast<Eigen::Index>(cols.size()));
  int used = 0;
  Vec one = Vec::Ones(D);
  for (Vec& f : cols) {
    f.array() -= inner_product(f, one, mu_lift) / mu_lift.total_mass();
    double nf = norm(f, mu_lift);
    if (nf < 1e-12) continue;
    out.col(used++) = f / nf;
  }
  out.conservativeResize(D, used);
  return out;
}

}  // namespace liftlab
