#include "liftlab/spectral.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/SparseLU>

namespace liftlab {

bool is_self_adjoint(const OperatorMatrix& op, double tol) {
  const Vec& w = op.reference_measure.weights;
  if (w.size() == 0 || w.minCoeff() <= 0) return false;
  const SpMat& A = op.entries;
  double scale = 0;
  for (int i = 0; i < A.outerSize(); ++i)
    for (SpMat::InnerIterator it(A, i); it; ++it)
      scale = std::max(scale, std::abs(w[i] * it.value()));
  if (scale == 0) return true;
  // w_i A_ij against w_j A_ji, i.e. W A against its transpose
  SpMat WA = w.asDiagonal() * A;
  SpMat sym = WA - SpMat(WA.transpose());
  for (int i = 0; i < sym.outerSize(); ++i)
    for (SpMat::InnerIterator it(sym, i); it; ++it)
      if (std::abs(it.value()) > tol * scale) return false;
  return true;
}

namespace {

bool is_tridiagonal(const Mat& S) {
  const int n = static_cast<int>(S.rows());
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      if (std::abs(i - j) > 1 && S(i, j) != 0.0) return false;
  return true;
}

SpectralData decompose_self_adjoint(const OperatorMatrix& op, const DecomposeOptions& opts) {
  const Vec& w = op.reference_measure.weights;
  const Vec s = w.cwiseSqrt();
  const Vec sinv = s.cwiseInverse();
  Mat S = s.asDiagonal() * op.dense() * sinv.asDiagonal();
  S = 0.5 * (S + S.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Mat> es;
  const int opt = opts.vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly;
  if (is_tridiagonal(S)) {
    Vec diag = S.diagonal();
    Vec sub = S.diagonal(-1);
    es.computeFromTridiagonal(diag, sub, opt);
  } else {
    es.compute(S, opt);
  }
  if (es.info() != Eigen::Success) throw Error("EigenFailure", "symmetric eigensolver did not converge");
  const int n = static_cast<int>(S.rows());
  SpectralData out;
  out.is_self_adjoint = true;
  out.eigenvalues.resize(static_cast<std::size_t>(n));
  // ascending from Eigen; we want descending
  for (int k = 0; k < n; ++k) out.eigenvalues[static_cast<std::size_t>(k)] = es.eigenvalues()[n - 1 - k];
  if (opts.vectors) {
    out.vectors.resize(n, n);
    for (int k = 0; k < n; ++k) {
      Vec e = sinv.cwiseProduct(es.eigenvectors().col(n - 1 - k));
      // fix the sign so results do not depend on solver internals
      int piv = 0;
      e.cwiseAbs().maxCoeff(&piv);
      if (e[piv] < 0) e = -e;
      out.vectors.col(k) = e;
    }
  }
  return out;
}

SpectralData decompose_general(const OperatorMatrix& op, const DecomposeOptions& opts) {
  Mat A = op.dense();
  Eigen::EigenSolver<Mat> es(A, opts.vectors);
  if (es.info() != Eigen::Success) throw Error("EigenFailure", "general eigensolver did not converge");
  const int n = static_cast<int>(A.rows());
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const auto& ev = es.eigenvalues();
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (ev[a].real() != ev[b].real()) return ev[a].real() > ev[b].real();
    return ev[a].imag() > ev[b].imag();
  });
  SpectralData out;
  out.is_self_adjoint = false;
  out.eigenvalues.resize(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) out.eigenvalues[static_cast<std::size_t>(k)] = ev[order[static_cast<std::size_t>(k)]];
  if (opts.vectors) {
    out.complex_vectors.resize(n, n);
    for (int k = 0; k < n; ++k) out.complex_vectors.col(k) = es.eigenvectors().col(order[static_cast<std::size_t>(k)]);
  }
  return out;
}

}  // namespace

SpectralData decompose(const OperatorMatrix& op, const DecomposeOptions& opts) {
  if (op.dim() < 1) throw Error("EmptyOperator", "operator has no states");
  SpectralData out = is_self_adjoint(op, opts.self_adjoint_tol) ? decompose_self_adjoint(op, opts)
                                                                : decompose_general(op, opts);
  if (out.size() > 1) {
    out.gap = -out.eigenvalues[1].real();
    out.gap_imag = std::abs(out.eigenvalues[1].imag());
    double scale = std::max(1.0, op.max_exit_rate());
    if (out.gap < 1e-12 * scale) out.degenerate = true;
    out.gap = std::max(0.0, out.gap);
  }
  return out;
}

double spectral_gap(const OperatorMatrix& op) { return decompose(op, {.vectors = false}).gap; }

SpectralData low_modes(const OperatorMatrix& op, int k) {
  const int n = op.dim();
  if (n < 1) throw Error("EmptyOperator", "operator has no states");
  if (!is_self_adjoint(op)) throw Error("NotSelfAdjoint", "low_modes needs a self-adjoint operator");
  k = std::min(k, n - 1);
  const Vec s = op.reference_measure.weights.cwiseSqrt();
  // symmetrized tridiagonal entries
  Vec d = Vec::Zero(n), e = Vec::Zero(std::max(0, n - 1));
  const SpMat& A = op.entries;
  for (int i = 0; i < A.outerSize(); ++i)
    for (SpMat::InnerIterator it(A, i); it; ++it) {
      const int j = static_cast<int>(it.col());
      if (j == i) d[i] = it.value();
      else if (std::abs(j - i) == 1) {
        if (j == i + 1) e[i] += 0.5 * s[i] * it.value() / s[j];
        else e[j] += 0.5 * s[i] * it.value() / s[j];
      } else if (it.value() != 0.0) {
        throw Error("NotTridiagonal", "low_modes needs a tridiagonal symmetrization");
      }
    }
  // number of eigenvalues below x (Sturm sequence via LDL^T pivots)
  auto count_below = [&](double x) {
    int c = 0;
    double q = d[0] - x;
    if (q < 0) ++c;
    for (int i = 1; i < n; ++i) {
      if (q == 0) q = 1e-300;
      q = d[i] - x - e[i - 1] * e[i - 1] / q;
      if (q < 0) ++c;
    }
    return c;
  };
  double radius = 0;
  for (int i = 0; i < n; ++i) {
    double r = std::abs(d[i]);
    if (i > 0) r += std::abs(e[i - 1]);
    if (i + 1 < n) r += std::abs(e[i]);
    radius = std::max(radius, r);
  }
  SpectralData out;
  out.is_self_adjoint = true;
  out.eigenvalues.resize(static_cast<std::size_t>(k + 1));
  out.vectors.resize(n, k + 1);
  Mat Y(n, k + 1);
  std::mt19937_64 gen(12345);
  std::normal_distribution<double> nd;
  for (int j = 0; j <= k; ++j) {
    // j-th largest eigenvalue: index n-1-j in ascending order
    const int target = n - 1 - j;
    double lo = -radius * 1.001 - 1e-300, hi = radius * 1.001 + 1e-300;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo) + std::abs(hi)); ++it) {
      double mid = 0.5 * (lo + hi);
      if (count_below(mid) <= target) lo = mid;
      else hi = mid;
    }
    double lam = 0.5 * (lo + hi);
    out.eigenvalues[static_cast<std::size_t>(j)] = lam;
    Vec y;
    if (j == 0 && std::abs(lam) <= 1e-10 * std::max(1.0, radius)) {
      y = s / s.norm();  // constants
    } else {
      std::vector<Eigen::Triplet<double>> trips;
      const double sigma = lam + 1e-13 * std::max(1.0, radius);
      for (int i = 0; i < n; ++i) {
        trips.emplace_back(i, i, d[i] - sigma);
        if (i + 1 < n) {
          trips.emplace_back(i, i + 1, e[i]);
          trips.emplace_back(i + 1, i, e[i]);
        }
      }
      Eigen::SparseMatrix<double> M(n, n);
      M.setFromTriplets(trips.begin(), trips.end());
      Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
      lu.compute(M);
      if (lu.info() != Eigen::Success) throw Error("EigenFailure", "inverse iteration factorization failed");
      y.resize(n);
      for (int i = 0; i < n; ++i) y[i] = nd(gen);
      for (int it = 0; it < 4; ++it) {
        for (int p = 0; p < j; ++p) y -= Y.col(p).dot(y) * Y.col(p);
        y = lu.solve(y);
        y /= y.norm();
      }
      for (int p = 0; p < j; ++p) y -= Y.col(p).dot(y) * Y.col(p);
      y /= y.norm();
    }
    Y.col(j) = y;
    Vec v = y.cwiseQuotient(s);
    int piv = 0;
    v.cwiseAbs().maxCoeff(&piv);
    if (v[piv] < 0) v = -v;
    out.vectors.col(j) = v;
  }
  if (k >= 1) {
    out.gap = std::max(0.0, -out.eigenvalues[1].real());
    if (out.gap < 1e-12 * std::max(1.0, radius)) out.degenerate = true;
  }
  return out;
}

double poincare_constant(const OperatorMatrix& op) {
  if (is_self_adjoint(op)) {
    double g = spectral_gap(op);
    return g > 0 ? 1.0 / g : std::numeric_limits<double>::infinity();
  }
  // Only the symmetric part of L enters E(f, f). Restrict to positive-weight
  // states and solve the generalized problem on mean-zero functions.
  const Vec& w = op.reference_measure.weights;
  std::vector<int> keep;
  for (int i = 0; i < w.size(); ++i)
    if (w[i] > 0) keep.push_back(i);
  const int n = static_cast<int>(keep.size());
  Mat A = op.dense();
  Mat H(n, n);
  Vec wk(n);
  for (int a = 0; a < n; ++a) {
    wk[a] = w[keep[static_cast<std::size_t>(a)]];
    for (int b = 0; b < n; ++b) {
      int i = keep[static_cast<std::size_t>(a)], j = keep[static_cast<std::size_t>(b)];
      H(a, b) = -0.5 * (w[i] * A(i, j) + w[j] * A(j, i));
    }
  }
  // symmetric weights W^{-1/2} H W^{-1/2}; the constant direction s = sqrt(w)
  Vec s = wk.cwiseSqrt();
  Mat S = s.cwiseInverse().asDiagonal() * H * s.cwiseInverse().asDiagonal();
  Vec u = s / s.norm();
  Mat P = Mat::Identity(n, n) - u * u.transpose();
  S = P * S * P;
  S = 0.5 * (S + S.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Mat> es(S, Eigen::EigenvaluesOnly);
  // the projected-out direction contributes one zero; take the next one
  const Vec& ev = es.eigenvalues();
  double m = ev.size() > 1 ? ev[1] : 0.0;
  double scale = std::max(1.0, std::abs(ev[ev.size() - 1]));
  if (m <= 1e-12 * scale) return std::numeric_limits<double>::infinity();
  return 1.0 / m;
}

double dirichlet_form(const OperatorMatrix& op, const Vec& f, const Vec& g) {
  if (f.size() != op.dim() || g.size() != op.dim())
    throw Error("DimensionMismatch", "Dirichlet form operands differ from operator size");
  return -inner_product(f, op.apply(g), op.reference_measure);
}

Mat expm(const Mat& A, double t) {
  Mat tA = t * A;
  return tA.exp();
}

}  // namespace liftlab
