#include "liftlab/quadrature.hpp"

#include <cmath>
#include <numbers>

namespace liftlab {

Quadrature gauss_legendre(int n, double a, double b) {
  if (n < 1) throw Error("InvalidParameter", "quadrature needs at least one node");
  if (!(b > a)) throw Error("InvalidParameter", "quadrature interval is empty");
  Mat J = Mat::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    double beta = k / std::sqrt(4.0 * k * k - 1.0);
    J(k, k - 1) = J(k - 1, k) = beta;
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(J);
  Quadrature q;
  q.nodes.resize(n);
  q.weights.resize(n);
  const double c = 0.5 * (a + b), s = 0.5 * (b - a);
  for (int k = 0; k < n; ++k) {
    q.nodes[k] = c + s * es.eigenvalues()[k];
    double v0 = es.eigenvectors()(0, k);
    q.weights[k] = 2.0 * v0 * v0 * s;
  }
  return q;
}

Quadrature chebyshev_lobatto(int n, double a, double b) {
  if (n < 2) throw Error("InvalidParameter", "Chebyshev grid needs at least two nodes");
  const int N = n - 1;
  const double pi = std::numbers::pi;
  Quadrature q;
  q.nodes.resize(n);
  q.weights.resize(n);
  for (int j = 0; j < n; ++j) {
    // cos(pi j/N) decreasing; flip so nodes increase
    double xj = -std::cos(pi * j / N);
    q.nodes[j] = 0.5 * (a + b) + 0.5 * (b - a) * xj;
  }
  // Clenshaw-Curtis weights (Trefethen, Spectral Methods in MATLAB, clencurt)
  Vec w = Vec::Zero(n);
  Vec theta(n);
  for (int j = 0; j < n; ++j) theta[j] = pi * j / N;
  if (N % 2 == 0) {
    w[0] = w[N] = 1.0 / (N * N - 1.0);
    for (int j = 1; j < N; ++j) {
      double v = 1.0;
      for (int k = 1; k < N / 2; ++k) v -= 2.0 * std::cos(2.0 * k * theta[j]) / (4.0 * k * k - 1.0);
      v -= std::cos(N * theta[j]) / (N * N - 1.0);
      w[j] = 2.0 * v / N;
    }
  } else {
    w[0] = w[N] = 1.0 / (static_cast<double>(N) * N);
    for (int j = 1; j < N; ++j) {
      double v = 1.0;
      for (int k = 1; k <= (N - 1) / 2; ++k) v -= 2.0 * std::cos(2.0 * k * theta[j]) / (4.0 * k * k - 1.0);
      w[j] = 2.0 * v / N;
    }
  }
  // symmetric, so the flip does not change the weights
  q.weights = w * (0.5 * (b - a));
  return q;
}

Mat chebyshev_diff_matrix(int n, double a, double b) {
  Quadrature q = chebyshev_lobatto(n, a, b);
  const Vec& x = q.nodes;
  Vec c(n);
  for (int j = 0; j < n; ++j) c[j] = ((j == 0 || j == n - 1) ? 2.0 : 1.0) * ((j % 2) ? -1.0 : 1.0);
  Mat D = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    double row = 0;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      D(i, j) = (c[i] / c[j]) / (x[i] - x[j]);
      row += D(i, j);
    }
    D(i, i) = -row;  // negative-sum trick keeps constants in the kernel exactly
  }
  return D;
}

}  // namespace liftlab
