#pragma once

#include "liftlab/core.hpp"

#include <complex>
#include <functional>
#include <memory>

namespace liftlab {

struct SpectralData {
  // Sorted by real part, descending. Generators put the zero eigenvalue first.
  std::vector<std::complex<double>> eigenvalues;
  // Self-adjoint case: real columns, orthonormal in L2(mu).
  Mat vectors;
  // General case: complex columns (unnormalized).
  Eigen::MatrixXcd complex_vectors;
  bool is_self_adjoint = false;
  double gap = 0;       // -max{Re l : l != l_0}
  double gap_imag = 0;  // |Im| of the eigenvalue realizing the gap
  bool degenerate = false;

  int size() const { return static_cast<int>(eigenvalues.size()); }
  // -Re(eigenvalue k); alpha_k^2 in the self-adjoint case.
  double rate(int k) const { return -eigenvalues[static_cast<std::size_t>(k)].real(); }
};

struct DecomposeOptions {
  bool vectors = true;
  double self_adjoint_tol = 1e-10;
};

// True when w_i A_ij = w_j A_ji up to tol (relative to the largest |w_i A_ij|)
// and every weight is positive.
bool is_self_adjoint(const OperatorMatrix& op, double tol = 1e-10);

SpectralData decompose(const OperatorMatrix& op, const DecomposeOptions& opts = {});
double spectral_gap(const OperatorMatrix& op);

// Eigenpairs 0..k (largest eigenvalues) of a self-adjoint generator whose
// symmetrization is tridiagonal: Sturm bisection plus inverse iteration, O(k n).
// Throws NotTridiagonal otherwise.
SpectralData low_modes(const OperatorMatrix& op, int k);
// 1/m for the variance bound Var(f) <= (1/m) E(f). Infinity when no such m > 0 exists.
double poincare_constant(const OperatorMatrix& op);

// -<f, L g>_mu
double dirichlet_form(const OperatorMatrix& op, const Vec& f, const Vec& g);

// exp(t A) by Pade scaling and squaring.
Mat expm(const Mat& A, double t);

enum class SemigroupMethod { Auto, Eigen, Pade, Uniformization };

// Semigroup action P_t = exp(tL) on blocks of column vectors.
class Semigroup {
 public:
  virtual ~Semigroup() = default;
  // times must be nondecreasing and >= 0; visit(j, P_{t_j} F) is called in order.
  virtual void march(const Mat& F, const std::vector<double>& times,
                     const std::function<void(int, const Mat&)>& visit) const = 0;
  virtual const char* method() const = 0;
  Mat apply(const Mat& F, double t) const;
};

std::unique_ptr<Semigroup> make_semigroup(const OperatorMatrix& op,
                                          SemigroupMethod method = SemigroupMethod::Auto);

// Convenience wrapper with the overflow guard t*||L||_inf <= 1e6.
Vec semigroup_apply(const OperatorMatrix& op, const Vec& f, double t,
                    SemigroupMethod method = SemigroupMethod::Auto);

}  // namespace liftlab
