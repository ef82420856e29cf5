#include "liftlab/kernels.hpp"
#include "liftlab/spectral.hpp"

#include <cmath>
#include <map>

namespace liftlab {

Mat Semigroup::apply(const Mat& F, double t) const {
  Mat out;
  march(F, {t}, [&](int, const Mat& P) { out = P; });
  return out;
}

namespace {

void check_times(const std::vector<double>& times) {
  double prev = 0;
  for (double t : times) {
    if (!(t >= 0) || !std::isfinite(t)) throw Error("InvalidTime", "semigroup times must be finite and >= 0");
    if (t < prev) throw Error("InvalidTime", "semigroup times must be nondecreasing");
    prev = t;
  }
}

// Cached eigendecomposition; exact for self-adjoint operators.
class EigenSemigroup final : public Semigroup {
 public:
  explicit EigenSemigroup(const OperatorMatrix& op) : w_(op.reference_measure.weights) {
    SpectralData sd = decompose(op);
    if (!sd.is_self_adjoint) throw Error("NotSelfAdjoint", "eigen semigroup needs a self-adjoint operator");
    lam_.resize(sd.size());
    for (int k = 0; k < sd.size(); ++k) lam_[k] = sd.eigenvalues[static_cast<std::size_t>(k)].real();
    E_ = std::move(sd.vectors);
  }
  void march(const Mat& F, const std::vector<double>& times,
             const std::function<void(int, const Mat&)>& visit) const override {
    check_times(times);
    Mat C = E_.transpose() * (w_.asDiagonal() * F);
    for (std::size_t j = 0; j < times.size(); ++j) {
      Vec d = (lam_ * times[j]).array().exp();
      Mat P = E_ * (d.asDiagonal() * C);
      visit(static_cast<int>(j), P);
    }
  }
  const char* method() const override { return "eigen"; }

 private:
  Vec w_;
  Vec lam_;
  Mat E_;
};

// Dense Pade exponential of each time increment.
class PadeSemigroup final : public Semigroup {
 public:
  explicit PadeSemigroup(const OperatorMatrix& op) : A_(op.dense()) {}
  void march(const Mat& F, const std::vector<double>& times,
             const std::function<void(int, const Mat&)>& visit) const override {
    check_times(times);
    Mat Y = F;
    double tprev = 0;
    std::map<double, Mat> cache;
    for (std::size_t j = 0; j < times.size(); ++j) {
      double dt = times[j] - tprev;
      if (dt > 0) {
        auto it = cache.find(dt);
        if (it == cache.end()) it = cache.emplace(dt, expm(A_, dt)).first;
        Y = (it->second * Y).eval();
      }
      tprev = times[j];
      visit(static_cast<int>(j), Y);
    }
  }
  const char* method() const override { return "pade"; }

 private:
  Mat A_;
};

// Uniformization: P_t = sum_k Pois(Lambda t; k) K^k with K = I + A/Lambda.
// Long steps are cut so Lambda*dt <= 500, which keeps exp(-Lambda dt) normal.
class UniformizationSemigroup final : public Semigroup {
 public:
  explicit UniformizationSemigroup(const OperatorMatrix& op) {
    if (!op.is_generator) throw Error("NotGenerator", "uniformization needs a Markov generator");
    lambda_ = std::max(op.max_exit_rate(), 1e-300);
    SpMat I(op.dim(), op.dim());
    I.setIdentity();
    K_ = I + op.entries * (1.0 / lambda_);
    K_.makeCompressed();
  }
  void march(const Mat& F, const std::vector<double>& times,
             const std::function<void(int, const Mat&)>& visit) const override {
    check_times(times);
    Mat Y = F;
    double tprev = 0;
    for (std::size_t j = 0; j < times.size(); ++j) {
      double dt = times[j] - tprev;
      if (dt > 0) {
        int pieces = static_cast<int>(std::ceil(lambda_ * dt / kMaxStep));
        pieces = std::max(pieces, 1);
        for (int p = 0; p < pieces; ++p) step(Y, dt / pieces);
      }
      tprev = times[j];
      visit(static_cast<int>(j), Y);
    }
  }
  const char* method() const override { return "uniformization"; }

 private:
  static constexpr double kMaxStep = 500.0;

  void step(Mat& Y, double dt) const {
    const double lt = lambda_ * dt;
    const std::size_t n = static_cast<std::size_t>(Y.size());
    Mat acc = Mat::Zero(Y.rows(), Y.cols());
    Mat cur = Y, nxt(Y.rows(), Y.cols());
    double p = std::exp(-lt);
    for (int k = 0;; ++k) {
      if (p > 0) kernels::axpy(p, cur.data(), acc.data(), n);
      // remaining mass of the Poisson tail is at most p * (k+1)/(k+1-lt) once k+1 > lt
      if (k + 1 > lt) {
        double tail = p * lt / (k + 1) / (1.0 - lt / (k + 2));
        if (tail < 1e-16) break;
      }
      nxt.noalias() = K_ * cur;
      cur.swap(nxt);
      p *= lt / (k + 1);
    }
    Y.swap(acc);
  }

  double lambda_ = 0;
  SpMat K_;
};

}  // namespace

std::unique_ptr<Semigroup> make_semigroup(const OperatorMatrix& op, SemigroupMethod method) {
  switch (method) {
    case SemigroupMethod::Eigen:
      return std::make_unique<EigenSemigroup>(op);
    case SemigroupMethod::Pade:
      return std::make_unique<PadeSemigroup>(op);
    case SemigroupMethod::Uniformization:
      return std::make_unique<UniformizationSemigroup>(op);
    case SemigroupMethod::Auto:
      break;
  }
  if (op.dim() <= 4000 && is_self_adjoint(op)) return std::make_unique<EigenSemigroup>(op);
  if (op.is_generator) return std::make_unique<UniformizationSemigroup>(op);
  if (op.dim() <= 4000) return std::make_unique<PadeSemigroup>(op);
  throw Error("Unsupported", "no semigroup method for a large non-generator operator");
}

Vec semigroup_apply(const OperatorMatrix& op, const Vec& f, double t, SemigroupMethod method) {
  if (f.size() != op.dim()) throw Error("DimensionMismatch", "vector size differs from operator");
  if (!(t >= 0)) throw Error("InvalidTime", "t must be nonnegative");
  double norm_inf = 0;
  for (int i = 0; i < op.entries.outerSize(); ++i) {
    double r = 0;
    for (SpMat::InnerIterator it(op.entries, i); it; ++it) r += std::abs(it.value());
    norm_inf = std::max(norm_inf, r);
  }
  if (t * norm_inf > 1e6) throw Error("OverflowGuard", "t*||L|| exceeds 1e6");
  if (t == 0) return f;
  auto sg = make_semigroup(op, method);
  return sg->apply(f, t).col(0);
}

}  // namespace liftlab
