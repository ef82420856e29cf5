#include "liftlab/divergence.hpp"

#include "liftlab/lift_check.hpp"

#include <cmath>
#include <mutex>
#include <numbers>

namespace liftlab {

TimeGrid make_time_grid(double T, int n) {
  if (!(T > 0)) throw Error("InvalidParameter", "T must be positive");
  TimeGrid g;
  g.T = T;
  Quadrature q = chebyshev_lobatto(n, 0.0, T);
  g.t = q.nodes;
  g.w = q.weights;
  g.D = chebyshev_diff_matrix(n, 0.0, T);
  return g;
}

// Per-mode solvers on the time grid.
//   perp[k]: min || W^{1/2} ((-D^2 + 2 a^2) Z y - r) ||, g = Z y, with
//            g(0) = g(T) = g'(0) = g'(T) = 0 built into Z.
//   anti[k], sym[k]: unit-coefficient (v, w) pairs for cases 4-5.
struct HarmonicBasis::Cache {
  struct Perp {
    Eigen::HouseholderQR<Mat> qr;
  };
  struct Pair {
    Vec v, w;
  };
  std::mutex mutex;
  bool have_constraints = false;
  Mat Z;   // null space of the four boundary functionals
  Mat Q1;  // range part
  Mat R1;  // 4x4 triangular factor of C^T
  Mat D2;
  Vec ws;  // sqrt of Clenshaw-Curtis weights
  std::vector<std::shared_ptr<Perp>> perp;
  std::vector<std::shared_ptr<Pair>> anti, sym;
};

namespace {

void ensure_constraints(HarmonicBasis::Cache& c, const TimeGrid& tg) {
  if (c.have_constraints) return;
  const int n = tg.size();
  Mat C = Mat::Zero(4, n);
  C(0, 0) = 1;
  C(1, n - 1) = 1;
  C.row(2) = tg.D.row(0);
  C.row(3) = tg.D.row(n - 1);
  Eigen::HouseholderQR<Mat> qr(C.transpose());
  Mat Q = qr.householderQ();
  c.Q1 = Q.leftCols(4);
  c.Z = Q.rightCols(n - 4);
  c.R1 = qr.matrixQR().topRows(4).triangularView<Eigen::Upper>();
  c.D2 = tg.D * tg.D;
  c.ws = tg.w.cwiseSqrt();
  c.have_constraints = true;
}

void check_rank(const Mat& QR, const char* what) {
  Vec d = QR.diagonal().cwiseAbs();
  if (d.size() == 0) return;
  if (d.minCoeff() <= 1e-14 * d.maxCoeff()) throw Error("SolveFailure", std::string(what) + " is rank deficient");
}

std::shared_ptr<HarmonicBasis::Cache::Perp> build_perp(const HarmonicBasis::Cache& c, double kappa) {
  const Mat& Z = c.Z;
  Mat A = -c.D2 * Z + kappa * Z;
  A = c.ws.asDiagonal() * A;
  auto p = std::make_shared<HarmonicBasis::Cache::Perp>();
  p->qr.compute(A);
  check_rank(p->qr.matrixQR().topRows(A.cols()), "time operator");
  return p;
}

// Minimize ||w||^2 + ||w'||^2/(2a^2) + 2a^2 ||v||^2 with w = u - v',
// v(0) = v(T) = 0, v'(0) = u(0), v'(T) = u(T).
std::shared_ptr<HarmonicBasis::Cache::Pair> build_pair(const HarmonicBasis::Cache& c, const TimeGrid& tg,
                                                       const Vec& u, double alpha) {
  const int n = tg.size();
  Vec d(4);
  d << 0.0, 0.0, u[0], u[n - 1];
  Vec y0 = c.R1.transpose().triangularView<Eigen::Lower>().solve(d);
  Vec vp = c.Q1 * y0;
  const double s = std::sqrt(2.0) * alpha;
  const Mat& D = tg.D;
  Vec du = D * u;
  Mat A(3 * n, c.Z.cols());
  A.topRows(n) = c.ws.asDiagonal() * (D * c.Z);
  A.middleRows(n, n) = (c.ws / s).asDiagonal() * (c.D2 * c.Z);
  A.bottomRows(n) = (s * c.ws).asDiagonal() * c.Z;
  Vec b(3 * n);
  b.head(n) = c.ws.cwiseProduct(u - D * vp);
  b.segment(n, n) = (c.ws / s).cwiseProduct(du - c.D2 * vp);
  b.tail(n) = -(s * c.ws).cwiseProduct(vp);
  Eigen::HouseholderQR<Mat> qr(A);
  check_rank(qr.matrixQR().topRows(A.cols()), "mode least-squares system");
  Vec y = qr.solve(b);
  auto p = std::make_shared<HarmonicBasis::Cache::Pair>();
  p->v = vp + c.Z * y;
  p->v[0] = 0;
  p->v[n - 1] = 0;
  p->w = u - D * p->v;
  p->w[0] = 0;
  p->w[n - 1] = 0;
  return p;
}

Vec time_project(const Vec& c, const Vec& phi, const Vec& w) {
  double den = (phi.array().square() * w.array()).sum();
  if (den <= 0) return Vec::Zero(c.size());
  double num = (c.array() * phi.array() * w.array()).sum();
  return (num / den) * phi;
}

// Spatial coefficients <F(:, j), e_k>_mu, modes x times.
Mat mode_coefficients(const Mat& F, const HarmonicBasis& b) {
  const Vec& mu = b.collapse.reference_measure.weights;
  return b.E.transpose() * (mu.asDiagonal() * F);
}

double st_mean(const Mat& F, const HarmonicBasis& b) {
  const Vec& mu = b.collapse.reference_measure.weights;
  return mu.dot(F * b.time.w);
}

void check_field(const Mat& F, const HarmonicBasis& b) {
  if (F.rows() != b.collapse.dim() || F.cols() != b.time.size())
    throw Error("DimensionMismatch", "space-time field does not match the basis grids");
}

}  // namespace

Vec HarmonicBasis::anti_profile(int k) const {
  const Vec& t = time.t;
  if (k == 0) return (2.0 * t.array() - T).matrix();
  double b = beta(k);
  return ((-b * t.array()).exp() - (-b * (T - t.array())).exp()).matrix();
}

Vec HarmonicBasis::sym_profile(int k) const {
  if (k == 0) throw Error("InvalidParameter", "no symmetric harmonic for the constant mode");
  const Vec& t = time.t;
  double b = beta(k);
  return ((-b * t.array()).exp() + (-b * (T - t.array())).exp()).matrix();
}

Vec HarmonicBasis::anti_profile_dot(int k) const {
  const Vec& t = time.t;
  if (k == 0) return Vec::Constant(t.size(), 2.0);
  double b = beta(k);
  return (-b * ((-b * t.array()).exp() + (-b * (T - t.array())).exp())).matrix();
}

Vec HarmonicBasis::sym_profile_dot(int k) const {
  const Vec& t = time.t;
  double b = beta(k);
  return (-b * ((-b * t.array()).exp() - (-b * (T - t.array())).exp())).matrix();
}

Mat HarmonicBasis::anti(int k) const { return E.col(k) * anti_profile(k).transpose(); }
Mat HarmonicBasis::sym(int k) const { return E.col(k) * sym_profile(k).transpose(); }

HarmonicBasis build_harmonic_basis(const OperatorMatrix& collapse, const SpectralData& spec, double T,
                                   int n_time) {
  if (!spec.is_self_adjoint) throw Error("NotSelfAdjoint", "harmonic basis needs a self-adjoint collapse");
  if (spec.vectors.rows() != collapse.dim() || spec.vectors.cols() != collapse.dim())
    throw Error("DimensionMismatch", "spectral data does not match the collapse generator");
  HarmonicBasis b;
  b.T = T;
  b.time = make_time_grid(T, n_time);
  b.collapse = collapse;
  b.E = spec.vectors;
  const int K = spec.size();
  b.alpha2.resize(K);
  b.low.resize(static_cast<std::size_t>(K));
  const double scale = std::max(1.0, collapse.max_exit_rate());
  for (int k = 0; k < K; ++k) {
    double r = spec.rate(k);
    if (r < -1e-9 * scale) throw Error("NotSelfAdjoint", "spectrum must be nonpositive");
    b.alpha2[k] = k == 0 ? 0.0 : std::max(0.0, r);
    b.low[static_cast<std::size_t>(k)] = b.alpha(k) <= 2.0 / T ? 1 : 0;
  }
  // orthogonality: spatial orthonormality and a_k against s_k in time
  const Vec& mu = collapse.reference_measure.weights;
  Mat G = b.E.transpose() * (mu.asDiagonal() * b.E);
  if ((G - Mat::Identity(K, K)).cwiseAbs().maxCoeff() > 1e-8)
    throw Error("BasisNotOrthogonal", "eigenvectors are not orthonormal in L2(mu)");
  const Vec& w = b.time.w;
  for (int k = 1; k < K; ++k) {
    Vec a = b.anti_profile(k), s = b.sym_profile(k);
    double as = (a.array() * s.array() * w.array()).sum();
    double na = std::sqrt((a.array().square() * w.array()).sum());
    double ns = std::sqrt((s.array().square() * w.array()).sum());
    if (std::abs(as) > 1e-8 * na * ns) throw Error("BasisNotOrthogonal", "harmonic profiles are not orthogonal");
  }
  b.cache = std::make_shared<HarmonicBasis::Cache>();
  b.cache->perp.resize(static_cast<std::size_t>(K));
  b.cache->anti.resize(static_cast<std::size_t>(K));
  b.cache->sym.resize(static_cast<std::size_t>(K));
  return b;
}

double st_inner(const Mat& A, const Mat& B, const HarmonicBasis& basis) {
  const Vec& mu = basis.collapse.reference_measure.weights;
  return (A.cwiseProduct(B).transpose() * mu).dot(basis.time.w);
}

double st_norm(const Mat& A, const HarmonicBasis& basis) { return std::sqrt(std::max(0.0, st_inner(A, A, basis))); }

namespace {

struct ModeSplit {
  Mat perp, la, ls, ha, hs;  // modes x times
};

ModeSplit split_modes(const Mat& F, const HarmonicBasis& b) {
  check_field(F, b);
  double nf = st_norm(F, b);
  double mass = b.collapse.reference_measure.total_mass() * b.T;
  if (std::abs(st_mean(F, b)) > 1e-10 * std::max(1.0, nf * std::sqrt(mass)))
    throw Error("NotMeanZero", "space-time field is not mean-zero");
  Mat C = mode_coefficients(F, b);
  const int K = b.size(), n = b.time.size();
  ModeSplit s;
  s.la = s.ls = s.ha = s.hs = Mat::Zero(K, n);
  const Vec& w = b.time.w;
  for (int k = 0; k < K; ++k) {
    Vec c = C.row(k).transpose();
    Vec pa = time_project(c, b.anti_profile(k), w);
    Vec ps = k == 0 ? Vec::Zero(n) : time_project(c, b.sym_profile(k), w);
    if (b.low[static_cast<std::size_t>(k)]) {
      s.la.row(k) = pa.transpose();
      s.ls.row(k) = ps.transpose();
    } else {
      s.ha.row(k) = pa.transpose();
      s.hs.row(k) = ps.transpose();
    }
  }
  s.perp = C - s.la - s.ls - s.ha - s.hs;
  // k = 0 also carries the time-constant part, which mean-zero removes up to rounding
  return s;
}

}  // namespace

DivComponents decompose_rhs(const Mat& f, const HarmonicBasis& basis) {
  ModeSplit s = split_modes(f, basis);
  DivComponents out;
  out.la = basis.E * s.la;
  out.ls = basis.E * s.ls;
  out.ha = basis.E * s.ha;
  out.hs = basis.E * s.hs;
  out.perp = f - out.la - out.ls - out.ha - out.hs;
  return out;
}

DivergenceSolution solve_divergence(const Mat& f, const HarmonicBasis& basis, double m) {
  if (!(m > 0)) throw Error("InvalidParameter", "collapse gap must be positive");
  if (!basis.cache) throw Error("InvalidParameter", "basis was not built by build_harmonic_basis");
  ModeSplit s = split_modes(f, basis);
  const TimeGrid& tg = basis.time;
  const int K = basis.size(), n = tg.size();
  const double T = basis.T;
  const Vec& w = tg.w;
  auto& cache = *basis.cache;

  auto row_active = [](const Mat& M, int k) { return M.row(k).cwiseAbs().maxCoeff() > 0; };
  std::vector<int> need_perp, need_anti, need_sym;
  for (int k = 0; k < K; ++k) {
    if (row_active(s.perp, k) && !cache.perp[static_cast<std::size_t>(k)]) need_perp.push_back(k);
    if (row_active(s.ha, k) && !cache.anti[static_cast<std::size_t>(k)]) need_anti.push_back(k);
    if (row_active(s.hs, k) && !cache.sym[static_cast<std::size_t>(k)]) need_sym.push_back(k);
  }
  {
    std::lock_guard<std::mutex> lk(cache.mutex);
    ensure_constraints(cache, tg);
    const int np = static_cast<int>(need_perp.size()), na = static_cast<int>(need_anti.size());
    const int total = np + na + static_cast<int>(need_sym.size());
    parallel_for(total, [&](int i) {
      if (i < np) {
        int k = need_perp[static_cast<std::size_t>(i)];
        cache.perp[static_cast<std::size_t>(k)] = build_perp(cache, 2.0 * basis.alpha2[k]);
      } else if (i < np + na) {
        int k = need_anti[static_cast<std::size_t>(i - np)];
        cache.anti[static_cast<std::size_t>(k)] = build_pair(cache, tg, basis.anti_profile(k), basis.alpha(k));
      } else {
        int k = need_sym[static_cast<std::size_t>(i - np - na)];
        cache.sym[static_cast<std::size_t>(k)] = build_pair(cache, tg, basis.sym_profile(k), basis.alpha(k));
      }
    });
  }

  Mat hc = Mat::Zero(K, n), gc = Mat::Zero(K, n);
  const double two_pi = 2.0 * std::numbers::pi;
  Vec cosv = (two_pi / T * tg.t.array()).cos().matrix();
  Vec sinv = (two_pi / T * tg.t.array()).sin().matrix();
  for (int k = 0; k < K; ++k) {
    const double a2 = basis.alpha2[k];
    // case 1: Neumann-in-time inverse, g with all four boundary values zero, h = -g'
    if (row_active(s.perp, k)) {
      Vec r = s.perp.row(k).transpose();
      Vec y = cache.perp[static_cast<std::size_t>(k)]->qr.solve(Vec(cache.ws.cwiseProduct(r)));
      Vec g = cache.Z * y;
      g[0] = g[n - 1] = 0;
      Vec h = -(tg.D * g);
      h[0] = h[n - 1] = 0;
      gc.row(k) += g.transpose();
      hc.row(k) += h.transpose();
    }
    // case 2: h = int_0^t f, g = 0
    if (row_active(s.la, k)) {
      Vec pa = basis.anti_profile(k);
      Vec c = s.la.row(k).transpose();
      double coef = (c.array() * pa.array() * w.array()).sum() / (pa.array().square() * w.array()).sum();
      Vec I(n);
      if (k == 0) {
        I = (tg.t.array().square() - T * tg.t.array()).matrix();
      } else {
        double b = basis.beta(k);
        I = ((1.0 - (-b * tg.t.array()).exp()) / b - ((-b * (T - tg.t.array())).exp() - std::exp(-b * T)) / b)
                .matrix();
      }
      I[0] = I[n - 1] = 0;
      hc.row(k) += coef * I.transpose();
    }
    // case 3: f = f0 + f1, f0 = f(0) cos(2 pi t/T)
    if (row_active(s.ls, k)) {
      Vec c = s.ls.row(k).transpose();
      double f00 = c[0];
      Vec f1 = c - f00 * cosv;
      Vec h = f00 * T / two_pi * sinv;
      h[0] = h[n - 1] = 0;
      Vec g = f1 / (2.0 * a2);
      g[0] = g[n - 1] = 0;
      hc.row(k) += h.transpose();
      gc.row(k) += g.transpose();
    }
    // cases 4-5: u = v' + w per mode, h = v e_k, g = w/(2 a^2) e_k
    auto high = [&](const Mat& part, const std::vector<std::shared_ptr<HarmonicBasis::Cache::Pair>>& pairs,
                    const Vec& prof) {
      if (!row_active(part, k)) return;
      Vec c = part.row(k).transpose();
      double coef = (c.array() * prof.array() * w.array()).sum() / (prof.array().square() * w.array()).sum();
      const auto& p = *pairs[static_cast<std::size_t>(k)];
      hc.row(k) += coef * p.v.transpose();
      gc.row(k) += (coef / (2.0 * a2)) * p.w.transpose();
    };
    high(s.ha, cache.anti, basis.anti_profile(k));
    if (k > 0) high(s.hs, cache.sym, basis.sym_profile(k));
  }

  DivergenceSolution sol;
  sol.h = basis.E * hc;
  sol.g = basis.E * gc;
  sol.h.col(0).setZero();
  sol.h.col(n - 1).setZero();
  sol.g.col(0).setZero();
  sol.g.col(n - 1).setZero();
  Mat R = sol.h * tg.D.transpose() - 2.0 * (basis.collapse.entries * sol.g) - f;
  const double nf = st_norm(f, basis);
  sol.residual = nf > 0 ? st_norm(R, basis) / nf : st_norm(R, basis);
  sol.bc_error = 0;
  if (nf > 0) {
    BoundRatios br = verify_divergence_bounds(sol, f, basis, m);
    sol.r1 = br.r1;
    sol.r2 = br.r2;
    sol.r3 = br.r3;
    sol.raw3 = br.raw3;
  }
  return sol;
}

namespace {

// int_0^T E(F_t, F_t) dt
double energy_T(const Mat& F, const HarmonicBasis& b) {
  Mat LF = b.collapse.entries * F;
  return -st_inner(F, LF, b);
}

}  // namespace

BoundRatios verify_divergence_bounds(const DivergenceSolution& sol, const Mat& f, const HarmonicBasis& basis,
                                     double m) {
  check_field(f, basis);
  const double nf = st_norm(f, basis);
  if (!(nf > 0)) throw Error("ZeroRHS", "right-hand side has zero norm");
  BoundRatios r;
  r.r1 = st_norm(Mat(2.0 * (basis.collapse.entries * sol.g)), basis) / nf;
  r.r2 = std::sqrt(std::max(0.0, 2.0 * energy_T(sol.h, basis))) / nf;
  Mat gt = sol.g * basis.time.D.transpose();
  r.raw3 = std::sqrt(std::max(0.0, 2.0 * energy_T(gt, basis))) / nf;
  r.r3 = r.raw3 / (1.0 + 1.0 / (basis.T * std::sqrt(m)));
  return r;
}

double space_time_identity_check(const SplitGenerator& lift, const OperatorMatrix& collapse, const Mat& f,
                                 const Mat& g, const Mat& h, const TimeGrid& time) {
  const int nx = collapse.dim(), nt = time.size();
  for (const Mat* M : {&f, &g, &h})
    if (M->rows() != nx || M->cols() != nt) throw Error("DimensionMismatch", "fields do not match the grids");
  if (static_cast<int>(lift.projection.size()) != lift.transport.dim())
    throw Error("DimensionMismatch", "projection does not match the lifted generator");
  const Vec& mhat = lift.transport.reference_measure.weights;
  const Vec& mu = collapse.reference_measure.weights;
  Mat F = lift_functions(f, lift.projection);
  Mat G = lift_functions(g, lift.projection);
  Mat H = lift_functions(h, lift.projection);
  Mat AF = -(F * time.D.transpose()) + lift.transport.entries * F;
  Mat rhs = H + lift.transport.entries * G;
  double lhs = (AF.cwiseProduct(rhs).transpose() * mhat).dot(time.w);
  Mat ft = f * time.D.transpose();
  double term1 = -(h.cwiseProduct(ft).transpose() * mu).dot(time.w);
  Mat Lg = collapse.entries * g;
  double term2 = -2.0 * (f.cwiseProduct(Lg).transpose() * mu).dot(time.w);
  return std::abs(lhs - (term1 + term2));
}

Mat random_space_time_field(const HarmonicBasis& basis, RngStream& rng, int max_mode, int time_degree) {
  const int K = std::min(max_mode, basis.size() - 1), n = basis.time.size();
  Mat P(time_degree + 1, n);  // Legendre polynomials in 2t/T - 1
  for (int j = 0; j < n; ++j) {
    double x = 2.0 * basis.time.t[j] / basis.T - 1.0;
    P(0, j) = 1.0;
    if (time_degree >= 1) P(1, j) = x;
    for (int d = 2; d <= time_degree; ++d) P(d, j) = ((2.0 * d - 1) * x * P(d - 1, j) - (d - 1.0) * P(d - 2, j)) / d;
  }
  Mat C = Mat::Zero(basis.size(), n);
  for (int k = 0; k <= K; ++k)
    for (int d = 0; d <= time_degree; ++d) C.row(k) += rng.gaussian() / (1.0 + d) * P.row(d);
  Mat F = basis.E * C;
  const double mass = basis.collapse.reference_measure.total_mass() * basis.T;
  F.array() -= st_mean(F, basis) / mass;
  double nf = st_norm(F, basis);
  if (nf > 0) F /= nf;
  return F;
}

}  // namespace liftlab
