#include "liftlab/core.hpp"

#include "liftlab/kernels.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace liftlab {

Grid1D make_grid(double length_L, int n_interior, double origin) {
  if (!(length_L > 0) || !std::isfinite(length_L))
    throw Error("NonPositiveLength", "grid length must be positive");
  if (n_interior < 2) throw Error("TooFewNodes", "need at least 2 interior nodes");
  Grid1D g;
  g.length_L = length_L;
  g.n_interior = n_interior;
  g.h = length_L / (n_interior + 1);
  g.origin = origin;
  g.nodes.resize(static_cast<std::size_t>(n_interior) + 2);
  for (int i = 0; i <= n_interior + 1; ++i) g.nodes[static_cast<std::size_t>(i)] = origin + i * g.h;
  g.nodes.back() = origin + length_L;
  return g;
}

double WeightedMeasure::atom_mass() const {
  double s = 0;
  for (int i = 0; i < dim(); ++i)
    if (is_atom[static_cast<std::size_t>(i)]) s += weights[i];
  return s;
}

double WeightedMeasure::density_mass() const { return total_mass() - atom_mass(); }

void WeightedMeasure::validate() const {
  if (static_cast<int>(is_atom.size()) != dim())
    throw Error("DimensionMismatch", "atom flags do not match weight count");
  for (int i = 0; i < dim(); ++i)
    if (!(weights[i] >= 0)) throw Error("NegativeWeight", "measure weight below zero");
  if (probability && std::abs(total_mass() - 1.0) > 1e-12)
    throw Error("NotProbability", "probability measure does not sum to 1");
}

WeightedMeasure make_measure(Vec weights, std::vector<std::uint8_t> is_atom, bool probability) {
  WeightedMeasure m;
  m.weights = std::move(weights);
  m.is_atom = std::move(is_atom);
  if (m.is_atom.empty()) m.is_atom.assign(static_cast<std::size_t>(m.weights.size()), 0);
  m.probability = probability;
  m.validate();
  return m;
}

double inner_product(const Vec& f, const Vec& g, const WeightedMeasure& mu) {
  if (f.size() != g.size() || f.size() != mu.weights.size())
    throw Error("DimensionMismatch", "inner product operands differ in size");
  return kernels::wdot(f.data(), g.data(), mu.weights.data(), static_cast<std::size_t>(f.size()));
}

double norm(const Vec& f, const WeightedMeasure& mu) {
  return std::sqrt(std::max(0.0, inner_product(f, f, mu)));
}

double mean(const Vec& f, const WeightedMeasure& mu) {
  Vec one = Vec::Ones(f.size());
  return inner_product(f, one, mu) / mu.total_mass();
}

double OperatorMatrix::max_exit_rate() const {
  double r = 0;
  for (int i = 0; i < entries.outerSize(); ++i)
    for (SpMat::InnerIterator it(entries, i); it; ++it)
      if (it.col() == i) r = std::max(r, std::abs(it.value()));
  return r;
}

void OperatorMatrix::validate() const {
  if (entries.rows() != entries.cols()) throw Error("NotSquare", "operator matrix must be square");
  if (reference_measure.dim() != dim())
    throw Error("DimensionMismatch", "reference measure size differs from operator dimension");
  if (!is_generator) return;
  for (int i = 0; i < entries.outerSize(); ++i) {
    double rs = 0, scale = 0;
    for (SpMat::InnerIterator it(entries, i); it; ++it) {
      if (it.col() != i && it.value() < -1e-12)
        throw Error("NotMetzler", "negative off-diagonal entry in row " + std::to_string(i));
      rs += it.value();
      scale = std::max(scale, std::abs(it.value()));
    }
    if (std::abs(rs) > 1e-10 * std::max(1.0, scale))
      throw Error("RowSumNonzero", "generator row " + std::to_string(i) + " does not sum to 0");
  }
}

OperatorMatrix make_operator(SpMat entries, WeightedMeasure mu, bool is_generator) {
  OperatorMatrix op;
  entries.makeCompressed();
  op.entries = std::move(entries);
  op.reference_measure = std::move(mu);
  op.is_generator = is_generator;
  op.validate();
  return op;
}

OperatorMatrix make_operator(const Mat& dense, WeightedMeasure mu, bool is_generator) {
  return make_operator(SpMat(dense.sparseView(0.0, 0.0)), std::move(mu), is_generator);
}

void GeneratorBuilder::add_rate(int from, int to, double rate) {
  if (rate == 0.0) return;
  if (rate < 0) throw Error("NegativeRate", "jump rates must be nonnegative");
  if (from < 0 || from >= dim_ || to < 0 || to >= dim_)
    throw Error("IndexOutOfRange", "state index outside generator");
  if (from == to) return;
  trips_.emplace_back(from, to, rate);
  diag_[static_cast<std::size_t>(from)] -= rate;
}

SpMat GeneratorBuilder::build() const {
  std::vector<Eigen::Triplet<double>> t = trips_;
  for (int i = 0; i < dim_; ++i) t.emplace_back(i, i, diag_[static_cast<std::size_t>(i)]);
  SpMat A(dim_, dim_);
  A.setFromTriplets(t.begin(), t.end());
  A.makeCompressed();
  return A;
}

void Potential::validate() const {
  if (d < 1) throw Error("InvalidDimension", "potential dimension must be positive");
  if (!value || !gradient) throw Error("InvalidPotential", "value and gradient are required");
  if (a && !(*a >= 0 && *a < 1)) throw Error("InvalidBound", "Lyapunov a must lie in [0,1)");
  if (b && *b < 0) throw Error("InvalidBound", "Lyapunov b must be nonnegative");
  if (K && *K < 0) throw Error("InvalidBound", "K must be nonnegative");
}

Potential Potential::quadratic_form(const Mat& A) {
  if (A.rows() != A.cols() || A.rows() < 1) throw Error("InvalidDimension", "quadratic form must be square");
  Potential U;
  U.d = static_cast<int>(A.rows());
  U.value = [A](const Vec& x) { return 0.5 * x.dot(A * x); };
  U.gradient = [A](const Vec& x) { return Vec(A * x); };
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (A + A.transpose()));
  double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
  U.hess_L = A.diagonal().maxCoeff();
  U.K = std::max(0.0, -lo);
  U.grad_lipschitz = std::max(std::abs(lo), std::abs(hi));
  U.quadratic = A;
  return U;
}

Potential Potential::quadratic_diag(const Vec& diag) { return quadratic_form(Mat(diag.asDiagonal())); }

Potential Potential::zero(int d) { return quadratic_form(Mat::Zero(d, d)); }

double gradient_check(const Potential& U, int n_probes, std::uint64_t seed, double scale) {
  RngStream rng(seed);
  double worst = 0;
  for (int p = 0; p < n_probes; ++p) {
    Vec x(U.d);
    for (int k = 0; k < U.d; ++k) x[k] = scale * rng.gaussian();
    Vec g = U.gradient(x);
    Vec fd(U.d);
    for (int k = 0; k < U.d; ++k) {
      double e = 1e-5 * std::max(1.0, std::abs(x[k]));
      Vec xp = x, xm = x;
      xp[k] += e;
      xm[k] -= e;
      fd[k] = (U.value(xp) - U.value(xm)) / (2 * e);
    }
    double denom = std::max(1e-8, g.norm());
    worst = std::max(worst, (g - fd).norm() / denom);
  }
  return worst;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), eng_(splitmix64(seed ^ splitmix64(stream + 0x5851f42d4c957f2dULL))) {}

std::uint64_t RngStream::next_u64() {
  ++counter_;
  return eng_();
}

double RngStream::uniform() {
  ++counter_;
  return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_open() {
  ++counter_;
  return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::gaussian(double sd) {
  if (!(sd > 0)) throw Error("InvalidParameter", "gaussian sd must be positive");
  ++counter_;
  return sd * normal_(eng_);
}

double RngStream::exponential(double rate) {
  if (!(rate > 0)) throw Error("InvalidParameter", "exponential rate must be positive");
  return -std::log(uniform_open()) / rate;
}

int RngStream::uniform_int(int n) {
  if (n <= 0) throw Error("InvalidParameter", "uniform_int needs n > 0");
  return static_cast<int>(uniform() * n);
}

RngStream RngStream::split(std::uint64_t stream_id) const {
  return RngStream(seed_, splitmix64(stream_ * 0x9e3779b97f4a7c15ULL + stream_id + 1));
}

namespace {
std::atomic<int> g_threads{0};
thread_local bool t_in_parallel = false;
}

void set_thread_count(int n) { g_threads = std::max(0, n); }

int thread_count() {
  int n = g_threads.load();
  if (n > 0) return n;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(int n, const std::function<void(int)>& fn) {
  const int workers = std::min(n, thread_count());
  if (workers <= 1 || t_in_parallel) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex err_mutex;
  auto body = [&]() {
    t_in_parallel = true;
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mutex);
        if (!err) err = std::current_exception();
        next = n;
      }
    }
    t_in_parallel = false;
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace liftlab
