#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace liftlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Every library error carries a short machine-readable code ("TooFewNodes", ...).
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(code + ": " + what), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

struct Grid1D {
  double length_L = 0;
  int n_interior = 0;
  double h = 0;
  double origin = 0;  // left end; nodes run over [origin, origin + L]
  std::vector<double> nodes;

  int size() const { return static_cast<int>(nodes.size()); }
  double x(int i) const { return nodes[static_cast<std::size_t>(i)]; }
};

Grid1D make_grid(double length_L, int n_interior, double origin = 0.0);

// One weight per state. Atoms carry exact masses, density states carry
// density value times the quadrature weight h.
struct WeightedMeasure {
  Vec weights;
  std::vector<std::uint8_t> is_atom;
  bool probability = false;

  int dim() const { return static_cast<int>(weights.size()); }
  double total_mass() const { return weights.sum(); }
  double atom_mass() const;
  double density_mass() const;
  void validate() const;
};

WeightedMeasure make_measure(Vec weights, std::vector<std::uint8_t> is_atom, bool probability);

double inner_product(const Vec& f, const Vec& g, const WeightedMeasure& mu);
double norm(const Vec& f, const WeightedMeasure& mu);
double mean(const Vec& f, const WeightedMeasure& mu);

// Generators and other linear operators. Stored sparse: the generators here
// are banded and the semigroup action only needs matrix-vector products.
struct OperatorMatrix {
  SpMat entries;
  WeightedMeasure reference_measure;
  bool is_generator = false;

  int dim() const { return static_cast<int>(entries.rows()); }
  Mat dense() const { return Mat(entries); }
  Vec apply(const Vec& f) const { return entries * f; }
  // Largest total exit rate, max_i |A_ii|.
  double max_exit_rate() const;
  void validate() const;
};

OperatorMatrix make_operator(SpMat entries, WeightedMeasure mu, bool is_generator);
OperatorMatrix make_operator(const Mat& dense, WeightedMeasure mu, bool is_generator);

// Accumulates off-diagonal jump rates and fills the diagonal so rows sum to zero.
class GeneratorBuilder {
 public:
  explicit GeneratorBuilder(int dim) : dim_(dim), diag_(static_cast<std::size_t>(dim), 0.0) {}
  void add_rate(int from, int to, double rate);
  SpMat build() const;

 private:
  int dim_;
  std::vector<Eigen::Triplet<double>> trips_;
  std::vector<double> diag_;
};

struct Potential {
  int d = 1;
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
  std::optional<double> hess_L;       // upper bound on each diagonal Hessian entry
  std::optional<double> K;            // curvature lower bound: Hess U >= -K
  std::optional<double> a, b;         // Lyapunov pair
  std::optional<double> grad_lipschitz;
  // Set for U(x) = 0.5 * x^T A x; enables exact event-time inversion.
  std::optional<Mat> quadratic;

  void validate() const;
  static Potential quadratic_form(const Mat& A);
  static Potential quadratic_diag(const Vec& diag);
  static Potential zero(int d);
};

// Maximum relative error between the gradient and central finite differences
// of the value at random probe points.
double gradient_check(const Potential& U, int n_probes, std::uint64_t seed, double scale = 1.0);

// mt19937_64 behind a small interface. Streams are split by hashing
// (seed, stream id) through splitmix64 so replica streams are independent of
// how many replicas there are.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 42, std::uint64_t stream = 0);

  double uniform();                 // [0, 1)
  double uniform_open();            // (0, 1)
  double gaussian(double sd = 1.0);
  double exponential(double rate);
  std::uint64_t next_u64();
  int uniform_int(int n);           // {0, ..., n-1}
  RngStream split(std::uint64_t stream_id) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }
  static const char* algorithm() { return "mt19937_64+splitmix64"; }

 private:
  std::uint64_t seed_, stream_, counter_ = 0;
  std::mt19937_64 eng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x);

// Worker count for parallel maps (0 = hardware concurrency).
void set_thread_count(int n);
int thread_count();
// Runs fn(i) for i in [0, n) on thread_count() workers. The first exception is rethrown.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace liftlab
