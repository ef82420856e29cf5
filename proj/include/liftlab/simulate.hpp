#pragma once

#include "liftlab/core.hpp"
#include "liftlab/generators.hpp"

#include <array>
#include <limits>

namespace liftlab {

enum class EventKind : std::uint8_t { Flip = 0, Refresh = 1, BoundaryHit = 2, BoundaryLeave = 3, ForwardJump = 4, End = 5 };
const char* event_kind_name(EventKind k);

// Piecewise-linear path. Records hold the state right after each event;
// the initial state is kept separately at t = 0.
struct Trajectory {
  int d = 1;
  double t_end = 0;
  Vec x0, v0;
  std::vector<double> t;
  std::vector<double> x, v;  // flat, d entries per record
  std::vector<EventKind> kind;
  double clamp_lo = -std::numeric_limits<double>::infinity();
  double clamp_hi = std::numeric_limits<double>::infinity();

  // Streaming statistics, filled whether or not records are stored.
  double moment_time = 0;
  Vec int_x;   // int x_k dt
  Mat int_xx;  // int x_k x_j dt
  Vec int_vv;  // int v_k^2 dt
  std::vector<double> pattern_time;  // hypercube: time per sign pattern (d <= 12)
  std::uint64_t n_events = 0;
  std::uint64_t n_proposals = 0, n_accepted = 0;
  double max_accept_ratio = 0;
  // Regular samples when SimOptions::sample_dt > 0.
  double sample_dt = 0;
  std::vector<double> sample_x, sample_v;
  // Flip inter-event times (Zig-Zag / Forward), when requested.
  std::vector<double> flip_gaps;

  std::size_t size() const { return t.size(); }
  Vec x_at_record(std::size_t i) const { return Eigen::Map<const Vec>(&x[i * static_cast<std::size_t>(d)], d); }
  Vec v_at_record(std::size_t i) const { return Eigen::Map<const Vec>(&v[i * static_cast<std::size_t>(d)], d); }
  // State at time t (clamped linear interpolation; velocity right-continuous).
  std::pair<Vec, Vec> state_at(double time) const;
  Vec mean() const { return int_x / moment_time; }
  Mat covariance() const;
};

struct SimOptions {
  bool store_events = true;
  double sample_dt = 0;
  bool record_flip_gaps = false;
  std::optional<Vec> v0;
};

// ---------- run-and-tumble ----------

// Exact velocity-first construction: the relative velocity is a Markov jump
// process on {+2, 0, -2} and the separation follows the clamped linear flow.
Trajectory simulate_rtp(const RtpParams& params, double x0, double v0, double t_end, RngStream& rng,
                        const SimOptions& opts = {});

// Draw (x, v) from the continuum invariant law.
std::pair<double, double> sample_rtp_stationary(const RtpParams& params, RngStream& rng);

// (x(t_j), v(t_j)) along one exact path; times nondecreasing.
void rtp_path_at(const RtpParams& params, double x0, double v0, const std::vector<double>& times, RngStream& rng,
                 std::vector<double>& xs, std::vector<double>& vs);

// Layout: index 3*i + k, i = 0 the atom at 0, i = 1..cells the histogram cells
// between consecutive grid nodes, i = cells + 1 the atom at L; k as in kRtpVelocities.
WeightedMeasure rtp_occupation(const Trajectory& traj, const Grid1D& grid);
WeightedMeasure rtp_exact_occupation(const RtpParams& params, const Grid1D& grid);
double total_variation(const WeightedMeasure& a, const WeightedMeasure& b);

// ---------- Zig-Zag and Forward ----------

enum class VelocityLaw { Gaussian, Hypercube, Coords };
VelocityLaw parse_velocity_law(const std::string& s);
const char* velocity_law_name(VelocityLaw l);
Vec sample_velocity(VelocityLaw law, int d, RngStream& rng);

// Upper bound s -> (a + b s)_+ for a rate along the ray x + v s, valid for s <= horizon.
struct AffineBound {
  double a = 0, b = 0;
  double horizon = std::numeric_limits<double>::infinity();
};

struct RateBound {
  enum class Kind { ExactInversion, QuadraticThinning, Lipschitz, Custom };
  Kind kind = Kind::ExactInversion;
  // Custom: bound for coordinate k (Zig-Zag) or k = -1 (Forward).
  std::function<AffineBound(const Vec& x, const Vec& v, int k)> custom;

  static RateBound exact() { return {Kind::ExactInversion, {}}; }
  static RateBound quadratic_thinning() { return {Kind::QuadraticThinning, {}}; }
  static RateBound lipschitz() { return {Kind::Lipschitz, {}}; }
};

// First s >= 0 with int_0^s (a + b u)_+ du = e; infinity when never reached.
double affine_first_passage(double a, double b, double e);

Trajectory simulate_zigzag(const Potential& U, VelocityLaw law, double gamma, const Vec& x0, double t_end,
                           RngStream& rng, const RateBound& bound = RateBound::exact(), const SimOptions& opts = {});

// New velocity after a Forward event: -R n + (I - n n^T) xi, R ~ Rayleigh(1).
Vec forward_jump_velocity(const Vec& grad, RngStream& rng);

Trajectory simulate_forward(const Potential& U, double gamma, const Vec& x0, double t_end, RngStream& rng,
                            const RateBound& bound = RateBound::exact(), const SimOptions& opts = {});

// Exact draw from N(0, A^{-1}) for a quadratic potential.
Vec sample_gaussian_target(const Potential& U, RngStream& rng);

// ---------- diagnostics ----------

struct Autocorrelation {
  Vec acf;
  double tau_int = 0;
  int cutoff = 0;
};
Autocorrelation autocorrelation(const std::vector<double>& series, int max_lag, double dt = 1.0);

// Samples one replica from a stationary start: f0 = f(X_0), ft[j] = f(X_{t_j}).
using ReplicaSampler =
    std::function<void(RngStream& rng, const std::vector<double>& t_grid, double& f0, std::vector<double>& ft)>;

struct DecayEstimate {
  double nu_sim = 0;
  double slope_se = 0;
  std::vector<double> t, cov, noise;
  int window_lo = 0, window_hi = 0;  // [lo, hi) into t
};

// Replica-average autocovariance and log-linear fit where it exceeds 3x its
// standard error. Replica r uses stream split(r) of seed.
DecayEstimate empirical_decay_rate(const ReplicaSampler& sampler, int n_replicas, const std::vector<double>& t_grid,
                                   std::uint64_t seed);

ReplicaSampler rtp_replica_sampler(const RtpParams& params, std::function<double(double x, double v)> observable);
// Two-state chain flipping at the given rate, observable +-1.
ReplicaSampler two_state_sampler(double rate);

}  // namespace liftlab
