#include "liftlab/simulate.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>

namespace liftlab {

const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::Flip: return "flip";
    case EventKind::Refresh: return "refresh";
    case EventKind::BoundaryHit: return "boundary-hit";
    case EventKind::BoundaryLeave: return "boundary-leave";
    case EventKind::ForwardJump: return "forward-jump";
    case EventKind::End: return "end";
  }
  return "unknown";
}

std::pair<Vec, Vec> Trajectory::state_at(double time) const {
  if (time < 0 || time > t_end) throw Error("InvalidParameter", "time outside the trajectory");
  auto it = std::upper_bound(t.begin(), t.end(), time);
  Vec xs, vs;
  double t0 = 0;
  if (it == t.begin()) {
    xs = x0;
    vs = v0;
  } else {
    std::size_t i = static_cast<std::size_t>(it - t.begin()) - 1;
    xs = x_at_record(i);
    vs = v_at_record(i);
    t0 = t[i];
  }
  Vec pos = (xs + vs * (time - t0)).cwiseMax(clamp_lo).cwiseMin(clamp_hi);
  return {pos, vs};
}

Mat Trajectory::covariance() const {
  if (!(moment_time > 0)) throw Error("EmptyTrajectory", "no time accumulated");
  Vec m = mean();
  return int_xx / moment_time - m * m.transpose();
}

namespace {

// Shared bookkeeping for linear segments and event records.
class Recorder {
 public:
  Recorder(Trajectory& tr, const SimOptions& o, const Vec& x0, const Vec& v0) : tr_(tr), o_(o) {
    const int d = static_cast<int>(x0.size());
    tr_.d = d;
    tr_.x0 = x0;
    tr_.v0 = v0;
    tr_.int_x = Vec::Zero(d);
    tr_.int_xx = Mat::Zero(d, d);
    tr_.int_vv = Vec::Zero(d);
    if (d <= 12) tr_.pattern_time.assign(std::size_t{1} << d, 0.0);
    tr_.sample_dt = o.sample_dt;
    next_sample_ = 0;
  }

  // Motion x + vm s for s in [0, tau]; v is the velocity label.
  void segment(double t0, const Vec& x, const Vec& vm, const Vec& v, double tau) {
    if (tau <= 0) return;
    const double t2 = 0.5 * tau * tau, t3 = tau * tau * tau / 3.0;
    tr_.moment_time += tau;
    tr_.int_x += tau * x + t2 * vm;
    tr_.int_xx += tau * x * x.transpose() + t2 * (x * vm.transpose() + vm * x.transpose()) + t3 * vm * vm.transpose();
    tr_.int_vv += tau * v.cwiseProduct(v);
    if (!tr_.pattern_time.empty()) {
      std::size_t p = 0;
      for (int k = 0; k < v.size(); ++k)
        if (v[k] > 0) p |= std::size_t{1} << k;
      tr_.pattern_time[p] += tau;
    }
    if (o_.sample_dt > 0) {
      while (next_sample_ < t0 + tau) {
        Vec xs = x + vm * (next_sample_ - t0);
        tr_.sample_x.insert(tr_.sample_x.end(), xs.data(), xs.data() + xs.size());
        tr_.sample_v.insert(tr_.sample_v.end(), v.data(), v.data() + v.size());
        next_sample_ = o_.sample_dt * static_cast<double>(++n_samples_);
      }
    }
  }

  void event(double t, const Vec& x, const Vec& v, EventKind k) {
    ++tr_.n_events;
    if (k == EventKind::Flip || k == EventKind::ForwardJump) {
      if (o_.record_flip_gaps) tr_.flip_gaps.push_back(t - last_flip_);
      last_flip_ = t;
    }
    if (!o_.store_events && k != EventKind::End) return;
    tr_.t.push_back(t);
    tr_.x.insert(tr_.x.end(), x.data(), x.data() + x.size());
    tr_.v.insert(tr_.v.end(), v.data(), v.data() + v.size());
    tr_.kind.push_back(k);
  }

 private:
  Trajectory& tr_;
  const SimOptions& o_;
  double next_sample_ = 0;
  std::uint64_t n_samples_ = 0;
  double last_flip_ = 0;
};

double rtp_velocity_jump(double v, RngStream& rng) {
  if (v != 0.0) return 0.0;
  return rng.uniform() < 0.5 ? 2.0 : -2.0;
}

// Exact RTP path. seg(t0, x, v_motion, v, tau) for each linear piece and
// ev(t, x, v, kind) for each event.
template <class Seg, class Ev>
void rtp_run(const RtpParams& p, double x, double v, double t_end, RngStream& rng, Seg&& seg, Ev&& ev) {
  const double L = p.length_L, rate = 2.0 * p.omega;
  double t = 0;
  auto jammed = [&](double xx, double vv) { return vv == 0.0 || (xx >= L && vv > 0) || (xx <= 0 && vv < 0); };
  while (true) {
    const double tj = t + rng.exponential(rate);
    const double stop = std::min(tj, t_end);
    while (!jammed(x, v)) {
      double th = t + (v > 0 ? (L - x) / v : x / (-v));
      if (th >= stop) break;
      seg(t, x, v, v, th - t);
      x = v > 0 ? L : 0.0;
      t = th;
      ev(t, x, v, EventKind::BoundaryHit);
    }
    const double vm = jammed(x, v) ? 0.0 : v;
    seg(t, x, vm, v, stop - t);
    x = std::clamp(x + vm * (stop - t), 0.0, L);
    t = stop;
    if (tj >= t_end) {
      ev(t_end, x, v, EventKind::End);
      return;
    }
    const bool was_jammed = jammed(x, v);
    v = rtp_velocity_jump(v, rng);
    const bool at_wall = (x <= 0 || x >= L);
    ev(t, x, v, (at_wall && was_jammed && !jammed(x, v)) ? EventKind::BoundaryLeave : EventKind::Flip);
  }
}

void check_rtp_start(const RtpParams& params, double x0, double v0, double t_end) {
  params.validate();
  if (!(x0 >= 0 && x0 <= params.length_L)) throw Error("InvalidInitialState", "x0 must lie in [0, L]");
  if (v0 != 2.0 && v0 != 0.0 && v0 != -2.0) throw Error("InvalidInitialState", "v0 must be one of +2, 0, -2");
  if (!(t_end > 0)) throw Error("InvalidParameter", "t_end must be positive");
}

int velocity_index(double v) { return v > 0 ? 0 : (v == 0 ? 1 : 2); }

}  // namespace

Trajectory simulate_rtp(const RtpParams& params, double x0, double v0, double t_end, RngStream& rng,
                        const SimOptions& opts) {
  check_rtp_start(params, x0, v0, t_end);
  Trajectory tr;
  tr.t_end = t_end;
  tr.clamp_lo = 0;
  tr.clamp_hi = params.length_L;
  Vec X(1), V(1), VM(1);
  X[0] = x0;
  V[0] = v0;
  Recorder rec(tr, opts, X, V);
  rtp_run(
      params, x0, v0, t_end, rng,
      [&](double t0, double x, double vm, double v, double tau) {
        X[0] = x;
        VM[0] = vm;
        V[0] = v;
        rec.segment(t0, X, VM, V, tau);
      },
      [&](double t, double x, double v, EventKind k) {
        X[0] = x;
        V[0] = v;
        rec.event(t, X, V, k);
      });
  return tr;
}

void rtp_path_at(const RtpParams& params, double x0, double v0, const std::vector<double>& times, RngStream& rng,
                 std::vector<double>& xs, std::vector<double>& vs) {
  if (times.empty()) throw Error("InvalidParameter", "empty time grid");
  if (!std::is_sorted(times.begin(), times.end()) || times.front() < 0)
    throw Error("InvalidParameter", "times must be nondecreasing and nonnegative");
  const double t_end = std::max(times.back(), 1e-300);
  check_rtp_start(params, x0, v0, t_end);
  xs.assign(times.size(), 0.0);
  vs.assign(times.size(), 0.0);
  std::size_t j = 0;
  auto take = [&](double t0, double x, double vm, double v, double tau) {
    while (j < times.size() && times[j] < t0 + tau) {
      xs[j] = x + vm * (times[j] - t0);
      vs[j] = v;
      ++j;
    }
  };
  rtp_run(params, x0, v0, t_end, rng, take, [&](double t, double x, double v, EventKind k) {
    if (k == EventKind::End) {
      while (j < times.size()) {
        xs[j] = x;
        vs[j] = v;
        ++j;
      }
    }
  });
}

std::pair<double, double> sample_rtp_stationary(const RtpParams& params, RngStream& rng) {
  params.validate();
  const double om = params.omega, L = params.length_L, Z = 2.0 + om * L;
  const double atom = 0.5 / Z;
  double u = rng.uniform();
  // atoms (0, 0), (0, -2), (L, +2), (L, 0)
  const std::array<std::pair<double, double>, 4> atoms{{{0.0, 0.0}, {0.0, -2.0}, {L, 2.0}, {L, 0.0}}};
  for (const auto& a : atoms) {
    if (u < atom) return a;
    u -= atom;
  }
  // interior: velocity law (1/4, 1/2, 1/4), uniform position
  const double interior = om * L / Z;
  double r = std::min(u / interior, std::nextafter(1.0, 0.0));
  double x = rng.uniform() * L;
  double v = r < 0.25 ? 2.0 : (r < 0.75 ? 0.0 : -2.0);
  return {x, v};
}

WeightedMeasure rtp_occupation(const Trajectory& traj, const Grid1D& grid) {
  if (traj.t.empty() || !(traj.t_end > 0)) throw Error("EmptyTrajectory", "trajectory has no records");
  if (traj.d != 1) throw Error("DimensionMismatch", "RTP occupation needs a 1D trajectory");
  const int cells = grid.size() - 1;
  const double L = grid.length_L, h = grid.h, x_lo = grid.origin;
  Vec w = Vec::Zero(3 * (cells + 2));
  std::vector<std::uint8_t> atom(static_cast<std::size_t>(w.size()), 0);
  for (int k = 0; k < 3; ++k) {
    atom[static_cast<std::size_t>(k)] = 1;
    atom[static_cast<std::size_t>(3 * (cells + 1) + k)] = 1;
  }
  double t_prev = 0, x = traj.x0[0], v = traj.v0[0];
  const double hi = x_lo + L;
  auto add = [&](double t_next) {
    double tau = t_next - t_prev;
    if (tau <= 0) return;
    int k = velocity_index(v);
    bool stuck = (x <= x_lo && v <= 0) || (x >= hi && v >= 0);
    if (stuck && (x <= x_lo || x >= hi)) {
      w[x <= x_lo ? k : 3 * (cells + 1) + k] += tau;
      return;
    }
    if (v == 0) {
      int c = std::clamp(static_cast<int>((x - x_lo) / h), 0, cells - 1);
      w[3 * (c + 1) + k] += tau;
      return;
    }
    double a = x, b = x + v * tau;
    double lo = std::min(a, b), up = std::max(a, b);
    int c0 = std::clamp(static_cast<int>((lo - x_lo) / h), 0, cells - 1);
    int c1 = std::clamp(static_cast<int>((up - x_lo) / h), 0, cells - 1);
    for (int c = c0; c <= c1; ++c) {
      double e0 = x_lo + c * h, e1 = (c == cells - 1) ? hi : x_lo + (c + 1) * h;
      double ov = std::min(up, e1) - std::max(lo, e0);
      if (ov > 0) w[3 * (c + 1) + k] += ov / std::abs(v);
    }
  };
  for (std::size_t i = 0; i < traj.t.size(); ++i) {
    add(traj.t[i]);
    t_prev = traj.t[i];
    x = traj.x[i];
    v = traj.v[i];
  }
  w /= traj.t_end;
  return make_measure(w, atom, true);
}

WeightedMeasure rtp_exact_occupation(const RtpParams& params, const Grid1D& grid) {
  params.validate();
  const int cells = grid.size() - 1;
  const double om = params.omega, L = params.length_L, Z = 2.0 + om * L;
  Vec w = Vec::Zero(3 * (cells + 2));
  std::vector<std::uint8_t> atom(static_cast<std::size_t>(w.size()), 0);
  w[1] = w[2] = 0.5 / Z;
  w[3 * (cells + 1) + 0] = w[3 * (cells + 1) + 1] = 0.5 / Z;
  for (int k = 0; k < 3; ++k) {
    atom[static_cast<std::size_t>(k)] = 1;
    atom[static_cast<std::size_t>(3 * (cells + 1) + k)] = 1;
  }
  const std::array<double, 3> kappa{0.25, 0.5, 0.25};
  for (int c = 0; c < cells; ++c)
    for (int k = 0; k < 3; ++k) w[3 * (c + 1) + k] = om * kappa[static_cast<std::size_t>(k)] / Z * grid.h;
  return make_measure(w, atom, true);
}

double total_variation(const WeightedMeasure& a, const WeightedMeasure& b) {
  if (a.dim() != b.dim()) throw Error("DimensionMismatch", "measures differ in size");
  return 0.5 * (a.weights - b.weights).cwiseAbs().sum();
}

VelocityLaw parse_velocity_law(const std::string& s) {
  if (s == "gaussian") return VelocityLaw::Gaussian;
  if (s == "hypercube") return VelocityLaw::Hypercube;
  if (s == "coords") return VelocityLaw::Coords;
  throw Error("InvalidLaw", "unknown velocity law '" + s + "'");
}

const char* velocity_law_name(VelocityLaw l) {
  switch (l) {
    case VelocityLaw::Gaussian: return "gaussian";
    case VelocityLaw::Hypercube: return "hypercube";
    case VelocityLaw::Coords: return "coords";
  }
  return "unknown";
}

Vec sample_velocity(VelocityLaw law, int d, RngStream& rng) {
  Vec v = Vec::Zero(d);
  switch (law) {
    case VelocityLaw::Gaussian:
      for (int k = 0; k < d; ++k) v[k] = rng.gaussian();
      break;
    case VelocityLaw::Hypercube:
      for (int k = 0; k < d; ++k) v[k] = rng.uniform() < 0.5 ? 1.0 : -1.0;
      break;
    case VelocityLaw::Coords: {
      int i = rng.uniform_int(2 * d);
      v[i / 2] = (i % 2 == 0 ? 1.0 : -1.0) * std::sqrt(static_cast<double>(d));
      break;
    }
  }
  return v;
}

double affine_first_passage(double a, double b, double e) {
  const double inf = std::numeric_limits<double>::infinity();
  if (!(e >= 0)) throw Error("InvalidParameter", "target must be nonnegative");
  if (e == 0) return a > 0 || b > 0 ? 0.0 : inf;
  if (b == 0) return a > 0 ? e / a : inf;
  if (b > 0) {
    if (a >= 0) return 2.0 * e / (a + std::sqrt(a * a + 2.0 * b * e));
    return -a / b + std::sqrt(2.0 * e / b);
  }
  // b < 0: the rate dies out at s = a/|b| after mass a^2/(2|b|)
  if (a <= 0) return inf;
  const double disc = a * a + 2.0 * b * e;
  if (disc < 0) return inf;
  return 2.0 * e / (a + std::sqrt(disc));
}

namespace {

void check_start(const Potential& U, const Vec& x0, double t_end) {
  if (x0.size() != U.d) throw Error("DimensionMismatch", "x0 does not match the potential dimension");
  if (!(t_end > 0)) throw Error("InvalidParameter", "t_end must be positive");
}

const Mat& need_quadratic(const Potential& U) {
  if (!U.quadratic) throw Error("InvalidParameter", "this rate bound needs a quadratic potential");
  return *U.quadratic;
}

double need_lipschitz(const Potential& U) {
  if (!U.grad_lipschitz) throw Error("MissingBound", "Lipschitz rate bound needs grad_lipschitz");
  return *U.grad_lipschitz;
}

Vec gradient(const Potential& U, const Vec& x) {
  if (U.quadratic) return *U.quadratic * x;
  return U.gradient(x);
}

constexpr double kBoundTol = 1e-9;

}  // namespace

Trajectory simulate_zigzag(const Potential& U, VelocityLaw law, double gamma, const Vec& x0, double t_end,
                           RngStream& rng, const RateBound& bound, const SimOptions& opts) {
  check_start(U, x0, t_end);
  if (!(gamma >= 0)) throw Error("InvalidParameter", "gamma must be nonnegative");
  const int d = U.d;
  Vec x = x0;
  Vec v = opts.v0 ? *opts.v0 : sample_velocity(law, d, rng);
  if (v.size() != d) throw Error("DimensionMismatch", "v0 does not match the dimension");
  Trajectory tr;
  tr.t_end = t_end;
  Recorder rec(tr, opts, x, v);
  const Mat* A = (bound.kind == RateBound::Kind::ExactInversion || bound.kind == RateBound::Kind::QuadraticThinning)
                     ? &need_quadratic(U)
                     : nullptr;
  const double lip = bound.kind == RateBound::Kind::Lipschitz ? need_lipschitz(U) : 0.0;
  if (bound.kind == RateBound::Kind::Custom && !bound.custom) throw Error("InvalidParameter", "custom bound is empty");
  double t = 0;
  std::vector<AffineBound> bnd(static_cast<std::size_t>(d));
  while (true) {
    Vec g, Av;
    if (A) {
      g = *A * x;
      Av = *A * v;
    } else if (bound.kind == RateBound::Kind::Lipschitz) {
      g = gradient(U, x);
    }
    double best = t_end - t;
    int which = -2;  // -2 end, -1 refresh, k flip proposal, d horizon
    const double vn = v.norm();
    for (int k = 0; k < d; ++k) {
      AffineBound& B = bnd[static_cast<std::size_t>(k)];
      if (v[k] == 0) continue;
      switch (bound.kind) {
        case RateBound::Kind::ExactInversion:
        case RateBound::Kind::QuadraticThinning:
          B = {v[k] * g[k], v[k] * Av[k], std::numeric_limits<double>::infinity()};
          break;
        case RateBound::Kind::Lipschitz:
          B = {std::max(0.0, v[k] * g[k]), std::abs(v[k]) * lip * vn, std::numeric_limits<double>::infinity()};
          break;
        case RateBound::Kind::Custom:
          B = bound.custom(x, v, k);
          break;
      }
      double s = affine_first_passage(B.a, B.b, rng.exponential(1.0));
      if (s > B.horizon) {
        if (B.horizon < best) {
          best = B.horizon;
          which = d;
        }
      } else if (s < best) {
        best = s;
        which = k;
      }
    }
    if (gamma > 0) {
      double s = rng.exponential(gamma);
      if (s < best) {
        best = s;
        which = -1;
      }
    }
    rec.segment(t, x, v, v, best);
    x += v * best;
    t += best;
    if (which == -2) {
      t = t_end;
      rec.event(t, x, v, EventKind::End);
      break;
    }
    if (which == -1) {
      v = sample_velocity(law, d, rng);
      rec.event(t, x, v, EventKind::Refresh);
      continue;
    }
    if (which == d) continue;
    const AffineBound& B = bnd[static_cast<std::size_t>(which)];
    ++tr.n_proposals;
    bool accept = true;
    if (bound.kind != RateBound::Kind::ExactInversion) {
      double rate = std::max(0.0, v[which] * gradient(U, x)[which]);
      double cap = std::max(0.0, B.a + B.b * best);
      double ratio = cap > 0 ? rate / cap : (rate > 0 ? std::numeric_limits<double>::infinity() : 0.0);
      if (ratio > 1.0 + kBoundTol) throw Error("BoundViolation", "observed flip rate exceeds the declared bound");
      tr.max_accept_ratio = std::max(tr.max_accept_ratio, ratio);
      accept = rng.uniform() * cap < rate;
    } else {
      tr.max_accept_ratio = 1.0;
    }
    if (accept) {
      ++tr.n_accepted;
      v[which] = -v[which];
      rec.event(t, x, v, EventKind::Flip);
    }
  }
  return tr;
}

Vec forward_jump_velocity(const Vec& grad, RngStream& rng) {
  const double gn = grad.norm();
  if (!(gn > 0)) throw Error("ZeroGradient", "jump direction undefined where the gradient vanishes");
  Vec n = grad / gn;
  const int d = static_cast<int>(grad.size());
  Vec xi(d);
  for (int k = 0; k < d; ++k) xi[k] = rng.gaussian();
  double R = std::sqrt(-2.0 * std::log(rng.uniform_open()));
  return xi - n.dot(xi) * n - R * n;
}

Trajectory simulate_forward(const Potential& U, double gamma, const Vec& x0, double t_end, RngStream& rng,
                            const RateBound& bound, const SimOptions& opts) {
  check_start(U, x0, t_end);
  if (!(gamma >= 0)) throw Error("InvalidParameter", "gamma must be nonnegative");
  const int d = U.d;
  Vec x = x0;
  Vec w = opts.v0 ? *opts.v0 : sample_velocity(VelocityLaw::Gaussian, d, rng);
  if (w.size() != d) throw Error("DimensionMismatch", "v0 does not match the dimension");
  Trajectory tr;
  tr.t_end = t_end;
  Recorder rec(tr, opts, x, w);
  const Mat* A = (bound.kind == RateBound::Kind::ExactInversion || bound.kind == RateBound::Kind::QuadraticThinning)
                     ? &need_quadratic(U)
                     : nullptr;
  const double lip = bound.kind == RateBound::Kind::Lipschitz ? need_lipschitz(U) : 0.0;
  if (bound.kind == RateBound::Kind::Custom && !bound.custom) throw Error("InvalidParameter", "custom bound is empty");
  double t = 0;
  while (true) {
    AffineBound B;
    switch (bound.kind) {
      case RateBound::Kind::ExactInversion:
      case RateBound::Kind::QuadraticThinning: {
        Vec Aw = *A * w;
        B = {Aw.dot(x), Aw.dot(w), std::numeric_limits<double>::infinity()};
        break;
      }
      case RateBound::Kind::Lipschitz:
        B = {std::max(0.0, w.dot(gradient(U, x))), lip * w.squaredNorm(), std::numeric_limits<double>::infinity()};
        break;
      case RateBound::Kind::Custom:
        B = bound.custom(x, w, -1);
        break;
    }
    double best = t_end - t;
    int which = -2;  // -2 end, -1 refresh, 0 proposal, 1 horizon
    double s = affine_first_passage(B.a, B.b, rng.exponential(1.0));
    if (s > B.horizon) {
      if (B.horizon < best) {
        best = B.horizon;
        which = 1;
      }
    } else if (s < best) {
      best = s;
      which = 0;
    }
    if (gamma > 0) {
      double r = rng.exponential(gamma);
      if (r < best) {
        best = r;
        which = -1;
      }
    }
    rec.segment(t, x, w, w, best);
    x += w * best;
    t += best;
    if (which == -2) {
      t = t_end;
      rec.event(t, x, w, EventKind::End);
      break;
    }
    if (which == -1) {
      w = sample_velocity(VelocityLaw::Gaussian, d, rng);
      rec.event(t, x, w, EventKind::Refresh);
      continue;
    }
    if (which == 1) continue;
    ++tr.n_proposals;
    Vec g = gradient(U, x);
    bool accept = true;
    if (bound.kind != RateBound::Kind::ExactInversion) {
      double rate = std::max(0.0, w.dot(g));
      double cap = std::max(0.0, B.a + B.b * best);
      double ratio = cap > 0 ? rate / cap : (rate > 0 ? std::numeric_limits<double>::infinity() : 0.0);
      if (ratio > 1.0 + kBoundTol) throw Error("BoundViolation", "observed event rate exceeds the declared bound");
      tr.max_accept_ratio = std::max(tr.max_accept_ratio, ratio);
      accept = rng.uniform() * cap < rate;
    } else {
      tr.max_accept_ratio = 1.0;
    }
    if (accept) {
      ++tr.n_accepted;
      w = forward_jump_velocity(g, rng);
      rec.event(t, x, w, EventKind::ForwardJump);
    }
  }
  return tr;
}

Vec sample_gaussian_target(const Potential& U, RngStream& rng) {
  const Mat& A = need_quadratic(U);
  Eigen::LLT<Mat> llt(A);
  if (llt.info() != Eigen::Success) throw Error("InvalidParameter", "quadratic form must be positive definite");
  Vec z(A.rows());
  for (int k = 0; k < z.size(); ++k) z[k] = rng.gaussian();
  // A = L L^T, x = L^{-T} z has covariance A^{-1}
  return llt.matrixU().solve(z);
}

Autocorrelation autocorrelation(const std::vector<double>& series, int max_lag, double dt) {
  const std::size_t n = series.size();
  if (max_lag < 1 || n < 10 * static_cast<std::size_t>(max_lag))
    throw Error("SeriesTooShort", "series must be at least 10 * max_lag long");
  double m = 0;
  for (double s : series) m += s;
  m /= static_cast<double>(n);
  std::size_t nfft = 1;
  while (nfft < 2 * n) nfft <<= 1;
  std::vector<double> buf(nfft, 0.0);
  double var = 0;
  for (std::size_t i = 0; i < n; ++i) {
    buf[i] = series[i] - m;
    var += buf[i] * buf[i];
  }
  var /= static_cast<double>(n);
  if (!(var > 0)) throw Error("ZeroVariance", "constant series has no autocorrelation");
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, buf);
  for (auto& c : spec) c = std::norm(c);
  std::vector<double> acov;
  fft.inv(acov, spec);
  Autocorrelation out;
  out.acf.resize(max_lag + 1);
  for (int k = 0; k <= max_lag; ++k) out.acf[k] = acov[static_cast<std::size_t>(k)] / static_cast<double>(n) / var;
  // Geyer initial positive sequence
  double sum = 0;
  int j = 0;
  for (; 2 * j + 1 <= max_lag; ++j) {
    double G = out.acf[2 * j] + out.acf[2 * j + 1];
    if (G <= 0) break;
    sum += G;
  }
  out.cutoff = 2 * j;
  out.tau_int = (-1.0 + 2.0 * sum) * dt;
  return out;
}

DecayEstimate empirical_decay_rate(const ReplicaSampler& sampler, int n_replicas, const std::vector<double>& t_grid,
                                   std::uint64_t seed) {
  if (n_replicas < 2) throw Error("InvalidParameter", "need at least two replicas");
  if (t_grid.empty()) throw Error("InvalidParameter", "empty time grid");
  const std::size_t nt = t_grid.size();
  std::vector<double> f0(static_cast<std::size_t>(n_replicas));
  std::vector<std::vector<double>> ft(static_cast<std::size_t>(n_replicas));
  RngStream base(seed);
  parallel_for(n_replicas, [&](int r) {
    RngStream rng = base.split(static_cast<std::uint64_t>(r));
    sampler(rng, t_grid, f0[static_cast<std::size_t>(r)], ft[static_cast<std::size_t>(r)]);
    if (ft[static_cast<std::size_t>(r)].size() != nt) throw Error("DimensionMismatch", "sampler returned wrong size");
  });
  DecayEstimate est;
  est.t = t_grid;
  est.cov.assign(nt, 0.0);
  est.noise.assign(nt, 0.0);
  const double N = n_replicas;
  for (std::size_t j = 0; j < nt; ++j) {
    double s = 0, s2 = 0;
    for (int r = 0; r < n_replicas; ++r) {
      double p = f0[static_cast<std::size_t>(r)] * ft[static_cast<std::size_t>(r)][j];
      s += p;
      s2 += p * p;
    }
    double mean = s / N;
    double var = std::max(0.0, (s2 - N * mean * mean) / (N - 1));
    est.cov[j] = mean;
    est.noise[j] = std::sqrt(var / N);
  }
  std::size_t lo = 0;
  while (lo < nt && !(est.cov[lo] > 3 * est.noise[lo])) ++lo;
  std::size_t hi = lo;
  while (hi < nt && est.cov[hi] > 3 * est.noise[hi]) ++hi;
  if (hi - lo < 2) throw Error("NoiseFloor", "autocovariance is below the noise floor everywhere");
  est.window_lo = static_cast<int>(lo);
  est.window_hi = static_cast<int>(hi);
  const double k = static_cast<double>(hi - lo);
  double mx = 0, my = 0;
  for (std::size_t j = lo; j < hi; ++j) {
    mx += t_grid[j];
    my += std::log(est.cov[j]);
  }
  mx /= k;
  my /= k;
  double sxx = 0, sxy = 0;
  for (std::size_t j = lo; j < hi; ++j) {
    sxx += (t_grid[j] - mx) * (t_grid[j] - mx);
    sxy += (t_grid[j] - mx) * (std::log(est.cov[j]) - my);
  }
  if (!(sxx > 0)) throw Error("NoiseFloor", "window has a single time point");
  double slope = sxy / sxx;
  double rss = 0;
  for (std::size_t j = lo; j < hi; ++j) {
    double r = std::log(est.cov[j]) - (my + slope * (t_grid[j] - mx));
    rss += r * r;
  }
  est.nu_sim = -slope;
  est.slope_se = k > 2 ? std::sqrt(rss / (k - 2) / sxx) : 0.0;
  return est;
}

ReplicaSampler rtp_replica_sampler(const RtpParams& params, std::function<double(double, double)> observable) {
  params.validate();
  return [params, observable](RngStream& rng, const std::vector<double>& times, double& f0, std::vector<double>& ft) {
    auto [x0, v0] = sample_rtp_stationary(params, rng);
    std::vector<double> xs, vs;
    rtp_path_at(params, x0, v0, times, rng, xs, vs);
    f0 = observable(x0, v0);
    ft.resize(times.size());
    for (std::size_t j = 0; j < times.size(); ++j) ft[j] = observable(xs[j], vs[j]);
  };
}

ReplicaSampler two_state_sampler(double rate) {
  if (!(rate > 0)) throw Error("InvalidParameter", "rate must be positive");
  return [rate](RngStream& rng, const std::vector<double>& times, double& f0, std::vector<double>& ft) {
    double s = rng.uniform() < 0.5 ? 1.0 : -1.0;
    f0 = s;
    ft.resize(times.size());
    double t = 0, next = rng.exponential(rate);
    for (std::size_t j = 0; j < times.size(); ++j) {
      while (next <= times[j]) {
        s = -s;
        t = next;
        next = t + rng.exponential(rate);
      }
      ft[j] = s;
    }
  };
}

}  // namespace liftlab
