#pragma once

#include "liftlab/core.hpp"
#include "liftlab/lift_check.hpp"
#include "liftlab/simulate.hpp"
#include "liftlab/spectral.hpp"
#include "liftlab/stats.hpp"

#include <json.hpp>

#include <limits>
#include <string>

namespace liftlab {

// ---------- RTP regime sweep ----------

struct RtpScalingOptions {
  std::vector<double> omegas;
  double length_L = 1.0;
  // interior nodes: clamp(ceil(cells_per_unit * omega * L), n_min, n_max)
  int n_min = 100;
  double cells_per_unit = 40.0;
  int n_max = 6400;
  int n_quad = 64;
  int n_eigen = 4;  // lifted collapse eigenvectors in the probe family
  int n_random = 4;
  double small_cut = 0.3, large_cut = 3.0;
  bool simulate = true;
  int n_replicas = 2000;
  std::uint64_t seed = 42;
};

struct RtpScalingRow {
  double omega = 0, length_L = 0, T = 0;
  int n_interior = 0;
  double nu_hat = 0;
  double nu_sim = std::numeric_limits<double>::quiet_NaN();
  double gap_collapse = 0;
  bool upper_bound_ok = false;
  double upper_bound = 0;
  std::string nu_sim_status;  // "ok", "skipped" or an error code
};

struct RtpScalingResult {
  std::vector<RtpScalingRow> rows;
  // log nu_hat against log omega on omega L <= small_cut and omega L >= large_cut
  std::optional<LinearFit> small_fit, large_fit;
};

int rtp_scaling_nodes(const RtpScalingOptions& o, double omega);
RtpScalingRow rtp_scaling_row(const RtpScalingOptions& o, double omega);
RtpScalingResult rtp_scaling_study(const RtpScalingOptions& o);

// ---------- refresh-rate sweeps ----------

enum class GammaProcess { ZigZag1dDiscrete, ZigZagSim, ForwardSim };
GammaProcess parse_gamma_process(const std::string& s);
const char* gamma_process_name(GammaProcess p);

struct GammaStudyOptions {
  GammaProcess process = GammaProcess::ZigZag1dDiscrete;
  double curvature = 1.0;  // U(x) = curvature |x|^2 / 2
  int d = 1;
  std::vector<double> gammas;
  int n_interior = 120;  // discrete case
  int n_quad = 64;
  bool exact_minimizer = true;
  int n_replicas = 1000;  // simulated cases
  int n_times = 60;
  std::uint64_t seed = 42;
};

struct GammaRow {
  double gamma = 0;
  double nu_hat = 0;      // measured (flow ratio or simulation)
  double nu_formula = 0;  // rate formula with universal constant 1
  std::string status = "ok";
};

struct GammaStudyResult {
  std::vector<GammaRow> rows;
  double m_hat = 0;  // collapse gap used in the formula
  double T = 0;
  double C1 = 0;
  double gamma_star = 0, nu_star = 0;
  double optimal_gamma_formula = 0;
  double ratio_left = 0, ratio_right = 0;  // nu at the grid ends over the peak
  double spearman_rho = 0;
  bool argmax_ok = false, extremes_ok = false, spearman_ok = false;
};

GammaStudyResult gamma_study(const GammaStudyOptions& o);

// ---------- closed-form constants ----------

struct ConstantsQuery {
  ProcessId process = ProcessId::Rtp;
  PotentialBounds bounds;
  double m = 1, gamma = 1, T = 1;
  double omega = 1, length_L = 1;  // RTP corollary only
  std::optional<double> measured;
};

nlohmann::json constants_report(const std::vector<ConstantsQuery>& queries);

}  // namespace liftlab
