#pragma once

#include <functional>
#include <vector>

namespace liftlab {

struct KsResult {
  double statistic = 0;
  double p_value = 0;
  std::size_t n = 0;
};

// Survival function of the Kolmogorov distribution, P(K > lambda).
double kolmogorov_q(double lambda);

// One-sample test against a continuous CDF; p-value from the asymptotic
// distribution with the Stephens small-sample correction.
KsResult ks_one_sample(std::vector<double> samples, const std::function<double(double)>& cdf);
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

struct ChiSquareResult {
  double statistic = 0;
  double p_value = 0;
  int dof = 0;
};
ChiSquareResult chi_square_test(const std::vector<double>& observed, const std::vector<double>& expected_prob);

// Average ranks, ties share the mean rank.
std::vector<double> ranks(const std::vector<double>& x);
double spearman(const std::vector<double>& a, const std::vector<double>& b);

struct LinearFit {
  double slope = 0, intercept = 0, slope_se = 0;
  std::size_t n = 0;
};
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);
// Fit of log y against log x.
LinearFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace liftlab
