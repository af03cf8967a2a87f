#pragma once

#include <array>
#include <span>
#include <vector>

#include "aelstm/lstm.hpp"

namespace aelstm {

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

double student_t_cdf(double t, double nu);
// Inverse CDF by bisection on student_t_cdf; |cdf(q) - p| < 1e-10.
double student_t_quantile(double p, double nu);

double normal_cdf(double x);
double normal_quantile(double p);

// Standard-normal 0.95 quantile used to widen quantile-head bands by the
// epistemic spread, and the 0.9 quantile that maps a (q10, q90) band to a
// normal-equivalent standard deviation.
inline constexpr double kZ95 = 1.6448536269514722;
inline constexpr double kZ90 = 1.2815515655446004;

struct PredictiveSummary {
  double mu = 0.0;           // mean of member locations
  double mean_sq_scale = 0;  // mean of member s^2
  double epistemic_var = 0;  // population variance of member locations
  double nu = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double aleatoric = 0.0;  // sqrt(nu/(nu-2)) * sqrt(mean_sq_scale)
  double epistemic = 0.0;  // sqrt(epistemic_var)
  // sqrt(nu/(nu-2) * mean_sq_scale + epistemic_var), used for standardized residuals
  double total_sd = 0.0;

  double width() const noexcept { return hi - lo; }
};

// Student-t heads. Half-width t_{1-alpha/2,nu} * sqrt(s2 + (nu-2)/nu * var_epi).
PredictiveSummary summarize_t(std::span<const HeadOutput> members, double nu, double alpha);

struct QuantileSummary {
  // Per member (q10, q50, q90) after monotone rearrangement.
  std::vector<std::array<double, 3>> members;
  std::array<double, 3> mean_quantiles{};
  double median = 0.0;  // mean of member medians, the point prediction
  double epistemic = 0.0;  // population std of member medians
  double lo = 0.0;
  double hi = 0.0;
  double aleatoric = 0.0;  // mean over members of (q90 - q10) / 2
  // sqrt(((q90 - q10) / (2 z_0.9))^2 + epistemic^2) with member-averaged quantiles
  double total_sd = 0.0;

  double width() const noexcept { return hi - lo; }
};

QuantileSummary summarize_quantile(std::span<const HeadOutput> members);

// Output of either head in a common shape, denormalized or not.
struct IntervalPrediction {
  double mu = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double aleatoric = 0.0;
  double epistemic = 0.0;
  double total_sd = 0.0;
};

IntervalPrediction to_interval(const PredictiveSummary& s);
IntervalPrediction to_interval(const QuantileSummary& s);

// Maps a prediction in normalized target units through y -> a*y + b (a > 0).
IntervalPrediction denormalize(const IntervalPrediction& p, double a, double b);

// outputs[k][w] from predict_members -> one interval per window.
std::vector<IntervalPrediction> summarize_windows(const std::vector<std::vector<HeadOutput>>& outputs, HeadKind head,
                                                  double nu, double alpha);

}  // namespace aelstm
