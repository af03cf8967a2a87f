#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace aelstm {

double rmse(std::span<const double> y, std::span<const double> yhat);
double mae(std::span<const double> y, std::span<const double> yhat);

struct R2Ev {
  double r2 = 0.0;
  double ev = 0.0;
};

// r2 = 1 - SS_res/SS_tot, ev = 1 - Var(y - yhat)/Var(y). Constant y is an error.
R2Ev r2_ev(std::span<const double> y, std::span<const double> yhat);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Wilson score interval for k successes out of n at the given two-sided confidence.
std::pair<double, double> wilson_interval(std::size_t successes, std::size_t n, double confidence);

struct CoverageResult {
  double coverage = 0.0;
  double low = 0.0;
  double high = 0.0;
  double nominal = 0.0;
  std::size_t covered = 0;
  std::size_t n = 0;
  bool calibrated = false;  // nominal inside [low, high]
};

CoverageResult coverage_test(std::span<const double> y, std::span<const Interval> intervals, double nominal = 0.9,
                             double test_confidence = 0.95);

// Variance of z_i = (y_i - mu_i) / sd_i.
double standardized_variance(std::span<const double> y, std::span<const double> mu, std::span<const double> sd);

double mean_width(std::span<const Interval> intervals);

struct MetricsReport {
  double rmse = 0.0;
  double mae = 0.0;
  double r2 = 0.0;
  double ev = 0.0;
};

MetricsReport accuracy_metrics(std::span<const double> y, std::span<const double> yhat);

struct CalibrationReport {
  double coverage = 0.0;
  double cov_low = 0.0;
  double cov_high = 0.0;
  double nominal = 0.0;
  double width = 0.0;
  double stvar = 0.0;
  bool calibrated = false;
  std::size_t n = 0;
};

CalibrationReport calibration_report(std::span<const double> y, std::span<const double> mu,
                                     std::span<const double> sd, std::span<const Interval> intervals,
                                     double nominal, double test_confidence = 0.95);

// Flat `key = value` block.
std::string report_text(const MetricsReport& metrics, const CalibrationReport& calibration);
// JSON object with rmse, mae, r2, ev, coverage, cov_low, cov_high, width, stvar
// plus nominal, n and calibrated.
std::string report_json(const MetricsReport& metrics, const CalibrationReport& calibration);

}  // namespace aelstm
