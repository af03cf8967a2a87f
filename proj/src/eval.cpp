#include "aelstm/eval.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "aelstm/error.hpp"
#include "aelstm/uq.hpp"

namespace aelstm {

namespace {

void check_pair(std::span<const double> a, std::span<const double> b, const char* who) {
  if (a.empty()) fail(ErrorKind::input, std::string(who) + ": empty input");
  if (a.size() != b.size())
    fail(ErrorKind::input, std::string(who) + ": length mismatch (" + std::to_string(a.size()) + " vs " +
                               std::to_string(b.size()) + ")");
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

double rmse(std::span<const double> y, std::span<const double> yhat) {
  check_pair(y, yhat, "rmse");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - yhat[i]) * (y[i] - yhat[i]);
  return std::sqrt(s / static_cast<double>(y.size()));
}

double mae(std::span<const double> y, std::span<const double> yhat) {
  check_pair(y, yhat, "mae");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - yhat[i]);
  return s / static_cast<double>(y.size());
}

R2Ev r2_ev(std::span<const double> y, std::span<const double> yhat) {
  check_pair(y, yhat, "r2_ev");
  const double n = static_cast<double>(y.size());
  const double ybar = mean_of(y);
  double ss_tot = 0.0, ss_res = 0.0, res_mean = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_tot += (y[i] - ybar) * (y[i] - ybar);
    ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    res_mean += y[i] - yhat[i];
  }
  if (!(ss_tot > 0.0)) fail(ErrorKind::input, "r2_ev: target has zero variance");
  res_mean /= n;
  double res_var = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - yhat[i] - res_mean;
    res_var += d * d;
  }
  return {1.0 - ss_res / ss_tot, 1.0 - res_var / ss_tot};
}

std::pair<double, double> wilson_interval(std::size_t successes, std::size_t n, double confidence) {
  if (n == 0) fail(ErrorKind::input, "wilson_interval: n must be >= 1");
  if (successes > n) fail(ErrorKind::input, "wilson_interval: successes exceed n");
  if (!(confidence > 0.0 && confidence < 1.0)) fail(ErrorKind::config, "wilson_interval: confidence must lie in (0, 1)");
  const double z = normal_quantile(0.5 + confidence / 2.0);
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  // Clamp so the bounds always bracket p despite rounding at p = 0 or 1.
  return {std::max(0.0, std::min(p, centre - half)), std::min(1.0, std::max(p, centre + half))};
}

CoverageResult coverage_test(std::span<const double> y, std::span<const Interval> intervals, double nominal,
                             double test_confidence) {
  if (intervals.empty()) fail(ErrorKind::input, "coverage_test: no intervals");
  if (y.size() != intervals.size()) fail(ErrorKind::input, "coverage_test: length mismatch");
  if (!(nominal > 0.0 && nominal < 1.0)) fail(ErrorKind::config, "coverage_test: nominal must lie in (0, 1)");
  CoverageResult r;
  r.n = y.size();
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (intervals[i].lo > intervals[i].hi)
      fail(ErrorKind::input, "coverage_test: interval " + std::to_string(i) + " has lo > hi");
    if (y[i] >= intervals[i].lo && y[i] <= intervals[i].hi) ++r.covered;
  }
  r.coverage = static_cast<double>(r.covered) / static_cast<double>(r.n);
  std::tie(r.low, r.high) = wilson_interval(r.covered, r.n, test_confidence);
  r.nominal = nominal;
  r.calibrated = nominal >= r.low && nominal <= r.high;
  return r;
}

double standardized_variance(std::span<const double> y, std::span<const double> mu, std::span<const double> sd) {
  check_pair(y, mu, "standardized_variance");
  if (sd.size() != y.size()) fail(ErrorKind::input, "standardized_variance: length mismatch");
  std::vector<double> z(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(sd[i] > 0.0)) fail(ErrorKind::input, "standardized_variance: non-positive sd at index " + std::to_string(i));
    z[i] = (y[i] - mu[i]) / sd[i];
  }
  const double zbar = mean_of(z);
  double v = 0.0;
  for (double zi : z) v += (zi - zbar) * (zi - zbar);
  return v / static_cast<double>(z.size());
}

double mean_width(std::span<const Interval> intervals) {
  if (intervals.empty()) fail(ErrorKind::input, "mean_width: no intervals");
  double s = 0.0;
  for (const auto& iv : intervals) s += iv.hi - iv.lo;
  return s / static_cast<double>(intervals.size());
}

MetricsReport accuracy_metrics(std::span<const double> y, std::span<const double> yhat) {
  const R2Ev re = r2_ev(y, yhat);
  return {rmse(y, yhat), mae(y, yhat), re.r2, re.ev};
}

CalibrationReport calibration_report(std::span<const double> y, std::span<const double> mu,
                                     std::span<const double> sd, std::span<const Interval> intervals,
                                     double nominal, double test_confidence) {
  const CoverageResult cov = coverage_test(y, intervals, nominal, test_confidence);
  CalibrationReport r;
  r.coverage = cov.coverage;
  r.cov_low = cov.low;
  r.cov_high = cov.high;
  r.nominal = nominal;
  r.calibrated = cov.calibrated;
  r.n = cov.n;
  r.width = mean_width(intervals);
  r.stvar = standardized_variance(y, mu, sd);
  return r;
}

std::string report_text(const MetricsReport& m, const CalibrationReport& c) {
  std::ostringstream os;
  os.precision(6);
  os << "rmse = " << m.rmse << '\n'
     << "mae = " << m.mae << '\n'
     << "r2 = " << m.r2 << '\n'
     << "ev = " << m.ev << '\n'
     << "nominal = " << c.nominal << '\n'
     << "n = " << c.n << '\n'
     << "coverage = " << c.coverage << '\n'
     << "cov_low = " << c.cov_low << '\n'
     << "cov_high = " << c.cov_high << '\n'
     << "width = " << c.width << '\n'
     << "stvar = " << c.stvar << '\n'
     << "verdict = " << (c.calibrated ? "calibrated" : "miscalibrated") << '\n';
  return os.str();
}

std::string report_json(const MetricsReport& m, const CalibrationReport& c) {
  nlohmann::ordered_json j;
  j["rmse"] = m.rmse;
  j["mae"] = m.mae;
  j["r2"] = m.r2;
  j["ev"] = m.ev;
  j["coverage"] = c.coverage;
  j["cov_low"] = c.cov_low;
  j["cov_high"] = c.cov_high;
  j["width"] = c.width;
  j["stvar"] = c.stvar;
  j["nominal"] = c.nominal;
  j["n"] = c.n;
  j["calibrated"] = c.calibrated;
  return j.dump(2);
}

}  // namespace aelstm
