#include "aelstm/uq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aelstm/error.hpp"

namespace aelstm {

namespace {

// Modified Lentz evaluation of the incomplete-beta continued fraction.
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 200000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  fail(ErrorKind::evaluation, "incomplete beta continued fraction did not converge");
}

// I_x(a, b) given both x and y = 1 - x so callers can supply the accurate one.
double ibeta(double a, double b, double x, double y) {
  if (x <= 0.0) return 0.0;
  if (y <= 0.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log(y);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, y) / b;
}

template <class Cdf>
double invert_cdf(Cdf&& cdf, double p) {
  if (p == 0.5) return 0.0;
  // Search on the side of zero that holds the quantile.
  const bool upper = p > 0.5;
  double bound = 1.0;
  while (upper ? cdf(bound) < p : cdf(-bound) > p) {
    bound *= 2.0;
    if (bound > 1e300) fail(ErrorKind::evaluation, "quantile bracket overflow");
  }
  double lo = upper ? 0.0 : -bound;
  double hi = upper ? bound : 0.0;
  for (int it = 0; it < 2000; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (cdf(mid) < p) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) fail(ErrorKind::domain, "incomplete_beta: a and b must be > 0");
  if (!(x >= 0.0 && x <= 1.0)) fail(ErrorKind::domain, "incomplete_beta: x must lie in [0, 1]");
  return ibeta(a, b, x, 1.0 - x);
}

double student_t_cdf(double t, double nu) {
  if (!(nu > 0.0)) fail(ErrorKind::domain, "student_t_cdf: nu must be > 0");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  if (t == 0.0) return 0.5;
  const double t2 = t * t;
  const double x = nu / (nu + t2);
  const double y = t2 / (nu + t2);
  const double tail = 0.5 * ibeta(0.5 * nu, 0.5, x, y);
  return t < 0.0 ? tail : 1.0 - tail;
}

double student_t_quantile(double p, double nu) {
  if (!(p > 0.0 && p < 1.0)) fail(ErrorKind::domain, "student_t_quantile: p must lie in (0, 1)");
  if (!(nu > 0.0)) fail(ErrorKind::domain, "student_t_quantile: nu must be > 0");
  return invert_cdf([nu](double t) { return student_t_cdf(t, nu); }, p);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) fail(ErrorKind::domain, "normal_quantile: p must lie in (0, 1)");
  return invert_cdf(normal_cdf, p);
}

PredictiveSummary summarize_t(std::span<const HeadOutput> members, double nu, double alpha) {
  if (members.empty()) fail(ErrorKind::contract, "summarize_t: no member outputs");
  if (!(nu > 2.0)) fail(ErrorKind::config, "summarize_t: variance decomposition needs nu > 2");
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorKind::config, "summarize_t: alpha must lie in (0, 1)");
  const double m = static_cast<double>(members.size());
  double mu = 0.0, s2 = 0.0;
  for (const auto& o : members) {
    if (!(o.scale > 0.0)) fail(ErrorKind::contract, "summarize_t: member scale must be > 0");
    mu += o.mu;
    s2 += o.scale * o.scale;
  }
  mu /= m;
  s2 /= m;
  double var = 0.0;
  for (const auto& o : members) var += (o.mu - mu) * (o.mu - mu);
  var /= m;

  PredictiveSummary s;
  s.mu = mu;
  s.mean_sq_scale = s2;
  s.epistemic_var = var;
  s.nu = nu;
  const double t = student_t_quantile(1.0 - alpha / 2.0, nu);
  const double half = t * std::sqrt(s2 + (nu - 2.0) / nu * var);
  s.lo = mu - half;
  s.hi = mu + half;
  s.aleatoric = std::sqrt(nu / (nu - 2.0) * s2);
  s.epistemic = std::sqrt(var);
  s.total_sd = std::sqrt(nu / (nu - 2.0) * s2 + var);
  return s;
}

QuantileSummary summarize_quantile(std::span<const HeadOutput> members) {
  if (members.empty()) fail(ErrorKind::contract, "summarize_quantile: no member outputs");
  const double m = static_cast<double>(members.size());
  QuantileSummary s;
  s.members.reserve(members.size());
  for (const auto& o : members) {
    auto q = o.quantiles;
    std::sort(q.begin(), q.end());
    s.members.push_back(q);
    for (std::size_t k = 0; k < 3; ++k) s.mean_quantiles[k] += q[k];
    s.aleatoric += 0.5 * (q[2] - q[0]);
  }
  for (auto& v : s.mean_quantiles) v /= m;
  s.aleatoric /= m;
  s.median = s.mean_quantiles[1];
  double var = 0.0;
  for (const auto& q : s.members) var += (q[1] - s.median) * (q[1] - s.median);
  var /= m;
  s.epistemic = std::sqrt(var);
  s.lo = s.mean_quantiles[0] - kZ95 * s.epistemic;
  s.hi = s.mean_quantiles[2] + kZ95 * s.epistemic;
  const double band_sd = (s.mean_quantiles[2] - s.mean_quantiles[0]) / (2.0 * kZ90);
  s.total_sd = std::sqrt(band_sd * band_sd + var);
  return s;
}

IntervalPrediction to_interval(const PredictiveSummary& s) {
  return {s.mu, s.lo, s.hi, s.aleatoric, s.epistemic, s.total_sd};
}

IntervalPrediction to_interval(const QuantileSummary& s) {
  return {s.median, s.lo, s.hi, s.aleatoric, s.epistemic, s.total_sd};
}

IntervalPrediction denormalize(const IntervalPrediction& p, double a, double b) {
  if (!(a > 0.0)) fail(ErrorKind::contract, "denormalize: scale must be > 0");
  return {a * p.mu + b, a * p.lo + b, a * p.hi + b, a * p.aleatoric, a * p.epistemic, a * p.total_sd};
}

std::vector<IntervalPrediction> summarize_windows(const std::vector<std::vector<HeadOutput>>& outputs, HeadKind head,
                                                  double nu, double alpha) {
  if (outputs.empty()) fail(ErrorKind::contract, "summarize_windows: no member outputs");
  const std::size_t n = outputs.front().size();
  std::vector<IntervalPrediction> out;
  out.reserve(n);
  std::vector<HeadOutput> column(outputs.size());
  for (std::size_t w = 0; w < n; ++w) {
    for (std::size_t k = 0; k < outputs.size(); ++k) column[k] = outputs[k].at(w);
    out.push_back(head == HeadKind::student_t ? to_interval(summarize_t(column, nu, alpha))
                                              : to_interval(summarize_quantile(column)));
  }
  return out;
}

}  // namespace aelstm
