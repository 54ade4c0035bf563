#include "vdscan/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/distributions/normal.hpp>

#include "vdscan/error.hpp"

namespace vdscan {

ConfusionMatrix confusion(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) {
    throw Error(ErrorKind::LengthMismatch, "predictions and truth differ in length");
  }
  if (predicted.empty()) throw Error(ErrorKind::EmptyInput, "confusion matrix needs at least one sample");
  ConfusionMatrix m;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] != 0;
    const bool t = truth[i] != 0;
    if (p && t) ++m.tp;
    else if (p && !t) ++m.fp;
    else if (!p && t) ++m.fn;
    else ++m.tn;
  }
  return m;
}

double accuracy(const ConfusionMatrix& m) {
  if (m.total() == 0) throw Error(ErrorKind::EmptyInput, "accuracy of an empty confusion matrix");
  return static_cast<double>(m.tp + m.tn) / static_cast<double>(m.total());
}

double balanced_accuracy(const ConfusionMatrix& m) {
  if (m.tp + m.fn == 0 || m.tn + m.fp == 0) {
    throw Error(ErrorKind::UndefinedClassRecall, "balanced accuracy needs both classes in the truth");
  }
  const double sensitivity = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
  const double specificity = static_cast<double>(m.tn) / static_cast<double>(m.tn + m.fp);
  return (sensitivity + specificity) / 2.0;
}

double quantile(std::span<const double> values, double q) {
  if (values.empty()) throw Error(ErrorKind::EmptyInput, "quantile of an empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

Quartiles quartiles(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::EmptyInput, "quartiles of an empty sample");
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidSpec, "quartiles need finite values");
  }
  return {quantile(values, 0.25), quantile(values, 0.5), quantile(values, 0.75)};
}

std::optional<double> prevalence_ratio(double group_prevalence, double baseline_prevalence) {
  if (baseline_prevalence <= 0.0) return std::nullopt;
  return group_prevalence / baseline_prevalence;
}

double normal_quantile_two_sided(double confidence) {
  const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(standard, 0.5 + confidence / 2.0);
}

Interval wilson_interval(std::size_t successes, std::size_t n, double confidence) {
  if (n == 0) throw Error(ErrorKind::EmptyInput, "binomial interval with n = 0");
  const double z = normal_quantile_two_sided(confidence);
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double denom = 1.0 + z * z / nn;
  const double centre = (p + z * z / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z * z / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

Interval prevalence_ratio_interval(std::size_t x1, std::size_t n1, std::size_t x0, std::size_t n0,
                                   double confidence) {
  if (n1 == 0 || n0 == 0) throw Error(ErrorKind::EmptyInput, "ratio interval with an empty group");
  double a = static_cast<double>(x1);
  double b = static_cast<double>(x0);
  double m1 = static_cast<double>(n1);
  double m0 = static_cast<double>(n0);
  if (x1 == 0 || x0 == 0) {
    a += 0.5;
    b += 0.5;
    m1 += 0.5;
    m0 += 0.5;
  }
  const double log_ratio = std::log((a / m1) / (b / m0));
  const double se = std::sqrt(1.0 / a - 1.0 / m1 + 1.0 / b - 1.0 / m0);
  const double z = normal_quantile_two_sided(confidence);
  return {std::exp(log_ratio - z * se), std::exp(log_ratio + z * se)};
}

double silverman_bandwidth(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::EmptyInput, "bandwidth of an empty sample");
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  const double iqr = quantile(values, 0.75) - quantile(values, 0.25);
  double spread = sd;
  if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) return 1.0;
  return 0.9 * spread * std::pow(n, -0.2);
}

std::vector<double> gaussian_kde(std::span<const double> samples, std::span<const double> grid, double bandwidth) {
  if (!(bandwidth > 0.0)) throw Error(ErrorKind::InvalidSpec, "KDE bandwidth must be positive");
  std::vector<double> out(grid.size(), 0.0);
  if (samples.empty()) return out;
  const double norm = 1.0 / (static_cast<double>(samples.size()) * bandwidth * std::sqrt(2.0 * std::numbers::pi));
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double acc = 0.0;
    for (double s : samples) {
      const double u = (grid[g] - s) / bandwidth;
      acc += std::exp(-0.5 * u * u);
    }
    out[g] = acc * norm;
  }
  return out;
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::LengthMismatch, "trapezoid: x and y differ in length");
  double area = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) area += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
  return area;
}

}  // namespace vdscan
