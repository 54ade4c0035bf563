#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace vdscan {

/// 2x2 counts with "positive" meaning hypertensive / high visual damage.
struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

/// Predictions and truth as 0/1 (1 = positive).
ConfusionMatrix confusion(std::span<const int> predicted, std::span<const int> truth);

double accuracy(const ConfusionMatrix& m);

/// Mean of sensitivity and specificity. Throws UndefinedClassRecall when a
/// class has no truth samples.
double balanced_accuracy(const ConfusionMatrix& m);

struct Quartiles {
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;

  bool operator==(const Quartiles&) const = default;
};

/// Linear interpolation between order statistics at position (n - 1) q.
double quantile(std::span<const double> values, double q);

Quartiles quartiles(std::span<const double> values);

/// group / baseline; nullopt ("Undefined") when the baseline prevalence is zero.
std::optional<double> prevalence_ratio(double group_prevalence, double baseline_prevalence);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;

  bool contains(double v) const noexcept { return v >= lower && v <= upper; }
};

/// Two-sided normal quantile for a confidence level, e.g. 0.99 -> 2.5758.
double normal_quantile_two_sided(double confidence);

/// Wilson score interval for a binomial proportion.
Interval wilson_interval(std::size_t successes, std::size_t n, double confidence);

/// Log-scale (Katz) interval for the ratio of two proportions x1/n1 over
/// x0/n0, with a 0.5 continuity correction when a count is zero.
Interval prevalence_ratio_interval(std::size_t x1, std::size_t n1, std::size_t x0, std::size_t n0,
                                   double confidence);

/// Silverman's rule of thumb, 0.9 min(sd, IQR/1.34) n^(-1/5). Falls back to
/// 1.0 when the sample has no spread.
double silverman_bandwidth(std::span<const double> values);

/// Gaussian kernel density estimate at each grid point.
std::vector<double> gaussian_kde(std::span<const double> samples, std::span<const double> grid, double bandwidth);

/// Trapezoid rule integral of y over x.
double trapezoid(std::span<const double> x, std::span<const double> y);

}  // namespace vdscan
