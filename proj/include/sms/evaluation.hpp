#pragma once

#include <sms/error.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sms {

namespace detail {

inline double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline void check_paired(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorCode::LengthMismatch, std::to_string(x.size()) + " vs " + std::to_string(y.size()) + " values");
  if (x.size() < 2) fail(ErrorCode::LengthMismatch, "need at least 2 points");
}

}  // namespace detail

/// Sample Pearson correlation coefficient.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  detail::check_paired(x, y);
  const double mx = detail::mean(x);
  const double my = detail::mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) fail(ErrorCode::ZeroVariance, "pearson correlation of a constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct Trendline {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Ordinary least squares fit y = slope * x + intercept.
inline Trendline least_squares_line(std::span<const double> x, std::span<const double> y) {
  detail::check_paired(x, y);
  const double mx = detail::mean(x);
  const double my = detail::mean(y);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) fail(ErrorCode::DegenerateX, "x is constant");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

struct TopkPoint {
  std::size_t k = 0;
  double value = 0.0;
};

/// Entry k is the worst accuracy among the first k ranked ids: the minimum,
/// or for losses (lower_is_better) the maximum.
inline std::vector<TopkPoint> topk_lowest_accuracy(std::span<const std::string> ranking,
                                                   const std::map<std::string, double>& accuracies, std::size_t max_k,
                                                   bool lower_is_better = false) {
  std::vector<TopkPoint> curve;
  const std::size_t limit = std::min(max_k, ranking.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < limit; ++k) {
    auto it = accuracies.find(ranking[k]);
    if (it == accuracies.end()) fail(ErrorCode::MissingAccuracy, "no accuracy for '" + ranking[k] + "'");
    const double v = it->second;
    worst = k == 0 ? v : (lower_is_better ? std::max(worst, v) : std::min(worst, v));
    curve.push_back({k + 1, worst});
  }
  return curve;
}

/// (v - min) / (max - min); an all-equal input maps to 0.5.
inline std::vector<double> minmax_normalize(std::span<const double> values) {
  std::vector<double> out(values.size(), 0.5);
  if (values.empty()) return out;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - *lo) / range;
  return out;
}

}  // namespace sms
