#pragma once

// Logits -> target vector set.
//
// SMS pipeline:   softmax(T) -> drop last coordinate
// I-SMS pipeline: random projection of the logits -> softmax(T) -> drop

#include <sms/error.hpp>
#include <sms/types.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace sms {

/// Stable 64-bit mix of a run seed and a candidate id. Independent of
/// scheduling order and of std::hash.
inline std::uint64_t derive_seed(std::uint64_t run_seed, std::string_view id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : id) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  // splitmix64 finalizer over the combination
  std::uint64_t z = run_seed ^ (h + 0x9e3779b97f4a7c15ULL + (run_seed << 6) + (run_seed >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Temperature softmax, max-subtracted so any finite input is safe.
inline std::vector<double> extended_softmax(std::span<const double> z, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    fail(ErrorCode::NonPositiveTemperature, "temperature must be positive and finite");
  }
  if (z.empty()) fail(ErrorCode::NonFiniteInput, "empty logit vector");
  for (double v : z)
    if (!std::isfinite(v)) fail(ErrorCode::NonFiniteInput, "logit vector contains a non-finite value");

  const double peak = *std::max_element(z.begin(), z.end());
  std::vector<double> out(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp((z[i] - peak) / temperature);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

/// Row-wise extended softmax of an N x n logit matrix.
inline Matrix soft_labels(const Matrix& logits, double temperature) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const auto row = extended_softmax(std::span<const double>(logits.row(r).data(), static_cast<std::size_t>(logits.cols())), temperature);
    for (Eigen::Index c = 0; c < logits.cols(); ++c) out(r, c) = row[static_cast<std::size_t>(c)];
  }
  return out;
}

/// Removes the last coordinate of each soft label; it is recoverable as
/// 1 - sum(kept), so no information is lost.
inline Matrix drop_last_dimension(const Matrix& soft) {
  if (soft.cols() < 2) fail(ErrorCode::InvalidDimension, "need at least 2 columns to drop one");
  for (Eigen::Index r = 0; r < soft.rows(); ++r) {
    const double sum = soft.row(r).sum();
    if (std::abs(sum - 1.0) > 1e-9 || soft.row(r).minCoeff() < 0.0) {
      fail(ErrorCode::NotNormalized, "row " + std::to_string(r) + " is not a probability vector (sum " + std::to_string(sum) + ")");
    }
  }
  return soft.leftCols(soft.cols() - 1);
}

/// r x n matrix of independent N(0, 1/n) entries, fully determined by seed.
inline Matrix projection_matrix(Eigen::Index r, Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(n)));
  Matrix w(r, n);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < n; ++j) w(i, j) = normal(rng);
  return w;
}

/// logits * W^T: a bias-free fully connected layer with no activation.
inline Matrix project_with(const Matrix& logits, const Matrix& weight) {
  if (weight.cols() != logits.cols()) {
    fail(ErrorCode::InvalidDimension, "projection expects " + std::to_string(weight.cols()) + " inputs, logits have " +
                                          std::to_string(logits.cols()));
  }
  return logits * weight.transpose();
}

/// Random projection to r outputs. r >= n is a pass-through.
inline Matrix random_projection(const Matrix& logits, Eigen::Index r, std::uint64_t seed) {
  if (r < 2) fail(ErrorCode::InvalidDimension, "projection dimension must be >= 2, got " + std::to_string(r));
  if (r >= logits.cols()) return logits;
  return project_with(logits, projection_matrix(r, logits.cols(), seed));
}

/// Uniform sample without replacement of max(1, round(rate*N)) row indices,
/// returned sorted.
inline std::vector<std::size_t> sample_rows(std::size_t n, double rate, std::uint64_t seed) {
  if (!(rate > 0.0 && rate <= 1.0)) fail(ErrorCode::InvalidRate, "sample rate must be in (0, 1], got " + std::to_string(rate));
  if (n == 0) fail(ErrorCode::InvalidArgument, "cannot sample from zero rows");
  const auto size = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(rate * static_cast<double>(n))));
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (size >= n) return all;
  std::vector<std::size_t> picked;
  picked.reserve(size);
  std::mt19937_64 rng(seed);
  std::sample(all.begin(), all.end(), std::back_inserter(picked), size, rng);
  std::sort(picked.begin(), picked.end());
  return picked;
}

inline Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

template <class T>
std::vector<T> select(std::span<const T> values, std::span<const std::size_t> rows) {
  std::vector<T> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(values[r]);
  return out;
}

struct ClusterPartition {
  std::map<int, std::vector<std::size_t>> clusters;  // class id -> member rows

  std::size_t m() const { return clusters.size(); }
};

/// Groups rows by class id. Every cluster needs two members to fit a covariance.
inline ClusterPartition partition_by_label(std::span<const int> labels) {
  ClusterPartition p;
  for (std::size_t i = 0; i < labels.size(); ++i) p.clusters[labels[i]].push_back(i);
  for (const auto& [id, rows] : p.clusters) {
    if (rows.size() < 2) fail(ErrorCode::SingletonCluster, "class " + std::to_string(id) + " has " + std::to_string(rows.size()) + " member(s)");
  }
  return p;
}

/// Equal-frequency binning into ids 0..bins-1. Bin b's upper edge is the
/// sample at rank floor((b+1)N/B)-1; values equal to an edge fall in the
/// lower bin, so ties can leave bins uneven or empty.
inline std::vector<int> discretize_labels(std::span<const double> values, int bins) {
  if (bins < 2) fail(ErrorCode::InvalidArgument, "need at least 2 bins, got " + std::to_string(bins));
  const std::size_t n = values.size();
  if (n < 2 * static_cast<std::size_t>(bins)) {
    fail(ErrorCode::TooFewSamples, std::to_string(n) + " samples for " + std::to_string(bins) + " bins (need >= " + std::to_string(2 * bins) + ")");
  }
  for (double v : values)
    if (!std::isfinite(v)) fail(ErrorCode::NonFiniteInput, "regression label is not finite");

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> edges;
  for (int b = 0; b + 1 < bins; ++b) edges.push_back(sorted[(static_cast<std::size_t>(b) + 1) * n / static_cast<std::size_t>(bins) - 1]);

  std::vector<int> ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    ids[i] = static_cast<int>(std::lower_bound(edges.begin(), edges.end(), values[i]) - edges.begin());
  }
  if (std::adjacent_find(ids.begin(), ids.end(), std::not_equal_to<>()) == ids.end()) {
    fail(ErrorCode::DegenerateLabels, "all regression labels fall into one bin");
  }
  return ids;
}

}  // namespace sms
