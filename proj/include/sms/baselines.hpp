#pragma once

// Comparison rankers: distribution divergences (meta-data baselines) and
// clustering-quality scores over the same soft-label clusters SMS uses.

#include <sms/error.hpp>
#include <sms/soft_label.hpp>
#include <sms/types.hpp>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace sms {

class DiscreteDistribution {
 public:
  explicit DiscreteDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) fail(ErrorCode::InvalidArgument, "empty distribution");
    double total = 0.0;
    for (double p : probs_) {
      if (!(p >= 0.0) || !std::isfinite(p)) fail(ErrorCode::InvalidArgument, "probabilities must be finite and nonnegative");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) fail(ErrorCode::NotNormalized, "probabilities sum to " + std::to_string(total));
  }

  std::span<const double> probs() const { return probs_; }
  std::size_t size() const { return probs_.size(); }

 private:
  std::vector<double> probs_;
};

/// KL(P || Q) in nats, with 0 ln(0/q) = 0.
inline double kl_divergence(const DiscreteDistribution& p, const DiscreteDistribution& q) {
  if (p.size() != q.size()) fail(ErrorCode::SupportMismatch, "supports of length " + std::to_string(p.size()) + " and " + std::to_string(q.size()));
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = p.probs()[i];
    const double qi = q.probs()[i];
    if (pi == 0.0) continue;
    if (qi == 0.0) fail(ErrorCode::InfiniteDivergence, "Q is zero where P is not (index " + std::to_string(i) + ")");
    total += pi * std::log(pi / qi);
  }
  return std::max(total, 0.0);
}

/// Jensen-Shannon divergence in nats; bounded by ln 2.
inline double js_divergence(const DiscreteDistribution& p, const DiscreteDistribution& q) {
  if (p.size() != q.size()) fail(ErrorCode::SupportMismatch, "supports of length " + std::to_string(p.size()) + " and " + std::to_string(q.size()));
  // Term by term so M never needs to be renormalized.
  auto half_kl = [](double a, double m) { return a == 0.0 ? 0.0 : 0.5 * a * std::log(a / m); };
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = p.probs()[i];
    const double qi = q.probs()[i];
    const double mi = 0.5 * (pi + qi);
    total += half_kl(pi, mi) + half_kl(qi, mi);
  }
  return std::clamp(total, 0.0, std::log(2.0));
}

struct MetricValue {
  double value = 0.0;
  bool higher_is_better = true;
};

namespace detail {

inline constexpr double kDenominatorFloor = 1e-12;

inline void check_partition(const ClusterPartition& partition, const Matrix& vectors, const char* what) {
  if (partition.m() < 2) fail(ErrorCode::SingleBin, std::string(what) + " needs at least two clusters");
  for (const auto& [id, rows] : partition.clusters) {
    if (rows.empty()) fail(ErrorCode::SingletonCluster, std::string(what) + ": class " + std::to_string(id) + " is empty");
    for (auto r : rows)
      if (r >= static_cast<std::size_t>(vectors.rows())) fail(ErrorCode::DimensionMismatch, std::string(what) + ": row index out of range");
  }
}

inline std::vector<Vector> centroids(const ClusterPartition& partition, const Matrix& vectors) {
  std::vector<Vector> out;
  for (const auto& [id, rows] : partition.clusters) {
    Vector c = Vector::Zero(vectors.cols());
    for (auto r : rows) c += vectors.row(static_cast<Eigen::Index>(r)).transpose();
    out.push_back(c / static_cast<double>(rows.size()));
  }
  return out;
}

}  // namespace detail

/// Mean Euclidean distance over unordered centroid pairs. Higher is better.
inline MetricValue dbc(const ClusterPartition& partition, const Matrix& vectors) {
  detail::check_partition(partition, vectors, "DBC");
  const auto cs = detail::centroids(partition, vectors);
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < cs.size(); ++i)
    for (std::size_t j = i + 1; j < cs.size(); ++j, ++pairs) total += (cs[i] - cs[j]).norm();
  return {total / static_cast<double>(pairs), true};
}

/// Longest intra-cluster pairwise distance over all clusters. Lower is better.
/// Quadratic in cluster size.
inline MetricValue ldwc(const ClusterPartition& partition, const Matrix& vectors) {
  detail::check_partition(partition, vectors, "LDWC");
  double longest_sq = 0.0;
  for (const auto& [id, rows] : partition.clusters) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto a = vectors.row(static_cast<Eigen::Index>(rows[i]));
      for (std::size_t j = i + 1; j < rows.size(); ++j) {
        longest_sq = std::max(longest_sq, (a - vectors.row(static_cast<Eigen::Index>(rows[j]))).squaredNorm());
      }
    }
  }
  return {std::sqrt(longest_sq), false};
}

/// Davies-Bouldin index: mean over clusters of max_j (s_i + s_j) / d(c_i, c_j),
/// s_i the mean distance of members to their centroid. Lower is better.
inline MetricValue dbi(const ClusterPartition& partition, const Matrix& vectors) {
  detail::check_partition(partition, vectors, "DBI");
  const auto cs = detail::centroids(partition, vectors);
  std::vector<double> scatter;
  std::size_t k = 0;
  for (const auto& [id, rows] : partition.clusters) {
    double s = 0.0;
    for (auto r : rows) s += (vectors.row(static_cast<Eigen::Index>(r)).transpose() - cs[k]).norm();
    scatter.push_back(s / static_cast<double>(rows.size()));
    ++k;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < cs.size(); ++i) {
    double worst = 0.0;
    for (std::size_t j = 0; j < cs.size(); ++j) {
      if (i == j) continue;
      const double sep = std::max((cs[i] - cs[j]).norm(), detail::kDenominatorFloor);
      worst = std::max(worst, (scatter[i] + scatter[j]) / sep);
    }
    total += worst;
  }
  return {total / static_cast<double>(cs.size()), false};
}

/// Calinski-Harabasz score: [B / (m - 1)] / [W / (N - m)]. Higher is better.
inline MetricValue ch(const ClusterPartition& partition, const Matrix& vectors) {
  detail::check_partition(partition, vectors, "CH");
  const auto cs = detail::centroids(partition, vectors);
  std::size_t n = 0;
  for (const auto& [id, rows] : partition.clusters) n += rows.size();

  Vector overall = Vector::Zero(vectors.cols());
  for (const auto& [id, rows] : partition.clusters)
    for (auto r : rows) overall += vectors.row(static_cast<Eigen::Index>(r)).transpose();
  overall /= static_cast<double>(n);

  double between = 0.0;
  double within = 0.0;
  std::size_t k = 0;
  for (const auto& [id, rows] : partition.clusters) {
    between += static_cast<double>(rows.size()) * (cs[k] - overall).squaredNorm();
    for (auto r : rows) within += (vectors.row(static_cast<Eigen::Index>(r)).transpose() - cs[k]).squaredNorm();
    ++k;
  }
  const double m = static_cast<double>(cs.size());
  const double num = between / (m - 1.0);
  const double den = std::max(within / std::max(static_cast<double>(n) - m, 1.0), detail::kDenominatorFloor);
  return {num / den, true};
}

}  // namespace sms
