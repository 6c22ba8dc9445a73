#pragma once

// Separation degree between class-conditional Gaussians and its model-level
// aggregates.
//
// For fits u, v with e_u(x) = exp(-maha_u(x)/2) the pairwise score is
//
//   sqrt|Sv| / (sqrt|Sv| + sqrt|Su| e_v(mu_u))
//     + sqrt|Su| / (sqrt|Sv| e_u(mu_v) + sqrt|Su|) - 1,
//
// which is G_u(mu_u)/F(mu_u) + G_v(mu_v)/F(mu_v) - 1 for F = G_u + G_v.
// Dividing each fraction through gives logistic terms
//
//   sigmoid(a + maha_v(mu_u)/2) + sigmoid(-a + maha_u(mu_v)/2) - 1,
//   a = (ln|Sv| - ln|Su|) / 2,
//
// which never forms a determinant or an exponential of a large argument.

#include <sms/error.hpp>
#include <sms/gaussian.hpp>
#include <sms/soft_label.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace sms {

struct PairSD {
  int u = 0;
  int v = 0;
  double value = 0.0;
};

struct ModelSD {
  std::string candidate_id;
  double value = 0.0;
  std::size_t m = 0;
  std::vector<PairSD> pair_values;  // one entry per unordered pair, u < v
};

/// Largest double strictly below 1; pairwise scores are clamped here.
inline constexpr double kBelowOne = 1.0 - std::numeric_limits<double>::epsilon() / 2;

inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Pairwise separation degree in [0, 1). Symmetric bit for bit.
inline double pairwise_sd(const GaussianFit& gu, const GaussianFit& gv) {
  if (gu.dim() != gv.dim()) {
    fail(ErrorCode::DimensionMismatch, "fits have dimensions " + std::to_string(gu.dim()) + " and " + std::to_string(gv.dim()));
  }
  // Swapping u and v negates a exactly and swaps the two terms; the sum of two
  // doubles is commutative, so the result is order independent.
  const double a = 0.5 * gv.log_det - 0.5 * gu.log_det;
  const double first = logistic(a + 0.5 * mahalanobis_sq(gv, gu.mean));
  const double second = logistic(-a + 0.5 * mahalanobis_sq(gu, gv.mean));
  const double sd = (first + second) - 1.0;
  return std::clamp(sd, 0.0, kBelowOne);
}

namespace detail {

inline void check_fits(const ClusterPartition& partition, const std::vector<GaussianFit>& fits) {
  if (fits.size() != partition.m()) {
    fail(ErrorCode::DimensionMismatch, std::to_string(fits.size()) + " fits for " + std::to_string(partition.m()) + " clusters");
  }
}

/// All unordered pairs, fits ordered like partition.clusters.
inline std::vector<PairSD> all_pairs(const ClusterPartition& partition, const std::vector<GaussianFit>& fits) {
  std::vector<int> ids;
  for (const auto& [id, rows] : partition.clusters) ids.push_back(id);
  std::vector<PairSD> pairs;
  pairs.reserve(ids.size() * (ids.size() - (ids.empty() ? 0 : 1)) / 2);
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = i + 1; j < ids.size(); ++j) pairs.push_back({ids[i], ids[j], pairwise_sd(fits[i], fits[j])});
  return pairs;
}

}  // namespace detail

/// Average over all m^2 ordered cluster pairs. The zero diagonal is part of
/// the divisor, so the maximum is 1 - 1/m.
inline ModelSD model_sd(const ClusterPartition& partition, const std::vector<GaussianFit>& fits) {
  detail::check_fits(partition, fits);
  ModelSD out;
  out.m = partition.m();
  if (out.m == 0) fail(ErrorCode::EmptyCandidateSet, "no clusters");
  out.pair_values = detail::all_pairs(partition, fits);

  // Summed in sorted order so the result does not depend on class ids.
  std::vector<double> values;
  values.reserve(out.pair_values.size());
  for (const auto& p : out.pair_values) values.push_back(p.value);
  std::sort(values.begin(), values.end());
  double total = 0.0;
  for (double v : values) total += 2.0 * v;
  out.value = total / static_cast<double>(out.m * out.m);
  return out;
}

/// Regression variant: ordered pairs weighted by |u - v|^p over bin indices.
/// w_uu = 0 for every p, including p = 0.
inline ModelSD regression_sd(const ClusterPartition& partition, const std::vector<GaussianFit>& fits, double p) {
  if (!(p >= 0.0) || !std::isfinite(p)) fail(ErrorCode::InvalidArgument, "norm parameter p must be nonnegative");
  detail::check_fits(partition, fits);
  if (partition.m() < 2) fail(ErrorCode::SingleBin, "regression separation needs at least two bins");
  ModelSD out;
  out.m = partition.m();
  out.pair_values = detail::all_pairs(partition, fits);

  double num = 0.0;
  double den = 0.0;
  for (const auto& pr : out.pair_values) {
    const double w = std::pow(std::abs(static_cast<double>(pr.u) - static_cast<double>(pr.v)), p);
    num += 2.0 * w * pr.value;
    den += 2.0 * w;
  }
  out.value = num / den;
  return out;
}

/// Fits one Gaussian per cluster of `vectors`, in partition order.
inline std::vector<GaussianFit> fit_clusters(const ClusterPartition& partition, const Matrix& vectors, double epsilon) {
  std::vector<GaussianFit> fits;
  fits.reserve(partition.m());
  for (const auto& [id, rows] : partition.clusters) {
    try {
      fits.push_back(fit_gaussian(select_rows(vectors, rows), epsilon));
    } catch (const Error& e) {
      fail(e.code(), "class " + std::to_string(id) + ": " + e.detail());
    }
  }
  return fits;
}

struct RankEntry {
  std::string id;
  double value = 0.0;
};

/// Top-k by value (descending unless lower_is_better), ties broken by id.
inline std::vector<RankEntry> rank_candidates(std::vector<RankEntry> entries, std::size_t k, bool higher_is_better = true) {
  if (entries.empty()) fail(ErrorCode::EmptyCandidateSet, "nothing to rank");
  if (k < 1) fail(ErrorCode::InvalidArgument, "k must be >= 1");
  std::sort(entries.begin(), entries.end(), [higher_is_better](const RankEntry& a, const RankEntry& b) {
    if (a.value != b.value) return higher_is_better ? a.value > b.value : a.value < b.value;
    return a.id < b.id;
  });
  entries.resize(std::min(k, entries.size()));
  return entries;
}

inline std::vector<RankEntry> rank_candidates(const std::vector<ModelSD>& sds, std::size_t k) {
  std::vector<RankEntry> entries;
  for (const auto& sd : sds) entries.push_back({sd.candidate_id, sd.value});
  return rank_candidates(std::move(entries), k, true);
}

}  // namespace sms
