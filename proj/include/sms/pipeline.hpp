#pragma once

// End-to-end ranking runs over a model database:
//
//   acquire logits (file or built-in predictor) [-> random projection]
//   -> softmax(T) -> drop last coordinate -> shared row sample
//   -> per-class clusters -> Gaussian fits -> metric -> ranking
//
// Everything except the timing block is a pure function of the inputs and
// the run seed, independent of the worker count.

#include <sms/baselines.hpp>
#include <sms/data_io.hpp>
#include <sms/error.hpp>
#include <sms/evaluation.hpp>
#include <sms/gaussian.hpp>
#include <sms/model_db.hpp>
#include <sms/separation.hpp>
#include <sms/soft_label.hpp>

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace sms {

enum class Metric { Sms, Isms, SmsRegression, Dbc, Ldwc, Dbi, Ch, Kld, Jsd };

constexpr std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::Sms: return "sms";
    case Metric::Isms: return "isms";
    case Metric::SmsRegression: return "sms-regression";
    case Metric::Dbc: return "dbc";
    case Metric::Ldwc: return "ldwc";
    case Metric::Dbi: return "dbi";
    case Metric::Ch: return "ch";
    case Metric::Kld: return "kld";
    case Metric::Jsd: return "jsd";
  }
  return "";
}

inline std::optional<Metric> parse_metric(std::string_view s) {
  for (auto m : {Metric::Sms, Metric::Isms, Metric::SmsRegression, Metric::Dbc, Metric::Ldwc, Metric::Dbi, Metric::Ch,
                 Metric::Kld, Metric::Jsd})
    if (to_string(m) == s) return m;
  return std::nullopt;
}

constexpr std::string_view to_string(Task t) { return t == Task::Regression ? "regression" : "classification"; }

inline std::optional<Task> parse_task(std::string_view s) {
  if (s == "classification") return Task::Classification;
  if (s == "regression") return Task::Regression;
  return std::nullopt;
}

constexpr bool higher_is_better(Metric m) {
  return !(m == Metric::Ldwc || m == Metric::Dbi || m == Metric::Kld || m == Metric::Jsd);
}

constexpr bool uses_logits(Metric m) { return m != Metric::Kld && m != Metric::Jsd; }

struct RunConfig {
  Task task = Task::Classification;
  Metric metric = Metric::Sms;
  double temperature = 2.0;
  std::size_t top_k = 5;
  int projection_dim = 25;
  double sample_rate = 1.0;
  std::uint64_t seed = 0;
  double epsilon = kDefaultRidge;
  double p = 2.0;
  int bins = 10;
  unsigned threads = 1;
  std::optional<std::filesystem::path> features;        // for predictor candidates
  std::optional<std::filesystem::path> target_distribution;  // for kld / jsd

  void validate() const {
    auto bad = [](const std::string& why) { fail(ErrorCode::InvalidArgument, why); };
    if (!(temperature > 0.0) || !std::isfinite(temperature)) bad("temperature must be > 0");
    if (!(sample_rate > 0.0 && sample_rate <= 1.0)) bad("sample rate must be in (0, 1]");
    if (projection_dim < 2) bad("projection dimension must be >= 2");
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) bad("epsilon must be >= 0");
    if (!(p >= 0.0) || !std::isfinite(p)) bad("p must be >= 0");
    if (bins < 2) bad("bins must be >= 2");
    if (top_k < 1) bad("top-k must be >= 1");
    if (threads < 1) bad("threads must be >= 1");
    if (metric == Metric::SmsRegression && task != Task::Regression) bad("metric sms-regression requires --task regression");
    if ((metric == Metric::Kld || metric == Metric::Jsd) && !target_distribution) bad("metric " + std::string(to_string(metric)) + " requires a target distribution file");
  }

  nlohmann::json to_json() const {
    nlohmann::json j = {{"task", std::string(to_string(task))},
                        {"metric", std::string(to_string(metric))},
                        {"temperature", temperature},
                        {"top_k", top_k},
                        {"sample_rate", sample_rate},
                        {"seed", seed},
                        {"epsilon", epsilon}};
    if (metric == Metric::Isms) j["projection_dim"] = projection_dim;
    if (task == Task::Regression) j["bins"] = bins;
    if (metric == Metric::SmsRegression) j["p"] = p;
    return j;
  }
};

/// Target-side state shared read-only by every candidate in one run.
struct TargetContext {
  std::size_t n_samples = 0;
  std::vector<int> classes;          // per target sample (bin ids for regression)
  std::vector<std::size_t> rows;     // shared sampled subset, sorted
  ClusterPartition partition;        // over positions in `rows`
};

inline TargetContext prepare_target(const TargetLabels& labels, const RunConfig& config) {
  TargetContext ctx;
  ctx.n_samples = labels.size();
  if (config.task == Task::Regression) {
    if (labels.task != Task::Regression) fail(ErrorCode::InvalidArgument, "regression run needs real-valued labels");
    ctx.classes = discretize_labels(labels.values, config.bins);
  } else {
    if (labels.task != Task::Classification) fail(ErrorCode::InvalidArgument, "classification run needs class labels");
    ctx.classes = labels.classes;
  }
  ctx.rows = sample_rows(ctx.n_samples, config.sample_rate, config.seed);
  const auto sampled = select<int>(ctx.classes, ctx.rows);
  ctx.partition = partition_by_label(sampled);
  return ctx;
}

enum class Projection { None, Applied, Skipped };

constexpr std::string_view to_string(Projection p) {
  switch (p) {
    case Projection::None: return "none";
    case Projection::Applied: return "applied";
    case Projection::Skipped: return "skipped: projection_dim >= output_dim";
  }
  return "";
}

struct CandidateScore {
  std::string id;
  double value = 0.0;
  int output_dim = 0;
  Eigen::Index effective_dim = 0;  // soft-label dimension after the drop
  Projection projection = Projection::None;
  double predicting_seconds = 0.0;
  double other_seconds = 0.0;
};

/// Where a candidate failed; carried into the CLI diagnostic.
class StageError : public Error {
 public:
  StageError(const Error& cause, std::string candidate, std::string stage)
      : Error(cause.code(), "candidate '" + candidate + "', stage '" + stage + "': " + cause.detail()),
        candidate_(std::move(candidate)),
        stage_(std::move(stage)) {}

  const std::string& candidate() const { return candidate_; }
  const std::string& stage() const { return stage_; }

 private:
  std::string candidate_;
  std::string stage_;
};

namespace detail {

class StageTracker {
 public:
  StageTracker(std::string candidate) : candidate_(std::move(candidate)) {}

  template <class F>
  auto run(const char* stage, F&& f) {
    try {
      return f();
    } catch (const StageError&) {
      throw;
    } catch (const Error& e) {
      throw StageError(e, candidate_, stage);
    } catch (const std::filesystem::filesystem_error& e) {
      throw StageError(Error(ErrorCode::FileUnreadable, e.what()), candidate_, stage);
    }
  }

 private:
  std::string candidate_;
};

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Soft-label vectors for the sampled rows: softmax(T), then drop.
inline Matrix target_vectors(const Matrix& logits, const TargetContext& ctx, double temperature) {
  return drop_last_dimension(soft_labels(select_rows(logits, ctx.rows), temperature));
}

/// Scores one candidate given a way to obtain its N x n logits.
inline CandidateScore score_logits(const std::function<Matrix()>& acquire, const TargetContext& ctx,
                                   const RunConfig& config, const std::string& id) {
  detail::StageTracker stage(id);
  CandidateScore score;
  score.id = id;

  auto t0 = std::chrono::steady_clock::now();
  Matrix logits = stage.run("predict", acquire);
  if (static_cast<std::size_t>(logits.rows()) != ctx.n_samples) {
    throw StageError(Error(ErrorCode::DimensionMismatch, std::to_string(logits.rows()) + " logit rows for " +
                                                             std::to_string(ctx.n_samples) + " target samples"),
                     id, "predict");
  }
  score.output_dim = static_cast<int>(logits.cols());
  if (config.metric == Metric::Isms) {
    if (config.projection_dim < logits.cols()) {
      logits = stage.run("project", [&] { return random_projection(logits, config.projection_dim, derive_seed(config.seed, id)); });
      score.projection = Projection::Applied;
    } else {
      score.projection = Projection::Skipped;
    }
  }
  score.predicting_seconds = detail::seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  const Matrix vectors = stage.run("softmax", [&] { return target_vectors(logits, ctx, config.temperature); });
  score.effective_dim = vectors.cols();

  switch (config.metric) {
    case Metric::Sms:
    case Metric::Isms:
    case Metric::SmsRegression: {
      const auto fits = stage.run("fit", [&] { return fit_clusters(ctx.partition, vectors, config.epsilon); });
      score.value = stage.run("separation", [&] {
        return config.metric == Metric::SmsRegression ? regression_sd(ctx.partition, fits, config.p).value
                                                      : model_sd(ctx.partition, fits).value;
      });
      break;
    }
    case Metric::Dbc: score.value = stage.run("metric", [&] { return dbc(ctx.partition, vectors).value; }); break;
    case Metric::Ldwc: score.value = stage.run("metric", [&] { return ldwc(ctx.partition, vectors).value; }); break;
    case Metric::Dbi: score.value = stage.run("metric", [&] { return dbi(ctx.partition, vectors).value; }); break;
    case Metric::Ch: score.value = stage.run("metric", [&] { return ch(ctx.partition, vectors).value; }); break;
    case Metric::Kld:
    case Metric::Jsd: fail(ErrorCode::InvalidArgument, "divergence metrics do not use logits");
  }
  score.other_seconds = detail::seconds_since(t0);
  return score;
}

/// Logits for a registered candidate: its file, or its predictor applied to
/// the target features.
inline Matrix acquire_logits(const ModelDatabase& db, const ModelCandidate& c, const FeatureMatrix* features,
                             const TargetLabels& labels) {
  LogitMatrix logits;
  if (c.kind == ModelKind::LogitsFile) {
    logits = load_logits(db.resolve(c));
  } else {
    if (!features) fail(ErrorCode::InvalidArgument, "predictor candidate needs --features");
    logits = predict_logits(load_weights(db.resolve(c)), features->values);
    logits.sample_ids = features->sample_ids;
  }
  if (logits.n_outputs() != c.output_dim) {
    fail(ErrorCode::DimensionMismatch, "produced " + std::to_string(logits.n_outputs()) + " outputs, manifest says " +
                                           std::to_string(c.output_dim));
  }
  check_joinable(logits, labels, c.id);
  return std::move(logits.values);
}

struct RankedCandidate {
  CandidateScore score;
  double normalized = 0.0;
  std::size_t rank = 0;
};

struct RunReport {
  RunConfig config;
  bool higher_is_better = true;
  std::size_t n_samples = 0;
  std::size_t sample_size = 0;
  std::size_t classes = 0;
  std::vector<RankedCandidate> ranking;  // rank order
  double predicting_seconds = 0.0;
  double other_seconds = 0.0;

  std::vector<std::string> top_k() const {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < std::min(config.top_k, ranking.size()); ++i) ids.push_back(ranking[i].score.id);
    return ids;
  }

  nlohmann::json to_json() const {
    nlohmann::json cands = nlohmann::json::array();
    for (const auto& r : ranking) {
      nlohmann::json c = {{"id", r.score.id},
                          {"raw_metric", r.score.value},
                          {"normalized_metric", r.normalized},
                          {"rank", r.rank}};
      if (uses_logits(config.metric)) {
        c["output_dim"] = r.score.output_dim;
        c["effective_dim"] = r.score.effective_dim;
      }
      if (config.metric == Metric::Isms) c["projection"] = std::string(to_string(r.score.projection));
      cands.push_back(std::move(c));
    }
    return {{"config", config.to_json()},
            {"higher_is_better", higher_is_better},
            {"n_samples", n_samples},
            {"sample_size", sample_size},
            {"classes", classes},
            {"candidates", cands},
            {"top_k", top_k()},
            {"timing", {{"threads", config.threads}, {"predicting_seconds", predicting_seconds}, {"other_seconds", other_seconds}}}};
  }

  /// `model_id,raw_metric,normalized_metric,rank`
  std::string summary_csv() const {
    std::string out = "model_id,raw_metric,normalized_metric,rank\n";
    for (const auto& r : ranking) {
      out += r.score.id + "," + detail::format_double(r.score.value) + "," + detail::format_double(r.normalized) + "," +
             std::to_string(r.rank) + "\n";
    }
    return out;
  }
};

/// Runs `work(i)` for i in [0, count) on `threads` workers. Failures are
/// rethrown for the lowest failing index so diagnostics do not depend on
/// scheduling.
inline void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& work) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        work(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Orders scores into a report: rank by value (orientation aware, id
/// tie-break) and min-max normalize.
inline RunReport assemble_report(std::vector<CandidateScore> scores, const RunConfig& config, const TargetContext& ctx) {
  if (scores.empty()) fail(ErrorCode::EmptyCandidateSet, "database has no candidates");
  RunReport report;
  report.config = config;
  report.higher_is_better = higher_is_better(config.metric);
  report.n_samples = ctx.n_samples;
  report.sample_size = ctx.rows.size();
  report.classes = ctx.partition.m();

  std::vector<double> raw;
  std::vector<RankEntry> entries;
  for (const auto& s : scores) {
    raw.push_back(s.value);
    entries.push_back({s.id, s.value});
    report.predicting_seconds += s.predicting_seconds;
    report.other_seconds += s.other_seconds;
  }
  const auto normalized = minmax_normalize(raw);
  const auto order = rank_candidates(entries, entries.size(), report.higher_is_better);
  for (std::size_t r = 0; r < order.size(); ++r) {
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i].id == order[r].id) {
        report.ranking.push_back({scores[i], normalized[i], r + 1});
        break;
      }
    }
  }
  return report;
}

/// Resolves a candidate's `source_distribution` metadata entry.
inline DiscreteDistribution source_distribution(const ModelDatabase& db, const ModelCandidate& c) {
  auto it = c.metadata.find("source_distribution");
  if (it == c.metadata.end()) fail(ErrorCode::InvalidArgument, "metadata has no 'source_distribution' entry");
  std::filesystem::path path = it->second;
  if (path.is_relative()) path = db.root() / path;
  return DiscreteDistribution(load_distribution(path));
}

inline RunReport run_rank(const ModelDatabase& db, const TargetLabels& labels, const RunConfig& config) {
  config.validate();
  const auto& candidates = db.list();
  if (candidates.empty()) fail(ErrorCode::EmptyCandidateSet, "database at " + db.root().string() + " has no candidates");
  const TargetContext ctx = prepare_target(labels, config);

  std::optional<FeatureMatrix> features;
  if (config.features) features = load_features(*config.features);
  std::optional<DiscreteDistribution> target;
  if (config.target_distribution) target.emplace(load_distribution(*config.target_distribution));

  std::vector<CandidateScore> scores(candidates.size());
  parallel_for(candidates.size(), config.threads, [&](std::size_t i) {
    const auto& c = candidates[i];
    if (uses_logits(config.metric)) {
      scores[i] = score_logits([&] { return acquire_logits(db, c, features ? &*features : nullptr, labels); }, ctx, config, c.id);
      return;
    }
    detail::StageTracker stage(c.id);
    auto t0 = std::chrono::steady_clock::now();
    const auto source = stage.run("distribution", [&] { return source_distribution(db, c); });
    CandidateScore s;
    s.id = c.id;
    s.output_dim = c.output_dim;
    // KL(target || source): how well the source data distribution covers the target.
    s.value = stage.run("divergence", [&] {
      return config.metric == Metric::Kld ? kl_divergence(*target, source) : js_divergence(*target, source);
    });
    s.other_seconds = detail::seconds_since(t0);
    scores[i] = std::move(s);
  });
  return assemble_report(std::move(scores), config, ctx);
}

// ---------------------------------------------------------------------------
// evaluation of a saved report against ground-truth accuracies

struct EvalResult {
  double pcc = 0.0;
  Trendline trendline;
  std::vector<TopkPoint> topk_curve;
  bool lower_is_better = false;  // accuracies are losses
  std::vector<std::string> ids;
  std::vector<double> raw;
  std::vector<double> normalized;
  std::vector<double> accuracy;

  nlohmann::json to_json() const {
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& pt : topk_curve) curve.push_back({{"k", pt.k}, {"value", pt.value}});
    return {{"pcc", pcc},
            {"trendline", {{"slope", trendline.slope}, {"intercept", trendline.intercept}}},
            {"topk_curve", curve},
            {"topk_statistic", lower_is_better ? "highest_loss" : "lowest_accuracy"}};
  }

  /// `normalized_metric,accuracy`
  std::string plot_csv() const {
    std::string out = "normalized_metric,accuracy\n";
    for (std::size_t i = 0; i < ids.size(); ++i) out += detail::format_double(normalized[i]) + "," + detail::format_double(accuracy[i]) + "\n";
    return out;
  }
};

/// PCC on raw metric values, trendline on normalized values, and the top-k
/// worst-accuracy curve for k = 1..K along the report's ranking.
inline EvalResult evaluate_report(const nlohmann::json& report, const std::map<std::string, double>& accuracies,
                                  std::size_t max_k, std::optional<bool> lower_is_better = std::nullopt) {
  EvalResult out;
  try {
    out.lower_is_better = lower_is_better.value_or(report.at("config").at("task").get<std::string>() == "regression");
    for (const auto& c : report.at("candidates")) {
      const auto id = c.at("id").get<std::string>();
      auto it = accuracies.find(id);
      if (it == accuracies.end()) fail(ErrorCode::MissingAccuracy, "no accuracy for candidate '" + id + "'");
      out.ids.push_back(id);
      out.raw.push_back(c.at("raw_metric").get<double>());
      out.normalized.push_back(c.at("normalized_metric").get<double>());
      out.accuracy.push_back(it->second);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("malformed report: ") + e.what());
  }
  out.pcc = pearson(out.raw, out.accuracy);
  out.trendline = least_squares_line(out.normalized, out.accuracy);
  out.topk_curve = topk_lowest_accuracy(out.ids, accuracies, max_k, out.lower_is_better);
  return out;
}

// ---------------------------------------------------------------------------
// per-candidate debugging view

struct ClusterSummary {
  int label = 0;
  Eigen::Index count = 0;
  double mean_norm = 0.0;
  double log_det = 0.0;
};

struct InspectResult {
  std::string id;
  std::vector<int> labels;
  Matrix sd;  // m x m, symmetric, zero diagonal
  std::vector<ClusterSummary> clusters;
  std::optional<std::string> warning;
  Projection projection = Projection::None;

  nlohmann::json to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < sd.rows(); ++i) {
      std::vector<double> row(sd.row(i).begin(), sd.row(i).end());
      rows.push_back(row);
    }
    nlohmann::json cl = nlohmann::json::array();
    for (const auto& c : clusters) cl.push_back({{"label", c.label}, {"count", c.count}, {"mean_norm", c.mean_norm}, {"log_det", c.log_det}});
    nlohmann::json j = {{"id", id}, {"labels", labels}, {"sd_matrix", rows}, {"clusters", cl}};
    if (projection != Projection::None) j["projection"] = std::string(to_string(projection));
    if (warning) j["warning"] = *warning;
    return j;
  }
};

inline InspectResult inspect_logits(const Matrix& full_logits, const TargetContext& ctx, const RunConfig& config, const std::string& id) {
  detail::StageTracker stage(id);
  InspectResult out;
  out.id = id;
  Matrix logits = full_logits;
  if (config.metric == Metric::Isms) {
    if (config.projection_dim < logits.cols()) {
      logits = stage.run("project", [&] { return random_projection(logits, config.projection_dim, derive_seed(config.seed, id)); });
      out.projection = Projection::Applied;
    } else {
      out.projection = Projection::Skipped;
    }
  }
  const Matrix vectors = stage.run("softmax", [&] { return target_vectors(logits, ctx, config.temperature); });
  const auto fits = stage.run("fit", [&] { return fit_clusters(ctx.partition, vectors, config.epsilon); });
  const auto m = static_cast<Eigen::Index>(ctx.partition.m());
  out.sd = Matrix::Zero(m, m);
  std::size_t k = 0;
  for (const auto& [label, rows] : ctx.partition.clusters) {
    out.labels.push_back(label);
    out.clusters.push_back({label, fits[k].count, fits[k].mean.norm(), fits[k].log_det});
    ++k;
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const double v = stage.run("separation", [&] { return pairwise_sd(fits[static_cast<std::size_t>(i)], fits[static_cast<std::size_t>(j)]); });
      out.sd(i, j) = v;
      out.sd(j, i) = v;
    }
  }
  if (m == 1) out.warning = "only one label class: separation degree is 0";
  return out;
}

inline InspectResult run_inspect(const ModelDatabase& db, const std::string& id, const TargetLabels& labels, RunConfig config) {
  const auto& c = db.get(id);
  if (!uses_logits(config.metric)) config.metric = Metric::Sms;
  if (config.metric == Metric::SmsRegression) config.metric = Metric::Sms;
  config.validate();
  const TargetContext ctx = prepare_target(labels, config);
  std::optional<FeatureMatrix> features;
  if (config.features) features = load_features(*config.features);
  detail::StageTracker stage(id);
  const Matrix logits = stage.run("predict", [&] { return acquire_logits(db, c, features ? &*features : nullptr, labels); });
  return inspect_logits(logits, ctx, config, id);
}

}  // namespace sms
