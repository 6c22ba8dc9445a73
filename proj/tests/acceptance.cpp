// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <sms/pipeline.hpp>

#include <synthetic_zoo.hpp>
#include <temp_dir.hpp>

#include <Eigen/LU>

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

namespace {

using sms::GaussianFit;
using sms::Matrix;
using sms::Vector;
using Clock = std::chrono::steady_clock;

int failures = 0;

void report(int n, const std::string& name, bool ok, const std::string& detail) {
  std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << n << ": " << name << " (" << detail << ")" << std::endl;
  if (!ok) ++failures;
}

double elapsed(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

GaussianFit fit_with(const Vector& mean, const Matrix& cov) {
  GaussianFit g;
  g.mean = mean;
  g.covariance = cov;
  g.chol = Eigen::LLT<Matrix>(cov).matrixL();
  g.log_det = 2.0 * g.chol.diagonal().array().log().sum();
  g.count = 100;
  return g;
}

Matrix random_spd(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> scale(0.05, 3.0);
  Matrix a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = normal(rng);
  return scale(rng) * (a * a.transpose() / d) + 0.05 * Matrix::Identity(d, d);
}

Vector random_vector(std::mt19937_64& rng, int d, double sd) {
  std::normal_distribution<double> normal(0.0, sd);
  Vector v(d);
  for (int j = 0; j < d; ++j) v(j) = normal(rng);
  return v;
}

double maha(const Matrix& cov, const Vector& diff) { return diff.dot(cov.inverse() * diff); }

// Posterior-mass definition with normalized densities, inverse and determinant.
double direct_sd(const GaussianFit& u, const GaussianFit& v) {
  auto pdf = [](const GaussianFit& g, const Vector& x) {
    const double k = static_cast<double>(g.dim());
    return std::exp(-0.5 * maha(g.covariance, x - g.mean)) /
           std::sqrt(std::pow(2.0 * std::numbers::pi, k) * g.covariance.determinant());
  };
  const double at_u = pdf(u, u.mean) / (pdf(u, u.mean) + pdf(v, u.mean));
  const double at_v = pdf(v, v.mean) / (pdf(u, v.mean) + pdf(v, v.mean));
  return at_u + at_v - 1.0;
}

GaussianFit unit_1d(double mean) { return fit_with(Vector::Constant(1, mean), Matrix::Identity(1, 1)); }

sms::ClusterPartition partition_of(int m) {
  std::vector<int> labels;
  for (int c = 0; c < m; ++c) labels.insert(labels.end(), {c, c});
  return sms::partition_by_label(labels);
}

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

void criterion_1() {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> dims(1, 6);
  std::uniform_real_distribution<double> target(0.0, 30.0);
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    const int d = dims(rng);
    const Matrix su = random_spd(rng, d);
    const Matrix sv = random_spd(rng, d);
    const Vector mu = random_vector(rng, d, 1.0);
    Vector dir = random_vector(rng, d, 1.0);
    // scale the mean gap so the larger of the two Mahalanobis distances is in [0, 30]
    const double larger = std::max(maha(su, dir), maha(sv, dir));
    dir *= std::sqrt(target(rng) / larger);
    const auto u = fit_with(mu, su);
    const auto v = fit_with(mu + dir, sv);
    worst = std::max(worst, std::abs(sms::pairwise_sd(u, v) - direct_sd(u, v)));
  }
  const double secs = elapsed(t0);
  report(1, "closed form matches the density-ratio definition", worst <= 1e-9 && secs < 5.0,
         "max |diff| " + fmt(worst) + ", " + fmt(secs) + " s");
}

void criterion_2() {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> dims(1, 6);
  const auto t0 = Clock::now();
  bool range = true, symmetric = true;
  double equal_mean_worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const int d = dims(rng);
    const auto u = fit_with(random_vector(rng, d, 2.0), random_spd(rng, d));
    const auto v = fit_with(random_vector(rng, d, 2.0), random_spd(rng, d));
    const double s = sms::pairwise_sd(u, v);
    range = range && s >= 0.0 && s < 1.0;
    symmetric = symmetric && sms::pairwise_sd(v, u) == s;
    const auto w = fit_with(u.mean, random_spd(rng, d));
    equal_mean_worst = std::max(equal_mean_worst, sms::pairwise_sd(u, w));
  }
  const double secs = elapsed(t0);
  report(2, "separation axioms on 10000 pairs", range && symmetric && equal_mean_worst <= 1e-12 && secs < 10.0,
         std::string("range ") + (range ? "ok" : "violated") + ", symmetry " + (symmetric ? "bit-exact" : "violated") +
             ", equal-mean max " + fmt(equal_mean_worst) + ", " + fmt(secs) + " s");
}

void criterion_3() {
  bool increasing = true;
  double prev = -1.0;
  for (int i = 0; i <= 16; ++i) {
    const double s = sms::pairwise_sd(unit_1d(0.0), unit_1d(0.5 * i));
    increasing = increasing && s > prev;
    prev = s;
  }
  const double at0 = sms::pairwise_sd(unit_1d(0.0), unit_1d(0.0));
  const double at10 = sms::pairwise_sd(unit_1d(0.0), unit_1d(10.0));
  report(3, "1-D separation grows with the mean gap", increasing && at0 == 0.0 && at10 >= 1.0 - 1e-9,
         std::string(increasing ? "strictly increasing" : "not increasing") + ", SD(0) " + fmt(at0) + ", 1-SD(10) " +
             fmt(1.0 - at10));
}

void criterion_4() {
  const std::vector<double> z{-2.408, -0.186, -2.526};
  const auto t1 = sms::extended_softmax(z, 1.0);
  const auto t5 = sms::extended_softmax(z, 5.0);
  const double want1[] = {0.09, 0.83, 0.08};
  const double want5[] = {0.29, 0.44, 0.27};
  double worst = 0.0;
  for (int i = 0; i < 3; ++i) worst = std::max({worst, std::abs(t1[i] - want1[i]), std::abs(t5[i] - want5[i])});
  report(4, "temperature softmax example", worst <= 0.01,
         "T=5 gives (" + fmt(t5[0]) + ", " + fmt(t5[1]) + ", " + fmt(t5[2]) + "), max dev " + fmt(worst));
}

void criterion_5() {
  const std::vector<GaussianFit> two{fit_with(Vector::Zero(2), Matrix::Identity(2, 2)),
                                     fit_with(Vector::Constant(2, 1.0), 2.0 * Matrix::Identity(2, 2))};
  const bool m2 = sms::model_sd(partition_of(2), two).value == sms::pairwise_sd(two[0], two[1]) / 2;

  std::mt19937_64 rng(505);
  double worst = 0.0;
  bool relabel = true;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<GaussianFit> fits;
    for (int c = 0; c < 3; ++c) fits.push_back(fit_with(random_vector(rng, 3, 1.0), random_spd(rng, 3)));
    double total = 0.0;
    for (std::size_t u = 0; u < 3; ++u)
      for (std::size_t v = 0; v < 3; ++v)
        if (u != v) total += direct_sd(fits[u], fits[v]);
    const double got = sms::model_sd(partition_of(3), fits).value;
    worst = std::max(worst, std::abs(got - total / 9));
    auto shuffled = fits;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    relabel = relabel && sms::model_sd(partition_of(3), shuffled).value == got;
  }
  report(5, "model separation aggregate", m2 && worst <= 1e-9 && relabel,
         std::string("m=2 ") + (m2 ? "exact" : "inexact") + ", m=3 max |diff| " + fmt(worst) + ", relabeling " +
             (relabel ? "exact" : "not invariant"));
}

void criterion_6() {
  const std::vector<GaussianFit> two{unit_1d(0.0), unit_1d(1.3)};
  const double s = sms::pairwise_sd(two[0], two[1]);
  double two_bin = 0.0;
  for (double p : {0.0, 1.0, 2.0, 7.0}) two_bin = std::max(two_bin, std::abs(sms::regression_sd(partition_of(2), two, p).value - s));

  const std::vector<GaussianFit> three{unit_1d(0.0), unit_1d(0.7), unit_1d(2.2)};
  const double s01 = sms::pairwise_sd(three[0], three[1]);
  const double s02 = sms::pairwise_sd(three[0], three[2]);
  const double s12 = sms::pairwise_sd(three[1], three[2]);
  const double three_bin = std::abs(sms::regression_sd(partition_of(3), three, 2.0).value - (s01 + 4 * s02 + s12) / 6);
  report(6, "distance-weighted regression separation", two_bin <= 1e-15 && three_bin <= 1e-12,
         "two-bin max |diff| " + fmt(two_bin) + ", three-bin |diff| " + fmt(three_bin));
}

sms::testing::ZooSpec zoo7_spec() {
  sms::testing::ZooSpec spec;
  spec.candidates = 20;
  spec.classes = 4;
  spec.samples = 2000;
  return spec;
}

void criterion_7() {
  const auto t0 = Clock::now();
  const auto zoo = sms::testing::make_zoo(zoo7_spec());
  sms::RunConfig config;
  config.threads = 1;
  const auto report_ = sms::testing::rank_zoo(zoo, config);
  const auto sd = sms::testing::values_by_id(zoo, report_);
  const double r = sms::pearson(sd, zoo.quality);
  const bool top1 = argmax(sd) == argmax(zoo.quality);
  const double secs = elapsed(t0);
  report(7, "synthetic zoo correlation", r >= 0.9 && top1 && secs < 60.0,
         "pearson " + fmt(r) + ", top-1 " + (top1 ? "agrees" : "differs") + ", " + fmt(secs) + " s");
}

void criterion_8() {
  // five candidates, quality 0.2 apart, class signal spread over all 64 logits
  sms::testing::ZooSpec spec;
  spec.candidates = 5;
  spec.outputs = 64;
  spec.spread = true;
  const auto zoo = sms::testing::make_zoo(spec);
  int preserved = 0, faster = 0;
  double other_full = 0.0, other_proj = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    sms::RunConfig full;
    full.seed = seed;
    sms::RunConfig proj = full;
    proj.metric = sms::Metric::Isms;
    proj.projection_dim = 16;
    const auto a = sms::testing::rank_zoo(zoo, full);
    const auto b = sms::testing::rank_zoo(zoo, proj);
    if (a.ranking.front().score.id == b.ranking.front().score.id) ++preserved;
    if (b.other_seconds < a.other_seconds) ++faster;
    other_full += a.other_seconds;
    other_proj += b.other_seconds;
  }
  report(8, "projection keeps the top candidate and is cheaper", preserved >= 18 && faster == 20,
         "top-1 kept in " + std::to_string(preserved) + "/20 seeds, other phase smaller in " + std::to_string(faster) +
             "/20 (" + fmt(other_proj) + " s vs " + fmt(other_full) + " s)");
}

void criterion_9() {
  const auto zoo = sms::testing::make_zoo(zoo7_spec());
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    sms::RunConfig config;
    config.sample_rate = 0.1;
    config.seed = seed;
    total += sms::pearson(sms::testing::values_by_id(zoo, sms::testing::rank_zoo(zoo, config)), zoo.quality);
  }
  const double mean = total / 10;
  report(9, "correlation under 10% sampling", mean >= 0.8, "mean pearson " + fmt(mean) + " over 10 seeds");
}

void criterion_10() {
  const std::vector<double> x{1, 2, 3}, y{1, 3, 2};
  const double r = sms::pearson(x, y);
  const std::vector<double> lx{0, 1, 2}, ly{0, 2, 3};
  const auto line = sms::least_squares_line(lx, ly);

  std::mt19937_64 rng(1010);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> len(1, 40);
  bool curves = true;
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<std::size_t>(len(rng));
    std::vector<std::string> ids;
    std::map<std::string, double> acc;
    for (std::size_t i = 0; i < n; ++i) {
      ids.push_back("c" + std::to_string(i));
      acc[ids.back()] = unit(rng);
    }
    std::shuffle(ids.begin(), ids.end(), rng);
    const auto curve = sms::topk_lowest_accuracy(ids, acc, n);
    double running = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
      running = std::min(running, acc[ids[k]]);
      curves = curves && curve[k].k == k + 1 && curve[k].value == running;
    }
  }
  const bool ok = std::abs(r - 0.5) <= 1e-12 && std::abs(line.slope - 1.5) <= 1e-12 &&
                  std::abs(line.intercept - 1.0 / 6) <= 1e-12 && curves;
  report(10, "evaluation oracles", ok,
         "pearson " + fmt(r) + ", line (" + fmt(line.slope) + ", " + fmt(line.intercept) + "), top-k curves " +
             (curves ? "match" : "differ"));
}

void criterion_11() {
  const sms::DiscreteDistribution p({0.5, 0.5}), q({0.25, 0.75});
  const double kpp = sms::kl_divergence(p, p);
  const double kpq = sms::kl_divergence(p, q);
  const double js = sms::js_divergence(sms::DiscreteDistribution({1.0, 0.0}), sms::DiscreteDistribution({0.0, 1.0}));

  // triangles {(0,0),(1,0),(0,1)} and {(4,4),(5,4),(4,6)}
  Matrix pts(6, 2);
  pts << 0, 0, 1, 0, 0, 1, 4, 4, 5, 4, 4, 6;
  const auto part = sms::partition_by_label(std::vector<int>{0, 0, 0, 1, 1, 1});
  const double sa = (std::sqrt(2.0) + 2 * std::sqrt(5.0)) / 9;
  const double sb = (std::sqrt(5.0) + std::sqrt(8.0) + std::sqrt(17.0)) / 9;
  const double dbi_hand = (sa + sb) / (std::sqrt(313.0) / 3);
  const double ch_hand = 313.0 / 7;
  const double dbi = sms::dbi(part, pts).value;
  const double ch = sms::ch(part, pts).value;

  // second instance: two unit-square corners 10 apart on the x axis
  Matrix sq(4, 2);
  sq << 0, 0, 0, 2, 10, 0, 10, 2;
  const auto part2 = sms::partition_by_label(std::vector<int>{0, 0, 1, 1});
  // S = 1 for both clusters, centroid gap 10; W = 4, B = 100, N - m = 2
  const double dbi2 = sms::dbi(part2, sq).value;
  const double ch2 = sms::ch(part2, sq).value;

  // 0.14384 is ln(4/3)/2 rounded to five places; the tolerance applies to the exact value
  const double kpq_exact = 0.5 * std::log(4.0 / 3.0);
  const bool ok = kpp == 0.0 && std::abs(kpq - kpq_exact) <= 1e-6 && std::round(kpq * 1e5) == 14384.0 && std::abs(js - std::numbers::ln2) <= 1e-12 &&
                  std::abs(dbi - dbi_hand) <= 1e-9 && std::abs(ch - ch_hand) <= 1e-9 && std::abs(dbi2 - 0.2) <= 1e-9 &&
                  std::abs(ch2 - 50.0) <= 1e-9;
  report(11, "baseline metric oracles", ok,
         "KL(P,P) " + fmt(kpp) + ", KL " + fmt(kpq) + ", JSD " + fmt(js) + ", DBI " + fmt(dbi) + "/" + fmt(dbi2) + ", CH " +
             fmt(ch) + "/" + fmt(ch2));
}

nlohmann::json without_timing(nlohmann::json j) {
  j.erase("timing");
  return j;
}

void criterion_12() {
  sms::testing::TempDir dir;
  auto spec = zoo7_spec();
  spec.candidates = 8;
  spec.samples = 600;
  const auto zoo = sms::testing::make_zoo(spec);
  sms::testing::write_zoo(zoo, dir / "zoo");
  sms::testing::register_zoo(zoo, dir / "zoo", dir / "db");

  auto run = [&](unsigned threads, const std::string& out) {
    std::ostringstream cmd;
    cmd << '"' << SMS_CLI_PATH << "\" rank --db \"" << (dir / "db").string() << "\" --labels \""
        << (dir / "zoo/labels.csv").string() << "\" --metric isms --proj-dim 5 --sample-rate 0.5 --seed 42 --threads "
        << threads << " --out \"" << (dir / out).string() << "\" 2>/dev/null";
    return std::system(cmd.str().c_str());
  };
  const int rc1 = run(1, "one.json");
  const int rc2 = run(4, "four.json");
  bool same = false;
  if (rc1 == 0 && rc2 == 0) {
    const auto a = nlohmann::json::parse(sms::detail::read_file(dir / "one.json"));
    const auto b = nlohmann::json::parse(sms::detail::read_file(dir / "four.json"));
    same = without_timing(a) == without_timing(b) &&
           sms::detail::read_file(dir / "one.summary.csv") == sms::detail::read_file(dir / "four.summary.csv");
  }
  report(12, "rank output independent of thread count", same,
         "exit codes " + std::to_string(rc1) + "/" + std::to_string(rc2) + ", reports " + (same ? "identical" : "differ"));
}

}  // namespace

int main() {
  const std::pair<int, void (*)()> criteria[] = {{1, criterion_1}, {2, criterion_2},   {3, criterion_3},   {4, criterion_4},
                                                 {5, criterion_5}, {6, criterion_6},   {7, criterion_7},   {8, criterion_8},
                                                 {9, criterion_9}, {10, criterion_10}, {11, criterion_11}, {12, criterion_12}};
  for (const auto& [n, run] : criteria) {
    try {
      run();
    } catch (const std::exception& e) {
      report(n, "raised an exception", false, e.what());
    }
  }
  std::cout << (12 - failures) << "/12 criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
