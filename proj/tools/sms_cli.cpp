// sms: rank source models in a model database by separation degree.
//
//   sms register --db DIR --id ID --kind KIND --file PATH --output-dim N [--meta k=v]...
//   sms list     --db DIR [--json]
//   sms rank     --db DIR --labels FILE [--metric NAME ...] [--out FILE]
//   sms evaluate --report FILE --accuracies FILE --topk K
//   sms inspect  --db DIR --id ID --labels FILE
//
// Exit codes: 0 success, 2 input/parse error, 3 numeric failure.

#include <sms/pipeline.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

constexpr int kInputError = 2;
constexpr int kNumericError = 3;

struct RankFlags {
  std::string task = "classification";
  std::string metric = "sms";
  std::string features;
  std::string target_dist;
  sms::RunConfig config;
};

void add_run_flags(CLI::App* cmd, RankFlags& f, bool ranking) {
  cmd->add_option("--task", f.task, "classification | regression")->check(CLI::IsMember({"classification", "regression"}));
  cmd->add_option("--metric", f.metric, "sms | isms | sms-regression | dbc | ldwc | dbi | ch | kld | jsd")
      ->check(CLI::IsMember({"sms", "isms", "sms-regression", "dbc", "ldwc", "dbi", "ch", "kld", "jsd"}));
  cmd->add_option("--temperature", f.config.temperature, "softmax temperature T")->capture_default_str();
  cmd->add_option("--proj-dim", f.config.projection_dim, "I-SMS projection width r")->capture_default_str();
  cmd->add_option("--sample-rate", f.config.sample_rate, "fraction of target rows used")->capture_default_str();
  cmd->add_option("--seed", f.config.seed, "run seed")->capture_default_str();
  cmd->add_option("--epsilon", f.config.epsilon, "covariance ridge")->capture_default_str();
  cmd->add_option("--bins", f.config.bins, "regression label bins")->capture_default_str();
  cmd->add_option("--features", f.features, "target features CSV for predictor candidates");
  if (ranking) {
    cmd->add_option("--topk", f.config.top_k, "number of selected models")->capture_default_str();
    cmd->add_option("--p", f.config.p, "regression weight exponent")->capture_default_str();
    cmd->add_option("--threads", f.config.threads, "worker threads")->capture_default_str();
    cmd->add_option("--target-dist", f.target_dist, "target distribution CSV for kld/jsd");
  }
}

sms::RunConfig finish(RankFlags& f) {
  f.config.task = *sms::parse_task(f.task);
  f.config.metric = *sms::parse_metric(f.metric);
  if (!f.features.empty()) f.config.features = f.features;
  if (!f.target_dist.empty()) f.config.target_distribution = f.target_dist;
  return f.config;
}

std::filesystem::path sibling(const std::filesystem::path& out, const std::string& suffix) {
  auto p = out;
  if (p.extension() == ".json") p.replace_extension();
  p += suffix;
  return p;
}

void write_text(const std::filesystem::path& path, const std::string& text) { sms::detail::write_file_atomic(path, text); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Source model selection by separation degree"};
  app.require_subcommand(1);

  // register
  std::string db_dir, id, kind = "logits-file", file;
  int output_dim = 0;
  std::vector<std::string> meta;
  auto* reg = app.add_subcommand("register", "add a candidate to the model database");
  reg->add_option("--db", db_dir, "database directory")->required();
  reg->add_option("--id", id, "candidate id")->required();
  reg->add_option("--kind", kind, "logits-file | affine-predictor | mlp-predictor")
      ->check(CLI::IsMember({"logits-file", "affine-predictor", "mlp-predictor"}));
  reg->add_option("--file", file, "logits (.csv/.bin) or weights JSON")->required();
  reg->add_option("--output-dim", output_dim, "number of output units")->required();
  reg->add_option("--meta", meta, "metadata entry key=value (repeatable)");

  // list
  bool list_json = false;
  auto* lst = app.add_subcommand("list", "list registered candidates");
  lst->add_option("--db", db_dir, "database directory")->required();
  lst->add_flag("--json", list_json, "print the manifest records as JSON");

  // rank
  RankFlags rank_flags;
  std::string labels_path, out_path;
  auto* rank = app.add_subcommand("rank", "rank all candidates on a target dataset");
  rank->add_option("--db", db_dir, "database directory")->required();
  rank->add_option("--labels", labels_path, "target labels CSV")->required();
  rank->add_option("--out", out_path, "report JSON (summary CSV written alongside)");
  add_run_flags(rank, rank_flags, true);

  // evaluate
  std::string report_path, acc_path, plot_path;
  std::size_t eval_k = 5;
  bool as_loss = false, as_accuracy = false;
  auto* eval = app.add_subcommand("evaluate", "compare a ranking report with ground-truth accuracies");
  eval->add_option("--report", report_path, "report JSON written by rank")->required();
  eval->add_option("--accuracies", acc_path, "model_id,accuracy CSV")->required();
  eval->add_option("--topk", eval_k, "largest k of the top-k curve")->capture_default_str();
  eval->add_option("--out", out_path, "output report (default: update --report in place)");
  eval->add_option("--plot", plot_path, "plot-data CSV (default: <report>.plot.csv)");
  auto* loss_flag = eval->add_flag("--loss", as_loss, "accuracies are losses (lower is better)");
  eval->add_flag("--accuracy", as_accuracy, "accuracies are accuracies (higher is better)")->excludes(loss_flag);

  // inspect
  RankFlags inspect_flags;
  auto* insp = app.add_subcommand("inspect", "pairwise separation table for one candidate");
  insp->add_option("--db", db_dir, "database directory")->required();
  insp->add_option("--id", id, "candidate id")->required();
  insp->add_option("--labels", labels_path, "target labels CSV")->required();
  insp->add_option("--out", out_path, "write JSON here instead of stdout");
  add_run_flags(insp, inspect_flags, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kInputError;
  }

  try {
    if (*reg) {
      auto db = sms::ModelDatabase::open(db_dir);
      sms::ModelCandidate c;
      c.id = id;
      c.output_dim = output_dim;
      c.kind = *sms::parse_model_kind(kind);
      c.path = file;
      for (const auto& kv : meta) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) sms::fail(sms::ErrorCode::InvalidArgument, "--meta expects key=value, got '" + kv + "'");
        c.metadata[kv.substr(0, eq)] = kv.substr(eq + 1);
      }
      const auto& stored = db.register_model(std::move(c));
      std::cout << "registered " << stored.id << " (" << sms::to_string(stored.kind) << ", " << stored.output_dim
                << " outputs) -> " << (db.root() / stored.path).string() << "\n";
    } else if (*lst) {
      const auto db = sms::ModelDatabase::open(db_dir);
      if (list_json) {
        std::cout << nlohmann::json::parse(sms::ModelDatabase::manifest_text(db.list()))["candidates"].dump(2) << "\n";
      } else {
        for (const auto& c : db.list()) std::cout << c.id << "\t" << sms::to_string(c.kind) << "\t" << c.output_dim << "\t" << c.path.generic_string() << "\n";
      }
    } else if (*rank) {
      const auto config = finish(rank_flags);
      const auto db = sms::ModelDatabase::open(db_dir);
      const auto labels = sms::load_labels(labels_path, config.task);
      const auto report = sms::run_rank(db, labels, config);
      const std::string body = report.to_json().dump(2) + "\n";
      if (out_path.empty()) {
        std::cout << body;
      } else {
        write_text(out_path, body);
        write_text(sibling(out_path, ".summary.csv"), report.summary_csv());
        std::cerr << "top-" << report.config.top_k << ":";
        for (const auto& i : report.top_k()) std::cerr << " " << i;
        std::cerr << "\n";
      }
    } else if (*eval) {
      nlohmann::json report;
      try {
        report = nlohmann::json::parse(sms::detail::read_file(report_path));
      } catch (const nlohmann::json::parse_error& e) {
        sms::fail(sms::ErrorCode::ParseError, report_path + ": " + e.what());
      }
      const auto accuracies = sms::load_accuracies(acc_path);
      std::optional<bool> loss;
      if (as_loss) loss = true;
      if (as_accuracy) loss = false;
      const auto result = sms::evaluate_report(report, accuracies, eval_k, loss);
      report["evaluation"] = result.to_json();
      const std::filesystem::path target = out_path.empty() ? std::filesystem::path(report_path) : std::filesystem::path(out_path);
      write_text(target, report.dump(2) + "\n");
      write_text(plot_path.empty() ? sibling(report_path, ".plot.csv") : std::filesystem::path(plot_path), result.plot_csv());
      std::cout << "pcc " << result.pcc << "  slope " << result.trendline.slope << "  intercept " << result.trendline.intercept << "\n";
    } else if (*insp) {
      const auto config = finish(inspect_flags);
      const auto db = sms::ModelDatabase::open(db_dir);
      const auto labels = sms::load_labels(labels_path, config.task);
      const auto result = sms::run_inspect(db, id, labels, config);
      if (result.warning) std::cerr << "warning: " << *result.warning << "\n";
      const std::string body = result.to_json().dump(2) + "\n";
      if (out_path.empty()) std::cout << body;
      else write_text(out_path, body);
    }
  } catch (const sms::StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return sms::is_input_error(e.code()) ? kInputError : kNumericError;
  } catch (const sms::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return sms::is_input_error(e.code()) ? kInputError : kNumericError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return 0;
}
