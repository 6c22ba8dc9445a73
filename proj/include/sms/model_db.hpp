#pragma once

// On-disk model database.
//
//   <root>/manifest.json                      candidate records, registration order
//   <root>/models/<id>.{csv|bin|weights.json} prediction source per candidate
//
// Single writer, many readers. The manifest is replaced atomically.

#include <sms/data_io.hpp>
#include <sms/error.hpp>

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sms {

enum class ModelKind { LogitsFile, AffinePredictor, MlpPredictor };

constexpr std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::LogitsFile: return "logits-file";
    case ModelKind::AffinePredictor: return "affine-predictor";
    case ModelKind::MlpPredictor: return "mlp-predictor";
  }
  return "";
}

inline std::optional<ModelKind> parse_model_kind(std::string_view s) {
  if (s == "logits-file") return ModelKind::LogitsFile;
  if (s == "affine-predictor") return ModelKind::AffinePredictor;
  if (s == "mlp-predictor") return ModelKind::MlpPredictor;
  return std::nullopt;
}

struct ModelCandidate {
  std::string id;
  int output_dim = 0;
  ModelKind kind = ModelKind::LogitsFile;
  std::filesystem::path path;  // relative to the database root once registered
  std::map<std::string, std::string> metadata;

  bool operator==(const ModelCandidate&) const = default;
};

namespace detail {

/// Byte offsets of the objects that are direct elements of the top-level
/// "candidates" array. Lets manifest errors point at a line number, which the
/// JSON DOM does not retain.
inline std::vector<std::size_t> record_offsets(std::string_view text) {
  std::vector<std::size_t> offsets;
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    switch (c) {
      case '"': in_string = true; break;
      case '{':
      case '[':
        if (c == '{' && depth == 2) offsets.push_back(i);
        ++depth;
        break;
      case '}':
      case ']': --depth; break;
      default: break;
    }
  }
  return offsets;
}

inline std::size_t line_of(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

inline std::string model_file_name(const std::string& id, ModelKind kind, const std::filesystem::path& source) {
  if (kind != ModelKind::LogitsFile) return id + ".weights.json";
  return id + (logit_format_for(source) == LogitFormat::Binary ? ".bin" : ".csv");
}

inline bool valid_id(const std::string& id) {
  if (id.empty()) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  }) && id != "." && id != "..";
}

/// Parses the prediction source and returns its output width.
inline int probe_output_dim(ModelKind kind, const std::filesystem::path& file) {
  if (kind == ModelKind::LogitsFile) return static_cast<int>(load_logits(file).n_outputs());
  const auto weights = load_weights(file);
  if (kind == ModelKind::AffinePredictor && weights.layers.size() != 1) {
    fail(ErrorCode::ParseError, file.string() + ": affine-predictor must have exactly one layer, found " +
                                    std::to_string(weights.layers.size()));
  }
  return static_cast<int>(weights.output_dim());
}

}  // namespace detail

class ModelDatabase {
 public:
  /// Opens an existing database or an empty one at `root` (nothing is written
  /// until the first registration).
  static ModelDatabase open(const std::filesystem::path& root) {
    ModelDatabase db(root);
    if (std::filesystem::exists(db.manifest_path())) db.candidates_ = read_manifest(db.manifest_path());
    return db;
  }

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path manifest_path() const { return root_ / "manifest.json"; }

  /// Candidates in registration order.
  const std::vector<ModelCandidate>& list() const { return candidates_; }

  const ModelCandidate* find(std::string_view id) const {
    for (const auto& c : candidates_)
      if (c.id == id) return &c;
    return nullptr;
  }

  const ModelCandidate& get(std::string_view id) const {
    if (const auto* c = find(id)) return *c;
    fail(ErrorCode::UnknownCandidate, "no candidate '" + std::string(id) + "' in " + root_.string());
  }

  std::filesystem::path resolve(const ModelCandidate& c) const { return c.path.is_absolute() ? c.path : root_ / c.path; }

  /// Validates `source`, copies it to models/<id>.<ext> and rewrites the
  /// manifest. `candidate.path` is the source file.
  const ModelCandidate& register_model(ModelCandidate candidate) {
    if (!detail::valid_id(candidate.id)) fail(ErrorCode::InvalidArgument, "invalid candidate id '" + candidate.id + "'");
    if (find(candidate.id)) fail(ErrorCode::DuplicateId, "candidate '" + candidate.id + "' already registered");
    if (candidate.output_dim < 2) fail(ErrorCode::InvalidArgument, "output_dim must be >= 2, got " + std::to_string(candidate.output_dim));
    const auto source = candidate.path;
    if (!std::filesystem::is_regular_file(source)) fail(ErrorCode::FileUnreadable, "cannot read '" + source.string() + "'");

    const int found = detail::probe_output_dim(candidate.kind, source);
    if (found != candidate.output_dim) {
      fail(ErrorCode::DimensionMismatch, "'" + source.string() + "' has " + std::to_string(found) +
                                             " outputs, declared output_dim " + std::to_string(candidate.output_dim));
    }

    std::filesystem::create_directories(root_ / "models");
    const auto rel = std::filesystem::path("models") / detail::model_file_name(candidate.id, candidate.kind, source);
    std::filesystem::copy_file(source, root_ / rel, std::filesystem::copy_options::overwrite_existing);
    candidate.path = rel;

    auto next = candidates_;
    next.push_back(std::move(candidate));
    write_manifest(manifest_path(), next);
    candidates_ = std::move(next);
    return candidates_.back();
  }

  void save() const {
    std::filesystem::create_directories(root_);
    write_manifest(manifest_path(), candidates_);
  }

  static std::string manifest_text(const std::vector<ModelCandidate>& candidates) {
    // One record per line keeps diffs readable and error lines meaningful.
    std::string out = "{\n  \"version\": 1,\n  \"candidates\": [";
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const auto& c = candidates[i];
      nlohmann::json rec = {{"id", c.id},
                            {"output_dim", c.output_dim},
                            {"kind", std::string(to_string(c.kind))},
                            {"path", c.path.generic_string()},
                            {"metadata", c.metadata}};
      out += i ? ",\n    " : "\n    ";
      out += rec.dump();
    }
    out += candidates.empty() ? "]\n}\n" : "\n  ]\n}\n";
    return out;
  }

  static void write_manifest(const std::filesystem::path& path, const std::vector<ModelCandidate>& candidates) {
    detail::write_file_atomic(path, manifest_text(candidates));
  }

  static std::vector<ModelCandidate> read_manifest(const std::filesystem::path& path) {
    const std::string text = detail::read_file(path);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorCode::CorruptManifest, path.string() + ":" + std::to_string(detail::line_of(text, e.byte ? e.byte - 1 : 0)) +
                                           ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("candidates") || !doc["candidates"].is_array()) {
      fail(ErrorCode::CorruptManifest, path.string() + ":1: missing 'candidates' array");
    }
    const auto offsets = detail::record_offsets(text);
    const auto& records = doc["candidates"];

    std::vector<ModelCandidate> out;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const std::size_t line = i < offsets.size() ? detail::line_of(text, offsets[i]) : 0;
      auto bad = [&](const std::string& why) -> void {
        fail(ErrorCode::CorruptManifest, path.string() + ":" + std::to_string(line) + ": record " + std::to_string(i) + ": " + why);
      };
      const auto& rec = records[i];
      if (!rec.is_object()) bad("not an object");
      for (const char* key : {"id", "output_dim", "kind", "path", "metadata"})
        if (!rec.contains(key)) bad(std::string("missing key '") + key + "'");
      if (!rec["id"].is_string()) bad("'id' must be a string");
      if (!rec["output_dim"].is_number_integer() || rec["output_dim"].get<long long>() < 2) bad("'output_dim' must be an integer >= 2");
      if (!rec["kind"].is_string() || !parse_model_kind(rec["kind"].get<std::string>())) bad("unknown 'kind'");
      if (!rec["path"].is_string()) bad("'path' must be a string");
      if (!rec["metadata"].is_object()) bad("'metadata' must be an object");

      ModelCandidate c;
      c.id = rec["id"].get<std::string>();
      c.output_dim = rec["output_dim"].get<int>();
      c.kind = *parse_model_kind(rec["kind"].get<std::string>());
      c.path = rec["path"].get<std::string>();
      for (const auto& [k, v] : rec["metadata"].items()) {
        if (!v.is_string()) bad("metadata value for '" + k + "' must be a string");
        c.metadata[k] = v.get<std::string>();
      }
      for (const auto& prev : out)
        if (prev.id == c.id) bad("duplicate id '" + c.id + "'");
      out.push_back(std::move(c));
    }
    return out;
  }

 private:
  explicit ModelDatabase(std::filesystem::path root) : root_(std::move(root)) {}

  std::filesystem::path root_;
  std::vector<ModelCandidate> candidates_;
};

}  // namespace sms
