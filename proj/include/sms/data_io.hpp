#pragma once

// File formats consumed by the ranking engine and the built-in predictor
// used to produce logits without an external ML framework.
//
//   logits CSV     header `z0,...,z{n-1}` with optional leading `sample_id`
//   logits binary  "SMSL" | u32 N | u32 n | N*n float64, row-major, little-endian
//   labels CSV     header `sample_id,label`
//   accuracies CSV header `model_id,accuracy`
//   features CSV   optional leading `sample_id`, then one column per feature
//   weights JSON   {"layers": [{"W": [[...]], "b": [...], "activation": "relu"|"none"}]}
//   distribution   header `p`, one probability per row

#include <sms/error.hpp>
#include <sms/types.hpp>

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sms {

struct LogitMatrix {
  Matrix values;
  std::vector<std::string> sample_ids;  // empty when the file carries none

  Eigen::Index n_samples() const { return values.rows(); }
  Eigen::Index n_outputs() const { return values.cols(); }
};

enum class LogitFormat { Csv, Binary };

struct TargetLabels {
  Task task = Task::Classification;
  std::vector<double> values;     // regression targets, or class ids as doubles
  std::vector<int> classes;       // classification only
  std::vector<std::string> sample_ids;

  std::size_t size() const { return values.size(); }
};

struct PredictorWeights {
  struct Layer {
    Matrix weight;  // out x in
    Vector bias;    // out
    bool relu = false;
  };
  std::vector<Layer> layers;

  Eigen::Index input_dim() const { return layers.empty() ? 0 : layers.front().weight.cols(); }
  Eigen::Index output_dim() const { return layers.empty() ? 0 : layers.back().weight.rows(); }
};

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::FileUnreadable, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

/// Non-empty lines with their 1-based line numbers.
inline std::vector<std::pair<std::size_t, std::string_view>> csv_lines(std::string_view text) {
  std::vector<std::pair<std::size_t, std::string_view>> lines;
  std::size_t lineno = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++lineno;
    auto line = trim(text.substr(start, end - start));
    if (!line.empty()) lines.emplace_back(lineno, line);
    start = end + 1;
  }
  return lines;
}

inline std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

/// Parses a decimal double; `nan`/`inf` parse successfully so the caller can
/// report them as non-finite rather than as syntax errors.
inline std::optional<double> parse_double(std::string_view token) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || token.empty()) return std::nullopt;
  return value;
}

struct NumericTable {
  std::vector<std::string> header;  // numeric column names only
  Matrix values;
  std::vector<std::string> sample_ids;
};

/// Reads a CSV whose columns are all numeric except an optional leading
/// `sample_id`. Every value must be finite.
inline NumericTable read_numeric_csv(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  const auto lines = csv_lines(text);
  if (lines.empty()) fail(ErrorCode::EmptyFile, path.string());

  auto header = split_csv(lines.front().second);
  const bool has_ids = header.front() == "sample_id";
  const std::size_t first = has_ids ? 1 : 0;
  const std::size_t cols = header.size() - first;
  if (cols == 0) fail(ErrorCode::ParseError, where(path, lines.front().first) + ": no numeric columns");

  NumericTable table;
  for (std::size_t c = first; c < header.size(); ++c) table.header.emplace_back(header[c]);
  table.values.resize(static_cast<Eigen::Index>(lines.size() - 1), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto [lineno, line] = lines[r];
    auto fields = split_csv(line);
    if (fields.size() != header.size()) {
      fail(ErrorCode::ParseError, where(path, lineno) + ": expected " + std::to_string(header.size()) +
                                      " fields, found " + std::to_string(fields.size()));
    }
    if (has_ids) table.sample_ids.emplace_back(fields.front());
    for (std::size_t c = 0; c < cols; ++c) {
      auto value = parse_double(fields[c + first]);
      if (!value) {
        fail(ErrorCode::ParseError,
             where(path, lineno) + ": not a number: '" + std::string(fields[c + first]) + "'");
      }
      if (!std::isfinite(*value)) {
        fail(ErrorCode::NonFiniteValue, where(path, lineno) + ": row " + std::to_string(r - 1) + ", col " +
                                            std::to_string(c) + " is not finite");
      }
      table.values(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(c)) = *value;
    }
  }
  return table;
}

/// Header lookup for fixed-schema CSVs; names the missing column on failure.
inline std::vector<std::size_t> require_columns(const std::filesystem::path& path,
                                                const std::vector<std::string_view>& header,
                                                std::initializer_list<std::string_view> names) {
  std::vector<std::size_t> idx;
  for (auto name : names) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) fail(ErrorCode::ParseError, path.string() + ": missing header '" + std::string(name) + "'");
    idx.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  return idx;
}

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void put_f64(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
}

inline double get_f64(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::FileUnreadable, "cannot write '" + tmp.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::FileUnreadable, "short write to '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace detail

inline LogitFormat logit_format_for(const std::filesystem::path& path) {
  return path.extension() == ".bin" ? LogitFormat::Binary : LogitFormat::Csv;
}

inline LogitMatrix load_logits(const std::filesystem::path& path, LogitFormat format) {
  LogitMatrix out;
  if (format == LogitFormat::Csv) {
    auto table = detail::read_numeric_csv(path);
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      if (table.header[c] != "z" + std::to_string(c)) {
        fail(ErrorCode::ParseError, detail::where(path, 1) + ": expected column 'z" + std::to_string(c) +
                                        "', found '" + table.header[c] + "'");
      }
    }
    out.values = std::move(table.values);
    out.sample_ids = std::move(table.sample_ids);
    return out;
  }

  const std::string bytes = detail::read_file(path);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 12 || std::memcmp(p, "SMSL", 4) != 0) {
    fail(ErrorCode::ParseError, path.string() + ": offset 0: missing SMSL header");
  }
  const std::uint64_t rows = detail::get_u32(p + 4);
  const std::uint64_t cols = detail::get_u32(p + 8);
  const std::uint64_t expected = 12 + rows * cols * 8;
  if (bytes.size() != expected) {
    fail(ErrorCode::ParseError, path.string() + ": offset " + std::to_string(std::min<std::uint64_t>(bytes.size(), expected)) +
                                    ": payload size " + std::to_string(bytes.size()) + " != " + std::to_string(expected));
  }
  out.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::uint64_t r = 0; r < rows; ++r) {
    for (std::uint64_t c = 0; c < cols; ++c) {
      const double v = detail::get_f64(p + 12 + 8 * (r * cols + c));
      if (!std::isfinite(v)) {
        fail(ErrorCode::NonFiniteValue, path.string() + ": row " + std::to_string(r) + ", col " + std::to_string(c) +
                                            " is not finite");
      }
      out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
    }
  }
  return out;
}

inline LogitMatrix load_logits(const std::filesystem::path& path) { return load_logits(path, logit_format_for(path)); }

inline void save_logits(const std::filesystem::path& path, const LogitMatrix& logits, LogitFormat format) {
  std::string out;
  if (format == LogitFormat::Binary) {
    out.reserve(12 + static_cast<std::size_t>(logits.values.size()) * 8);
    out.append("SMSL");
    detail::put_u32(out, static_cast<std::uint32_t>(logits.n_samples()));
    detail::put_u32(out, static_cast<std::uint32_t>(logits.n_outputs()));
    for (Eigen::Index r = 0; r < logits.n_samples(); ++r)
      for (Eigen::Index c = 0; c < logits.n_outputs(); ++c) detail::put_f64(out, logits.values(r, c));
  } else {
    const bool ids = !logits.sample_ids.empty();
    if (ids) out += "sample_id,";
    for (Eigen::Index c = 0; c < logits.n_outputs(); ++c) out += (c ? ",z" : "z") + std::to_string(c);
    out += '\n';
    for (Eigen::Index r = 0; r < logits.n_samples(); ++r) {
      if (ids) out += logits.sample_ids[static_cast<std::size_t>(r)] + ",";
      for (Eigen::Index c = 0; c < logits.n_outputs(); ++c) {
        if (c) out += ',';
        out += detail::format_double(logits.values(r, c));  // shortest round-trip form
      }
      out += '\n';
    }
  }
  detail::write_file_atomic(path, out);
}

inline PredictorWeights load_weights(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(detail::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::ParseError, path.string() + ": offset " + std::to_string(e.byte) + ": " + e.what());
  }
  PredictorWeights weights;
  try {
    const auto& layers = doc.at("layers");
    if (!layers.is_array() || layers.empty()) fail(ErrorCode::ParseError, path.string() + ": 'layers' must be a non-empty array");
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const auto& node = layers[k];
      const auto rows = node.at("W").get<std::vector<std::vector<double>>>();
      const auto bias = node.at("b").get<std::vector<double>>();
      const auto act = node.value("activation", std::string("none"));
      if (act != "relu" && act != "none") fail(ErrorCode::ParseError, path.string() + ": layer " + std::to_string(k) + ": unknown activation '" + act + "'");
      if (rows.empty() || rows.front().empty()) fail(ErrorCode::ParseError, path.string() + ": layer " + std::to_string(k) + ": empty W");

      PredictorWeights::Layer layer;
      layer.relu = act == "relu";
      layer.weight.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.front().size()) fail(ErrorCode::ParseError, path.string() + ": layer " + std::to_string(k) + ": ragged W");
        for (std::size_t j = 0; j < rows[i].size(); ++j) layer.weight(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
      }
      if (bias.size() != rows.size()) fail(ErrorCode::DimensionMismatch, path.string() + ": layer " + std::to_string(k) + ": b has " + std::to_string(bias.size()) + " entries, W has " + std::to_string(rows.size()) + " rows");
      layer.bias = Eigen::Map<const Vector>(bias.data(), static_cast<Eigen::Index>(bias.size()));
      if (!layer.weight.allFinite() || !layer.bias.allFinite()) fail(ErrorCode::NonFiniteValue, path.string() + ": layer " + std::to_string(k));
      if (!weights.layers.empty() && weights.layers.back().weight.rows() != layer.weight.cols()) {
        fail(ErrorCode::DimensionMismatch, path.string() + ": layer " + std::to_string(k) + " expects input " + std::to_string(layer.weight.cols()) + ", previous layer emits " + std::to_string(weights.layers.back().weight.rows()));
      }
      weights.layers.push_back(std::move(layer));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  return weights;
}

inline void save_weights(const std::filesystem::path& path, const PredictorWeights& weights) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : weights.layers) {
    nlohmann::json w = nlohmann::json::array();
    for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) {
      std::vector<double> row(layer.weight.row(i).begin(), layer.weight.row(i).end());
      w.push_back(row);
    }
    layers.push_back({{"W", w},
                      {"b", std::vector<double>(layer.bias.begin(), layer.bias.end())},
                      {"activation", layer.relu ? "relu" : "none"}});
  }
  detail::write_file_atomic(path, nlohmann::json{{"layers", layers}}.dump(1));
}

/// Forward pass of the affine stack, one row per sample.
inline LogitMatrix predict_logits(const PredictorWeights& weights, const Matrix& features) {
  if (weights.layers.empty()) fail(ErrorCode::DimensionMismatch, "predictor has no layers");
  if (features.cols() != weights.input_dim()) {
    fail(ErrorCode::DimensionMismatch, "features have " + std::to_string(features.cols()) + " columns, predictor expects " +
                                           std::to_string(weights.input_dim()));
  }
  Matrix act = features;
  for (const auto& layer : weights.layers) {
    Matrix next = act * layer.weight.transpose();
    next.rowwise() += layer.bias.transpose();
    if (layer.relu) next = next.cwiseMax(0.0);
    act = std::move(next);
  }
  if (!act.allFinite()) fail(ErrorCode::NonFiniteValue, "predictor produced non-finite logits");
  return LogitMatrix{std::move(act), {}};
}

struct FeatureMatrix {
  Matrix values;
  std::vector<std::string> sample_ids;
};

inline FeatureMatrix load_features(const std::filesystem::path& path) {
  auto table = detail::read_numeric_csv(path);
  return FeatureMatrix{std::move(table.values), std::move(table.sample_ids)};
}

inline TargetLabels load_labels(const std::filesystem::path& path, Task task) {
  const std::string text = detail::read_file(path);
  const auto lines = detail::csv_lines(text);
  if (lines.empty()) fail(ErrorCode::EmptyFile, path.string());
  const auto header = detail::split_csv(lines.front().second);
  const auto cols = detail::require_columns(path, header, {"sample_id", "label"});

  TargetLabels labels;
  labels.task = task;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto [lineno, line] = lines[r];
    const auto fields = detail::split_csv(line);
    if (fields.size() != header.size()) fail(ErrorCode::ParseError, detail::where(path, lineno) + ": wrong field count");
    const auto token = fields[cols[1]];
    if (task == Task::Classification) {
      int id = -1;
      auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), id);
      if (ec != std::errc() || ptr != token.data() + token.size() || id < 0) {
        fail(ErrorCode::ParseError, detail::where(path, lineno) + ": class label must be a nonnegative integer, got '" + std::string(token) + "'");
      }
      labels.classes.push_back(id);
      labels.values.push_back(id);
    } else {
      auto value = detail::parse_double(token);
      if (!value) fail(ErrorCode::ParseError, detail::where(path, lineno) + ": not a number: '" + std::string(token) + "'");
      if (!std::isfinite(*value)) fail(ErrorCode::NonFiniteValue, detail::where(path, lineno) + ": label is not finite");
      labels.values.push_back(*value);
    }
    labels.sample_ids.emplace_back(fields[cols[0]]);
  }
  if (labels.values.empty()) fail(ErrorCode::EmptyFile, path.string() + ": no label rows");
  return labels;
}

inline std::map<std::string, double> load_accuracies(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  const auto lines = detail::csv_lines(text);
  if (lines.empty()) fail(ErrorCode::EmptyFile, path.string());
  const auto header = detail::split_csv(lines.front().second);
  const auto cols = detail::require_columns(path, header, {"model_id", "accuracy"});

  std::map<std::string, double> acc;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto [lineno, line] = lines[r];
    const auto fields = detail::split_csv(line);
    if (fields.size() != header.size()) fail(ErrorCode::ParseError, detail::where(path, lineno) + ": wrong field count");
    auto value = detail::parse_double(fields[cols[1]]);
    if (!value) fail(ErrorCode::ParseError, detail::where(path, lineno) + ": not a number");
    if (!std::isfinite(*value)) fail(ErrorCode::NonFiniteValue, detail::where(path, lineno) + ": accuracy is not finite");
    if (!acc.emplace(std::string(fields[cols[0]]), *value).second) {
      fail(ErrorCode::ParseError, detail::where(path, lineno) + ": duplicate model_id '" + std::string(fields[cols[0]]) + "'");
    }
  }
  if (acc.empty()) fail(ErrorCode::EmptyFile, path.string() + ": no accuracy rows");
  return acc;
}

inline std::vector<double> load_distribution(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  const auto lines = detail::csv_lines(text);
  if (lines.empty()) fail(ErrorCode::EmptyFile, path.string());
  const auto header = detail::split_csv(lines.front().second);
  const auto cols = detail::require_columns(path, header, {"p"});
  std::vector<double> probs;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = detail::split_csv(lines[r].second);
    if (fields.size() != header.size()) fail(ErrorCode::ParseError, detail::where(path, lines[r].first) + ": wrong field count");
    auto value = detail::parse_double(fields[cols[0]]);
    if (!value) fail(ErrorCode::ParseError, detail::where(path, lines[r].first) + ": not a number");
    if (!std::isfinite(*value)) fail(ErrorCode::NonFiniteValue, detail::where(path, lines[r].first));
    probs.push_back(*value);
  }
  if (probs.empty()) fail(ErrorCode::EmptyFile, path.string() + ": no probabilities");
  return probs;
}

/// Logits join labels by row order; ids, when both sides have them, must agree.
inline void check_joinable(const LogitMatrix& logits, const TargetLabels& labels, std::string_view what) {
  if (static_cast<std::size_t>(logits.n_samples()) != labels.size()) {
    fail(ErrorCode::DimensionMismatch, std::string(what) + ": " + std::to_string(logits.n_samples()) + " logit rows vs " +
                                           std::to_string(labels.size()) + " labels");
  }
  if (!logits.sample_ids.empty() && !labels.sample_ids.empty()) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (logits.sample_ids[i] != labels.sample_ids[i]) {
        fail(ErrorCode::ParseError, std::string(what) + ": row " + std::to_string(i) + " sample_id '" + logits.sample_ids[i] +
                                        "' does not match label sample_id '" + labels.sample_ids[i] + "'");
      }
    }
  }
}

}  // namespace sms
