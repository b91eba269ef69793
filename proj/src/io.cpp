#include "protonet/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "protonet/error.hpp"

namespace protonet {

namespace {

std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void dump_into(const Json& value, int depth, std::string& out) {
  const std::string pad(static_cast<std::size_t>(2 * (depth + 1)), ' ');
  const std::string close_pad(static_cast<std::size_t>(2 * depth), ' ');
  switch (value.type()) {
    case Json::value_t::number_float: {
      const double v = value.get<double>();
      out += std::isfinite(v) ? format_double(v) : "null";
      break;
    }
    case Json::value_t::object: {
      if (value.empty()) {
        out += "{}";
        break;
      }
      out += "{\n";
      bool first = true;
      for (const auto& [key, item] : value.items()) {
        if (!first) out += ",\n";
        first = false;
        out += pad + Json(key).dump() + ": ";
        dump_into(item, depth + 1, out);
      }
      out += "\n" + close_pad + "}";
      break;
    }
    case Json::value_t::array: {
      if (value.empty()) {
        out += "[]";
        break;
      }
      const bool flat = std::none_of(value.begin(), value.end(), [](const Json& v) { return v.is_structured(); });
      if (flat) {
        out += "[";
        for (std::size_t i = 0; i < value.size(); ++i) {
          if (i) out += ", ";
          dump_into(value[i], depth + 1, out);
        }
        out += "]";
        break;
      }
      out += "[\n";
      for (std::size_t i = 0; i < value.size(); ++i) {
        if (i) out += ",\n";
        out += pad;
        dump_into(value[i], depth + 1, out);
      }
      out += "\n" + close_pad + "]";
      break;
    }
    default:
      out += value.dump();
  }
}

Json parse_json_document(const std::string& text, const std::string& source_name) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::parse_error, source_name + ": " + e.what());
  }
}

std::vector<std::string> string_list(const Json& doc, const char* key, const std::string& source_name) {
  if (!doc.contains(key)) throw Error(ErrorCode::parse_error, source_name + ": missing key '" + key + "'");
  const Json& list = doc.at(key);
  if (!list.is_array()) throw Error(ErrorCode::parse_error, source_name + ": '" + key + "' must be a list");
  std::vector<std::string> out;
  for (const auto& item : list) {
    if (!item.is_string() || item.get<std::string>().empty()) {
      throw Error(ErrorCode::parse_error, source_name + ": '" + key + "' entries must be nonempty strings, got " +
                                              item.dump());
    }
    out.push_back(item.get<std::string>());
  }
  return out;
}

Json interval_json(const Interval& i) { return Json{{"mean", i.mean}, {"ci95", i.half_width}}; }

Json definitions_json() {
  return Json{
      {"ci_definition", "1.96*std/sqrt(M)"},
      {"std_definition", "sample standard deviation over episodes (M-1 denominator); 0 when M = 1"},
      {"hierarchical_precision_definition",
       "|anc(pred) & anc(true)| / |anc(pred)|, anc = ancestors at levels 2..L including the leaf"},
      {"level_accuracy_definition",
       "hierarchical head: argmax over level-l prototypes; flat heads: predicted leaf mapped to its level-l "
       "ancestor"},
      {"level_accuracy_leaf_mapped_definition", "predicted leaf mapped to its level-l ancestor, all heads"},
      {"units", "percent"}};
}

template <typename T>
Json matrix_rows(const T& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json vector_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Matrix matrix_from(const Json& doc, const char* key, Eigen::Index rows, Eigen::Index cols, const std::string& src) {
  const Json& m = doc.at(key);
  if (!m.is_array() || static_cast<Eigen::Index>(m.size()) != rows) {
    throw Error(ErrorCode::parse_error, src + ": '" + key + "' must have " + std::to_string(rows) + " rows");
  }
  Matrix out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Json& row = m[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw Error(ErrorCode::parse_error, src + ": '" + key + "' row " + std::to_string(r) + " must have " +
                                              std::to_string(cols) + " entries");
    }
    for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  if (!out.allFinite()) throw Error(ErrorCode::non_finite, src + ": '" + key + "' has non-finite entries");
  return out;
}

Vector vector_from(const Json& doc, const char* key, Eigen::Index size, const std::string& src) {
  const Json& v = doc.at(key);
  if (!v.is_array() || static_cast<Eigen::Index>(v.size()) != size) {
    throw Error(ErrorCode::parse_error, src + ": '" + key + "' must have " + std::to_string(size) + " entries");
  }
  Vector out(size);
  for (Eigen::Index i = 0; i < size; ++i) out[i] = v[static_cast<std::size_t>(i)].get<double>();
  if (!out.allFinite()) throw Error(ErrorCode::non_finite, src + ": '" + key + "' has non-finite entries");
  return out;
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, std::string("cannot open ") + what + " file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::io_error, "write failed for " + path.string());
}

// ---- embeddings ----

EmbeddingSet parse_embeddings(const std::string& text, const std::string& source_name) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto where = [&] { return source_name + ":" + std::to_string(line_no); };

  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto header = split_fields(line, ',');
    if (header.size() < 3 || trim(header[0]) != "id" || trim(header[1]) != "label") {
      throw Error(ErrorCode::parse_error, where() + ": header must be 'id,label,e0,...', got '" + line + "'");
    }
    for (std::size_t i = 2; i < header.size(); ++i) {
      if (trim(header[i]) != "e" + std::to_string(i - 2)) {
        throw Error(ErrorCode::parse_error, where() + ": header column " + std::to_string(i) + " is '" +
                                                header[i] + "', expected 'e" + std::to_string(i - 2) + "'");
      }
    }
    dim = header.size() - 2;
    break;
  }
  if (dim == 0) throw Error(ErrorCode::parse_error, source_name + ": missing header");

  std::vector<std::string> ids, labels;
  std::vector<double> values;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line, ',');
    if (fields.size() != dim + 2) {
      throw Error(ErrorCode::parse_error,
                  where() + ": expected " + std::to_string(dim + 2) + " fields, got " +
                      std::to_string(fields.size()));
    }
    std::string id = trim(fields[0]);
    std::string label = trim(fields[1]);
    if (id.empty()) throw Error(ErrorCode::parse_error, where() + ": empty id");
    if (label.empty()) throw Error(ErrorCode::parse_error, where() + ": empty label for id '" + id + "'");
    if (!seen.insert(id).second) throw Error(ErrorCode::duplicate_id, where() + ": duplicate id '" + id + "'");
    for (std::size_t i = 2; i < fields.size(); ++i) {
      const std::string token = trim(fields[i]);
      double v = 0.0;
      const char* end = token.data() + token.size();
      auto [ptr, ec] = std::from_chars(token.data(), end, v);
      if (token.empty() || ec != std::errc() || ptr != end) {
        throw Error(ErrorCode::parse_error, where() + ": column e" + std::to_string(i - 2) + ": '" + token +
                                                "' is not a number");
      }
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::non_finite, where() + ": column e" + std::to_string(i - 2) + ": '" + token + "'");
      }
      values.push_back(v);
    }
    ids.push_back(std::move(id));
    labels.push_back(std::move(label));
  }
  if (ids.empty()) throw Error(ErrorCode::parse_error, source_name + ": no records after header");

  Matrix vectors = Eigen::Map<const Matrix>(values.data(), static_cast<Eigen::Index>(dim),
                                            static_cast<Eigen::Index>(ids.size()));
  return EmbeddingSet(std::move(ids), std::move(labels), std::move(vectors));
}

EmbeddingSet load_embeddings(const std::filesystem::path& path) {
  return parse_embeddings(read_text_file(path, "embeddings"), path.string());
}

std::string format_embeddings(const EmbeddingSet& data) {
  std::string out = "id,label";
  for (Eigen::Index i = 0; i < data.dim(); ++i) out += ",e" + std::to_string(i);
  out += "\n";
  for (std::size_t row = 0; row < data.size(); ++row) {
    out += data.id(row) + "," + data.label(row);
    for (Eigen::Index i = 0; i < data.dim(); ++i) {
      out += "," + format_double(data.vectors()(i, static_cast<Eigen::Index>(row)));
    }
    out += "\n";
  }
  return out;
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingSet& data) {
  write_text_file(path, format_embeddings(data));
}

// ---- splits ----

DatasetSplit parse_splits(const std::string& text, const std::string& source_name) {
  const Json doc = parse_json_document(text, source_name);
  if (!doc.is_object()) throw Error(ErrorCode::parse_error, source_name + ": expected a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key != "base" && key != "val" && key != "novel") {
      throw Error(ErrorCode::unknown_key, source_name + ": unknown key '" + key + "'");
    }
  }
  DatasetSplit split{string_list(doc, "base", source_name), string_list(doc, "val", source_name),
                     string_list(doc, "novel", source_name)};
  std::map<std::string, std::string> owner;
  for (const auto& [name, labels] : {std::pair{"base", &split.base}, {"val", &split.val}, {"novel", &split.novel}}) {
    for (const auto& label : *labels) {
      auto [it, inserted] = owner.emplace(label, name);
      if (!inserted) {
        throw Error(ErrorCode::overlap, source_name + ": label '" + label + "' appears in both '" + it->second +
                                            "' and '" + name + "'");
      }
    }
  }
  return split;
}

DatasetSplit load_splits(const std::filesystem::path& path) {
  return parse_splits(read_text_file(path, "splits"), path.string());
}

Json splits_to_json(const DatasetSplit& split) {
  return Json{{"base", split.base}, {"val", split.val}, {"novel", split.novel}};
}

// ---- config ----

double RunConfig::resolved_lr() const {
  if (lr) return *lr;
  return head.metric == Metric::hyperbolic ? 1e-4 : 1e-3;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.sgd = SgdConfig{resolved_lr(), momentum, weight_decay};
  t.epochs = epochs;
  t.episodes_per_epoch = episodes_per_epoch;
  t.batch_episodes = batch_episodes;
  t.val_episodes = val_episodes;
  t.shape = shape;
  t.head = head;
  t.out_dim = out_dim;
  t.seed = seed;
  t.threads = threads;
  return t;
}

EvalOptions RunConfig::eval_options() const { return EvalOptions{shape, episodes, seed, threads}; }

void RunConfig::validate() const {
  static const std::set<std::string> modes{"eval", "train", "gradcheck", "selftest"};
  if (!modes.contains(mode)) {
    throw Error(ErrorCode::invalid_value, "mode: expected eval|train|gradcheck|selftest, got '" + mode + "'");
  }
  head.validate();
  shape.validate();
  if (episodes < 1) throw Error(ErrorCode::invalid_value, "episodes: must be >= 1");
  if (threads < 1) throw Error(ErrorCode::invalid_value, "threads: must be >= 1");
  if (!(fd_step > 0.0) || !std::isfinite(fd_step)) throw Error(ErrorCode::invalid_value, "fd_step: must be > 0");
  train_config().validate();
}

namespace {

void apply_json(RunConfig& cfg, const Json& doc, const std::string& source_name) {
  if (doc.is_null()) return;
  if (!doc.is_object()) throw Error(ErrorCode::parse_error, source_name + ": config must be a JSON object");

  auto bad = [&](const std::string& key, const std::string& why) {
    throw Error(ErrorCode::invalid_value, key + ": " + why + " (" + source_name + ")");
  };
  auto as_string = [&](const std::string& key, const Json& v) {
    if (!v.is_string()) bad(key, "expected a string, got " + v.dump());
    return v.get<std::string>();
  };
  auto as_double = [&](const std::string& key, const Json& v) {
    if (!v.is_number()) bad(key, "expected a number, got " + v.dump());
    return v.get<double>();
  };
  auto as_int = [&](const std::string& key, const Json& v) -> int {
    if (v.is_number_integer()) {
      const auto x = v.get<std::int64_t>();
      if (x < INT32_MIN || x > INT32_MAX) bad(key, "out of range: " + v.dump());
      return static_cast<int>(x);
    }
    if (v.is_number_float()) {
      const double x = v.get<double>();
      if (x == std::floor(x) && std::abs(x) < 2147483647.0) return static_cast<int>(x);
    }
    bad(key, "expected an integer, got " + v.dump());
    return 0;
  };

  for (const auto& [key, v] : doc.items()) {
    if (key == "mode") cfg.mode = as_string(key, v);
    else if (key == "embeddings") cfg.embeddings = as_string(key, v);
    else if (key == "hierarchy") cfg.hierarchy = as_string(key, v);
    else if (key == "splits") cfg.splits = as_string(key, v);
    else if (key == "model") cfg.model = as_string(key, v);
    else if (key == "metric") {
      try {
        cfg.head.metric = parse_metric(as_string(key, v));
      } catch (const Error& e) {
        bad(key, e.message());
      }
    }
    else if (key == "tau") cfg.head.tau = as_double(key, v);
    else if (key == "c") cfg.head.c = as_double(key, v);
    else if (key == "r") cfg.head.r = as_double(key, v);
    else if (key == "gamma") cfg.head.gamma = as_double(key, v);
    else if (key == "k") cfg.shape.ways = as_int(key, v);
    else if (key == "n") cfg.shape.shots = as_int(key, v);
    else if (key == "n_query") cfg.shape.queries = as_int(key, v);
    else if (key == "episodes") cfg.episodes = as_int(key, v);
    else if (key == "seed") {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        bad(key, "expected a nonnegative integer, got " + v.dump());
      }
      cfg.seed = v.get<std::uint64_t>();
    }
    else if (key == "lr") cfg.lr = as_double(key, v);
    else if (key == "momentum") cfg.momentum = as_double(key, v);
    else if (key == "weight_decay") cfg.weight_decay = as_double(key, v);
    else if (key == "epochs") cfg.epochs = as_int(key, v);
    else if (key == "episodes_per_epoch") cfg.episodes_per_epoch = as_int(key, v);
    else if (key == "batch_episodes") cfg.batch_episodes = as_int(key, v);
    else if (key == "val_episodes") cfg.val_episodes = as_int(key, v);
    else if (key == "out_dim") cfg.out_dim = as_int(key, v);
    else if (key == "fd_step") cfg.fd_step = as_double(key, v);
    else if (key == "threads") cfg.threads = as_int(key, v);
    else throw Error(ErrorCode::unknown_key, source_name + ": unknown key '" + key + "'");
  }
}

}  // namespace

RunConfig config_from_json(const Json& merged, const std::string& source_name) {
  RunConfig cfg;
  cfg.threads = default_thread_count();
  apply_json(cfg, merged, source_name);
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::optional<std::filesystem::path>& path, const Json& overrides) {
  RunConfig cfg;
  cfg.threads = default_thread_count();
  if (path) {
    const std::string text = read_text_file(*path, "config");
    Json doc = trim(text).empty() ? Json() : parse_json_document(text, path->string());
    // A report carries its resolved config; reuse it to reproduce the run.
    if (doc.is_object() && doc.contains("format") && doc.contains("config") && doc["config"].is_object()) {
      doc = Json(doc["config"]);
    }
    apply_json(cfg, doc, path->string());
  }
  apply_json(cfg, overrides, "command line");
  cfg.validate();
  return cfg;
}

Json config_to_json(const RunConfig& cfg) {
  return Json{{"mode", cfg.mode},
              {"embeddings", cfg.embeddings},
              {"hierarchy", cfg.hierarchy},
              {"splits", cfg.splits},
              {"model", cfg.model},
              {"metric", std::string(to_string(cfg.head.metric))},
              {"tau", cfg.head.tau},
              {"c", cfg.head.c},
              {"r", cfg.head.r},
              {"gamma", cfg.head.gamma},
              {"k", cfg.shape.ways},
              {"n", cfg.shape.shots},
              {"n_query", cfg.shape.queries},
              {"episodes", cfg.episodes},
              {"seed", cfg.seed},
              {"lr", cfg.resolved_lr()},
              {"momentum", cfg.momentum},
              {"weight_decay", cfg.weight_decay},
              {"epochs", cfg.epochs},
              {"episodes_per_epoch", cfg.episodes_per_epoch},
              {"batch_episodes", cfg.batch_episodes},
              {"val_episodes", cfg.val_episodes},
              {"out_dim", cfg.out_dim},
              {"fd_step", cfg.fd_step}};
}

// ---- reports ----

std::string dump_json(const Json& value) {
  std::string out;
  dump_into(value, 0, out);
  out += "\n";
  return out;
}

std::string format_interval(const Interval& interval) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f ± %.2f", interval.mean, interval.half_width);
  return buf;
}

Json eval_report_to_json(const EvalReport& report, const RunConfig& cfg) {
  Json levels = Json::object();
  Json mapped = Json::object();
  std::string header = "overall acc";
  std::string row = format_interval(report.overall);
  for (auto it = report.level.rbegin(); it != report.level.rend(); ++it) {
    header += "\tL" + std::to_string(it->first) + "-acc";
    row += "\t" + format_interval(it->second);
  }
  for (const auto& [l, interval] : report.level) levels[std::to_string(l)] = interval_json(interval);
  for (const auto& [l, interval] : report.level_leaf_mapped) mapped[std::to_string(l)] = interval_json(interval);
  header += "\tP_H";
  row += "\t" + format_interval(report.hierarchical_precision);

  return Json{{"format", "protonet-eval-report"},
              {"version", 1},
              {"config", config_to_json(cfg)},
              {"seed", report.options.seed},
              {"episodes", report.options.episodes},
              {"episode_shape",
               {{"ways", report.options.shape.ways},
                {"shots", report.options.shape.shots},
                {"queries_per_class", report.options.shape.queries},
                {"support_per_episode", report.support_per_episode},
                {"queries_per_episode", report.queries_per_episode}}},
              {"hierarchy_height", report.height},
              {"metrics",
               {{"overall_accuracy", interval_json(report.overall)},
                {"level_accuracy", levels},
                {"level_accuracy_leaf_mapped", mapped},
                {"hierarchical_precision", interval_json(report.hierarchical_precision)}}},
              {"table", {{"header", header}, {"row", row}}},
              {"ci_degenerate", report.ci_degenerate},
              {"definitions", definitions_json()}};
}

Json gradcheck_report_to_json(const GradCheckReport& report, const RunConfig& cfg, std::uint64_t episode_index) {
  return Json{{"format", "protonet-gradcheck-report"},
              {"version", 1},
              {"config", config_to_json(cfg)},
              {"seed", cfg.seed},
              {"episode_index", episode_index},
              {"parameters", report.parameters},
              {"step", report.step},
              {"max_rel_error_weight", report.max_rel_error_weight},
              {"max_rel_error_bias", report.max_rel_error_bias},
              {"max_rel_error", report.max_rel_error},
              {"reference_loss_gap", report.reference_loss_gap},
              {"threshold", report.threshold},
              {"passed", report.passed},
              {"rel_error_definition", "|a-n|/max(|a|,|n|,1e-8), central differences of a 113-bit loss evaluation"}};
}

Json train_report_to_json(const TrainResult& result, const RunConfig& cfg, const EvalReport& novel_initial,
                          const EvalReport& novel_best) {
  Json curve = Json::array();
  for (const auto& e : result.curve) {
    curve.push_back(Json{{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"val_accuracy", e.val_accuracy}});
  }
  return Json{{"format", "protonet-train-report"},
              {"version", 1},
              {"config", config_to_json(cfg)},
              {"seed", cfg.seed},
              {"curve", curve},
              {"best_epoch", result.best_epoch},
              {"best_val_accuracy", result.best_val_accuracy},
              {"novel_accuracy_initial", interval_json(novel_initial.overall)},
              {"novel_accuracy_best", interval_json(novel_best.overall)},
              {"novel_table_best", format_interval(novel_best.overall)},
              {"definitions", definitions_json()}};
}

// ---- checkpoints ----

std::string config_hash(const RunConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : dump_json(config_to_json(cfg))) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Json checkpoint_to_json(const Checkpoint& checkpoint) {
  const auto& m = checkpoint.model;
  return Json{{"format", "protonet-checkpoint"},
              {"version", 1},
              {"in_dim", m.in_dim()},
              {"out_dim", m.out_dim()},
              {"config_hash", checkpoint.config_hash},
              {"weight", matrix_rows(m.weight)},
              {"bias", vector_json(m.bias)},
              {"weight_velocity", matrix_rows(checkpoint.state.weight_velocity)},
              {"bias_velocity", vector_json(checkpoint.state.bias_velocity)}};
}

Checkpoint checkpoint_from_json(const Json& doc, const std::string& src) {
  try {
    if (!doc.is_object() || doc.value("format", "") != "protonet-checkpoint") {
      throw Error(ErrorCode::parse_error, src + ": not a protonet checkpoint");
    }
    if (doc.at("version").get<int>() != 1) {
      throw Error(ErrorCode::parse_error, src + ": unsupported checkpoint version " + doc.at("version").dump());
    }
    const auto in_dim = doc.at("in_dim").get<Eigen::Index>();
    const auto out_dim = doc.at("out_dim").get<Eigen::Index>();
    if (in_dim < 1 || out_dim < 1) throw Error(ErrorCode::parse_error, src + ": dimensions must be >= 1");
    Checkpoint cp;
    cp.config_hash = doc.at("config_hash").get<std::string>();
    cp.model.weight = matrix_from(doc, "weight", out_dim, in_dim, src);
    cp.model.bias = vector_from(doc, "bias", out_dim, src);
    cp.state.weight_velocity = matrix_from(doc, "weight_velocity", out_dim, in_dim, src);
    cp.state.bias_velocity = vector_from(doc, "bias_velocity", out_dim, src);
    return cp;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, src + ": " + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  write_text_file(path, dump_json(checkpoint_to_json(checkpoint)));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string src = path.string();
  return checkpoint_from_json(parse_json_document(read_text_file(path, "checkpoint"), src), src);
}

}  // namespace protonet
