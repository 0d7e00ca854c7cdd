#pragma once

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "surropt/core.hpp"
#include "surropt/engine.hpp"
#include "surropt/feasolve.hpp"
#include "surropt/metrics.hpp"
#include "surropt/sensitivity.hpp"
#include "surropt/surrogate.hpp"

namespace surropt::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr const char* kConfigFile = "config.yaml";
inline constexpr const char* kEvaluationsFile = "evaluations.jsonl";
inline constexpr const char* kMetricsFile = "metrics.csv";
inline constexpr const char* kSensitivityFile = "sensitivity.csv";
inline constexpr const char* kTracesFile = "traces.jsonl";
inline constexpr const char* kCheckpointDir = "checkpoints";

class LogError : public std::runtime_error {
 public:
  LogError(const std::string& path, std::size_t line, const std::string& what)
      : std::runtime_error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
  [[nodiscard]] std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Shortest decimal that parses back to the same double.
[[nodiscard]] inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

[[nodiscard]] inline double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

// NaN has no JSON spelling; it is written as null.
inline json number_array(std::span<const double> v) {
  json a = json::array();
  for (double x : v) a.push_back(std::isfinite(x) ? json(x) : json(nullptr));
  return a;
}

inline std::vector<double> read_numbers(const json& a) {
  std::vector<double> out;
  for (const auto& x : a) out.push_back(x.is_null() ? std::numeric_limits<double>::quiet_NaN() : x.get<double>());
  return out;
}

[[nodiscard]] inline json to_json(const EvaluationRecord& r) {
  json j;
  j["epoch"] = r.epoch;
  j["provenance"] = std::string(to_string(r.provenance));
  j["params"] = number_array(r.params);
  j["objectives"] = number_array(r.objectives);
  j["constraints"] = r.constraints;
  return j;
}

[[nodiscard]] inline EvaluationRecord record_from_json(const json& j) {
  EvaluationRecord r;
  r.epoch = j.at("epoch").get<std::size_t>();
  r.provenance = provenance_from_string(j.at("provenance").get<std::string>());
  r.params = read_numbers(j.at("params"));
  r.objectives = read_numbers(j.at("objectives"));
  r.constraints = j.at("constraints").get<ConstraintVector>();
  return r;
}

/// Appends one compact object per line.
class JsonlWriter {
 public:
  explicit JsonlWriter(const fs::path& path) : out_(path, std::ios::app) {
    if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
  }
  void write(const json& j) {
    out_ << j.dump() << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

/// Parses a newline-delimited log. A last line without its newline or with
/// invalid content is reported as truncated, never skipped.
[[nodiscard]] inline std::vector<json> read_jsonl(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  std::vector<json> out;
  std::size_t line = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    ++line;
    const std::size_t nl = text.find('\n', pos);
    const bool last = nl == std::string::npos;
    const std::string body = text.substr(pos, last ? std::string::npos : nl - pos);
    pos = last ? text.size() : nl + 1;
    if (body.empty()) {
      if (!last) throw LogError(path.string(), line, "empty line");
      break;
    }
    json j;
    try {
      j = json::parse(body);
    } catch (const json::exception&) {
      throw LogError(path.string(), line, last || pos == text.size() ? "truncated last record" : "malformed record");
    }
    if (last) throw LogError(path.string(), line, "truncated last record (missing newline)");
    out.push_back(std::move(j));
  }
  return out;
}

[[nodiscard]] inline std::vector<EvaluationRecord> read_evaluations(const fs::path& path) {
  std::vector<EvaluationRecord> out;
  std::size_t line = 0;
  for (const auto& j : read_jsonl(path)) {
    ++line;
    try {
      out.push_back(record_from_json(j));
    } catch (const std::exception& ex) {
      throw LogError(path.string(), line, std::string("bad evaluation record: ") + ex.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metrics table

inline const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols = {"epoch",  "cumulative_evals", "hv_norm",        "feasible_count",
                                                "nrmse",  "mode",             "feasolve_steps", "wall_seconds"};
  return cols;
}

inline void write_metrics_csv(const fs::path& path, const std::vector<EpochMetrics>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (std::size_t i = 0; i < metrics_columns().size(); ++i) out << (i ? "," : "") << metrics_columns()[i];
  out << '\n';
  for (const auto& m : rows)
    out << m.epoch << ',' << m.cumulative_evals << ',' << format_double(m.hv_norm) << ',' << m.feasible_count << ','
        << format_double(m.nrmse) << ',' << m.mode << ',' << m.feasolve_steps << ',' << format_double(m.wall_seconds)
        << '\n';
}

[[nodiscard]] inline std::vector<EpochMetrics> read_metrics_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<EpochMetrics> out;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != metrics_columns().size()) throw LogError(path.string(), n, "wrong column count");
    EpochMetrics m;
    m.epoch = std::stoul(f[0]);
    m.cumulative_evals = std::stoul(f[1]);
    m.hv_norm = parse_double(f[2]);
    m.feasible_count = std::stoul(f[3]);
    m.nrmse = parse_double(f[4]);
    m.mode = f[5];
    m.feasolve_steps = std::stoul(f[6]);
    m.wall_seconds = parse_double(f[7]);
    out.push_back(std::move(m));
  }
  return out;
}

/// Rebuilds the log-derived metric columns (epoch, cumulative_evals, hv_norm,
/// feasible_count) from evaluation records alone.
[[nodiscard]] inline std::vector<EpochMetrics> recompute_metrics(const std::vector<EvaluationRecord>& records) {
  RunHistory h;
  std::size_t epoch_count = 0;
  for (const auto& r : records) {
    h.append(r);
    epoch_count = std::max(epoch_count, r.epoch + 1);
  }
  std::size_t next = 0, feasible = 0;
  for (std::size_t e = 0; e < epoch_count; ++e) {
    while (next < records.size() && records[next].epoch <= e) {
      if (records[next].feasible() && records[next].viable()) ++feasible;
      ++next;
    }
    EpochMetrics m;
    m.epoch = e;
    m.cumulative_evals = next;
    m.feasible_count = feasible;
    h.append_metrics(m);
  }
  const auto hv = Engine::archive_hv_series(h);
  std::vector<EpochMetrics> out = h.metrics();
  for (std::size_t i = 0; i < out.size(); ++i) out[i].hv_norm = hv[i];
  return out;
}

// ---------------------------------------------------------------------------
// Sensitivity report and traces

inline void append_sensitivity(const fs::path& path, std::size_t epoch, const ParameterSpace& space,
                               const SensitivityIndices& S, const moea::DistributionIndices& eta) {
  const bool fresh = !fs::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  if (fresh) out << "epoch,parameter,S_bar,eta\n";
  for (std::size_t j = 0; j < space.dim(); ++j)
    out << epoch << ',' << space.names()[j] << ',' << format_double(S.S_bar[j]) << ','
        << format_double(eta.eta_cross[j]) << '\n';
}

inline void append_traces(JsonlWriter& w, std::size_t epoch, const std::vector<feasolve::DescentTrace>& traces) {
  for (const auto& tr : traces)
    for (const auto& st : tr.steps)
      for (std::size_t i = 0; i < st.candidates.size(); ++i) {
        json j;
        j["epoch"] = epoch;
        j["step"] = st.step;
        j["candidate"] = i;
        j["params"] = number_array(st.candidates[i]);
        j["predicted_objectives"] = number_array(st.predicted_objectives[i]);
        j["predicted_feasibility"] = number_array(st.predicted_feasibility[i]);
        j["loss"] = std::isfinite(st.loss) ? json(st.loss) : json(nullptr);
        w.write(j);
      }
}

// ---------------------------------------------------------------------------
// Surrogate checkpoints

[[nodiscard]] inline json to_json(const Eigen::MatrixXd& m) {
  json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data(m.data(), m.data() + m.size());
  j["data"] = data;
  return j;
}

[[nodiscard]] inline Eigen::MatrixXd matrix_from_json(const json& j) {
  Eigen::MatrixXd m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != m.size()) throw std::invalid_argument("checkpoint: matrix size");
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

[[nodiscard]] inline json checkpoint(const JointSurrogate& f) {
  const auto& a = f.network().architecture();
  const auto& n = f.normalizer();
  const auto& s = f.space();
  json j;
  j["mode"] = std::string(to_string(f.mode()));
  j["q"] = f.q();
  j["k"] = f.k();
  j["space"] = {{"names", s.names()}, {"lower", s.lower()}, {"upper", s.upper()}};
  j["architecture"] = {{"inputs", a.inputs},
                       {"outputs", a.outputs},
                       {"blocks", a.blocks},
                       {"block_dim", a.block_dim},
                       {"hidden_multiplier", a.hidden_multiplier},
                       {"dropout1", a.dropout1},
                       {"dropout2", a.dropout2},
                       {"activation", std::string(nn::to_string(a.activation))},
                       {"final_norm", a.final_norm}};
  j["normalizer"] = {{"scaling", n.scaling == OutputScaling::range ? "range" : "none"},
                     {"y_min", n.y_min},
                     {"y_max", n.y_max},
                     {"lo", n.lo},
                     {"hi", n.hi}};
  json params = json::array();
  for (const auto& p : f.network().params()) params.push_back(to_json(p));
  j["params"] = std::move(params);
  return j;
}

[[nodiscard]] inline JointSurrogate surrogate_from_checkpoint(const json& j) {
  SurrogateConfig cfg;
  cfg.mode = surrogate_mode_from_string(j.at("mode").get<std::string>());
  const auto& ja = j.at("architecture");
  nn::Architecture a;
  a.inputs = ja.at("inputs").get<std::size_t>();
  a.outputs = ja.at("outputs").get<std::size_t>();
  a.blocks = ja.at("blocks").get<std::size_t>();
  a.block_dim = ja.at("block_dim").get<std::size_t>();
  a.hidden_multiplier = ja.at("hidden_multiplier").get<double>();
  a.dropout1 = ja.at("dropout1").get<double>();
  a.dropout2 = ja.at("dropout2").get<double>();
  a.activation = nn::activation_from_string(ja.at("activation").get<std::string>());
  a.final_norm = ja.at("final_norm").get<bool>();
  cfg.blocks = a.blocks;
  cfg.block_dim = a.block_dim;
  cfg.hidden_multiplier = a.hidden_multiplier;
  cfg.dropout1 = a.dropout1;
  cfg.dropout2 = a.dropout2;
  cfg.activation = a.activation;
  cfg.final_norm = a.final_norm;
  const auto& jn = j.at("normalizer");
  OutputNormalizer norm;
  norm.scaling = jn.at("scaling").get<std::string>() == "range" ? OutputScaling::range : OutputScaling::none;
  norm.y_min = jn.at("y_min").get<std::vector<double>>();
  norm.y_max = jn.at("y_max").get<std::vector<double>>();
  norm.lo = jn.at("lo").get<double>();
  norm.hi = jn.at("hi").get<double>();
  cfg.output_scaling = norm.scaling;
  const auto& js = j.at("space");
  ParameterSpace space(js.at("names").get<std::vector<std::string>>(), js.at("lower").get<std::vector<double>>(),
                       js.at("upper").get<std::vector<double>>());
  std::vector<Eigen::MatrixXd> params;
  for (const auto& p : j.at("params")) params.push_back(matrix_from_json(p));
  return JointSurrogate(cfg, std::move(space), j.at("q").get<std::size_t>(), j.at("k").get<std::size_t>(),
                        std::move(norm), nn::Network(a, std::move(params)));
}

inline void write_checkpoint(const fs::path& path, const JointSurrogate& f) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << checkpoint(f).dump() << '\n';
}

[[nodiscard]] inline JointSurrogate read_checkpoint(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return surrogate_from_checkpoint(json::parse(in));
}

}  // namespace surropt::io
