#pragma once

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "surropt/engine.hpp"

namespace surropt::config {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// What the command line runs: the engine config plus persistence options.
struct Settings {
  RunConfig run;
  bool checkpoints = false;
};

[[nodiscard]] inline std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// Closest candidate within a third of the key's length, if any.
[[nodiscard]] inline std::optional<std::string> suggest(const std::string& key, const std::vector<std::string>& keys) {
  std::optional<std::string> best;
  std::size_t best_d = std::max<std::size_t>(2, key.size() / 3) + 1;
  for (const auto& k : keys) {
    const std::size_t d = edit_distance(key, k);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

namespace detail {

inline std::string where(const std::string& source, const YAML::Node& n) {
  const auto m = n.Mark();
  return source + ":" + std::to_string(m.line + 1);
}

class Section {
 public:
  Section(const YAML::Node& node, std::string source, std::string prefix, std::vector<std::string> keys)
      : node_(node), source_(std::move(source)), prefix_(std::move(prefix)), keys_(std::move(keys)) {
    if (!node_.IsMap()) throw ConfigError(where(source_, node_) + ": '" + prefix_ + "' must be a mapping");
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (std::find(keys_.begin(), keys_.end(), key) != keys_.end()) continue;
      std::string msg = where(source_, kv.first) + ": unknown key '" + qualified(key) + "'";
      if (const auto s = suggest(key, keys_)) msg += " (did you mean '" + qualified(*s) + "'?)";
      throw ConfigError(msg);
    }
  }

  template <typename T>
  void get(const std::string& key, T& out) const {
    const auto n = node_[key];
    if (!n) return;
    try {
      out = n.template as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(where(source_, n) + ": bad value for '" + qualified(key) + "'");
    }
  }

  template <typename T, typename Parse>
  void get_as(const std::string& key, T& out, Parse parse) const {
    std::string s;
    get(key, s);
    if (s.empty()) return;
    try {
      out = parse(s);
    } catch (const std::exception& ex) {
      throw ConfigError(where(source_, node_[key]) + ": '" + qualified(key) + "': " + ex.what());
    }
  }

  [[nodiscard]] std::optional<Section> child(const std::string& key, std::vector<std::string> keys) const {
    const auto n = node_[key];
    if (!n) return std::nullopt;
    return Section(n, source_, qualified(key), std::move(keys));
  }

  [[nodiscard]] YAML::Node node(const std::string& key) const { return node_[key]; }
  [[nodiscard]] const std::string& source() const noexcept { return source_; }

 private:
  std::string qualified(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  YAML::Node node_;
  std::string source_;
  std::string prefix_;
  std::vector<std::string> keys_;
};

}  // namespace detail

/// Parses YAML text; `source` names the input in diagnostics.
[[nodiscard]] inline Settings parse(const std::string& text, const std::string& source = "<config>") {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& ex) {
    throw ConfigError(source + ":" + std::to_string(ex.mark.line + 1) + ": " + ex.msg);
  }
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  const detail::Section top(root, source, "",
                            {"problem", "seed", "initial_samples", "evaluations_per_epoch", "population_size", "epochs",
                             "stop", "generations", "optimizer", "sampler", "sensitivity", "sub_iterations", "workers",
                             "checkpoints", "surrogate", "feasolve"});
  Settings s;
  RunConfig& c = s.run;
  top.get("problem", c.problem);
  top.get("seed", c.seed);
  top.get("initial_samples", c.initial_samples);
  top.get("evaluations_per_epoch", c.evaluations_per_epoch);
  c.population_size = c.evaluations_per_epoch;
  top.get("population_size", c.population_size);
  top.get("epochs", c.epochs);
  top.get("stop", c.stop);
  top.get("generations", c.generations);
  top.get("sub_iterations", c.sub_iterations);
  top.get("workers", c.workers);
  top.get("checkpoints", s.checkpoints);
  std::string optimizer = "nsga2";
  top.get("optimizer", optimizer);
  if (optimizer != "nsga2")
    throw ConfigError(detail::where(source, top.node("optimizer")) + ": optimizer '" + optimizer +
                      "' is not available (nsga2)");
  top.get_as("sampler", c.sampler, [](const std::string& v) { return sampling_scheme_from_string(v); });
  top.get_as("sensitivity", c.sensitivity, [](const std::string& v) { return sensitivity_mode_from_string(v); });

  if (const auto sur = top.child(
          "surrogate", {"enabled", "mode", "blocks", "block_dim", "hidden_multiplier", "dropout1", "dropout2",
                        "learning_rate", "batch_size", "folds", "activation", "final_norm", "objective_loss",
                        "output_scaling", "epoch_budget", "max_epochs", "min_epochs", "max_patience", "nan_policy",
                        "exclude_infeasible", "outlier_threshold"})) {
    SurrogateConfig& sc = c.surrogate;
    sur->get("enabled", c.use_surrogate);
    sur->get_as("mode", sc.mode, [](const std::string& v) { return surrogate_mode_from_string(v); });
    sur->get("blocks", sc.blocks);
    sur->get("block_dim", sc.block_dim);
    sur->get("hidden_multiplier", sc.hidden_multiplier);
    sur->get("dropout1", sc.dropout1);
    sur->get("dropout2", sc.dropout2);
    sur->get("learning_rate", sc.learning_rate);
    sur->get("batch_size", sc.batch_size);
    sur->get("folds", sc.folds);
    sur->get_as("activation", sc.activation, [](const std::string& v) { return nn::activation_from_string(v); });
    sur->get("final_norm", sc.final_norm);
    sur->get_as("objective_loss", sc.objective_loss, [](const std::string& v) { return objective_loss_from_string(v); });
    sur->get_as("output_scaling", sc.output_scaling, [](const std::string& v) {
      if (v == "range") return OutputScaling::range;
      if (v == "none") return OutputScaling::none;
      throw std::invalid_argument("expected range or none");
    });
    sur->get("epoch_budget", sc.epoch_budget);
    sur->get("max_epochs", sc.max_epochs);
    sur->get("min_epochs", sc.min_epochs);
    sur->get("max_patience", sc.max_patience);
    sur->get_as("nan_policy", sc.nan_policy, [](const std::string& v) {
      if (v == "remove") return NanPolicy::remove;
      if (v == "replace") return NanPolicy::replace;
      throw std::invalid_argument("expected remove or replace");
    });
    sur->get("exclude_infeasible", sc.exclude_infeasible);
    if (sur->node("outlier_threshold")) {
      double t = 0.0;
      sur->get("outlier_threshold", t);
      sc.outlier_threshold = t;
    }
  }

  if (const auto fs = top.child("feasolve", {"enabled", "targets", "max_iters", "learning_rate", "plateau_window",
                                             "plateau_ratio", "reference_factor", "focal_gamma", "focal_alpha",
                                             "trace_samples"})) {
    auto& fc = c.feasolve_config;
    fs->get("enabled", c.feasolve);
    if (const auto t = fs->node("targets")) {
      std::vector<std::string> names;
      fs->get("targets", names);
      fc.targets.clear();
      for (const auto& n : names) {
        try {
          fc.targets.push_back(feasolve::target_from_string(n));
        } catch (const std::exception& ex) {
          throw ConfigError(detail::where(source, t) + ": " + ex.what());
        }
      }
    }
    fs->get("max_iters", fc.max_iters);
    fs->get("learning_rate", fc.learning_rate);
    fs->get("plateau_window", fc.plateau_window);
    fs->get("plateau_ratio", fc.plateau_ratio);
    fs->get("reference_factor", fc.reference_factor);
    fs->get("focal_gamma", fc.focal_gamma);
    fs->get("focal_alpha", fc.focal_alpha);
    fs->get("trace_samples", c.trace_samples);
  }

  try {
    (void)make_problem(c.problem);
    c.validate();
  } catch (const std::exception& ex) {
    throw ConfigError(source + ": " + ex.what());
  }
  return s;
}

/// The effective settings as YAML that parses back to the same values.
[[nodiscard]] inline std::string to_yaml(const Settings& s) {
  const RunConfig& c = s.run;
  const SurrogateConfig& sc = c.surrogate;
  const auto& fc = c.feasolve_config;
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e << YAML::BeginMap;
  e << YAML::Key << "problem" << YAML::Value << c.problem;
  e << YAML::Key << "seed" << YAML::Value << c.seed;
  e << YAML::Key << "initial_samples" << YAML::Value << c.initial_samples;
  e << YAML::Key << "evaluations_per_epoch" << YAML::Value << c.evaluations_per_epoch;
  e << YAML::Key << "population_size" << YAML::Value << c.population_size;
  e << YAML::Key << "epochs" << YAML::Value << c.epochs;
  if (!c.stop.empty()) e << YAML::Key << "stop" << YAML::Value << YAML::DoubleQuoted << c.stop;
  e << YAML::Key << "generations" << YAML::Value << c.generations;
  e << YAML::Key << "optimizer" << YAML::Value << "nsga2";
  e << YAML::Key << "sampler" << YAML::Value << std::string(to_string(c.sampler));
  e << YAML::Key << "sensitivity" << YAML::Value << YAML::DoubleQuoted << std::string(to_string(c.sensitivity));
  e << YAML::Key << "sub_iterations" << YAML::Value << c.sub_iterations;
  e << YAML::Key << "workers" << YAML::Value << c.workers;
  e << YAML::Key << "checkpoints" << YAML::Value << s.checkpoints;
  e << YAML::Key << "surrogate" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "enabled" << YAML::Value << c.use_surrogate;
  e << YAML::Key << "mode" << YAML::Value << std::string(to_string(sc.mode));
  e << YAML::Key << "blocks" << YAML::Value << sc.blocks;
  e << YAML::Key << "block_dim" << YAML::Value << sc.block_dim;
  e << YAML::Key << "hidden_multiplier" << YAML::Value << sc.hidden_multiplier;
  e << YAML::Key << "dropout1" << YAML::Value << sc.dropout1;
  e << YAML::Key << "dropout2" << YAML::Value << sc.dropout2;
  e << YAML::Key << "learning_rate" << YAML::Value << sc.learning_rate;
  e << YAML::Key << "batch_size" << YAML::Value << sc.batch_size;
  e << YAML::Key << "folds" << YAML::Value << sc.folds;
  e << YAML::Key << "activation" << YAML::Value << std::string(nn::to_string(sc.activation));
  e << YAML::Key << "final_norm" << YAML::Value << sc.final_norm;
  e << YAML::Key << "objective_loss" << YAML::Value << std::string(to_string(sc.objective_loss));
  e << YAML::Key << "output_scaling" << YAML::Value << (sc.output_scaling == OutputScaling::range ? "range" : "none");
  e << YAML::Key << "epoch_budget" << YAML::Value << sc.epoch_budget;
  e << YAML::Key << "max_epochs" << YAML::Value << sc.max_epochs;
  e << YAML::Key << "min_epochs" << YAML::Value << sc.min_epochs;
  e << YAML::Key << "max_patience" << YAML::Value << sc.max_patience;
  e << YAML::Key << "nan_policy" << YAML::Value << (sc.nan_policy == NanPolicy::remove ? "remove" : "replace");
  e << YAML::Key << "exclude_infeasible" << YAML::Value << sc.exclude_infeasible;
  if (sc.outlier_threshold) e << YAML::Key << "outlier_threshold" << YAML::Value << *sc.outlier_threshold;
  e << YAML::EndMap;
  e << YAML::Key << "feasolve" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "enabled" << YAML::Value << c.feasolve;
  e << YAML::Key << "targets" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (const auto t : fc.targets) e << std::string(feasolve::to_string(t));
  e << YAML::EndSeq;
  e << YAML::Key << "max_iters" << YAML::Value << fc.max_iters;
  e << YAML::Key << "learning_rate" << YAML::Value << fc.learning_rate;
  e << YAML::Key << "plateau_window" << YAML::Value << fc.plateau_window;
  e << YAML::Key << "plateau_ratio" << YAML::Value << fc.plateau_ratio;
  e << YAML::Key << "reference_factor" << YAML::Value << fc.reference_factor;
  e << YAML::Key << "focal_gamma" << YAML::Value << fc.focal_gamma;
  e << YAML::Key << "focal_alpha" << YAML::Value << fc.focal_alpha;
  e << YAML::Key << "trace_samples" << YAML::Value << c.trace_samples;
  e << YAML::EndMap;
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

[[nodiscard]] inline Settings load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

}  // namespace surropt::config
