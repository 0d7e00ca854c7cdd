// Command-line front end: run, report, bench.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "surropt/config.hpp"
#include "surropt/engine.hpp"
#include "surropt/io.hpp"
#include "surropt/metrics.hpp"
#include "surropt/problems.hpp"

namespace fs = std::filesystem;
using namespace surropt;

namespace {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void print(std::ostream& out, bool csv) const {
    if (csv) {
      auto line = [&](const std::vector<std::string>& r) {
        for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
        out << '\n';
      };
      line(header);
      for (const auto& r : rows) line(r);
      return;
    }
    std::vector<std::size_t> w(header.size());
    for (std::size_t i = 0; i < header.size(); ++i) w[i] = header[i].size();
    for (const auto& r : rows)
      for (std::size_t i = 0; i < r.size(); ++i) w[i] = std::max(w[i], r[i].size());
    auto line = [&](const std::vector<std::string>& r) {
      for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "  " : "") << std::setw(static_cast<int>(w[i])) << r[i];
      out << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
  }
};

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed, const fs::path& out) {
  config::Settings settings = config::load(config_path);
  if (seed) settings.run.seed = *seed;
  if (fs::exists(out) && !fs::is_empty(out)) {
    std::cerr << "error: output directory " << out << " is not empty\n";
    return 2;
  }
  fs::create_directories(out);
  {
    std::ofstream snap(out / io::kConfigFile);
    snap << config::to_yaml(settings);
  }
  Engine engine(settings.run);
  io::JsonlWriter evals(out / io::kEvaluationsFile);
  std::optional<io::JsonlWriter> traces;
  if (settings.checkpoints) fs::create_directories(out / io::kCheckpointDir);
  engine.on_epoch([&](const EpochEvent& ev) {
    for (const auto& r : ev.new_records) evals.write(io::to_json(r));
    for (const auto& n : ev.notes) std::cerr << "note: " << n << '\n';
    const std::size_t epoch = ev.metrics->epoch;
    if (ev.sensitivity && ev.eta)
      io::append_sensitivity(out / io::kSensitivityFile, epoch, engine.problem().space, *ev.sensitivity, *ev.eta);
    if (!ev.traces.empty()) {
      if (!traces) traces.emplace(out / io::kTracesFile);
      io::append_traces(*traces, epoch, ev.traces);
    }
    if (settings.checkpoints && ev.model) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch-%04zu.json", epoch);
      io::write_checkpoint(out / io::kCheckpointDir / name, *ev.model);
    }
    std::cerr << "epoch " << epoch << ": " << ev.metrics->cumulative_evals << " evaluations, "
              << ev.metrics->feasible_count << " feasible, mode " << ev.metrics->mode << '\n';
  });
  const RunHistory history = engine.run();
  io::write_metrics_csv(out / io::kMetricsFile, history.metrics());
  return 0;
}

struct LoadedRun {
  std::string name;
  std::vector<EvaluationRecord> records;
};

metrics::Front final_front(const LoadedRun& r) { return archive_of(r.records).front(); }

metrics::Front load_reference(const std::string& ref, const std::vector<LoadedRun>& runs, std::size_t q) {
  metrics::Front out;
  if (ref.empty() || ref == "union") {
    for (const auto& r : runs) {
      const auto f = final_front(r);
      out.insert(out.end(), f.begin(), f.end());
    }
    return metrics::nondominated(out);
  }
  std::ifstream in(ref);
  if (!in) throw std::runtime_error("cannot read reference front " + ref);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> p;
    std::stringstream ss(line);
    bool numeric = true;
    for (std::string cell; std::getline(ss, cell, ',');) {
      try {
        p.push_back(io::parse_double(cell));
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric && n == 1) continue;  // header row
    if (!numeric || p.size() != q) throw std::runtime_error(ref + ":" + std::to_string(n) + ": expected " +
                                                            std::to_string(q) + " numbers");
    out.push_back(std::move(p));
  }
  if (out.empty()) throw std::runtime_error("reference front " + ref + " is empty");
  return out;
}

std::string fmt(double v) { return io::format_double(v); }

int cmd_report(const std::vector<std::string>& dirs, const std::string& metric, const std::string& reference,
               bool csv, const std::string& save) {
  static const std::vector<std::string> metric_names = {"all", "hv", "hv_auc", "igd", "epsilon", "coverage"};
  if (std::find(metric_names.begin(), metric_names.end(), metric) == metric_names.end()) {
    std::cerr << "error: unknown metric '" << metric << "' (all, hv, hv_auc, igd, epsilon, coverage)\n";
    return 2;
  }
  std::vector<LoadedRun> runs;
  std::optional<std::size_t> q;
  for (const auto& d : dirs) {
    LoadedRun r{fs::path(d).filename().string(), io::read_evaluations(fs::path(d) / io::kEvaluationsFile)};
    if (r.name.empty()) r.name = d;
    for (const auto& rec : r.records) {
      if (q && rec.objectives.size() != *q) {
        std::cerr << "error: runs disagree on the number of objectives (" << *q << " vs " << rec.objectives.size()
                  << " in " << d << ")\n";
        return 2;
      }
      q = rec.objectives.size();
    }
    runs.push_back(std::move(r));
  }
  if (!q) {
    std::cerr << "error: no evaluations found\n";
    return 2;
  }
  std::vector<metrics::Front> feasible;
  for (const auto& r : runs) {
    metrics::Front f;
    for (const auto& rec : r.records)
      if (rec.feasible() && rec.viable()) f.push_back(rec.objectives);
    feasible.push_back(std::move(f));
  }
  metrics::NormalizationContext ctx;
  const bool any = std::any_of(feasible.begin(), feasible.end(), [](const auto& f) { return !f.empty(); });
  if (any) ctx = metrics::make_normalization(feasible);

  std::vector<Table> tables;
  std::vector<std::vector<double>> hv_series;
  for (const auto& r : runs) {
    RunHistory h;
    std::size_t epochs = 0;
    for (const auto& rec : r.records) {
      h.append(rec);
      epochs = std::max(epochs, rec.epoch + 1);
    }
    for (std::size_t e = 0; e < epochs; ++e) {
      EpochMetrics m;
      m.epoch = e;
      h.append_metrics(m);
    }
    hv_series.push_back(any ? Engine::archive_hv_series(h, ctx) : std::vector<double>(epochs, 0.0));
  }
  if (metric == "hv") {
    Table t{{"run", "epoch", "hv_norm"}, {}};
    for (std::size_t i = 0; i < runs.size(); ++i)
      for (std::size_t e = 0; e < hv_series[i].size(); ++e)
        t.rows.push_back({runs[i].name, std::to_string(e), fmt(hv_series[i][e])});
    tables.push_back(std::move(t));
  }
  std::vector<metrics::Front> fronts;
  for (const auto& r : runs) fronts.push_back(any ? ctx.apply(final_front(r)) : metrics::Front{});
  if (metric == "all" || metric == "hv_auc" || metric == "igd") {
    Table t{{"run", "evaluations", "feasible", "hv_final", "hv_auc", "igd"}, {}};
    std::optional<metrics::Front> ref;
    if (any) ref = ctx.apply(load_reference(reference, runs, *q));
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const auto& s = hv_series[i];
      const double auc = s.size() >= 2 ? metrics::hv_auc(s) : std::nan("");
      const double igd = ref && !fronts[i].empty() ? metrics::igd(fronts[i], *ref) : std::nan("");
      t.rows.push_back({runs[i].name, std::to_string(runs[i].records.size()), std::to_string(feasible[i].size()),
                        fmt(s.empty() ? 0.0 : s.back()), fmt(auc), fmt(igd)});
    }
    if (metric == "hv_auc") t = Table{{"run", "hv_auc"}, [&] {
                                        std::vector<std::vector<std::string>> rows;
                                        for (const auto& r : t.rows) rows.push_back({r[0], r[4]});
                                        return rows;
                                      }()};
    if (metric == "igd") t = Table{{"run", "igd"}, [&] {
                                     std::vector<std::vector<std::string>> rows;
                                     for (const auto& r : t.rows) rows.push_back({r[0], r[5]});
                                     return rows;
                                   }()};
    tables.push_back(std::move(t));
  }
  for (const std::string pairwise : {"epsilon", "coverage"}) {
    if (metric != "all" && metric != pairwise) continue;
    Table t{{"A", "B", pairwise}, {}};
    for (std::size_t a = 0; a < runs.size(); ++a)
      for (std::size_t b = 0; b < runs.size(); ++b) {
        if (a == b && runs.size() > 1) continue;
        double v = std::nan("");
        if (!fronts[a].empty() && !fronts[b].empty())
          v = pairwise == "epsilon" ? metrics::epsilon_additive(fronts[a], fronts[b])
                                    : metrics::set_coverage(fronts[a], fronts[b]);
        t.rows.push_back({runs[a].name, runs[b].name, fmt(v)});
      }
    tables.push_back(std::move(t));
  }
  for (std::size_t i = 0; i < tables.size(); ++i) {
    if (i) std::cout << '\n';
    tables[i].print(std::cout, csv);
  }
  if (!save.empty()) {
    std::ofstream f(save);
    if (!f) throw std::runtime_error("cannot write " + save);
    for (std::size_t i = 0; i < tables.size(); ++i) {
      if (i) f << '\n';
      tables[i].print(f, true);
    }
  }
  return 0;
}

int cmd_bench(const std::vector<std::string>& args, bool csv) {
  if (args.empty() || args[0] == "list") {
    Table t{{"name", "n", "q", "k", "feasibility_rate"}, {}};
    for (const auto& name : problem_names()) {
      const auto p = make_problem(name);
      t.rows.push_back({name, std::to_string(p.space.dim()), std::to_string(p.q), std::to_string(p.k),
                        fmt(p.feasibility_rate)});
    }
    t.print(std::cout, csv);
    return 0;
  }
  if (args[0] == "describe") {
    if (args.size() != 2) {
      std::cerr << "usage: bench describe <name>\n";
      return 2;
    }
    ProblemDefinition p;
    try {
      p = make_problem(args[1]);
    } catch (const std::exception& ex) {
      std::cerr << "error: " << ex.what() << '\n';
      return 1;
    }
    std::cout << "name: " << p.name << '\n'
              << "description: " << p.description << '\n'
              << "n: " << p.space.dim() << '\n'
              << "q: " << p.q << '\n'
              << "k: " << p.k << '\n'
              << "feasibility_rate: " << fmt(p.feasibility_rate) << '\n';
    if (!p.constraint_rates.empty()) {
      std::cout << "constraint_rates:";
      for (double r : p.constraint_rates) std::cout << ' ' << fmt(r);
      std::cout << '\n';
    }
    std::cout << "pareto: " << p.pareto << '\n' << "bounds:\n";
    for (std::size_t j = 0; j < p.space.dim(); ++j)
      std::cout << "  " << p.space.names()[j] << ": [" << fmt(p.space.lower()[j]) << ", " << fmt(p.space.upper()[j])
                << "]\n";
    return 0;
  }
  std::cerr << "error: unknown bench command '" << args[0] << "' (list, describe <name>)\n";
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  surropt::prefer_heap_allocations();
  CLI::App app{"Surrogate-assisted multi-objective optimization"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run an optimization from a config file");
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  run->add_option("--config", config_path, "YAML run configuration")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "override the configured seed");
  run->add_option("--out", out_dir, "run directory to create")->required();

  auto* report = app.add_subcommand("report", "compare finished runs");
  std::vector<std::string> dirs;
  std::string metric = "all";
  std::string reference;
  std::string format = "table";
  std::string save;
  report->add_option("runs", dirs, "run directories")->required()->check(CLI::ExistingDirectory);
  report->add_option("--metric", metric, "all, hv, hv_auc, igd, epsilon or coverage");
  report->add_option("--reference", reference, "reference front CSV for IGD (default: union of final fronts)");
  report->add_option("--format", format, "table or csv")->check(CLI::IsMember({"table", "csv"}));
  report->add_option("--save", save, "also write the tables as CSV to this file");

  auto* bench = app.add_subcommand("bench", "list or describe built-in problems");
  std::vector<std::string> bench_args;
  std::string bench_format = "table";
  bench->add_option("args", bench_args, "list | describe <name>");
  bench->add_option("--format", bench_format, "table or csv")->check(CLI::IsMember({"table", "csv"}));

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config_path, seed, out_dir);
    if (*report) return cmd_report(dirs, metric, reference, format == "csv", save);
    if (*bench) return cmd_bench(bench_args, bench_format == "csv");
  } catch (const config::ConfigError& ex) {
    std::cerr << "config error: " << ex.what() << '\n';
    return 2;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}
