#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "surropt/core.hpp"
#include "surropt/evaluator.hpp"
#include "surropt/feasolve.hpp"
#include "surropt/metrics.hpp"
#include "surropt/moea.hpp"
#include "surropt/problems.hpp"
#include "surropt/random.hpp"
#include "surropt/sampling.hpp"
#include "surropt/sensitivity.hpp"
#include "surropt/stop.hpp"
#include "surropt/surrogate.hpp"

namespace surropt {

enum class SensitivityMode { off, on, inverted };

[[nodiscard]] inline std::string_view to_string(SensitivityMode m) noexcept {
  switch (m) {
    case SensitivityMode::off: return "off";
    case SensitivityMode::on: return "on";
    case SensitivityMode::inverted: return "inverted";
  }
  return "off";
}

[[nodiscard]] inline SensitivityMode sensitivity_mode_from_string(std::string_view s) {
  for (auto m : {SensitivityMode::off, SensitivityMode::on, SensitivityMode::inverted})
    if (to_string(m) == s) return m;
  throw std::invalid_argument("unknown sensitivity mode '" + std::string(s) + "' (off, on, inverted)");
}

struct RunConfig {
  std::string problem = "two_sphere";
  std::size_t initial_samples = 100;
  std::size_t evaluations_per_epoch = 100;
  std::size_t population_size = 100;
  std::size_t epochs = 25;
  /// Optional convergence test, checked after every epoch.
  std::string stop;
  std::size_t generations = 10;
  /// false runs plain NSGA-II on true evaluations: one generation per epoch.
  bool use_surrogate = true;
  SurrogateConfig surrogate;
  bool feasolve = false;
  feasolve::FeasolveConfig feasolve_config;
  /// Explore slots filled with diversity-filtered descent-trace points.
  std::size_t trace_samples = 0;
  SensitivityMode sensitivity = SensitivityMode::off;
  SamplingScheme sampler = SamplingScheme::slhc;
  /// Retrain-and-generate blocks per epoch; evaluations are split evenly.
  std::size_t sub_iterations = 1;
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  void validate() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (initial_samples < 2) throw std::invalid_argument("initial_samples must be >= 2");
    if (evaluations_per_epoch < 1) throw std::invalid_argument("evaluations_per_epoch must be >= 1");
    if (population_size != evaluations_per_epoch)
      throw std::invalid_argument("population_size must equal evaluations_per_epoch");
    if (generations < 1) throw std::invalid_argument("generations must be >= 1");
    if (workers < 1) throw std::invalid_argument("workers must be >= 1");
    if (sub_iterations < 1 || evaluations_per_epoch % sub_iterations != 0)
      throw std::invalid_argument("sub_iterations must divide evaluations_per_epoch");
    if (surrogate.mode == SurrogateMode::c)
      throw std::invalid_argument("surrogate mode 'c' cannot drive the loop; use 'o' or 'c+o'");
    surrogate.validate();
    feasolve_config.validate();
    if (!stop.empty()) (void)stop::Expression(stop);
  }
};

/// Joint mode needs at least 3 distinct constraint patterns in the data.
[[nodiscard]] inline SurrogateMode select_surrogate_mode(std::span<const EvaluationRecord> records,
                                                         SurrogateMode configured = SurrogateMode::co) {
  if (configured == SurrogateMode::o) return SurrogateMode::o;
  std::set<ConstraintVector> patterns;
  for (const auto& r : records) {
    if (r.constraints.empty()) return SurrogateMode::o;
    patterns.insert(r.constraints);
    if (patterns.size() >= 3) return configured;
  }
  return SurrogateMode::o;
}

/// Everything observable about one finished epoch.
struct EpochEvent {
  const EpochMetrics* metrics = nullptr;
  std::span<const EvaluationRecord> new_records;
  /// Null when the epoch ran without a surrogate.
  const JointSurrogate* model = nullptr;
  std::optional<SensitivityIndices> sensitivity;
  std::optional<moea::DistributionIndices> eta;
  std::vector<feasolve::DescentTrace> traces;
  std::vector<std::string> notes;
};

using EpochObserver = std::function<void(const EpochEvent&)>;

namespace detail {

inline std::vector<ObjectiveVector> feasible_objectives(std::span<const EvaluationRecord> records) {
  std::vector<ObjectiveVector> out;
  for (const auto& r : records)
    if (r.feasible() && r.viable()) out.push_back(r.objectives);
  return out;
}

inline std::size_t feasible_count(std::span<const EvaluationRecord> records) {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [](const auto& r) { return r.feasible() && r.viable(); }));
}

/// The M best true-evaluated records as an NSGA-II population.
inline std::vector<moea::Individual> best_records(std::span<const EvaluationRecord> records, std::size_t M) {
  std::vector<moea::Individual> all;
  std::set<Point> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.params).second) continue;
    all.push_back({r.params, r.objectives, r.feasible(), true});
  }
  auto ranked = moea::truncate(moea::rank(std::move(all)), M);
  return ranked.members;
}

inline moea::Predictor predictor_for(const JointSurrogate& f) {
  return [&f](const std::vector<Point>& xs, std::vector<ObjectiveVector>& Y, std::vector<std::vector<double>>& C) {
    const auto p = f.predict(xs);
    Y = p.objectives();
    C = p.probabilities();
  };
}

/// The ranked final population with already-evaluated or repeated points
/// swapped for the best unused offspring.
inline moea::RankedPopulation novel_candidates(const moea::GenerateResult& g, std::size_t count,
                                               const std::set<Point>& evaluated) {
  std::set<Point> taken = evaluated;
  std::vector<moea::Individual> chosen;
  for (const std::size_t i : moea::sorted_order(g.population)) {
    if (chosen.size() == count) break;
    const auto& m = g.population.members[i];
    if (taken.insert(m.x).second) chosen.push_back(m);
  }
  if (chosen.size() < count && !g.offspring.empty()) {
    const auto pool = moea::rank(g.offspring);
    for (const std::size_t i : moea::sorted_order(pool)) {
      if (chosen.size() == count) break;
      if (taken.insert(pool.members[i].x).second) chosen.push_back(pool.members[i]);
    }
  }
  for (std::size_t i = 0; chosen.size() < count; ++i) chosen.push_back(g.population.members[i % g.population.size()]);
  return moea::rank(std::move(chosen));
}

inline constexpr std::size_t kTracePool = 512;

/// k diverse points from the descent traces, selected on predicted objectives.
inline std::vector<Point> trace_points(const std::vector<feasolve::DescentTrace>& traces, std::size_t k) {
  std::vector<Point> xs;
  std::vector<std::vector<double>> ys;
  for (const auto& tr : traces)
    for (const auto& st : tr.steps)
      for (std::size_t i = 0; i < st.candidates.size(); ++i) {
        xs.push_back(st.candidates[i]);
        ys.push_back(st.predicted_objectives[i]);
      }
  if (xs.size() > kTracePool) {
    std::vector<Point> sx;
    std::vector<std::vector<double>> sy;
    for (std::size_t i = 0; i < kTracePool; ++i) {
      const std::size_t j = i * (xs.size() - 1) / (kTracePool - 1);
      sx.push_back(xs[j]);
      sy.push_back(ys[j]);
    }
    xs = std::move(sx);
    ys = std::move(sy);
  }
  std::vector<Point> out;
  for (const std::size_t i : feasolve::trace_diversity_filter(ys, k)) out.push_back(xs[i]);
  return out;
}

struct Candidate {
  Point x;
  Provenance provenance = Provenance::moea;
};

}  // namespace detail

/// Runs the surrogate-assisted loop and returns the full history. The hv_norm
/// column uses the nadir of the whole run's feasible history, so the archive
/// curve is nondecreasing; the stop expression sees a running normalization.
class Engine {
 public:
  Engine(RunConfig cfg, ProblemDefinition problem) : cfg_(std::move(cfg)), problem_(std::move(problem)) {
    cfg_.validate();
    if (!cfg_.stop.empty()) stop_ = stop::Expression(cfg_.stop);
  }

  explicit Engine(RunConfig cfg) : Engine(cfg, make_problem(cfg.problem)) {}

  void on_epoch(EpochObserver obs) { observer_ = std::move(obs); }

  [[nodiscard]] const RunConfig& config() const noexcept { return cfg_; }
  [[nodiscard]] const ProblemDefinition& problem() const noexcept { return problem_; }

  RunHistory run() {
    RunHistory history;
    const RandomStream root(cfg_.seed, "run");
    auto t0 = std::chrono::steady_clock::now();
    {
      RandomStream rng = root.derive("initial");
      const std::size_t N0 = cfg_.initial_samples;
      std::vector<Point> X;
      if (cfg_.sampler == SamplingScheme::slhc && N0 % 2 == 1) {
        X = sample(SamplingScheme::slhc, problem_.space, N0 - 1, rng).points;
        X.push_back(sample(SamplingScheme::mc, problem_.space, 1, rng).points.front());
      } else {
        X = sample(cfg_.sampler, problem_.space, N0, rng).points;
      }
      std::vector<detail::Candidate> cands;
      for (auto& x : X) cands.push_back({std::move(x), Provenance::init});
      const auto recs = evaluate(cands, 0, history);
      EpochMetrics m = snapshot(history, 0, t0);
      m.mode = "none";
      finish_epoch(history, std::move(m), recs, nullptr, {});
    }
    for (std::size_t e = 1; e <= cfg_.epochs; ++e) {
      t0 = std::chrono::steady_clock::now();
      EpochEvent ev;
      std::optional<JointSurrogate> last_model;
      std::vector<EvaluationRecord> new_records;
      std::vector<ObjectiveVector> predicted, actual;
      std::size_t steps = 0;
      std::string mode = "none";
      const std::size_t block = cfg_.evaluations_per_epoch / cfg_.sub_iterations;
      for (std::size_t s = 0; s < cfg_.sub_iterations; ++s) {
        RandomStream rng = root.derive("epoch-" + std::to_string(e) + "/block-" + std::to_string(s));
        std::vector<detail::Candidate> cands;
        std::optional<JointSurrogate> model;
        if (cfg_.use_surrogate) {
          const SurrogateMode sm = select_surrogate_mode(history.records(), cfg_.surrogate.mode);
          SurrogateConfig sc = cfg_.surrogate;
          sc.mode = sm;
          try {
            auto trained = train(history.records(), problem_.space, sc, rng.derive("surrogate"));
            model = std::move(trained.model);
            mode = std::string(to_string(sm));
          } catch (const std::exception& ex) {
            ev.notes.push_back("epoch " + std::to_string(e) + ": surrogate training failed (" + ex.what() +
                               "); using true-evaluation NSGA-II");
          }
        }
        if (model) {
          cands = surrogate_candidates(*model, history, block, rng, ev, steps);
          std::vector<Point> xs;
          for (const auto& c : cands) xs.push_back(c.x);
          const auto p = model->predict(xs).objectives();
          predicted.insert(predicted.end(), p.begin(), p.end());
        } else {
          if (mode == "none") mode = "nsga";
          cands = plain_candidates(history, block, rng);
        }
        const auto recs = evaluate(cands, e, history);
        for (std::size_t i = 0; i < recs.size(); ++i) {
          if (model) actual.push_back(recs[i].objectives);
          new_records.push_back(recs[i]);
        }
        if (model) last_model = std::move(model);
      }
      EpochMetrics m = snapshot(history, e, t0);
      m.mode = mode;
      m.feasolve_steps = steps;
      m.nrmse = epoch_nrmse(actual, predicted);
      ev.model = last_model ? &*last_model : nullptr;
      finish_epoch(history, std::move(m), new_records, &ev, ev.notes);
      if (!stop_.empty()) {
        stop::Context ctx{e, [&](std::string_view name) { return series(history, name); }};
        if (stop_(ctx)) break;
      }
    }
    finalize_hv(history);
    return history;
  }

  /// Normalized archive HV per epoch under the whole run's nadir.
  [[nodiscard]] static std::vector<double> archive_hv_series(const RunHistory& history) {
    const auto feas = detail::feasible_objectives(history.records());
    if (feas.empty()) return std::vector<double>(history.metrics().size(), 0.0);
    const metrics::Front all(feas.begin(), feas.end());
    const auto ctx = metrics::make_normalization(std::span<const metrics::Front>(&all, 1));
    return archive_hv_series(history, ctx);
  }

  [[nodiscard]] static std::vector<double> archive_hv_series(const RunHistory& history,
                                                             const metrics::NormalizationContext& ctx) {
    std::vector<double> out;
    ParetoArchive archive;
    std::size_t next = 0;
    const auto& recs = history.records();
    for (const auto& m : history.metrics()) {
      while (next < recs.size() && recs[next].epoch <= m.epoch) archive.insert(recs[next++]);
      out.push_back(archive.empty() ? 0.0 : metrics::normalized_hypervolume(archive.front(), ctx));
    }
    return out;
  }

 private:
  std::vector<EvaluationRecord> evaluate(const std::vector<detail::Candidate>& cands, std::size_t epoch,
                                         RunHistory& history) {
    std::vector<Point> xs;
    for (const auto& c : cands) xs.push_back(c.x);
    const auto results = evaluate_batch(problem_, xs, cfg_.workers, epoch);
    std::vector<EvaluationRecord> out;
    for (std::size_t i = 0; i < results.size(); ++i) {
      EvaluationRecord r{cands[i].x, results[i].objectives, results[i].constraints, epoch, cands[i].provenance};
      history.append(r);
      out.push_back(std::move(r));
    }
    return out;
  }

  std::vector<detail::Candidate> plain_candidates(const RunHistory& history, std::size_t count, RandomStream& rng) {
    const auto parents = moea::rank(detail::best_records(history.records(), cfg_.population_size));
    const auto kids = moea::make_offspring(parents, count, moea::DistributionIndices::uniform(problem_.space.dim()),
                                           problem_.space, rng);
    std::vector<detail::Candidate> out;
    for (const auto& x : kids) out.push_back({x, Provenance::moea});
    return out;
  }

  std::vector<detail::Candidate> surrogate_candidates(const JointSurrogate& f, const RunHistory& history,
                                                      std::size_t count, RandomStream& rng, EpochEvent& ev,
                                                      std::size_t& steps) {
    const std::size_t n = problem_.space.dim();
    auto eta = moea::DistributionIndices::uniform(n);
    if (cfg_.sensitivity != SensitivityMode::off) {
      std::vector<Point> X;
      for (const auto& r : history.records())
        if (r.viable()) X.push_back(r.params);
      ev.sensitivity = compute_elasticities(f, X);
      eta = indices_from_sensitivity(*ev.sensitivity);
      if (cfg_.sensitivity == SensitivityMode::inverted) eta = invert_indices(eta);
      ev.eta = eta;
    }
    auto initial = detail::best_records(history.records(), cfg_.population_size);
    if (initial.size() < cfg_.population_size) {
      RandomStream fill = rng.derive("fill");
      for (auto& x : sample_mc(problem_.space, cfg_.population_size - initial.size(), fill).points)
        initial.push_back({std::move(x), {}, true, false});
    }
    RandomStream moea_rng = rng.derive("moea");
    const auto g = moea::generate(initial, detail::predictor_for(f), cfg_.generations, eta, problem_.space, moea_rng);
    std::set<Point> evaluated;
    for (const auto& r : history.records()) evaluated.insert(r.params);
    const auto ranked = detail::novel_candidates(g, count, evaluated);

    std::vector<detail::Candidate> out;
    if (!cfg_.feasolve) {
      for (const std::size_t i : moea::sorted_order(ranked)) out.push_back({ranked.members[i].x, Provenance::moea});
      return out;
    }
    auto fcfg = cfg_.feasolve_config;
    std::erase_if(fcfg.targets, [&](feasolve::Target t) {
      if (t == feasolve::Target::constraint) return f.constraint_outputs() == 0;
      if (t == feasolve::Target::objective || t == feasolve::Target::zero) return f.objective_outputs() == 0;
      return false;
    });
    const auto split = feasolve::hybrid_epoch_split(ranked);
    for (const auto& m : split.elite) out.push_back({m.x, Provenance::moea});
    if (fcfg.targets.empty() || split.explore.empty()) {
      for (const auto& m : split.explore) out.push_back({m.x, Provenance::moea});
      return out;
    }
    std::vector<Point> explore;
    for (const auto& m : split.explore) explore.push_back(m.x);
    const auto ctx = feasolve::Context::from_records(history.records(), problem_.space);
    auto solved = feasolve::make_feasible(explore, f, fcfg, ctx);
    steps += solved.steps;
    const std::size_t traced = std::min(cfg_.trace_samples, explore.size());
    ev.traces.push_back(std::move(solved.trace));
    std::set<Point> taken = evaluated;
    for (const auto& c : out) taken.insert(c.x);
    for (std::size_t i = 0; i + traced < solved.candidates.size(); ++i) {
      out.push_back({solved.candidates[i], Provenance::feasolve});
      taken.insert(solved.candidates[i]);
    }
    if (traced > 0) {
      for (auto& x : detail::trace_points({ev.traces.back()}, traced)) {
        if (out.size() == count) break;
        if (taken.insert(x).second) out.push_back({std::move(x), Provenance::trace});
      }
      // Duplicate trace points leave slots open; the remaining solved
      // candidates fill them.
      for (std::size_t i = solved.candidates.size() - traced; out.size() < count && i < solved.candidates.size(); ++i)
        out.push_back({solved.candidates[i], Provenance::feasolve});
    }
    return out;
  }

  static double epoch_nrmse(const std::vector<ObjectiveVector>& Y, const std::vector<ObjectiveVector>& Yhat) {
    std::vector<ObjectiveVector> y, yh;
    for (std::size_t i = 0; i < Y.size() && i < Yhat.size(); ++i)
      if (!has_nan(Y[i])) {
        y.push_back(Y[i]);
        yh.push_back(Yhat[i]);
      }
    if (y.size() < 2) return std::nan("");
    return metrics::nrmse(y, yh);
  }

  EpochMetrics snapshot(const RunHistory& history, std::size_t epoch,
                        std::chrono::steady_clock::time_point t0) const {
    EpochMetrics m;
    m.epoch = epoch;
    m.cumulative_evals = history.size();
    m.feasible_count = detail::feasible_count(history.records());
    const auto feas = detail::feasible_objectives(history.records());
    const auto archive = archive_of(history.records());
    if (!feas.empty()) {
      const metrics::Front all(feas.begin(), feas.end());
      const auto ctx = metrics::make_normalization(std::span<const metrics::Front>(&all, 1));
      m.hv_norm = metrics::normalized_hypervolume(archive.front(), ctx);
      if (!prev_front_.empty()) m.ecov = metrics::epsilon_additive(ctx.apply(prev_front_), ctx.apply(archive.front()));
    }
    m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return m;
  }

  void finish_epoch(RunHistory& history, EpochMetrics m, std::span<const EvaluationRecord> recs, EpochEvent* ev,
                    std::vector<std::string> notes) {
    prev_front_ = archive_of(history.records()).front();
    running_hv_.push_back(m.hv_norm);
    running_ecov_.push_back(m.ecov);
    history.append_metrics(m);
    if (!observer_) return;
    EpochEvent local;
    EpochEvent& out = ev ? *ev : local;
    out.metrics = &history.metrics().back();
    out.new_records = recs;
    out.notes = std::move(notes);
    observer_(out);
  }

  [[nodiscard]] stop::Series series(const RunHistory& history, std::string_view name) const {
    stop::Series s;
    for (std::size_t i = 0; i < history.metrics().size(); ++i) {
      const auto& m = history.metrics()[i];
      if (name == "hv") s.push_back(running_hv_[i]);
      else if (name == "ecov") s.push_back(running_ecov_[i]);
      else if (name == "feasible") s.push_back(static_cast<double>(m.feasible_count));
      else if (name == "evals") s.push_back(static_cast<double>(m.cumulative_evals));
      else if (name == "nrmse") s.push_back(m.nrmse);
    }
    return s;
  }

  static void finalize_hv(RunHistory& history) {
    const auto hv = archive_hv_series(history);
    for (std::size_t i = 0; i < hv.size(); ++i) history.set_hv_norm(i, hv[i]);
  }

  RunConfig cfg_;
  ProblemDefinition problem_;
  stop::Expression stop_;
  EpochObserver observer_;
  std::vector<ObjectiveVector> prev_front_;
  std::vector<double> running_hv_;
  std::vector<double> running_ecov_;
};

[[nodiscard]] inline RunHistory run(const RunConfig& cfg) { return Engine(cfg).run(); }

}  // namespace surropt
