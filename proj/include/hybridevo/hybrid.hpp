// Multi-stage optimization: stages run in order, each stage's final evaluated
// population seeds the next stage's engine, and every evaluation lands in the
// RunHistory. Checkpoints are taken only at generation boundaries.
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hybridevo/cmaes.hpp"
#include "hybridevo/core.hpp"
#include "hybridevo/engine.hpp"
#include "hybridevo/ga.hpp"
#include "hybridevo/objectives.hpp"
#include "hybridevo/parallel.hpp"
#include "hybridevo/pso.hpp"
#include "hybridevo/serialize.hpp"

namespace hybridevo {

struct StagePlan {
  EngineKind engine = EngineKind::kGa;
  std::size_t generations = 100;
  std::size_t population_size = 40;

  std::size_t evaluations() const { return generations * population_size; }
};

struct EngineSettings {
  GaConfig ga;
  PsoConfig pso;
  CmaesConfig cmaes;
};

struct OptimizationPlan {
  std::vector<StagePlan> stages;
  Objective objective;
  std::uint64_t seed = 1;
  EngineSettings engines;

  /// Control-vector evaluations (history rows).
  std::size_t budget() const {
    std::size_t n = 0;
    for (const auto& s : stages) n += s.evaluations();
    return n;
  }

  /// Simulator runs, counting every ensemble member.
  std::size_t simulation_budget() const { return budget() * objective.simulations_per_call(); }

  void validate() const {
    if (stages.empty()) throw std::invalid_argument("plan: no stages");
    for (std::size_t k = 0; k < stages.size(); ++k) {
      const auto& s = stages[k];
      const auto where = "plan: stage " + std::to_string(k + 1);
      if (s.generations < 1) throw std::invalid_argument(where + " needs generations >= 1");
      if (s.population_size < 1) throw std::invalid_argument(where + " needs population_size >= 1");
      if (s.engine == EngineKind::kCmaes && !engines.cmaes.lambda && s.population_size < 2)
        throw std::invalid_argument(where + ": cmaes needs population_size >= 2");
      if (s.engine == EngineKind::kCmaes && engines.cmaes.lambda &&
          *engines.cmaes.lambda != s.population_size)
        throw std::invalid_argument(where + ": cmaes.lambda must equal the stage population_size");
      if (s.engine == EngineKind::kGa) stage_ga(s).validate();
      if (s.engine == EngineKind::kPso) stage_pso(s).validate();
    }
    engines.cmaes.validate();
  }

  GaConfig stage_ga(const StagePlan& s) const {
    GaConfig c = engines.ga;
    c.population_size = s.population_size;
    return c;
  }
  PsoConfig stage_pso(const StagePlan& s) const {
    PsoConfig c = engines.pso;
    c.swarm_size = s.population_size;
    return c;
  }

  /// Text that changes whenever anything affecting the trajectory changes.
  std::string fingerprint() const {
    std::ostringstream os;
    os << "objective=" << objective.id() << ";seed=" << seed;
    for (const auto& s : stages)
      os << ";stage=" << to_string(s.engine) << "/" << s.generations << "/" << s.population_size;
    const auto& g = engines.ga;
    os << ";ga=" << g.tournament_size << "," << format_real(g.crossover_prob) << ","
       << format_real(g.crossover_alpha) << ","
       << (g.mutation_prob_per_gene ? format_real(*g.mutation_prob_per_gene) : "auto") << ","
       << format_real(g.mutation_sigma) << ","
       << (g.mutation_sigma_final ? format_real(*g.mutation_sigma_final) : "off") << "," << g.elitism_count;
    const auto& p = engines.pso;
    os << ";pso=" << format_real(p.inertia) << "," << (p.inertia_final ? format_real(*p.inertia_final) : "off")
       << "," << format_real(p.cognitive) << "," << format_real(p.social) << ","
       << format_real(p.velocity_clamp) << "," << format_real(p.init_velocity);
    os << ";cmaes=" << (engines.cmaes.lambda ? std::to_string(*engines.cmaes.lambda) : "stage") << ","
       << format_real(engines.cmaes.sigma0);
    return os.str();
  }
};

/// History label of a stage, e.g. "1-ga", "2-cmaes".
inline std::string stage_name(std::size_t index, EngineKind kind) {
  return std::to_string(index + 1) + "-" + std::string(to_string(kind));
}

inline RngStream stage_rng(std::uint64_t seed, std::size_t index, EngineKind kind) {
  return RngStream(seed).fork("stage:" + stage_name(index, kind));
}

/// Fresh engine for the first stage of a plan.
inline std::unique_ptr<Engine> make_initial_engine(const OptimizationPlan& plan, std::size_t index) {
  const auto& s = plan.stages.at(index);
  const auto& b = plan.objective.bounds();
  const auto rng = stage_rng(plan.seed, index, s.engine);
  switch (s.engine) {
    case EngineKind::kGa: return std::make_unique<GaEngine>(plan.stage_ga(s), b, rng, s.generations);
    case EngineKind::kPso: return std::make_unique<PsoEngine>(plan.stage_pso(s), b, rng, s.generations);
    case EngineKind::kCmaes:
      return std::make_unique<CmaesEngine>(plan.engines.cmaes, b, rng, s.population_size);
  }
  throw std::logic_error("unreachable");
}

/// Seeds the next stage's engine from the previous stage's final population.
///
/// GA: the population becomes the parent pool. PSO: particles start on the
/// points with zero velocity and personal bests equal to them. CMA-ES: mean is
/// the weighted recombination of the mu best, sigma their largest normalized
/// per-dimension spread (floored), C = I.
inline std::unique_ptr<Engine> handoff(const Population& final_pop, const StagePlan& next,
                                       const EngineSettings& settings, const Bounds& bounds,
                                       RngStream rng) {
  switch (next.engine) {
    case EngineKind::kGa: {
      GaConfig c = settings.ga;
      c.population_size = next.population_size;
      return std::make_unique<GaEngine>(GaEngine::from_population(final_pop, c, bounds, rng, next.generations));
    }
    case EngineKind::kPso: {
      PsoConfig c = settings.pso;
      c.swarm_size = next.population_size;
      return std::make_unique<PsoEngine>(PsoEngine::from_population(final_pop, c, bounds, rng, next.generations));
    }
    case EngineKind::kCmaes:
      return std::make_unique<CmaesEngine>(
          CmaesEngine::from_population(final_pop, settings.cmaes, bounds, rng, next.population_size));
  }
  throw std::logic_error("unreachable");
}

inline std::unique_ptr<Engine> blank_engine(const OptimizationPlan& plan, std::size_t index) {
  return make_initial_engine(plan, index);
}

struct StageSummary {
  std::string name;
  std::size_t evaluations = 0;
  double best = 0.0;
};

struct RunOptions {
  std::optional<std::filesystem::path> checkpoint_path;
  std::size_t checkpoint_every = 1;                   // generations between checkpoints
  std::optional<std::size_t> stop_after_generations;  // total generations, for interruption
  std::optional<std::filesystem::path> history_path;  // written on success and on failure
};

class HybridRunner {
 public:
  static constexpr std::string_view kCheckpointMagic = "hybridevo-checkpoint";
  static constexpr std::uint64_t kCheckpointVersion = 1;

  HybridRunner(OptimizationPlan plan, BatchEvaluator& evaluator)
      : plan_(std::move(plan)), evaluator_(&evaluator) {
    plan_.validate();
    engine_ = make_initial_engine(plan_, 0);
  }

  /// Resumes from a checkpoint written for the same plan.
  static HybridRunner restore(OptimizationPlan plan, BatchEvaluator& evaluator,
                              const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("checkpoint: cannot open " + path.string());
    HybridRunner r(std::move(plan), evaluator);
    r.load(is);
    return r;
  }

  bool finished() const { return stage_ >= plan_.stages.size(); }
  std::size_t stage_index() const { return stage_; }
  const RunHistory& history() const { return history_; }
  const OptimizationPlan& plan() const { return plan_; }
  const std::vector<StageSummary>& stages() const { return summaries_; }
  /// Engine of the current stage; null once the run has finished.
  const Engine* engine() const { return engine_.get(); }

  /// Best evaluated individual of the whole run.
  const Individual& best() const {
    if (!best_) throw std::logic_error("run: no evaluations yet");
    return *best_;
  }

  /// Runs one generation of the current stage; false once finished.
  bool step() {
    if (finished()) return false;
    const auto& s = plan_.stages[stage_];
    const auto& cands = engine_->ask();
    std::vector<EvalJob> jobs;
    jobs.reserve(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i)
      jobs.push_back({history_.size() + i + 1, cands[i], plan_.objective.id()});

    const auto results = evaluator_->evaluate(jobs);
    if (results.size() != jobs.size())
      throw std::runtime_error("evaluator returned " + std::to_string(results.size()) + " results for " +
                               std::to_string(jobs.size()) + " jobs");
    std::vector<double> values;
    values.reserve(results.size());
    for (std::size_t i = 0; i < results.size(); ++i) {
      if (results[i].job_id != jobs[i].job_id)
        throw std::runtime_error("evaluator returned results out of job order");
      values.push_back(require_finite(results[i].value, "job " + std::to_string(jobs[i].job_id)));
    }

    const auto name = stage_name(stage_, s.engine);
    const std::size_t gen = engine_->generation() + 1;
    for (std::size_t i = 0; i < values.size(); ++i) {
      history_.record(name, gen, values[i]);
      if (!best_ || values[i] > *best_->value) best_ = Individual{cands[i], values[i]};
    }
    engine_->tell(values);
    ++generations_done_;

    if (engine_->generation() >= s.generations) {
      summaries_.push_back({name, s.evaluations(), *engine_->best().value});
      const Population final_pop = engine_->population();
      ++stage_;
      if (finished()) {
        engine_.reset();
      } else {
        const auto& next = plan_.stages[stage_];
        engine_ = handoff(final_pop, next, plan_.engines, plan_.objective.bounds(),
                          stage_rng(plan_.seed, stage_, next.engine));
      }
    }
    return true;
  }

  /// Runs to completion (or until stop_after_generations). On evaluator
  /// failure the partial history is written before rethrowing.
  const RunHistory& run(const RunOptions& opts = {}) {
    try {
      while (!finished()) {
        if (opts.stop_after_generations && generations_done_ >= *opts.stop_after_generations) break;
        const auto stage_before = stage_;
        step();
        const bool due = finished() || stage_ != stage_before ||
                         generations_done_ % std::max<std::size_t>(1, opts.checkpoint_every) == 0 ||
                         (opts.stop_after_generations && generations_done_ >= *opts.stop_after_generations);
        if (opts.checkpoint_path && due) save_checkpoint(*opts.checkpoint_path);
      }
    } catch (...) {
      if (opts.history_path) history_.save(opts.history_path->string());
      throw;
    }
    if (opts.history_path) history_.save(opts.history_path->string());
    return history_;
  }

  void save_checkpoint(const std::filesystem::path& path) const {
    std::ostringstream os;
    save(os);
    filequeue::write_atomic(path, os.str());
  }

  void save(std::ostream& os) const {
    TextWriter w(os);
    w.put(kCheckpointMagic, kCheckpointVersion);
    w.put("plan", plan_.fingerprint());
    w.put("stage", static_cast<std::uint64_t>(stage_));
    w.put("generations_done", static_cast<std::uint64_t>(generations_done_));
    w.put("has_best", static_cast<std::uint64_t>(best_ ? 1 : 0));
    if (best_) {
      w.put("best_x", best_->x.span());
      w.put("best_value", *best_->value);
    }
    w.put("summaries", static_cast<std::uint64_t>(summaries_.size()));
    for (const auto& s : summaries_) {
      w.put("summary_name", s.name);
      w.put("summary_evaluations", static_cast<std::uint64_t>(s.evaluations));
      w.put("summary_best", s.best);
    }
    w.put("history", static_cast<std::uint64_t>(history_.size()));
    for (const auto& r : history_.records())
      w.put("h", r.stage + " " + std::to_string(r.generation) + " " + format_real(r.value));
    if (engine_) engine_->save(os);
    TextWriter(os).put("end", std::string_view("checkpoint"));
  }

 private:
  void load(std::istream& is) {
    TextReader r(is);
    const auto version = [&] {
      try {
        return r.u64(kCheckpointMagic);
      } catch (const CheckpointError&) {
        throw CheckpointError("checkpoint: not a hybridevo checkpoint");
      }
    }();
    if (version != kCheckpointVersion)
      throw CheckpointError("checkpoint: version " + std::to_string(version) + " is not supported (expected " +
                            std::to_string(kCheckpointVersion) + ")");
    if (r.text("plan") != plan_.fingerprint())
      throw CheckpointError("checkpoint: written for a different plan");
    stage_ = r.u64("stage");
    if (stage_ > plan_.stages.size()) throw CheckpointError("checkpoint: stage index out of range");
    generations_done_ = r.u64("generations_done");
    best_.reset();
    if (r.u64("has_best") != 0) {
      ControlVector x(r.reals("best_x"));
      best_ = Individual{std::move(x), r.real("best_value")};
    }
    summaries_.clear();
    const auto n_sum = r.u64("summaries");
    for (std::uint64_t k = 0; k < n_sum; ++k) {
      StageSummary s;
      s.name = r.text("summary_name");
      s.evaluations = r.u64("summary_evaluations");
      s.best = r.real("summary_best");
      summaries_.push_back(std::move(s));
    }
    history_ = RunHistory{};
    const auto n_hist = r.u64("history");
    for (std::uint64_t k = 0; k < n_hist; ++k) {
      const auto line = r.text("h");
      const auto f = split(line, ' ');
      const auto gen = f.size() == 3 ? try_parse_int<std::size_t>(f[1]) : std::nullopt;
      const auto val = f.size() == 3 ? try_parse_real(f[2]) : std::nullopt;
      if (!gen || !val) throw CheckpointError("checkpoint: malformed history record " + std::to_string(k + 1));
      history_.record(std::string(f[0]), *gen, *val);
    }
    if (finished()) {
      engine_.reset();
    } else {
      engine_ = blank_engine(plan_, stage_);
      engine_->load(is);
    }
    if (r.text("end") != "checkpoint") throw CheckpointError("checkpoint: truncated");
  }

  OptimizationPlan plan_;
  BatchEvaluator* evaluator_;
  std::unique_ptr<Engine> engine_;
  std::size_t stage_ = 0;
  std::size_t generations_done_ = 0;
  RunHistory history_;
  std::optional<Individual> best_;
  std::vector<StageSummary> summaries_;
};

/// Convenience: run a plan to completion.
inline RunHistory run(const OptimizationPlan& plan, BatchEvaluator& evaluator, const RunOptions& opts = {}) {
  HybridRunner r(plan, evaluator);
  return r.run(opts);
}

}  // namespace hybridevo
