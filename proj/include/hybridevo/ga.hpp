// Real-coded genetic algorithm: elitism, tournament selection, BLX-alpha
// crossover and per-gene Gaussian mutation, operating directly on the real
// control values.
#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "hybridevo/core.hpp"
#include "hybridevo/engine.hpp"

namespace hybridevo {

struct GaConfig {
  std::size_t population_size = 40;
  std::size_t tournament_size = 2;
  double crossover_prob = 0.9;
  double crossover_alpha = 0.3;
  std::optional<double> mutation_prob_per_gene;  // absent: 1/d
  double mutation_sigma = 0.1;                   // fraction of each dimension's range
  std::optional<double> mutation_sigma_final;    // linear schedule target, off when absent
  std::size_t elitism_count = 1;

  void validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (population_size < 1 || tournament_size < 1)
      throw std::invalid_argument("ga: population_size and tournament_size must be >= 1");
    if (!prob(crossover_prob)) throw std::invalid_argument("ga: crossover_prob must be in [0, 1]");
    if (mutation_prob_per_gene && !prob(*mutation_prob_per_gene))
      throw std::invalid_argument("ga: mutation_prob_per_gene must be in [0, 1]");
    if (!(crossover_alpha >= 0.0)) throw std::invalid_argument("ga: crossover_alpha must be >= 0");
    if (!(mutation_sigma >= 0.0) || (mutation_sigma_final && !(*mutation_sigma_final >= 0.0)))
      throw std::invalid_argument("ga: mutation_sigma must be >= 0");
    if (elitism_count >= population_size)
      throw std::invalid_argument("ga: elitism_count must be below population_size");
  }

  double gene_mutation_prob(std::size_t d) const {
    return mutation_prob_per_gene.value_or(1.0 / static_cast<double>(d));
  }
};

/// Index of the highest-valued contender; the earliest wins ties.
inline std::size_t tournament_pick(std::span<const double> values,
                                   std::span<const std::size_t> contenders) {
  if (contenders.empty()) throw std::invalid_argument("tournament: no contenders");
  std::size_t best = contenders.front();
  for (std::size_t c : contenders.subspan(1))
    if (values[c] > values[best]) best = c;
  return best;
}

inline std::size_t tournament_select(std::span<const double> values, std::size_t k, RngStream& rng) {
  std::vector<std::size_t> contenders(k);
  for (auto& c : contenders) c = rng.index(values.size());
  return tournament_pick(values, contenders);
}

/// BLX-alpha: u in [0,1) maps onto [min - a*span, max + a*span].
inline double blx_gene(double p1, double p2, double alpha, double u) {
  const double lo = std::min(p1, p2), hi = std::max(p1, p2);
  const double ext = alpha * (hi - lo);
  return (lo - ext) + u * ((hi + ext) - (lo - ext));
}

inline double mutate_gene(double x, double z, double sigma, double range) {
  return x + z * sigma * range;
}

/// Breeds the next candidate set from a fully evaluated population.
///
/// Slot order: the elitism_count best members verbatim, then one child per
/// remaining slot (two tournaments, optional crossover, mutation, clip).
inline std::vector<ControlVector> ga_generation(const Population& evaluated, const GaConfig& cfg,
                                                const Bounds& b, RngStream& rng,
                                                double mutation_sigma) {
  cfg.validate();
  if (evaluated.size() != cfg.population_size)
    throw std::invalid_argument("ga: evaluated population has " + std::to_string(evaluated.size()) +
                                " members, expected " + std::to_string(cfg.population_size));
  if (!evaluated.fully_evaluated()) throw std::invalid_argument("ga: unevaluated members");

  std::vector<double> values;
  values.reserve(evaluated.size());
  for (const auto& m : evaluated.members) values.push_back(*m.value);

  const std::size_t d = b.dimension();
  const double pm = cfg.gene_mutation_prob(d);
  std::vector<ControlVector> next;
  next.reserve(cfg.population_size);

  const auto order = evaluated.ranking();
  for (std::size_t e = 0; e < cfg.elitism_count; ++e) next.push_back(evaluated.members[order[e]].x);

  while (next.size() < cfg.population_size) {
    const auto& p1 = evaluated.members[tournament_select(values, cfg.tournament_size, rng)].x;
    const auto& p2 = evaluated.members[tournament_select(values, cfg.tournament_size, rng)].x;
    ControlVector child = p1;
    if (rng.uniform() < cfg.crossover_prob)
      for (std::size_t i = 0; i < d; ++i) child[i] = blx_gene(p1[i], p2[i], cfg.crossover_alpha, rng.uniform());
    for (std::size_t i = 0; i < d; ++i)
      if (rng.uniform() < pm) child[i] = mutate_gene(child[i], rng.normal(), mutation_sigma, b.range(i));
    next.push_back(clip(child, b));
  }
  return next;
}

class GaEngine final : public Engine {
 public:
  /// Fresh stage: uniform random initial population.
  GaEngine(GaConfig cfg, Bounds b, RngStream rng, std::size_t planned_generations = 0)
      : Engine(std::move(b), rng), cfg_(cfg), planned_(planned_generations) {
    cfg_.validate();
    pending_ = uniform_population(bounds_, cfg_.population_size, rng_);
  }

  /// Handoff: the incoming population becomes the evaluated parent pool and
  /// the first batch is bred from it.
  static GaEngine from_population(const Population& pop, GaConfig cfg, Bounds b, RngStream rng,
                                  std::size_t planned_generations = 0) {
    GaEngine e(cfg, std::move(b), rng, planned_generations, Seeded{});
    e.adopt(take_best(pop, e.cfg_.population_size, e.bounds_));
    e.advance(e.last_);
    return e;
  }

  EngineKind kind() const override { return EngineKind::kGa; }
  std::unique_ptr<Engine> clone() const override { return std::make_unique<GaEngine>(*this); }
  const GaConfig& config() const { return cfg_; }

  double current_mutation_sigma() const {
    return linear_schedule(cfg_.mutation_sigma, cfg_.mutation_sigma_final, generation_, planned_);
  }

 protected:
  void advance(const Population& evaluated) override {
    pending_ = ga_generation(evaluated, cfg_, bounds_, rng_, current_mutation_sigma());
  }
  void save_state(TextWriter& w) const override { w.put("planned", static_cast<std::uint64_t>(planned_)); }
  void load_state(TextReader& r) override { planned_ = r.u64("planned"); }

 private:
  struct Seeded {};
  GaEngine(GaConfig cfg, Bounds b, RngStream rng, std::size_t planned, Seeded)
      : Engine(std::move(b), rng), cfg_(cfg), planned_(planned) {
    cfg_.validate();
  }

  GaConfig cfg_;
  std::size_t planned_;
};

}  // namespace hybridevo
