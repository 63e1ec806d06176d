// Ask/tell contract shared by the GA, PSO and CMA-ES engines.
//
// An engine always holds a pending candidate batch. ask() exposes it, tell()
// receives one value per candidate (in order), records the evaluated
// population, updates the incumbent and prepares the next batch. Every random
// draw happens inside the engine from its own RngStream, so the candidate
// sequence is independent of how the batch is evaluated.
#pragma once

#include <cstdint>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hybridevo/core.hpp"
#include "hybridevo/serialize.hpp"

namespace hybridevo {

enum class EngineKind { kGa, kPso, kCmaes };

inline std::string_view to_string(EngineKind k) {
  switch (k) {
    case EngineKind::kGa: return "ga";
    case EngineKind::kPso: return "pso";
    case EngineKind::kCmaes: return "cmaes";
  }
  return "?";
}

inline EngineKind parse_engine_kind(std::string_view s) {
  if (s == "ga") return EngineKind::kGa;
  if (s == "pso") return EngineKind::kPso;
  if (s == "cmaes") return EngineKind::kCmaes;
  throw std::invalid_argument("unknown engine '" + std::string(s) + "' (expected ga, pso or cmaes)");
}

/// Linear interpolation from `start` to `end` over a stage; `end` absent means
/// the value stays at `start`.
inline double linear_schedule(double start, std::optional<double> end, std::size_t generation,
                              std::size_t planned_generations) {
  if (!end || planned_generations <= 1) return start;
  const double frac = std::min(1.0, static_cast<double>(generation) /
                                        static_cast<double>(planned_generations - 1));
  return start + (*end - start) * frac;
}

class Engine {
 public:
  Engine(Bounds bounds, RngStream rng) : bounds_(std::move(bounds)), rng_(rng) {}
  virtual ~Engine() = default;

  Engine(const Engine&) = default;
  Engine& operator=(const Engine&) = default;

  virtual EngineKind kind() const = 0;
  virtual std::unique_ptr<Engine> clone() const = 0;

  /// Candidates awaiting evaluation. All lie inside the bounds.
  const std::vector<ControlVector>& ask() const { return pending_; }

  void tell(std::span<const double> values) {
    if (values.size() != pending_.size())
      throw std::invalid_argument(std::string(to_string(kind())) + " tell: got " +
                                  std::to_string(values.size()) + " values for " +
                                  std::to_string(pending_.size()) + " candidates");
    for (double v : values) require_finite(v, "engine tell");
    Population evaluated;
    evaluated.generation = generation_;
    evaluated.members.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      evaluated.members.push_back({pending_[i], values[i]});
      if (!best_ || values[i] > *best_->value) best_ = Individual{pending_[i], values[i]};
    }
    last_ = std::move(evaluated);
    ++generation_;
    advance(last_);
  }

  /// Completed tell() calls.
  std::size_t generation() const { return generation_; }

  bool has_best() const { return best_.has_value(); }

  /// Best individual observed by this engine so far.
  const Individual& best() const {
    if (!best_) throw std::logic_error("engine best: no evaluations yet");
    return *best_;
  }

  /// Most recently evaluated population; empty before the first tell unless
  /// the engine was seeded from a handoff.
  const Population& population() const { return last_; }

  const Bounds& bounds() const { return bounds_; }
  const RngStream& rng() const { return rng_; }

  void save(std::ostream& os) const {
    TextWriter w(os);
    w.put("engine", to_string(kind()));
    w.put("generation", static_cast<std::uint64_t>(generation_));
    w.put_rng("rng", rng_);
    w.put("has_best", static_cast<std::uint64_t>(best_ ? 1 : 0));
    if (best_) {
      w.put("best_x", best_->x.span());
      w.put("best_value", *best_->value);
    }
    put_population(w, "last", last_);
    put_vectors(w, "pending", pending_);
    save_state(w);
  }

  /// Restores the state written by save(); the engine kind must match.
  void load(std::istream& is) {
    TextReader r(is);
    if (r.text("engine") != to_string(kind()))
      throw CheckpointError("checkpoint: engine kind mismatch");
    generation_ = r.u64("generation");
    rng_ = r.rng("rng");
    best_.reset();
    if (r.u64("has_best") != 0) {
      ControlVector x(r.reals("best_x"));
      best_ = Individual{std::move(x), r.real("best_value")};
    }
    last_ = read_population(r, "last");
    pending_ = read_vectors(r, "pending");
    load_state(r);
  }

 protected:
  /// Prepares pending_ from the population just evaluated.
  virtual void advance(const Population& evaluated) = 0;
  virtual void save_state(TextWriter& w) const = 0;
  virtual void load_state(TextReader& r) = 0;

  /// Takes over a handoff population as the last evaluated one. The incumbent
  /// stays empty: engine best covers this engine's own evaluations only.
  void adopt(const Population& pop) { last_ = pop; }

  static void put_vectors(TextWriter& w, std::string_view key, const std::vector<ControlVector>& v) {
    w.put(std::string(key) + "_count", static_cast<std::uint64_t>(v.size()));
    for (const auto& x : v) w.put(key, x.span());
  }
  static std::vector<ControlVector> read_vectors(TextReader& r, std::string_view key) {
    const auto n = r.u64(std::string(key) + "_count");
    std::vector<ControlVector> out;
    for (std::uint64_t i = 0; i < n; ++i) out.emplace_back(r.reals(key));
    return out;
  }
  static void put_population(TextWriter& w, std::string_view key, const Population& p) {
    w.put(std::string(key) + "_generation", static_cast<std::uint64_t>(p.generation));
    w.put(std::string(key) + "_count", static_cast<std::uint64_t>(p.size()));
    for (const auto& m : p.members) {
      w.put(std::string(key) + "_x", m.x.span());
      w.put(std::string(key) + "_value", *m.value);
    }
  }
  static Population read_population(TextReader& r, std::string_view key) {
    Population p;
    p.generation = r.u64(std::string(key) + "_generation");
    const auto n = r.u64(std::string(key) + "_count");
    for (std::uint64_t i = 0; i < n; ++i) {
      ControlVector x(r.reals(std::string(key) + "_x"));
      p.members.push_back({std::move(x), r.real(std::string(key) + "_value")});
    }
    return p;
  }

  Bounds bounds_;
  RngStream rng_;
  std::vector<ControlVector> pending_;
  Population last_;
  std::optional<Individual> best_;
  std::size_t generation_ = 0;
};

/// Uniform random population inside the box.
inline std::vector<ControlVector> uniform_population(const Bounds& b, std::size_t n, RngStream& rng) {
  std::vector<ControlVector> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<double> x(b.dimension());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(b.lower(i), b.upper(i));
    out.emplace_back(std::move(x));
  }
  return out;
}

/// Checks a handoff population and trims it to the `n` best members.
inline Population take_best(const Population& pop, std::size_t n, const Bounds& b) {
  if (!pop.fully_evaluated() || pop.empty())
    throw std::invalid_argument("handoff: population must be nonempty and fully evaluated");
  if (pop.size() < n)
    throw std::invalid_argument("handoff: population of " + std::to_string(pop.size()) +
                                " is smaller than the next stage's " + std::to_string(n));
  for (const auto& m : pop.members)
    if (m.x.size() != b.dimension())
      throw std::invalid_argument("handoff: population dimension does not match bounds");
  if (pop.size() == n) return pop;
  Population out;
  out.generation = pop.generation;
  for (std::size_t i : pop.ranking()) {
    if (out.size() == n) break;
    out.members.push_back(pop.members[i]);
  }
  return out;
}

}  // namespace hybridevo
