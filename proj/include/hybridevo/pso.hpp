// Global-best particle swarm.
//
//   v' = w v + c1 r1 (pbest - x) + c2 r2 (gbest - x),   r1, r2 ~ U(0,1) per dimension
//   v' clamped to +/- velocity_clamp * range,  x' = clip(x + v')
//
// Personal and global bests are refreshed from the evaluated positions before
// the move.
#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "hybridevo/core.hpp"
#include "hybridevo/engine.hpp"

namespace hybridevo {

struct PsoConfig {
  std::size_t swarm_size = 40;
  double inertia = 0.7;
  std::optional<double> inertia_final;  // linear schedule target, off when absent
  double cognitive = 1.5;
  double social = 1.5;
  double velocity_clamp = 0.5;  // fraction of range
  double init_velocity = 0.1;   // initial |v| bound, fraction of range

  void validate() const {
    if (swarm_size < 1) throw std::invalid_argument("pso: swarm_size must be >= 1");
    if (!(inertia >= 0.0) || (inertia_final && !(*inertia_final >= 0.0)))
      throw std::invalid_argument("pso: inertia must be >= 0");
    if (!(cognitive >= 0.0) || !(social >= 0.0))
      throw std::invalid_argument("pso: cognitive and social coefficients must be >= 0");
    if (!(velocity_clamp > 0.0)) throw std::invalid_argument("pso: velocity_clamp must be > 0");
    if (!(init_velocity >= 0.0)) throw std::invalid_argument("pso: init_velocity must be >= 0");
  }
};

inline double pso_velocity(double w, double v, double c1, double r1, double to_pbest, double c2,
                           double r2, double to_gbest) {
  return w * v + c1 * r1 * to_pbest + c2 * r2 * to_gbest;
}

inline double clamp_velocity(double v, double vmax) { return std::clamp(v, -vmax, vmax); }

class PsoEngine final : public Engine {
 public:
  /// Fresh swarm: uniform positions, velocities uniform in +/- init_velocity * range.
  PsoEngine(PsoConfig cfg, Bounds b, RngStream rng, std::size_t planned_generations = 0)
      : Engine(std::move(b), rng), cfg_(cfg), planned_(planned_generations) {
    cfg_.validate();
    pending_ = uniform_population(bounds_, cfg_.swarm_size, rng_);
    velocity_.assign(cfg_.swarm_size, std::vector<double>(bounds_.dimension()));
    for (auto& v : velocity_)
      for (std::size_t i = 0; i < v.size(); ++i) {
        const double vmax = cfg_.init_velocity * bounds_.range(i);
        v[i] = rng_.uniform(-vmax, vmax);
      }
  }

  /// Handoff: particles sit on the incoming points with zero velocity and
  /// personal bests equal to those points; the first move happens immediately.
  static PsoEngine from_population(const Population& pop, PsoConfig cfg, Bounds b, RngStream rng,
                                   std::size_t planned_generations = 0) {
    PsoEngine e(cfg, std::move(b), rng, planned_generations, Seeded{});
    e.adopt(take_best(pop, e.cfg_.swarm_size, e.bounds_));
    e.pending_.clear();
    for (const auto& m : e.last_.members) e.pending_.push_back(m.x);
    e.velocity_.assign(e.cfg_.swarm_size, std::vector<double>(e.bounds_.dimension(), 0.0));
    e.advance(e.last_);
    return e;
  }

  EngineKind kind() const override { return EngineKind::kPso; }
  std::unique_ptr<Engine> clone() const override { return std::make_unique<PsoEngine>(*this); }
  const PsoConfig& config() const { return cfg_; }

  const Individual& global_best() const {
    if (!gbest_) throw std::logic_error("pso: no global best before the first evaluation");
    return *gbest_;
  }
  const std::vector<Individual>& personal_bests() const { return pbest_; }
  const std::vector<std::vector<double>>& velocities() const { return velocity_; }

  double current_inertia() const {
    return linear_schedule(cfg_.inertia, cfg_.inertia_final, generation_, planned_);
  }

 protected:
  void advance(const Population& evaluated) override {
    if (pbest_.empty()) {
      pbest_ = evaluated.members;
    } else {
      for (std::size_t p = 0; p < pbest_.size(); ++p)
        if (*evaluated.members[p].value > *pbest_[p].value) pbest_[p] = evaluated.members[p];
    }
    for (const auto& pb : pbest_)
      if (!gbest_ || *pb.value > *gbest_->value) gbest_ = pb;

    const double w = current_inertia();
    for (std::size_t p = 0; p < pending_.size(); ++p) {
      ControlVector& x = pending_[p];
      auto& v = velocity_[p];
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double r1 = rng_.uniform();
        const double r2 = rng_.uniform();
        const double nv = pso_velocity(w, v[i], cfg_.cognitive, r1, pbest_[p].x[i] - x[i],
                                       cfg_.social, r2, gbest_->x[i] - x[i]);
        v[i] = clamp_velocity(nv, cfg_.velocity_clamp * bounds_.range(i));
        x[i] += v[i];
      }
      x = clip(x, bounds_);
    }
  }

  void save_state(TextWriter& w) const override {
    w.put("planned", static_cast<std::uint64_t>(planned_));
    w.put("velocity_count", static_cast<std::uint64_t>(velocity_.size()));
    for (const auto& v : velocity_) w.put("velocity", v);
    Population pb;
    pb.members = pbest_;
    put_population(w, "pbest", pb);
    w.put("has_gbest", static_cast<std::uint64_t>(gbest_ ? 1 : 0));
    if (gbest_) {
      w.put("gbest_x", gbest_->x.span());
      w.put("gbest_value", *gbest_->value);
    }
  }

  void load_state(TextReader& r) override {
    planned_ = r.u64("planned");
    velocity_.clear();
    const auto n = r.u64("velocity_count");
    for (std::uint64_t i = 0; i < n; ++i) velocity_.push_back(r.reals("velocity"));
    pbest_ = read_population(r, "pbest").members;
    gbest_.reset();
    if (r.u64("has_gbest") != 0) {
      ControlVector x(r.reals("gbest_x"));
      gbest_ = Individual{std::move(x), r.real("gbest_value")};
    }
  }

 private:
  struct Seeded {};
  PsoEngine(PsoConfig cfg, Bounds b, RngStream rng, std::size_t planned, Seeded)
      : Engine(std::move(b), rng), cfg_(cfg), planned_(planned) {
    cfg_.validate();
  }

  PsoConfig cfg_;
  std::size_t planned_;
  std::vector<std::vector<double>> velocity_;
  std::vector<Individual> pbest_;
  std::optional<Individual> gbest_;
};

}  // namespace hybridevo
