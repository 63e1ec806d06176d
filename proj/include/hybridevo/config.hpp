// Run configuration: flat `section.key = value` lines, `#` starts a comment.
// Unknown keys, duplicates and malformed values are rejected with a message
// naming the key.
#pragma once

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hybridevo/core.hpp"
#include "hybridevo/engine.hpp"
#include "hybridevo/hybrid.hpp"
#include "hybridevo/problems.hpp"

namespace hybridevo {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key.empty() ? message : "config key '" + key + "': " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

enum class Backend { kPool, kFileQueue };

struct QueueSettings {
  std::filesystem::path dir = "queue";
  std::chrono::milliseconds poll{100};
  std::chrono::milliseconds timeout{std::chrono::minutes(10)};
  std::size_t local_workers = 1;  // in-process queue workers; 0 relies on external workers
};

struct RunConfig {
  ProblemSpec problem;
  std::vector<StagePlan> stages{{EngineKind::kGa, 100, 40}, {EngineKind::kCmaes, 50, 40}};
  EngineSettings engines;
  std::uint64_t seed = 1;
  std::size_t population = 40;
  std::size_t workers = 1;
  Backend backend = Backend::kPool;
  std::filesystem::path output_dir = "out";
  std::optional<std::filesystem::path> checkpoint;
  std::size_t checkpoint_every = 10;
  QueueSettings queue;

  /// Defaults for a new run: proxy WCF over a 10-realization ensemble, GA
  /// for 100 generations then CMA-ES for 50, population 40.
  static RunConfig defaults() {
    RunConfig c;
    c.problem.n_realizations = 10;
    return c;
  }

  OptimizationPlan plan() const {
    OptimizationPlan p{stages, problem.build(), seed, engines};
    p.validate();
    return p;
  }
};

namespace config_detail {

// Shortest text that parses back to the same double.
inline std::string short_real(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string opt_real(const std::optional<double>& v, std::string_view none) {
  return v ? short_real(*v) : std::string(none);
}

inline std::string join(const std::vector<double>& v) {
  // A list of identical values collapses to one scalar.
  bool same = true;
  for (double x : v) same = same && x == v.front();
  if (same && !v.empty()) return short_real(v.front());
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + short_real(v[i]);
  return out;
}

}  // namespace config_detail

/// Renders every key. Parsing the output yields an equivalent config.
inline std::string dump_config(const RunConfig& c) {
  using config_detail::join;
  using config_detail::opt_real;
  using config_detail::short_real;
  std::ostringstream os;
  const auto& p = c.problem;
  os << "# hybridevo run configuration\n"
     << "# Hybrid preset: stage 1 (GA or PSO) 100 generations, stage 2 CMA-ES 50 generations,\n"
     << "# 150 generations = 6000 evaluations at population 40.\n"
     << "# Standalone preset: delete the stage.2 keys (100 generations = 4000 evaluations).\n\n";
  os << "problem.kind = " << to_string(p.kind) << "\n"
     << "problem.dimension = " << p.dimension << "\n"
     << "problem.bound = " << short_real(p.bound) << "\n\n";
  os << "proxy.producers = " << p.base.producers() << "\n"
     << "proxy.injectors = " << p.base.injectors() << "\n"
     << "proxy.pi = " << join(p.base.pi) << "\n"
     << "proxy.ii = " << join(p.base.ii) << "\n"
     << "proxy.ooip_mobile = " << short_real(p.base.ooip_mobile) << "\n"
     << "proxy.ct_vp = " << short_real(p.base.ct_vp) << "\n"
     << "proxy.p_init = " << short_real(p.base.p_init) << "\n"
     << "proxy.watercut_exponent = " << short_real(p.base.watercut_exponent) << "\n"
     << "proxy.prod_bhp_min = " << short_real(p.limits.prod_min) << "\n"
     << "proxy.prod_bhp_max = " << short_real(p.limits.prod_max) << "\n"
     << "proxy.inj_bhp_min = " << short_real(p.limits.inj_min) << "\n"
     << "proxy.inj_bhp_max = " << short_real(p.limits.inj_max) << "\n\n";
  os << "ensemble.n_realizations = " << p.n_realizations << "\n"
     << "ensemble.seed = " << p.ensemble_seed << "\n"
     << "ensemble.spread = " << short_real(p.spread) << "\n\n";
  os << "econ.oil_price = " << short_real(p.econ.price.at(0)) << "\n"
     << "econ.water_prod_cost = " << short_real(p.econ.price.at(1)) << "\n"
     << "econ.water_inj_cost = " << short_real(p.econ.price.at(2)) << "\n"
     << "econ.discount = " << short_real(p.econ.discount.at(0)) << "\n\n";
  os << "run.seed = " << c.seed << "\n"
     << "run.population = " << c.population << "\n"
     << "run.workers = " << c.workers << "\n"
     << "run.backend = " << (c.backend == Backend::kPool ? "pool" : "filequeue") << "\n"
     << "run.output_dir = " << c.output_dir.string() << "\n"
     << "run.checkpoint = " << (c.checkpoint ? c.checkpoint->string() : "off") << "\n"
     << "run.checkpoint_every = " << c.checkpoint_every << "\n\n";
  for (std::size_t k = 0; k < c.stages.size(); ++k) {
    const auto pre = "stage." + std::to_string(k + 1) + ".";
    os << pre << "engine = " << to_string(c.stages[k].engine) << "\n"
       << pre << "generations = " << c.stages[k].generations << "\n";
    if (c.stages[k].population_size != c.population)
      os << pre << "population = " << c.stages[k].population_size << "\n";
  }
  const auto& g = c.engines.ga;
  os << "\nga.tournament_size = " << g.tournament_size << "\n"
     << "ga.crossover_prob = " << short_real(g.crossover_prob) << "\n"
     << "ga.crossover_alpha = " << short_real(g.crossover_alpha) << "\n"
     << "ga.mutation_prob_per_gene = " << opt_real(g.mutation_prob_per_gene, "auto") << "\n"
     << "ga.mutation_sigma = " << short_real(g.mutation_sigma) << "\n"
     << "ga.mutation_sigma_final = " << opt_real(g.mutation_sigma_final, "off") << "\n"
     << "ga.elitism_count = " << g.elitism_count << "\n\n";
  const auto& s = c.engines.pso;
  os << "pso.inertia = " << short_real(s.inertia) << "\n"
     << "pso.inertia_final = " << opt_real(s.inertia_final, "off") << "\n"
     << "pso.cognitive = " << short_real(s.cognitive) << "\n"
     << "pso.social = " << short_real(s.social) << "\n"
     << "pso.velocity_clamp = " << short_real(s.velocity_clamp) << "\n"
     << "pso.init_velocity = " << short_real(s.init_velocity) << "\n\n";
  os << "cmaes.lambda = " << (c.engines.cmaes.lambda ? std::to_string(*c.engines.cmaes.lambda) : "stage") << "\n"
     << "cmaes.sigma0 = " << short_real(c.engines.cmaes.sigma0) << "\n\n";
  os << "queue.dir = " << c.queue.dir.string() << "\n"
     << "queue.poll_ms = " << c.queue.poll.count() << "\n"
     << "queue.timeout_s = " << std::chrono::duration_cast<std::chrono::seconds>(c.queue.timeout).count() << "\n"
     << "queue.local_workers = " << c.queue.local_workers << "\n";
  return os.str();
}

/// Parses config text on top of RunConfig::defaults(). Stage keys, when
/// present, replace the default plan entirely.
inline RunConfig parse_config(std::string_view text) {
  std::map<std::string, std::string, std::less<>> kv;
  std::size_t lineno = 0;
  for (auto raw : split(text, '\n')) {
    ++lineno;
    auto line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("", "line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError("", "line " + std::to_string(lineno) + ": empty key");
    if (!kv.emplace(key, value).second) throw ConfigError(key, "given more than once");
  }

  RunConfig c = RunConfig::defaults();
  std::map<std::string, std::string, std::less<>> used;

  auto take = [&](const std::string& key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    used.insert(*it);
    kv.erase(it);
    if (v.empty()) throw ConfigError(key, "empty value");
    return v;
  };
  auto real = [&](const std::string& key, double& out) {
    if (auto v = take(key)) {
      const auto r = try_parse_real(*v);
      if (!r || !std::isfinite(*r)) throw ConfigError(key, "expected a real number, got '" + *v + "'");
      out = *r;
    }
  };
  auto count = [&](const std::string& key, auto& out) {
    if (auto v = take(key)) {
      const auto r = try_parse_int<std::uint64_t>(*v);
      if (!r) throw ConfigError(key, "expected a nonnegative integer, got '" + *v + "'");
      out = static_cast<std::remove_reference_t<decltype(out)>>(*r);
    }
  };
  auto opt_real = [&](const std::string& key, std::optional<double>& out, std::string_view none) {
    if (auto v = take(key)) {
      if (*v == none) {
        out.reset();
        return;
      }
      const auto r = try_parse_real(*v);
      if (!r || !std::isfinite(*r))
        throw ConfigError(key, "expected a real number or '" + std::string(none) + "', got '" + *v + "'");
      out = *r;
    }
  };
  auto reals = [&](const std::string& key, std::vector<double>& out, std::size_t n) {
    std::vector<double> vals;
    if (auto v = take(key)) {
      for (auto t : split(*v, ',')) {
        const auto r = try_parse_real(t);
        if (!r || !std::isfinite(*r)) throw ConfigError(key, "bad number '" + std::string(trim(t)) + "'");
        vals.push_back(*r);
      }
    } else {
      vals = out;
    }
    if (vals.size() == 1 || (!vals.empty() && std::equal(vals.begin() + 1, vals.end(), vals.begin())))
      vals.assign(n, vals.front());
    if (vals.size() != n)
      throw ConfigError(key, "expected 1 or " + std::to_string(n) + " values, got " + std::to_string(vals.size()));
    out = std::move(vals);
  };

  try {
    auto& p = c.problem;
    if (auto v = take("problem.kind")) {
      try {
        p.kind = parse_problem_kind(*v);
      } catch (const std::invalid_argument& e) {
        throw ConfigError("problem.kind", e.what());
      }
    }
    count("problem.dimension", p.dimension);
    real("problem.bound", p.bound);

    std::size_t producers = p.base.producers(), injectors = p.base.injectors();
    count("proxy.producers", producers);
    count("proxy.injectors", injectors);
    reals("proxy.pi", p.base.pi, producers);
    reals("proxy.ii", p.base.ii, injectors);
    real("proxy.ooip_mobile", p.base.ooip_mobile);
    real("proxy.ct_vp", p.base.ct_vp);
    real("proxy.p_init", p.base.p_init);
    real("proxy.watercut_exponent", p.base.watercut_exponent);
    real("proxy.prod_bhp_min", p.limits.prod_min);
    real("proxy.prod_bhp_max", p.limits.prod_max);
    real("proxy.inj_bhp_min", p.limits.inj_min);
    real("proxy.inj_bhp_max", p.limits.inj_max);

    count("ensemble.n_realizations", p.n_realizations);
    count("ensemble.seed", p.ensemble_seed);
    real("ensemble.spread", p.spread);

    real("econ.oil_price", p.econ.price[0]);
    real("econ.water_prod_cost", p.econ.price[1]);
    real("econ.water_inj_cost", p.econ.price[2]);
    double discount = p.econ.discount[0];
    real("econ.discount", discount);
    p.econ.discount.assign(3, discount);

    count("run.seed", c.seed);
    count("run.population", c.population);
    count("run.workers", c.workers);
    if (auto v = take("run.backend")) {
      if (*v == "pool") c.backend = Backend::kPool;
      else if (*v == "filequeue") c.backend = Backend::kFileQueue;
      else throw ConfigError("run.backend", "expected pool or filequeue, got '" + *v + "'");
    }
    if (auto v = take("run.output_dir")) c.output_dir = *v;
    if (auto v = take("run.checkpoint")) {
      if (*v == "off") c.checkpoint.reset();
      else c.checkpoint = *v;
    }
    count("run.checkpoint_every", c.checkpoint_every);

    // Stage plan: stage.1 .. stage.N, contiguous.
    std::vector<StagePlan> stages;
    for (std::size_t k = 1;; ++k) {
      const auto pre = "stage." + std::to_string(k) + ".";
      auto engine = take(pre + "engine");
      auto gens = take(pre + "generations");
      auto pop = take(pre + "population");
      if (!engine && !gens && !pop) break;
      if (!engine) throw ConfigError(pre + "engine", "missing");
      if (!gens) throw ConfigError(pre + "generations", "missing");
      StagePlan s;
      try {
        s.engine = parse_engine_kind(*engine);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(pre + "engine", e.what());
      }
      const auto g = try_parse_int<std::size_t>(*gens);
      if (!g || *g < 1) throw ConfigError(pre + "generations", "expected a positive integer");
      s.generations = *g;
      s.population_size = 0;  // resolved below
      if (pop) {
        const auto n = try_parse_int<std::size_t>(*pop);
        if (!n || *n < 1) throw ConfigError(pre + "population", "expected a positive integer");
        s.population_size = *n;
      }
      stages.push_back(s);
    }
    if (!stages.empty()) c.stages = std::move(stages);
    else
      for (auto& s : c.stages) s.population_size = 0;
    for (auto& s : c.stages)
      if (s.population_size == 0) s.population_size = c.population;

    auto& g = c.engines.ga;
    count("ga.tournament_size", g.tournament_size);
    real("ga.crossover_prob", g.crossover_prob);
    real("ga.crossover_alpha", g.crossover_alpha);
    opt_real("ga.mutation_prob_per_gene", g.mutation_prob_per_gene, "auto");
    real("ga.mutation_sigma", g.mutation_sigma);
    opt_real("ga.mutation_sigma_final", g.mutation_sigma_final, "off");
    count("ga.elitism_count", g.elitism_count);

    auto& s = c.engines.pso;
    real("pso.inertia", s.inertia);
    opt_real("pso.inertia_final", s.inertia_final, "off");
    real("pso.cognitive", s.cognitive);
    real("pso.social", s.social);
    real("pso.velocity_clamp", s.velocity_clamp);
    real("pso.init_velocity", s.init_velocity);

    if (auto v = take("cmaes.lambda")) {
      if (*v == "stage") {
        c.engines.cmaes.lambda.reset();
      } else {
        const auto n = try_parse_int<std::size_t>(*v);
        if (!n) throw ConfigError("cmaes.lambda", "expected an integer or 'stage'");
        c.engines.cmaes.lambda = *n;
      }
    }
    real("cmaes.sigma0", c.engines.cmaes.sigma0);

    if (auto v = take("queue.dir")) c.queue.dir = *v;
    std::uint64_t poll_ms = static_cast<std::uint64_t>(c.queue.poll.count());
    count("queue.poll_ms", poll_ms);
    c.queue.poll = std::chrono::milliseconds(poll_ms);
    std::uint64_t timeout_s = static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::seconds>(c.queue.timeout).count());
    count("queue.timeout_s", timeout_s);
    c.queue.timeout = std::chrono::seconds(timeout_s);
    count("queue.local_workers", c.queue.local_workers);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("", e.what());
  }

  if (!kv.empty()) throw ConfigError(kv.begin()->first, "unknown key");

  // Cross-field validation, attributed to the most specific key possible.
  if (!(c.problem.spread >= 0.0 && c.problem.spread < 1.0)) throw ConfigError("ensemble.spread", "must be in [0, 1)");
  if (c.problem.n_realizations < 1) throw ConfigError("ensemble.n_realizations", "must be >= 1");
  if (c.problem.dimension < 1) throw ConfigError("problem.dimension", "must be >= 1");
  if (!(c.problem.bound > 0.0)) throw ConfigError("problem.bound", "must be > 0");
  {
    const auto& b = c.problem.base;
    auto positive = [](const std::string& key, double v) {
      if (!(v > 0.0)) throw ConfigError(key, "must be > 0");
    };
    for (double v : b.pi) positive("proxy.pi", v);
    for (double v : b.ii) positive("proxy.ii", v);
    positive("proxy.ooip_mobile", b.ooip_mobile);
    positive("proxy.ct_vp", b.ct_vp);
    positive("proxy.p_init", b.p_init);
    positive("proxy.watercut_exponent", b.watercut_exponent);
    if (b.pi.empty()) throw ConfigError("proxy.producers", "must be >= 1");
    if (b.ii.empty()) throw ConfigError("proxy.injectors", "must be >= 1");
    if (!(c.problem.econ.discount[0] >= 0.0)) throw ConfigError("econ.discount", "must be >= 0");
    const auto& l = c.problem.limits;
    if (!(l.prod_min < l.prod_max)) throw ConfigError("proxy.prod_bhp_min", "must be below proxy.prod_bhp_max");
    if (!(l.inj_min < l.inj_max)) throw ConfigError("proxy.inj_bhp_min", "must be below proxy.inj_bhp_max");
  }
  try {
    c.problem.validate();
  } catch (const std::exception& e) {
    throw ConfigError(c.problem.is_proxy() ? "proxy" : "problem", e.what());
  }
  if (c.workers < 1) throw ConfigError("run.workers", "must be >= 1");
  if (c.population < 1) throw ConfigError("run.population", "must be >= 1");
  if (c.queue.poll.count() < 1) throw ConfigError("queue.poll_ms", "must be >= 1");
  try {
    OptimizationPlan{c.stages, Objective("validate", Bounds::uniform(1, 0.0, 1.0),
                                         [](std::span<const double>) { return 0.0; }),
                     c.seed, c.engines}
        .validate();
  } catch (const std::exception& e) {
    const std::string msg = e.what();
    const std::string key = msg.starts_with("ga") ? "ga" : msg.starts_with("pso") ? "pso"
                          : msg.starts_with("cmaes") ? "cmaes" : "stage";
    throw ConfigError(key, msg);
  }
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("", "cannot read config file " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

}  // namespace hybridevo
