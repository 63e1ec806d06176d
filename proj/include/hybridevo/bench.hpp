// Rastrigin dimensionality study: GA and PSO over seeded repeats.
#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hybridevo/hybrid.hpp"
#include "hybridevo/parallel.hpp"
#include "hybridevo/problems.hpp"

namespace hybridevo {

struct BenchRow {
  std::size_t dimension;
  std::size_t population;
  std::size_t iterations;
  double ref_ga;   // published single-draw costs
  double ref_pso;
};

inline const std::vector<BenchRow>& table1_rows() {
  static const std::vector<BenchRow> rows{
      {2, 40, 100, 0.99, 7.7e-10},
      {50, 40, 100, 172.1, 322.0},
      {50, 100, 200, 97.8, 158.7},
  };
  return rows;
}

/// Linear-interpolated quantile of a sample, q in [0, 1].
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile: empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }
inline double iqr(const std::vector<double>& v) { return quantile(v, 0.75) - quantile(v, 0.25); }

/// Best Rastrigin cost (not the negated value) of one standalone run.
inline double rastrigin_best_cost(EngineKind engine, std::size_t dimension, std::size_t population,
                                  std::size_t iterations, std::uint64_t seed, const EngineSettings& engines = {}) {
  ProblemSpec p;
  p.kind = ProblemKind::kRastrigin;
  p.dimension = dimension;
  OptimizationPlan plan{{{engine, iterations, population}}, p.build(), seed, engines};
  PoolEvaluator eval(plan.objective, 1);
  HybridRunner r(std::move(plan), eval);
  r.run();
  return -*r.best().value;
}

struct BenchCell {
  BenchRow row;
  EngineKind engine;
  std::vector<double> costs;  // one per repeat, seeds 1..R
  double reference() const { return engine == EngineKind::kGa ? row.ref_ga : row.ref_pso; }
};

inline std::vector<BenchCell> run_table1(std::size_t repeats, const EngineSettings& engines = {}) {
  if (repeats < 1) throw std::invalid_argument("bench: repeats must be >= 1");
  std::vector<BenchCell> cells;
  for (const auto& row : table1_rows())
    for (auto e : {EngineKind::kGa, EngineKind::kPso}) {
      BenchCell c{row, e, {}};
      for (std::uint64_t s = 1; s <= repeats; ++s)
        c.costs.push_back(rastrigin_best_cost(e, row.dimension, row.population, row.iterations, s, engines));
      cells.push_back(std::move(c));
    }
  return cells;
}

}  // namespace hybridevo
