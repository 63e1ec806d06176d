// Objective formulas (Rastrigin, weighted cumulative fluid, discounted NPV)
// and the evaluatable Objective contract used by engines and evaluators.
#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hybridevo/core.hpp"

namespace hybridevo {

/// A pure function of a control vector with a declared search box.
///
/// Copies share the underlying callable. Implementations must be reentrant;
/// evaluators call one Objective from several threads at once.
class Objective {
 public:
  using Fn = std::function<double(std::span<const double>)>;

  Objective(std::string id, Bounds bounds, Fn fn, std::size_t simulations_per_call = 1)
      : id_(std::move(id)),
        bounds_(std::make_shared<const Bounds>(std::move(bounds))),
        fn_(std::make_shared<const Fn>(std::move(fn))),
        sims_(simulations_per_call) {
    if (!*fn_) throw std::invalid_argument("objective '" + id_ + "': empty callable");
    if (sims_ == 0) throw std::invalid_argument("objective '" + id_ + "': zero simulations");
  }

  const std::string& id() const { return id_; }
  const Bounds& bounds() const { return *bounds_; }
  std::size_t dimension() const { return bounds_->dimension(); }
  /// Simulator runs consumed by one call (ensemble size for robust objectives).
  std::size_t simulations_per_call() const { return sims_; }

  double operator()(std::span<const double> x) const {
    if (x.size() != dimension())
      throw std::invalid_argument("objective '" + id_ + "': got dimension " +
                                  std::to_string(x.size()) + ", expected " +
                                  std::to_string(dimension()));
    return require_finite((*fn_)(x), "objective '" + id_ + "'");
  }
  double operator()(const ControlVector& x) const { return (*this)(x.span()); }

 private:
  std::string id_;
  std::shared_ptr<const Bounds> bounds_;
  std::shared_ptr<const Fn> fn_;
  std::size_t sims_;
};

// ---------------------------------------------------------------------------
// Rastrigin

/// f(x) = 10 d + sum_i (x_i^2 - 10 cos(2 pi x_i)); zero only at the origin.
inline double rastrigin_cost(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("rastrigin: empty vector");
  constexpr double two_pi = 6.283185307179586476925286766559;
  double f = 10.0 * static_cast<double>(x.size());
  for (double xi : x) f += xi * xi - 10.0 * std::cos(two_pi * xi);
  return f;
}

/// Maximization adapter: value = -rastrigin_cost(x) on [-bound, bound]^d.
inline Objective make_rastrigin(std::size_t dimension, double bound = 5.12) {
  return Objective("rastrigin;d=" + std::to_string(dimension) + ";bound=" + format_real(bound),
                   Bounds::uniform(dimension, -bound, bound),
                   [](std::span<const double> x) { return -rastrigin_cost(x); });
}

/// Maximization adapter for the sphere: value = -sum x_i^2.
inline Objective make_sphere(std::size_t dimension, double bound = 10.0) {
  return Objective("sphere;d=" + std::to_string(dimension) + ";bound=" + format_real(bound),
                   Bounds::uniform(dimension, -bound, bound), [](std::span<const double> x) {
                     double s = 0.0;
                     for (double xi : x) s += xi * xi;
                     return -s;
                   });
}

// ---------------------------------------------------------------------------
// Fluid accounting

/// Field-level cumulative volumes (bbl).
struct FluidTotals {
  double q_op = 0.0;  // oil produced
  double q_wp = 0.0;  // water produced
  double q_wi = 0.0;  // water injected

  void validate() const {
    if (!(q_op >= 0.0) || !(q_wp >= 0.0) || !(q_wi >= 0.0))
      throw std::invalid_argument("fluid totals must be finite and nonnegative");
  }
};

/// Weighted cumulative fluid: q_op - 0.1 (q_wp + q_wi).
inline double wcf(const FluidTotals& t) {
  t.validate();
  return t.q_op - 0.1 * (t.q_wp + t.q_wi);
}

namespace fluid {
inline const std::string kOilProduced = "oil_produced";
inline const std::string kWaterProduced = "water_produced";
inline const std::string kWaterInjected = "water_injected";

inline std::vector<std::string> waterflood() { return {kOilProduced, kWaterProduced, kWaterInjected}; }
}  // namespace fluid

/// Per-interval volumes for a named fluid set. volumes[tau][f] >= 0.
struct FluidSeries {
  std::vector<std::string> fluids;
  std::vector<std::vector<double>> volumes;

  std::size_t interval_count() const { return volumes.size(); }
  std::size_t fluid_count() const { return fluids.size(); }

  void validate() const {
    if (fluids.empty()) throw std::invalid_argument("fluid series: no fluids");
    if (volumes.empty()) throw std::invalid_argument("fluid series: no intervals");
    for (const auto& row : volumes) {
      if (row.size() != fluids.size())
        throw std::invalid_argument("fluid series: interval width does not match fluid count");
      for (double q : row)
        if (!(q >= 0.0) || !std::isfinite(q))
          throw std::invalid_argument("fluid series: volumes must be finite and nonnegative");
    }
  }

  /// Sum over intervals for one fluid.
  double cumulative(std::size_t f) const {
    double s = 0.0;
    for (const auto& row : volumes) s += row.at(f);
    return s;
  }

  double cumulative(const std::string& name) const { return cumulative(index_of(name)); }

  std::size_t index_of(const std::string& name) const {
    for (std::size_t f = 0; f < fluids.size(); ++f)
      if (fluids[f] == name) return f;
    throw std::invalid_argument("fluid series: no fluid named '" + name + "'");
  }

  /// Collapses a waterflood series into WCF inputs.
  FluidTotals totals() const {
    FluidTotals t{cumulative(fluid::kOilProduced), cumulative(fluid::kWaterProduced),
                  cumulative(fluid::kWaterInjected)};
    t.validate();
    return t;
  }

  friend bool operator==(const FluidSeries&, const FluidSeries&) = default;
};

/// Unit cash value and discount rate per fluid. Costs are negative prices.
struct EconParams {
  std::vector<std::string> fluids;
  std::vector<double> price;
  std::vector<double> discount;

  static EconParams waterflood(double oil_price = 40.0, double water_prod_cost = -4.0,
                               double water_inj_cost = -2.0, double discount = 0.08) {
    return {fluid::waterflood(), {oil_price, water_prod_cost, water_inj_cost},
            {discount, discount, discount}};
  }

  void validate() const {
    if (fluids.empty() || price.size() != fluids.size() || discount.size() != fluids.size())
      throw std::invalid_argument("econ params: price/discount must cover every fluid");
    for (std::size_t f = 0; f < fluids.size(); ++f) {
      if (!std::isfinite(price[f])) throw std::invalid_argument("econ params: non-finite price");
      if (!(discount[f] >= 0.0) || !std::isfinite(discount[f]))
        throw std::invalid_argument("econ params: discount must be finite and >= 0");
    }
  }
};

/// NPV = sum_f sum_tau Q[tau][f] C_f / (1 + d_f)^(tau - 1); the first interval
/// is undiscounted.
inline double npv(const FluidSeries& s, const EconParams& e) {
  s.validate();
  e.validate();
  if (s.fluids != e.fluids)
    throw std::invalid_argument("npv: fluid series and econ params cover different fluids");
  double total = 0.0;
  for (std::size_t f = 0; f < s.fluid_count(); ++f) {
    const double growth = 1.0 + e.discount[f];
    double factor = 1.0;  // (1 + d_f)^(tau - 1)
    for (std::size_t tau = 0; tau < s.interval_count(); ++tau) {
      total += s.volumes[tau][f] * e.price[f] / factor;
      factor *= growth;
    }
  }
  return total;
}

// ---------------------------------------------------------------------------
// Ensemble averaging

/// Arithmetic mean of the per-realization objective values at x.
inline double ensemble_mean(std::span<const Objective> realizations, std::span<const double> x) {
  if (realizations.empty()) throw std::invalid_argument("ensemble_mean: no realizations");
  double sum = 0.0;
  for (const auto& r : realizations) sum += r(x);
  return sum / static_cast<double>(realizations.size());
}

/// Wraps an ensemble as one Objective. Every member must share the bounds.
inline Objective make_ensemble(std::string id, std::vector<Objective> realizations) {
  if (realizations.empty()) throw std::invalid_argument("ensemble: no realizations");
  std::size_t sims = 0;
  for (const auto& r : realizations) {
    if (!(r.bounds() == realizations.front().bounds()))
      throw std::invalid_argument("ensemble: realizations disagree on bounds");
    sims += r.simulations_per_call();
  }
  Bounds b = realizations.front().bounds();
  auto members = std::make_shared<const std::vector<Objective>>(std::move(realizations));
  return Objective(
      std::move(id), std::move(b),
      [members](std::span<const double> x) { return ensemble_mean(*members, x); }, sims);
}

}  // namespace hybridevo
