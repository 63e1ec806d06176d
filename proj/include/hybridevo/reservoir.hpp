// Lumped-parameter waterflood proxy.
//
// One tank at average pressure P drained by producers and recharged by
// injectors, all on bottom-hole-pressure control:
//
//   injector rate   q_j = ii_j * max(0, bhp_j - P)
//   producer liquid q_w = pi_w * max(0, P - bhp_w)
//   recovery        R   = min(cum_oil / ooip_mobile, 1),  water cut WC = R^m
//   pressure        P  <- P + dt * (sum q_j - sum q_w) / ct_vp
//
// Explicit Euler with a fixed 30-day step over 20 years (244 steps, the last
// one 10 days long). Step volumes are prorated onto annual intervals.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hybridevo/core.hpp"
#include "hybridevo/objectives.hpp"

namespace hybridevo::reservoir {

/// Lumped subsurface parameters of one realization. Everything strictly positive.
struct RealizationParams {
  std::vector<double> pi;          // producer productivity index, bbl/day/bar
  std::vector<double> ii;          // injector injectivity index, bbl/day/bar
  double ooip_mobile = 0.0;        // bbl
  double ct_vp = 0.0;              // total compressibility x pore volume, bbl/bar
  double p_init = 0.0;             // bar
  double watercut_exponent = 0.0;  // m in WC = R^m

  std::size_t producers() const { return pi.size(); }
  std::size_t injectors() const { return ii.size(); }
  std::size_t wells() const { return pi.size() + ii.size(); }

  /// Calibrated default: 11 producers and 7 injectors. The mid-bounds schedule
  /// recovers about 40% of the mobile oil over 20 years.
  static RealizationParams defaults() {
    RealizationParams p;
    p.pi.assign(11, 50.0);
    p.ii.assign(7, 80.0);
    p.ooip_mobile = 3.0e8;
    p.ct_vp = 2.0e5;
    p.p_init = 200.0;
    p.watercut_exponent = 2.0;
    return p;
  }

  void validate() const {
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (pi.empty() || ii.empty())
      throw std::invalid_argument("realization: need at least one producer and one injector");
    for (double v : pi)
      if (!positive(v)) throw std::invalid_argument("realization: productivity index must be > 0");
    for (double v : ii)
      if (!positive(v)) throw std::invalid_argument("realization: injectivity index must be > 0");
    if (!positive(ooip_mobile) || !positive(ct_vp) || !positive(p_init) ||
        !positive(watercut_exponent))
      throw std::invalid_argument("realization: ooip_mobile, ct_vp, p_init, watercut_exponent must be > 0");
  }

  friend bool operator==(const RealizationParams&, const RealizationParams&) = default;
};

/// BHP limits (bar) for producers and injectors.
struct BhpLimits {
  double prod_min = 140.0;
  double prod_max = 195.0;
  double inj_min = 205.0;
  double inj_max = 260.0;

  void validate() const {
    if (!(prod_min < prod_max) || !(inj_min < inj_max))
      throw std::invalid_argument("bhp limits: need min < max for producers and injectors");
  }
  friend bool operator==(const BhpLimits&, const BhpLimits&) = default;
};

struct SimSettings {
  double dt_days = 30.0;
  int years = 20;
  int periods = 4;  // control periods, equal length
  double days_per_year = 365.0;

  double horizon_days() const { return years * days_per_year; }
  double period_days() const { return horizon_days() / periods; }
  friend bool operator==(const SimSettings&, const SimSettings&) = default;
};

/// BHP per well per control period. Rows 0..producers-1 are producers, the
/// remaining rows injectors.
struct ControlSchedule {
  std::size_t producers = 0;
  std::size_t injectors = 0;
  std::size_t periods = 0;
  std::vector<double> bhp;  // well-major: bhp[well * periods + period]

  double at(std::size_t well, std::size_t period) const { return bhp[well * periods + period]; }
  std::size_t wells() const { return producers + injectors; }

  static ControlSchedule from_controls(std::span<const double> x, std::size_t producers,
                                       std::size_t injectors, std::size_t periods) {
    if (x.size() != (producers + injectors) * periods)
      throw std::invalid_argument("control schedule: expected " +
                                  std::to_string((producers + injectors) * periods) +
                                  " controls, got " + std::to_string(x.size()));
    return {producers, injectors, periods, std::vector<double>(x.begin(), x.end())};
  }

  /// Every producer at one pressure and every injector at another.
  static ControlSchedule constant(std::size_t producers, std::size_t injectors,
                                  std::size_t periods, double prod_bhp, double inj_bhp) {
    ControlSchedule c{producers, injectors, periods, {}};
    for (std::size_t w = 0; w < producers + injectors; ++w)
      for (std::size_t p = 0; p < periods; ++p) c.bhp.push_back(w < producers ? prod_bhp : inj_bhp);
    return c;
  }
};

/// Search box for the flattened schedule (well-major ordering).
inline Bounds schedule_bounds(std::size_t producers, std::size_t injectors, std::size_t periods,
                              const BhpLimits& lim) {
  lim.validate();
  std::vector<double> lo, hi;
  for (std::size_t w = 0; w < producers + injectors; ++w) {
    for (std::size_t p = 0; p < periods; ++p) {
      lo.push_back(w < producers ? lim.prod_min : lim.inj_min);
      hi.push_back(w < producers ? lim.prod_max : lim.inj_max);
    }
  }
  return Bounds(std::move(lo), std::move(hi));
}

struct SimState {
  double p = 0.0;
  double cum_oil = 0.0;
  double cum_wprod = 0.0;
  double cum_winj = 0.0;
  double t = 0.0;  // days
};

/// Called after every Euler step with the post-step state and the water cut
/// used during the step.
using StepObserver = std::function<void(const SimState&, double water_cut)>;

inline FluidSeries simulate(const ControlSchedule& c, const RealizationParams& r,
                            const BhpLimits& limits = {}, const SimSettings& settings = {},
                            const StepObserver& observer = {}) {
  r.validate();
  limits.validate();
  if (c.producers != r.producers() || c.injectors != r.injectors())
    throw std::invalid_argument("simulate: schedule well counts do not match the realization");
  if (c.periods != static_cast<std::size_t>(settings.periods) ||
      c.bhp.size() != c.wells() * c.periods)
    throw std::invalid_argument("simulate: schedule does not cover every control period");
  if (!(settings.dt_days > 0.0) || settings.years < 1 || settings.periods < 1)
    throw std::invalid_argument("simulate: bad time settings");
  for (std::size_t w = 0; w < c.wells(); ++w) {
    const bool prod = w < c.producers;
    const double lo = prod ? limits.prod_min : limits.inj_min;
    const double hi = prod ? limits.prod_max : limits.inj_max;
    for (std::size_t k = 0; k < c.periods; ++k) {
      const double v = c.at(w, k);
      if (!(v >= lo && v <= hi))
        throw std::invalid_argument("simulate: well " + std::to_string(w + 1) + " period " +
                                    std::to_string(k + 1) + " BHP " + format_real(v) +
                                    " outside [" + format_real(lo) + ", " + format_real(hi) + "]");
    }
  }

  FluidSeries out;
  out.fluids = fluid::waterflood();
  out.volumes.assign(static_cast<std::size_t>(settings.years), std::vector<double>(3, 0.0));

  const double horizon = settings.horizon_days();
  const double period_len = settings.period_days();
  SimState s;
  s.p = r.p_init;

  // Integer step index keeps the step grid free of accumulated round-off.
  for (std::int64_t step = 0;; ++step) {
    const double t0 = static_cast<double>(step) * settings.dt_days;
    if (t0 >= horizon) break;
    const double t1 = std::min(t0 + settings.dt_days, horizon);
    const double dt = t1 - t0;
    const auto period = std::min<std::size_t>(static_cast<std::size_t>(t0 / period_len), c.periods - 1);

    double inj_rate = 0.0;
    for (std::size_t j = 0; j < c.injectors; ++j)
      inj_rate += r.ii[j] * std::max(0.0, c.at(c.producers + j, period) - s.p);
    double liq_rate = 0.0;
    for (std::size_t w = 0; w < c.producers; ++w)
      liq_rate += r.pi[w] * std::max(0.0, s.p - c.at(w, period));

    const double recovery = std::min(s.cum_oil / r.ooip_mobile, 1.0);
    const double wc = std::clamp(std::pow(recovery, r.watercut_exponent), 0.0, 1.0);

    const double liquid = liq_rate * dt;
    const double oil = std::min(liquid * (1.0 - wc), std::max(0.0, r.ooip_mobile - s.cum_oil));
    const double water = liquid - oil;
    const double injected = inj_rate * dt;

    s.p += dt * (inj_rate - liq_rate) / r.ct_vp;
    s.cum_oil += oil;
    s.cum_wprod += water;
    s.cum_winj += injected;
    s.t = t1;

    // Prorate onto annual intervals; a 30-day step crosses at most one boundary
    // but the loop handles any step length.
    for (double a = t0; a < t1;) {
      const auto year = std::min<std::size_t>(static_cast<std::size_t>(a / settings.days_per_year),
                                              out.volumes.size() - 1);
      const double b = std::min(t1, static_cast<double>(year + 1) * settings.days_per_year);
      const double share = (b - a) / dt;
      out.volumes[year][0] += oil * share;
      out.volumes[year][1] += water * share;
      out.volumes[year][2] += injected * share;
      if (b <= a) break;
      a = b;
    }
    if (observer) observer(s, wc);
  }
  return out;
}

/// Multiplies every base parameter by an independent U[1 - spread, 1 + spread]
/// factor. Draw order per realization: pi..., ii..., ooip_mobile, ct_vp,
/// p_init, watercut_exponent.
inline std::vector<RealizationParams> generate_realizations(std::uint64_t seed, std::size_t n,
                                                            const RealizationParams& base,
                                                            double spread) {
  if (n < 1) throw std::invalid_argument("generate_realizations: n must be >= 1");
  if (!(spread >= 0.0 && spread < 1.0))
    throw std::invalid_argument("generate_realizations: spread must be in [0, 1)");
  base.validate();
  RngStream rng = RngStream(seed).fork("realizations");
  auto factor = [&] { return rng.uniform(1.0 - spread, 1.0 + spread); };
  std::vector<RealizationParams> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    RealizationParams r = base;
    for (double& v : r.pi) v *= factor();
    for (double& v : r.ii) v *= factor();
    r.ooip_mobile *= factor();
    r.ct_vp *= factor();
    r.p_init *= factor();
    r.watercut_exponent *= factor();
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Realization CSV. Header names the columns:
//   p_init,ooip_mobile,ct_vp,watercut_exponent,pi_1..pi_P,ii_1..ii_I
// one realization per row, values with 17 significant digits.

inline void write_realizations_csv(std::ostream& os, const std::vector<RealizationParams>& rs) {
  if (rs.empty()) throw std::invalid_argument("realizations csv: nothing to write");
  const auto np = rs.front().producers(), ni = rs.front().injectors();
  os << "p_init,ooip_mobile,ct_vp,watercut_exponent";
  for (std::size_t k = 1; k <= np; ++k) os << ",pi_" << k;
  for (std::size_t k = 1; k <= ni; ++k) os << ",ii_" << k;
  os << '\n';
  for (const auto& r : rs) {
    if (r.producers() != np || r.injectors() != ni)
      throw std::invalid_argument("realizations csv: well counts differ between rows");
    os << format_real(r.p_init) << ',' << format_real(r.ooip_mobile) << ','
       << format_real(r.ct_vp) << ',' << format_real(r.watercut_exponent);
    for (double v : r.pi) os << ',' << format_real(v);
    for (double v : r.ii) os << ',' << format_real(v);
    os << '\n';
  }
}

inline std::vector<RealizationParams> read_realizations_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("realizations csv: empty input");
  const auto header = split(trim(line), ',');
  if (header.size() < 6 || header[0] != "p_init" || header[1] != "ooip_mobile" ||
      header[2] != "ct_vp" || header[3] != "watercut_exponent")
    throw std::runtime_error("realizations csv: unexpected header");
  std::size_t np = 0, ni = 0;
  for (std::size_t c = 4; c < header.size(); ++c) {
    const bool is_pi = header[c].starts_with("pi_");
    const bool is_ii = header[c].starts_with("ii_");
    if (is_pi && ni == 0 && header[c] == "pi_" + std::to_string(np + 1)) {
      ++np;
    } else if (is_ii && header[c] == "ii_" + std::to_string(ni + 1)) {
      ++ni;
    } else {
      throw std::runtime_error("realizations csv: bad column '" + std::string(header[c]) + "'");
    }
  }
  std::vector<RealizationParams> out;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    const auto f = split(trim(line), ',');
    if (f.size() != header.size())
      throw std::runtime_error("realizations csv: row has " + std::to_string(f.size()) +
                               " fields, expected " + std::to_string(header.size()));
    RealizationParams r;
    r.p_init = parse_real(f[0]);
    r.ooip_mobile = parse_real(f[1]);
    r.ct_vp = parse_real(f[2]);
    r.watercut_exponent = parse_real(f[3]);
    for (std::size_t k = 0; k < np; ++k) r.pi.push_back(parse_real(f[4 + k]));
    for (std::size_t k = 0; k < ni; ++k) r.ii.push_back(parse_real(f[4 + np + k]));
    r.validate();
    out.push_back(std::move(r));
  }
  if (out.empty()) throw std::runtime_error("realizations csv: no rows");
  return out;
}

// ---------------------------------------------------------------------------

enum class ProxyMetric { kWcf, kNpv };

/// One realization as a maximization objective over the flattened schedule.
inline Objective make_proxy_objective(std::string id, ProxyMetric metric, RealizationParams r,
                                      BhpLimits limits = {}, SimSettings settings = {},
                                      EconParams econ = EconParams::waterflood()) {
  r.validate();
  econ.validate();
  const auto np = r.producers(), ni = r.injectors();
  const auto periods = static_cast<std::size_t>(settings.periods);
  Bounds b = schedule_bounds(np, ni, periods, limits);
  return Objective(std::move(id), std::move(b),
                   [=](std::span<const double> x) {
                     const auto series =
                         simulate(ControlSchedule::from_controls(x, np, ni, periods), r, limits, settings);
                     return metric == ProxyMetric::kWcf ? wcf(series.totals()) : npv(series, econ);
                   });
}

}  // namespace hybridevo::reservoir
