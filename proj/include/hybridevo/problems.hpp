// Problem descriptions and their canonical objective ids.
//
// The id is a complete, self-describing recipe (`kind;key=value;...`), so a
// queue worker can rebuild exactly the objective the orchestrator uses from
// the id alone.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hybridevo/core.hpp"
#include "hybridevo/objectives.hpp"
#include "hybridevo/reservoir.hpp"

namespace hybridevo {

enum class ProblemKind { kRastrigin, kSphere, kProxyWcf, kProxyNpv };

inline std::string_view to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::kRastrigin: return "rastrigin";
    case ProblemKind::kSphere: return "sphere";
    case ProblemKind::kProxyWcf: return "proxy_wcf";
    case ProblemKind::kProxyNpv: return "proxy_npv";
  }
  return "?";
}

inline ProblemKind parse_problem_kind(std::string_view s) {
  if (s == "rastrigin") return ProblemKind::kRastrigin;
  if (s == "sphere") return ProblemKind::kSphere;
  if (s == "proxy_wcf") return ProblemKind::kProxyWcf;
  if (s == "proxy_npv") return ProblemKind::kProxyNpv;
  throw std::invalid_argument("unknown problem '" + std::string(s) +
                              "' (expected rastrigin, sphere, proxy_wcf or proxy_npv)");
}

struct ProblemSpec {
  ProblemKind kind = ProblemKind::kProxyWcf;

  // rastrigin / sphere
  std::size_t dimension = 2;
  double bound = 5.12;

  // proxy
  reservoir::RealizationParams base = reservoir::RealizationParams::defaults();
  reservoir::BhpLimits limits;
  std::size_t n_realizations = 1;  // 1: the base realization itself
  std::uint64_t ensemble_seed = 1;
  double spread = 0.2;
  EconParams econ = EconParams::waterflood();

  bool is_proxy() const { return kind == ProblemKind::kProxyWcf || kind == ProblemKind::kProxyNpv; }

  /// Realizations used by the proxy objective.
  std::vector<reservoir::RealizationParams> realizations() const {
    if (n_realizations == 1) return {base};
    return reservoir::generate_realizations(ensemble_seed, n_realizations, base, spread);
  }

  std::string id() const {
    std::string s(to_string(kind));
    auto kv = [&](std::string_view k, const std::string& v) { s += ";" + std::string(k) + "=" + v; };
    auto list = [](const std::vector<double>& v) {
      std::string out;
      for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_real(v[i]);
      return out;
    };
    if (!is_proxy()) {
      kv("d", std::to_string(dimension));
      kv("bound", format_real(bound));
      return s;
    }
    kv("n", std::to_string(n_realizations));
    kv("seed", std::to_string(ensemble_seed));
    kv("spread", format_real(spread));
    kv("pi", list(base.pi));
    kv("ii", list(base.ii));
    kv("ooip", format_real(base.ooip_mobile));
    kv("ctvp", format_real(base.ct_vp));
    kv("pinit", format_real(base.p_init));
    kv("m", format_real(base.watercut_exponent));
    kv("bhp", list({limits.prod_min, limits.prod_max, limits.inj_min, limits.inj_max}));
    if (kind == ProblemKind::kProxyNpv) {
      kv("price", list(econ.price));
      kv("discount", list(econ.discount));
    }
    return s;
  }

  static ProblemSpec from_id(std::string_view id) {
    const auto parts = split(id, ';');
    ProblemSpec p;
    p.kind = parse_problem_kind(parts.at(0));
    std::map<std::string, std::string, std::less<>> kv;
    for (std::size_t i = 1; i < parts.size(); ++i) {
      const auto eq = parts[i].find('=');
      if (eq == std::string_view::npos) throw std::invalid_argument("objective id: bad field '" + std::string(parts[i]) + "'");
      kv.emplace(std::string(parts[i].substr(0, eq)), std::string(parts[i].substr(eq + 1)));
    }
    auto take = [&](std::string_view k) {
      auto it = kv.find(k);
      if (it == kv.end()) throw std::invalid_argument("objective id: missing '" + std::string(k) + "'");
      std::string v = it->second;
      kv.erase(it);
      return v;
    };
    auto reals = [](const std::string& v) {
      std::vector<double> out;
      for (auto t : split(v, ',')) out.push_back(parse_real(t));
      return out;
    };
    if (!p.is_proxy()) {
      p.dimension = parse_int<std::size_t>(take("d"));
      p.bound = parse_real(take("bound"));
    } else {
      p.n_realizations = parse_int<std::size_t>(take("n"));
      p.ensemble_seed = parse_int<std::uint64_t>(take("seed"));
      p.spread = parse_real(take("spread"));
      p.base.pi = reals(take("pi"));
      p.base.ii = reals(take("ii"));
      p.base.ooip_mobile = parse_real(take("ooip"));
      p.base.ct_vp = parse_real(take("ctvp"));
      p.base.p_init = parse_real(take("pinit"));
      p.base.watercut_exponent = parse_real(take("m"));
      const auto bhp = reals(take("bhp"));
      if (bhp.size() != 4) throw std::invalid_argument("objective id: bhp needs 4 values");
      p.limits = {bhp[0], bhp[1], bhp[2], bhp[3]};
      if (p.kind == ProblemKind::kProxyNpv) {
        p.econ.price = reals(take("price"));
        p.econ.discount = reals(take("discount"));
      }
    }
    if (!kv.empty()) throw std::invalid_argument("objective id: unexpected field '" + kv.begin()->first + "'");
    p.validate();
    return p;
  }

  void validate() const {
    if (!is_proxy()) {
      if (dimension < 1) throw std::invalid_argument("problem: dimension must be >= 1");
      if (!(bound > 0.0)) throw std::invalid_argument("problem: bound must be > 0");
      return;
    }
    base.validate();
    limits.validate();
    econ.validate();
    if (n_realizations < 1) throw std::invalid_argument("problem: n_realizations must be >= 1");
    if (!(spread >= 0.0 && spread < 1.0)) throw std::invalid_argument("problem: spread must be in [0, 1)");
  }

  Objective build() const {
    validate();
    switch (kind) {
      case ProblemKind::kRastrigin: {
        const auto r = make_rastrigin(dimension, bound);
        return Objective(id(), r.bounds(), [r](std::span<const double> x) { return r(x); });
      }
      case ProblemKind::kSphere: {
        const auto s = make_sphere(dimension, bound);
        return Objective(id(), s.bounds(), [s](std::span<const double> x) { return s(x); });
      }
      case ProblemKind::kProxyWcf:
      case ProblemKind::kProxyNpv: {
        const auto metric = kind == ProblemKind::kProxyWcf ? reservoir::ProxyMetric::kWcf
                                                           : reservoir::ProxyMetric::kNpv;
        const auto rs = realizations();
        std::vector<Objective> members;
        for (std::size_t k = 0; k < rs.size(); ++k)
          members.push_back(reservoir::make_proxy_objective(id() + "#" + std::to_string(k + 1), metric,
                                                            rs[k], limits, {}, econ));
        if (members.size() == 1)
          return Objective(id(), members.front().bounds(),
                           [m = members.front()](std::span<const double> x) { return m(x); });
        return make_ensemble(id(), std::move(members));
      }
    }
    throw std::logic_error("unreachable");
  }
};

/// Factory for ObjectiveRegistry: rebuilds objectives from canonical ids.
inline std::optional<Objective> objective_from_id(const std::string& id) {
  try {
    return ProblemSpec::from_id(id).build();
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  } catch (const std::out_of_range&) {
    return std::nullopt;
  }
}

}  // namespace hybridevo
