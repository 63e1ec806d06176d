// (mu/mu_w, lambda)-CMA-ES with rank-one and rank-mu covariance updates and
// cumulative step-size adaptation, using the tutorial default strategy
// parameters (positive recombination weights only).
//
// The distribution lives in box-normalized coordinates u = (x - lower) / range,
// so C = I means "isotropic relative to each control's range". Samples are
// clipped to the box for evaluation while the unclipped samples drive the
// update.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hybridevo/core.hpp"
#include "hybridevo/engine.hpp"

namespace hybridevo {

class CmaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Strategy constants as pure functions of (dimension, lambda).
struct CmaStrategy {
  std::size_t dimension = 0;
  std::size_t lambda = 0;
  std::size_t mu = 0;
  std::vector<double> weights;  // descending, sum 1
  double mueff = 0.0;
  double cc = 0.0;
  double cs = 0.0;
  double c1 = 0.0;
  double cmu = 0.0;
  double damps = 0.0;
  double chi_n = 0.0;  // E||N(0, I)||

  static std::vector<double> default_weights(std::size_t lambda) {
    const std::size_t mu = lambda / 2;
    std::vector<double> w(mu);
    const double base = std::log((static_cast<double>(lambda) + 1.0) / 2.0);
    for (std::size_t i = 0; i < mu; ++i) w[i] = base - std::log(static_cast<double>(i + 1));
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& wi : w) wi /= sum;
    return w;
  }

  static CmaStrategy make(std::size_t dimension, std::size_t lambda) {
    if (dimension < 1) throw std::invalid_argument("cmaes: dimension must be >= 1");
    if (lambda < 2) throw std::invalid_argument("cmaes: lambda must be >= 2");
    CmaStrategy s;
    s.dimension = dimension;
    s.lambda = lambda;
    s.mu = lambda / 2;
    s.weights = default_weights(lambda);
    double sq = 0.0;
    for (double w : s.weights) sq += w * w;
    s.mueff = 1.0 / sq;
    const double n = static_cast<double>(dimension);
    s.cc = (4.0 + s.mueff / n) / (n + 4.0 + 2.0 * s.mueff / n);
    s.cs = (s.mueff + 2.0) / (n + s.mueff + 5.0);
    s.c1 = 2.0 / ((n + 1.3) * (n + 1.3) + s.mueff);
    s.cmu = std::min(1.0 - s.c1,
                     2.0 * (s.mueff - 2.0 + 1.0 / s.mueff) / ((n + 2.0) * (n + 2.0) + s.mueff));
    s.damps = 1.0 + 2.0 * std::max(0.0, std::sqrt((s.mueff - 1.0) / (n + 1.0)) - 1.0) + s.cs;
    s.chi_n = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
    return s;
  }
};

/// Distribution state in normalized coordinates.
struct CmaState {
  Eigen::VectorXd mean;
  double sigma = 0.0;
  Eigen::MatrixXd C;
  Eigen::MatrixXd B;   // eigenvectors of C
  Eigen::VectorXd D;   // sqrt of eigenvalues of C
  Eigen::VectorXd pc;
  Eigen::VectorXd ps;
  std::size_t updates = 0;

  static CmaState isotropic(Eigen::VectorXd mean, double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("cmaes: sigma must be > 0");
    const auto n = mean.size();
    CmaState s;
    s.mean = std::move(mean);
    s.sigma = sigma;
    s.C = Eigen::MatrixXd::Identity(n, n);
    s.pc = Eigen::VectorXd::Zero(n);
    s.ps = Eigen::VectorXd::Zero(n);
    s.decompose();
    return s;
  }

  /// Refreshes B and D from C. Fails if C is not positive definite.
  void decompose() {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C);
    if (eig.info() != Eigen::Success) throw CmaError("cmaes: eigendecomposition failed (" + diagnostics() + ")");
    const Eigen::VectorXd ev = eig.eigenvalues();
    if (!(ev.minCoeff() > 0.0) || !std::isfinite(ev.maxCoeff())) {
      std::ostringstream os;
      os << "cmaes: covariance not positive definite, eigenvalues in [" << format_real(ev.minCoeff())
         << ", " << format_real(ev.maxCoeff()) << "] (" << diagnostics() << ")";
      throw CmaError(os.str());
    }
    B = eig.eigenvectors();
    D = ev.cwiseSqrt();
  }

  double condition_number() const {
    return D.size() ? (D.maxCoeff() * D.maxCoeff()) / (D.minCoeff() * D.minCoeff()) : 0.0;
  }

  std::string diagnostics() const {
    std::ostringstream os;
    os << "dimension " << C.rows() << ", sigma " << format_real(sigma) << ", updates " << updates
       << ", max |C - C^T| " << format_real((C - C.transpose()).cwiseAbs().maxCoeff())
       << ", diag range [" << format_real(C.diagonal().minCoeff()) << ", "
       << format_real(C.diagonal().maxCoeff()) << "]";
    return os.str();
  }
};

/// Draws lambda unclipped samples m + sigma * B * D * z, z ~ N(0, I).
/// Draw order: sample-major, one normal per coordinate.
inline std::vector<Eigen::VectorXd> cmaes_ask(const CmaState& s, std::size_t lambda, RngStream& rng) {
  const auto n = s.mean.size();
  if (s.B.rows() != n || s.D.size() != n) throw CmaError("cmaes: state not decomposed");
  std::vector<Eigen::VectorXd> out;
  out.reserve(lambda);
  Eigen::VectorXd z(n);
  for (std::size_t k = 0; k < lambda; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) z[i] = rng.normal();
    out.push_back(s.mean + s.sigma * (s.B * s.D.cwiseProduct(z)));
  }
  return out;
}

/// One generation of the standard update, maximizing `values`.
inline void cmaes_tell(CmaState& s, const CmaStrategy& st, std::span<const Eigen::VectorXd> samples,
                       std::span<const double> values) {
  if (samples.size() != st.lambda || values.size() != st.lambda)
    throw std::invalid_argument("cmaes tell: expected " + std::to_string(st.lambda) +
                                " samples and values, got " + std::to_string(samples.size()) + "/" +
                                std::to_string(values.size()));
  const auto n = s.mean.size();
  const double dn = static_cast<double>(n);

  std::vector<std::size_t> order(st.lambda);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });

  const Eigen::VectorXd old_mean = s.mean;
  Eigen::VectorXd y_w = Eigen::VectorXd::Zero(n);
  std::vector<Eigen::VectorXd> ys;
  ys.reserve(st.mu);
  for (std::size_t i = 0; i < st.mu; ++i) {
    ys.push_back((samples[order[i]] - old_mean) / s.sigma);
    y_w += st.weights[i] * ys.back();
  }
  s.mean = old_mean + s.sigma * y_w;

  // C^{-1/2} y_w = B D^{-1} B^T y_w
  const Eigen::VectorXd c_inv_sqrt_yw = s.B * (s.B.transpose() * y_w).cwiseQuotient(s.D);
  s.ps = (1.0 - st.cs) * s.ps + std::sqrt(st.cs * (2.0 - st.cs) * st.mueff) * c_inv_sqrt_yw;

  const double ps_norm = s.ps.norm();
  const double denom = std::sqrt(1.0 - std::pow(1.0 - st.cs, 2.0 * static_cast<double>(s.updates + 1)));
  const bool hsig = ps_norm / denom / st.chi_n < 1.4 + 2.0 / (dn + 1.0);

  s.pc = (1.0 - st.cc) * s.pc +
         (hsig ? std::sqrt(st.cc * (2.0 - st.cc) * st.mueff) : 0.0) * y_w;

  Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < st.mu; ++i) rank_mu.noalias() += st.weights[i] * ys[i] * ys[i].transpose();
  const double delta_h = hsig ? 0.0 : st.cc * (2.0 - st.cc);
  s.C = (1.0 - st.c1 - st.cmu) * s.C + st.c1 * (s.pc * s.pc.transpose() + delta_h * s.C) +
        st.cmu * rank_mu;
  s.C = 0.5 * (s.C + s.C.transpose()).eval();

  s.sigma *= std::exp((st.cs / st.damps) * (ps_norm / st.chi_n - 1.0));
  if (!std::isfinite(s.sigma) || !(s.sigma > 0.0))
    throw CmaError("cmaes: step size degenerated (" + s.diagnostics() + ")");
  ++s.updates;
  s.decompose();
}

// ---------------------------------------------------------------------------

struct CmaesConfig {
  std::optional<std::size_t> lambda;  // absent: stage population size
  double sigma0 = 0.3;                // initial step, fraction of range
  void validate() const {
    if (!(sigma0 > 0.0)) throw std::invalid_argument("cmaes: sigma0 must be > 0");
    if (lambda && *lambda < 2) throw std::invalid_argument("cmaes: lambda must be >= 2");
  }
};

/// Mean and normalized step size for a CMA-ES stage started from a population.
struct CmaInit {
  ControlVector mean;  // raw coordinates
  double sigma = 0.0;  // normalized (fraction of range)
};

/// Weighted recombination of the best members; sigma is the largest
/// per-dimension standard deviation of those members in normalized units,
/// floored at 1e-3.
inline CmaInit cmaes_init_from_population(const Population& pop, std::span<const double> weights,
                                          const Bounds& b) {
  constexpr double kSigmaFloor = 1e-3;
  const std::size_t mu = weights.size();
  if (mu == 0) throw std::invalid_argument("cmaes handoff: no recombination weights");
  if (!pop.fully_evaluated()) throw std::invalid_argument("cmaes handoff: unevaluated members");
  if (pop.size() < mu)
    throw std::invalid_argument("cmaes handoff: population of " + std::to_string(pop.size()) +
                                " is smaller than mu = " + std::to_string(mu));
  const auto order = pop.ranking();
  const std::size_t d = b.dimension();
  std::vector<double> mean(d, 0.0);
  for (std::size_t k = 0; k < mu; ++k) {
    const auto& x = pop.members[order[k]].x;
    if (x.size() != d) throw std::invalid_argument("cmaes handoff: dimension mismatch");
    for (std::size_t i = 0; i < d; ++i) mean[i] += weights[k] * x[i];
  }
  double sigma = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    double m = 0.0;
    for (std::size_t k = 0; k < mu; ++k) m += pop.members[order[k]].x[i];
    m /= static_cast<double>(mu);
    double var = 0.0;
    for (std::size_t k = 0; k < mu; ++k) {
      const double dev = pop.members[order[k]].x[i] - m;
      var += dev * dev;
    }
    var /= static_cast<double>(mu);
    sigma = std::max(sigma, std::sqrt(var) / b.range(i));
  }
  return {ControlVector(std::move(mean)), std::max(sigma, kSigmaFloor)};
}

class CmaesEngine final : public Engine {
 public:
  /// Fresh stage: mean at `mean0` (box center when absent), step sigma0 of range.
  CmaesEngine(CmaesConfig cfg, Bounds b, RngStream rng, std::size_t lambda,
              std::optional<ControlVector> mean0 = std::nullopt)
      : Engine(std::move(b), rng), cfg_(cfg) {
    cfg_.validate();
    strategy_ = CmaStrategy::make(bounds_.dimension(), cfg_.lambda.value_or(lambda));
    if (mean0 && mean0->size() != bounds_.dimension())
      throw std::invalid_argument("cmaes: initial mean dimension mismatch");
    Eigen::VectorXd m(bounds_.dimension());
    for (std::size_t i = 0; i < bounds_.dimension(); ++i)
      m[static_cast<Eigen::Index>(i)] = mean0 ? to_unit((*mean0)[i], i) : 0.5;
    state_ = CmaState::isotropic(std::move(m), cfg_.sigma0);
    sample();
  }

  /// Handoff: distribution initialized from the incoming population's best members.
  static CmaesEngine from_population(const Population& pop, CmaesConfig cfg, Bounds b,
                                     RngStream rng, std::size_t lambda) {
    cfg.validate();
    const auto weights = CmaStrategy::default_weights(cfg.lambda.value_or(lambda));
    const auto init = cmaes_init_from_population(pop, weights, b);
    CmaesConfig c = cfg;
    c.sigma0 = init.sigma;
    CmaesEngine e(c, std::move(b), rng, lambda, init.mean);
    e.adopt(pop);
    return e;
  }

  EngineKind kind() const override { return EngineKind::kCmaes; }
  std::unique_ptr<Engine> clone() const override { return std::make_unique<CmaesEngine>(*this); }

  const CmaState& state() const { return state_; }
  const CmaStrategy& strategy() const { return strategy_; }

  /// Distribution mean in raw coordinates.
  ControlVector mean() const {
    std::vector<double> x(bounds_.dimension());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = from_unit(state_.mean[static_cast<Eigen::Index>(i)], i);
    return ControlVector(std::move(x));
  }

 protected:
  void advance(const Population& evaluated) override {
    std::vector<double> values;
    values.reserve(evaluated.size());
    for (const auto& m : evaluated.members) values.push_back(*m.value);
    cmaes_tell(state_, strategy_, samples_, values);
    sample();
  }

  void save_state(TextWriter& w) const override {
    w.put("lambda", static_cast<std::uint64_t>(strategy_.lambda));
    w.put("sigma0", cfg_.sigma0);
    w.put("mean", std::span<const double>(state_.mean.data(), static_cast<std::size_t>(state_.mean.size())));
    w.put("sigma", state_.sigma);
    w.put("C", std::span<const double>(state_.C.data(), static_cast<std::size_t>(state_.C.size())));
    w.put("pc", std::span<const double>(state_.pc.data(), static_cast<std::size_t>(state_.pc.size())));
    w.put("ps", std::span<const double>(state_.ps.data(), static_cast<std::size_t>(state_.ps.size())));
    w.put("updates", static_cast<std::uint64_t>(state_.updates));
    w.put("samples_count", static_cast<std::uint64_t>(samples_.size()));
    for (const auto& s : samples_) w.put("sample", std::span<const double>(s.data(), static_cast<std::size_t>(s.size())));
  }

  void load_state(TextReader& r) override {
    const auto n = static_cast<Eigen::Index>(bounds_.dimension());
    auto vec = [&](std::string_view key, Eigen::Index len) {
      const auto v = r.reals(key);
      if (static_cast<Eigen::Index>(v.size()) != len) throw CheckpointError("checkpoint: bad size for " + std::string(key));
      return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), len));
    };
    strategy_ = CmaStrategy::make(bounds_.dimension(), r.u64("lambda"));
    cfg_.sigma0 = r.real("sigma0");
    state_.mean = vec("mean", n);
    state_.sigma = r.real("sigma");
    const Eigen::VectorXd c = vec("C", n * n);
    state_.C = Eigen::Map<const Eigen::MatrixXd>(c.data(), n, n);
    state_.pc = vec("pc", n);
    state_.ps = vec("ps", n);
    state_.updates = r.u64("updates");
    state_.decompose();
    samples_.clear();
    const auto count = r.u64("samples_count");
    for (std::uint64_t k = 0; k < count; ++k) samples_.push_back(vec("sample", n));
  }

 private:
  double to_unit(double x, std::size_t i) const { return (x - bounds_.lower(i)) / bounds_.range(i); }
  double from_unit(double u, std::size_t i) const { return bounds_.lower(i) + u * bounds_.range(i); }

  void sample() {
    samples_ = cmaes_ask(state_, strategy_.lambda, rng_);
    pending_.clear();
    for (const auto& s : samples_) {
      std::vector<double> x(bounds_.dimension());
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = from_unit(s[static_cast<Eigen::Index>(i)], i);
      pending_.push_back(clip(ControlVector(std::move(x)), bounds_));
    }
  }

  CmaesConfig cfg_;
  CmaStrategy strategy_;
  CmaState state_;
  std::vector<Eigen::VectorXd> samples_;  // unclipped, normalized
};

}  // namespace hybridevo
