// Shared domain types for the hybridevo toolkit: bounded control vectors,
// populations, the portable random stream and the run-history ledger.
//
// Convention: every engine maximizes. Cost-style functions (Rastrigin) are
// negated by their objective adapters.
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

namespace hybridevo {

/// Raised when an objective produces NaN or infinity.
class NonFiniteValue : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Text helpers shared by every file format in the project.

/// Formats a double with 17 significant digits, enough to round-trip exactly.
inline std::string format_real(double v) {
  char buf[64];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

/// Strict real parser: the whole (trimmed) token must be consumed.
inline std::optional<double> try_parse_real(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline double parse_real(std::string_view s) {
  if (auto v = try_parse_real(s)) return *v;
  throw std::invalid_argument("not a real number: '" + std::string(s) + "'");
}

template <typename Int>
std::optional<Int> try_parse_int(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  Int v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

template <typename Int>
Int parse_int(std::string_view s) {
  if (auto v = try_parse_int<Int>(s)) return *v;
  throw std::invalid_argument("not an integer: '" + std::string(s) + "'");
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------

/// Per-dimension box constraints. lower[i] < upper[i] for every i.
class Bounds {
 public:
  Bounds(std::vector<double> lower, std::vector<double> upper)
      : lower_(std::move(lower)), upper_(std::move(upper)) {
    if (lower_.empty() || lower_.size() != upper_.size())
      throw std::invalid_argument("bounds: lower/upper must be nonempty and of equal length");
    for (std::size_t i = 0; i < lower_.size(); ++i) {
      if (!std::isfinite(lower_[i]) || !std::isfinite(upper_[i]) || !(lower_[i] < upper_[i]))
        throw std::invalid_argument("bounds: need finite lower < upper in dimension " +
                                    std::to_string(i));
    }
  }

  static Bounds uniform(std::size_t d, double lo, double hi) {
    return Bounds(std::vector<double>(d, lo), std::vector<double>(d, hi));
  }

  std::size_t dimension() const { return lower_.size(); }
  double lower(std::size_t i) const { return lower_[i]; }
  double upper(std::size_t i) const { return upper_[i]; }
  double range(std::size_t i) const { return upper_[i] - lower_[i]; }
  const std::vector<double>& lower() const { return lower_; }
  const std::vector<double>& upper() const { return upper_; }

  bool contains(std::span<const double> x) const;

  friend bool operator==(const Bounds&, const Bounds&) = default;

 private:
  std::vector<double> lower_;
  std::vector<double> upper_;
};

/// A point in the search space.
class ControlVector {
 public:
  ControlVector() = default;
  explicit ControlVector(std::vector<double> values) : values_(std::move(values)) {}
  ControlVector(std::initializer_list<double> values) : values_(values) {}

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }
  auto begin() { return values_.begin(); }
  auto end() { return values_.end(); }
  const std::vector<double>& values() const { return values_; }
  std::span<const double> span() const { return values_; }

  friend bool operator==(const ControlVector&, const ControlVector&) = default;

 private:
  std::vector<double> values_;
};

inline bool Bounds::contains(std::span<const double> x) const {
  if (x.size() != dimension()) return false;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!(x[i] >= lower_[i] && x[i] <= upper_[i])) return false;
  return true;
}

/// Clamps each component into its box. Interior components are untouched.
inline ControlVector clip(const ControlVector& x, const Bounds& b) {
  if (x.size() != b.dimension())
    throw std::invalid_argument("clip: dimension " + std::to_string(x.size()) +
                                " does not match bounds dimension " +
                                std::to_string(b.dimension()));
  ControlVector out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(out[i], b.lower(i), b.upper(i));
  return out;
}

inline double require_finite(double v, std::string_view what) {
  if (!std::isfinite(v))
    throw NonFiniteValue(std::string(what) + ": non-finite value " + format_real(v));
  return v;
}

struct Individual {
  ControlVector x;
  std::optional<double> value;

  bool evaluated() const { return value.has_value(); }
  friend bool operator==(const Individual&, const Individual&) = default;
};

struct Population {
  std::vector<Individual> members;
  std::size_t generation = 0;

  std::size_t size() const { return members.size(); }
  bool empty() const { return members.empty(); }

  bool fully_evaluated() const {
    return std::all_of(members.begin(), members.end(),
                       [](const Individual& m) { return m.evaluated(); });
  }

  /// Index of the highest-valued member. Requires a fully evaluated population.
  std::size_t best_index() const {
    if (members.empty() || !fully_evaluated())
      throw std::invalid_argument("population: best_index needs evaluated members");
    std::size_t best = 0;
    for (std::size_t i = 1; i < members.size(); ++i)
      if (*members[i].value > *members[best].value) best = i;
    return best;
  }

  /// Member indices sorted by value, best first. Ties keep their original order.
  std::vector<std::size_t> ranking() const {
    if (!fully_evaluated()) throw std::invalid_argument("population: ranking needs values");
    std::vector<std::size_t> idx(members.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return *members[a].value > *members[b].value;
    });
    return idx;
  }

  friend bool operator==(const Population&, const Population&) = default;
};

// ---------------------------------------------------------------------------

/// Portable counter-based random stream.
///
/// Draw k (k = 1, 2, ...) is the SplitMix64 output function applied to
/// `seed + k * 0x9E3779B97F4A7C15`. The sequence depends only on the seed and
/// the counter, so the full state is two integers and is identical on every
/// platform. Uniform reals use the top 53 bits; normals use Box-Muller without
/// caching (two uniforms per normal).
class RngStream {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  explicit RngStream(std::uint64_t seed = 0, std::uint64_t counter = 0)
      : seed_(seed), counter_(counter) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() {
    ++counter_;
    return mix(seed_ + counter_ * kGamma);
  }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("rng: index over empty range");
    // Lemire's multiply-shift; the bias is below 2^-64 * n, irrelevant here.
    const auto r = static_cast<unsigned __int128>(next_u64()) * n;
    return static_cast<std::size_t>(r >> 64);
  }

  double normal() {
    constexpr double two_pi = 6.283185307179586476925286766559;
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  /// Child stream determined by (this seed, label). Independent of the
  /// parent's counter so forks are stable regardless of prior draws.
  RngStream fork(std::string_view label) const {
    std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
    for (unsigned char c : label) {
      h ^= c;
      h *= 0x100000001B3ULL;
    }
    return RngStream(mix(mix(seed_) ^ h));
  }

  friend bool operator==(const RngStream&, const RngStream&) = default;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

// ---------------------------------------------------------------------------

struct HistoryRecord {
  std::size_t eval_index = 0;
  std::string stage;
  std::size_t generation = 0;
  double value = 0.0;
  double best_so_far = 0.0;

  friend bool operator==(const HistoryRecord&, const HistoryRecord&) = default;
};

/// Append-only log of every objective evaluation in a run.
class RunHistory {
 public:
  static constexpr std::string_view kCsvHeader = "eval_index,stage,generation,value,best_so_far";

  const std::vector<HistoryRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  std::optional<double> best() const {
    if (records_.empty()) return std::nullopt;
    return records_.back().best_so_far;
  }

  const HistoryRecord& record(std::string stage, std::size_t generation, double value) {
    require_finite(value, "run history");
    if (stage.find_first_of(",\n\r") != std::string::npos)
      throw std::invalid_argument("run history: stage name may not contain ',' or newlines");
    HistoryRecord r;
    r.eval_index = records_.size() + 1;
    r.stage = std::move(stage);
    r.generation = generation;
    r.value = value;
    r.best_so_far = records_.empty() ? value : std::max(records_.back().best_so_far, value);
    records_.push_back(std::move(r));
    return records_.back();
  }

  void write_csv(std::ostream& os) const {
    os << kCsvHeader << '\n';
    for (const auto& r : records_)
      os << r.eval_index << ',' << r.stage << ',' << r.generation << ',' << format_real(r.value)
         << ',' << format_real(r.best_so_far) << '\n';
  }

  std::string to_csv() const {
    std::ostringstream os;
    write_csv(os);
    return os.str();
  }

  void save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write history file " + path);
    write_csv(os);
    if (!os) throw std::runtime_error("failed writing history file " + path);
  }

  /// Parses the CSV export and re-validates every ledger invariant.
  static RunHistory read_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || trim(line) != kCsvHeader)
      throw std::runtime_error("run history: missing or wrong header");
    RunHistory h;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
      ++lineno;
      if (trim(line).empty()) continue;
      const auto f = split(line, ',');
      if (f.size() != 5)
        throw std::runtime_error("run history: line " + std::to_string(lineno) +
                                 " needs 5 fields");
      const auto idx = try_parse_int<std::size_t>(f[0]);
      const auto gen = try_parse_int<std::size_t>(f[2]);
      const auto value = try_parse_real(f[3]);
      const auto best = try_parse_real(f[4]);
      if (!idx || !gen || !value || !best)
        throw std::runtime_error("run history: malformed line " + std::to_string(lineno));
      const auto& r = h.record(std::string(f[1]), *gen, *value);
      if (r.eval_index != *idx || r.best_so_far != *best)
        throw std::runtime_error("run history: inconsistent record at line " +
                                 std::to_string(lineno));
    }
    return h;
  }

  friend bool operator==(const RunHistory&, const RunHistory&) = default;

 private:
  std::vector<HistoryRecord> records_;
};

}  // namespace hybridevo
