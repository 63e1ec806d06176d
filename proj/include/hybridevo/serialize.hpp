// Line-oriented text serialization used by checkpoints.
//
// Each line is `key v1 v2 ...`, reals printed with 17 significant digits so
// every double round-trips exactly. Readers consume keys in the order the
// writer produced them and reject anything else.
#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hybridevo/core.hpp"

namespace hybridevo {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TextWriter {
 public:
  explicit TextWriter(std::ostream& os) : os_(os) {}

  void put(std::string_view key, std::string_view text) {
    if (text.find_first_of("\n\r") != std::string_view::npos)
      throw std::invalid_argument("checkpoint: text may not contain newlines");
    os_ << key << ' ' << text << '\n';
  }
  void put(std::string_view key, std::uint64_t v) { os_ << key << ' ' << v << '\n'; }
  void put(std::string_view key, double v) { os_ << key << ' ' << format_real(v) << '\n'; }
  void put(std::string_view key, std::span<const double> v) {
    os_ << key << ' ' << v.size();
    for (double x : v) os_ << ' ' << format_real(x);
    os_ << '\n';
  }
  void put_rng(std::string_view key, const RngStream& r) {
    os_ << key << ' ' << r.seed() << ' ' << r.counter() << '\n';
  }

 private:
  std::ostream& os_;
};

class TextReader {
 public:
  explicit TextReader(std::istream& is) : is_(is) {}

  /// Remainder of the next line after `key `.
  std::string text(std::string_view key) {
    std::string line;
    if (!std::getline(is_, line))
      throw CheckpointError("checkpoint: unexpected end of file, wanted '" + std::string(key) + "'");
    ++line_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto sp = line.find(' ');
    const std::string_view got = std::string_view(line).substr(0, sp);
    if (got != key)
      throw CheckpointError("checkpoint line " + std::to_string(line_) + ": expected '" +
                            std::string(key) + "', found '" + std::string(got) + "'");
    return sp == std::string::npos ? std::string() : line.substr(sp + 1);
  }

  std::uint64_t u64(std::string_view key) {
    const auto t = text(key);
    if (auto v = try_parse_int<std::uint64_t>(t)) return *v;
    throw CheckpointError("checkpoint: bad integer for '" + std::string(key) + "'");
  }

  double real(std::string_view key) {
    const auto t = text(key);
    if (auto v = try_parse_real(t)) return *v;
    throw CheckpointError("checkpoint: bad real for '" + std::string(key) + "'");
  }

  std::vector<double> reals(std::string_view key) {
    const auto t = text(key);
    const auto f = split(t, ' ');
    const auto n = try_parse_int<std::size_t>(f.at(0));
    if (!n || f.size() != *n + 1)
      throw CheckpointError("checkpoint: bad vector for '" + std::string(key) + "'");
    std::vector<double> out;
    out.reserve(*n);
    for (std::size_t i = 1; i < f.size(); ++i) {
      const auto v = try_parse_real(f[i]);
      if (!v) throw CheckpointError("checkpoint: bad real in '" + std::string(key) + "'");
      out.push_back(*v);
    }
    return out;
  }

  RngStream rng(std::string_view key) {
    const auto line = text(key);
    const auto f = split(line, ' ');
    if (f.size() != 2) throw CheckpointError("checkpoint: bad rng for '" + std::string(key) + "'");
    const auto s = try_parse_int<std::uint64_t>(f[0]);
    const auto c = try_parse_int<std::uint64_t>(f[1]);
    if (!s || !c) throw CheckpointError("checkpoint: bad rng for '" + std::string(key) + "'");
    return RngStream(*s, *c);
  }

 private:
  std::istream& is_;
  std::size_t line_ = 0;
};

}  // namespace hybridevo
