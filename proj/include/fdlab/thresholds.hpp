#pragma once

// Exact critical exponents: homology thresholds p(n, k), the Hausdorff
// exponent n/(p+1), the cellularity exponent (n-2)/2 and the energy
// relation n/p + 1/q = 1/r.

#include "fdlab/core.hpp"

#include <boost/rational.hpp>

#include <ostream>
#include <string>
#include <vector>

namespace fdlab {

/// Reduced fraction with positive denominator; boost::rational keeps the
/// normalisation, so equality and ordering are exact.
class ExponentValue {
 public:
  using Rep = boost::rational<long long>;

  ExponentValue() = default;
  ExponentValue(long long num, long long den = 1) : value_(make(num, den)) {}
  explicit ExponentValue(Rep value) : value_(value) {}

  long long num() const { return value_.numerator(); }
  long long den() const { return value_.denominator(); }
  Rep rational() const { return value_; }
  double to_double() const { return boost::rational_cast<double>(value_); }

  /// "5/3", or "2" when the denominator is 1.
  std::string str() const {
    return den() == 1 ? std::to_string(num()) : std::to_string(num()) + "/" + std::to_string(den());
  }

  friend bool operator==(const ExponentValue& a, const ExponentValue& b) { return a.value_ == b.value_; }
  friend bool operator<(const ExponentValue& a, const ExponentValue& b) { return a.value_ < b.value_; }
  friend bool operator<=(const ExponentValue& a, const ExponentValue& b) { return !(b < a); }
  friend bool operator>(const ExponentValue& a, const ExponentValue& b) { return b < a; }
  friend bool operator>=(const ExponentValue& a, const ExponentValue& b) { return !(a < b); }
  friend ExponentValue operator+(const ExponentValue& a, const ExponentValue& b) {
    return ExponentValue(a.value_ + b.value_);
  }
  friend ExponentValue operator/(const ExponentValue& a, const ExponentValue& b) {
    if (b.num() == 0) throw Error(ErrorCode::OutOfRange, "division by a zero exponent");
    return ExponentValue(a.value_ / b.value_);
  }
  friend std::ostream& operator<<(std::ostream& os, const ExponentValue& v) { return os << v.str(); }

 private:
  static Rep make(long long num, long long den) {
    if (den == 0) throw Error(ErrorCode::OutOfRange, "exponent with zero denominator");
    return Rep(num, den);
  }

  Rep value_{0};
};

/// Parses "a/b" or "a".
inline ExponentValue parse_exponent(const std::string& text) {
  try {
    std::size_t used = 0;
    const auto slash = text.find('/');
    const long long num = std::stoll(text.substr(0, slash), &used);
    if (used != (slash == std::string::npos ? text.size() : slash)) throw std::invalid_argument(text);
    if (slash == std::string::npos) return ExponentValue(num);
    const std::string rest = text.substr(slash + 1);
    const long long den = std::stoll(rest, &used);
    if (used != rest.size()) throw std::invalid_argument(text);
    return ExponentValue(num, den);
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::OutOfRange, "not an exact exponent: '" + text + "'");
  }
}

/// Tag for an infinite exponent argument.
struct InfiniteExponent {};
inline constexpr InfiniteExponent infinite_p{};

inline ExponentValue critical_p(int n, int k) {
  if (n < 3) throw Error(ErrorCode::OutOfRange, "critical_p: n must be >= 3");
  if (k < 1 || k > n - 1) throw Error(ErrorCode::OutOfRange, "critical_p: k must lie in 1..n-1");
  if (2 * k < n) return {n - (k + 1), k + 1};
  if (2 * k == n) return 1;
  return {k - 1, n - (k - 1)};
}

/// n/(p+1); the fibres have vanishing H^s for this s.
inline ExponentValue hausdorff_exponent(int n, const ExponentValue& p) {
  if (n < 2) throw Error(ErrorCode::OutOfRange, "hausdorff_exponent: n must be >= 2");
  if (p < ExponentValue(1, n - 1)) throw Error(ErrorCode::OutOfRange, "hausdorff_exponent: p must be >= 1/(n-1)");
  return ExponentValue(n) / (p + ExponentValue(1));
}

inline ExponentValue cellularity_p(int n) {
  if (n < 3) throw Error(ErrorCode::OutOfRange, "cellularity_p: n must be >= 3");
  return {n - 2, 2};
}

/// r with n/p + 1/q = 1/r.
inline ExponentValue neo_r(int n, const ExponentValue& p, const ExponentValue& q) {
  if (n < 1) throw Error(ErrorCode::OutOfRange, "neo_r: n must be >= 1");
  if (p < ExponentValue(n)) throw Error(ErrorCode::OutOfRange, "neo_r: p must be >= n");
  if (q <= ExponentValue(0)) throw Error(ErrorCode::OutOfRange, "neo_r: q must be > 0");
  return ExponentValue(1) / (ExponentValue(n) / p + ExponentValue(1) / q);
}

/// p = infinity: n/p vanishes and r = q.
inline ExponentValue neo_r(int n, InfiniteExponent, const ExponentValue& q) {
  if (n < 1) throw Error(ErrorCode::OutOfRange, "neo_r: n must be >= 1");
  if (q <= ExponentValue(0)) throw Error(ErrorCode::OutOfRange, "neo_r: q must be > 0");
  return q;
}

struct ThresholdEntry {
  int k = 0;
  ExponentValue p;
  bool parenthetical = false;  // k = n - 1, listed for symmetry only
};

struct ThresholdRow {
  int n = 0;
  std::vector<ThresholdEntry> entries;  // k = 1..n-1
  /// The value (n-2)/2 the top-degree argument gives directly.
  ExponentValue top_degree_alternative;

  bool top_degree_discrepancy() const { return !(entries.back().p == top_degree_alternative); }
};

struct ThresholdTable {
  std::vector<ThresholdRow> rows;  // n = 3..n_max

  const ThresholdRow& row(int n) const {
    if (rows.empty() || n < rows.front().n || n > rows.back().n)
      throw Error(ErrorCode::OutOfRange, "ThresholdTable: no row for n = " + std::to_string(n));
    return rows[static_cast<std::size_t>(n - rows.front().n)];
  }
};

inline ThresholdTable fig1_table(int n_max) {
  if (n_max < 3) throw Error(ErrorCode::OutOfRange, "fig1_table: n_max must be >= 3");
  ThresholdTable table;
  for (int n = 3; n <= n_max; ++n) {
    ThresholdRow row;
    row.n = n;
    for (int k = 1; k <= n - 1; ++k) row.entries.push_back({k, critical_p(n, k), k == n - 1});
    row.top_degree_alternative = cellularity_p(n);
    table.rows.push_back(std::move(row));
  }
  return table;
}

/// CSV with header "n,k,p,num,den,parenthetical,top_degree_alternative";
/// the last column is filled on the k = n-1 row only.
inline std::string to_csv(const ThresholdTable& table) {
  std::string out = "n,k,p,num,den,parenthetical,top_degree_alternative\n";
  for (const auto& row : table.rows) {
    for (const auto& e : row.entries) {
      out += std::to_string(row.n) + "," + std::to_string(e.k) + "," + e.p.str() + "," + std::to_string(e.p.num()) +
             "," + std::to_string(e.p.den()) + "," + (e.parenthetical ? "1" : "0") + "," +
             (e.parenthetical ? row.top_degree_alternative.str() : std::string()) + "\n";
    }
  }
  return out;
}

/// Table layout: one line per n, parenthetical entries in brackets.
inline std::string to_text(const ThresholdTable& table) {
  std::string out;
  for (const auto& row : table.rows) {
    out += "n = " + std::to_string(row.n) + ":";
    for (const auto& e : row.entries) out += e.parenthetical ? " (" + e.p.str() + ")" : " " + e.p.str();
    out += "\n";
  }
  return out;
}

}  // namespace fdlab
