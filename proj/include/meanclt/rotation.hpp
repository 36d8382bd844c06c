#pragma once

// Rotation numbers stored as an unevaluated double-double (hi + lo), with
// compensated fractional parts of integer multiples.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>

#include "meanclt/errors.hpp"

namespace meanclt {

class Rotation {
 public:
  Rotation() = default;
  explicit Rotation(double hi, double lo = 0.0) : hi_(hi), lo_(lo) {}

  /// sqrt(2) - 1 to roughly 32 significant digits.
  static Rotation sqrt2_minus_1() {
    const double s = std::numbers::sqrt2;
    const double residual = std::fma(-s, s, 2.0);  // 2 - s^2, exact
    return Rotation(s - 1.0, residual / (2.0 * s));
  }

  /// (sqrt(5) - 1) / 2, the golden-mean rotation.
  static Rotation golden() {
    const double s = 2.23606797749978969640917366873128;  // sqrt(5)
    const double residual = std::fma(-s, s, 5.0);
    const double s_lo = residual / (2.0 * s);
    const double hi = 0.5 * (s - 1.0);
    return Rotation(hi, 0.5 * s_lo);
  }

  double hi() const { return hi_; }
  double lo() const { return lo_; }
  double value() const { return hi_ + lo_; }

  /// {k a} in [0, 1).
  double frac_multiple(std::int64_t k) const {
    const auto [t, s] = split(k);
    double r = t + s;
    r -= std::floor(r);
    if (r >= 1.0) r -= 1.0;
    return r;
  }

  /// Distance from k a to the nearest integer, d(ka, Z).
  double dist_multiple(std::int64_t k) const {
    const auto [t, s] = split(k);
    double d = t < 0.5 ? t + s : (1.0 - t) - s;
    return std::abs(d);
  }

  /// cos(2 pi k a), evaluated on the reduced fractional part.
  double cos_multiple(std::int64_t k) const {
    return std::cos(2.0 * std::numbers::pi * frac_multiple(k));
  }

  double sin_multiple(std::int64_t k) const {
    return std::sin(2.0 * std::numbers::pi * frac_multiple(k));
  }

  /// Denominator of a continued-fraction convergent p/q with q <= max_den
  /// and |a - p/q| <= tol, if any.
  std::optional<std::int64_t> rational_witness(std::int64_t max_den = 1000000,
                                                double tol = 1e-15) const {
    double x = value();
    x -= std::floor(x);
    if (x == 0.0) return 1;
    std::int64_t q_prev = 0, q = 1;  // q_{-1}, q_0
    double rem = x;
    for (int it = 0; it < 64; ++it) {
      if (rem == 0.0) break;
      const double inv = 1.0 / rem;
      const double digit = std::floor(inv);
      if (digit > static_cast<double>(max_den)) break;
      const std::int64_t q_next = static_cast<std::int64_t>(digit) * q + q_prev;
      if (q_next > max_den) break;
      q_prev = q;
      q = q_next;
      if (dist_multiple(q) / static_cast<double>(q) <= tol) return q;
      rem = inv - digit;
    }
    return std::nullopt;
  }

  /// Throws DomainError when a lies outside (0, 1) or is numerically rational.
  void require_irrational(const std::string& context) const {
    const double a = value();
    if (!(a > 0.0 && a < 1.0)) throw DomainError(context + ": rotation must lie in (0, 1)");
    if (auto q = rational_witness()) {
      throw DomainError(context + ": rotation matches a rational with denominator " +
                        std::to_string(*q));
    }
  }

 private:
  struct Split {
    double integer_free;  // fractional part of the rounded product
    double correction;    // rounding error plus the lo contribution
  };

  Split split(std::int64_t k) const {
    const double kd = static_cast<double>(k);
    const double p = kd * hi_;
    const double e = std::fma(kd, hi_, -p);
    const double t = p - std::floor(p);
    return {t, e + kd * lo_};
  }

  double hi_ = 0.0;
  double lo_ = 0.0;
};

}  // namespace meanclt
