#pragma once

// Real trigonometric polynomials on [0, 1):
//   f(x) = c + sum_{k=1}^{K} (a_k cos 2 pi k x + b_k sin 2 pi k x).
// Complex coefficients are fhat(k) = (a_k - i b_k) / 2, fhat(-k) = conj.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "meanclt/errors.hpp"
#include "meanclt/rotation.hpp"

namespace meanclt {

inline constexpr std::size_t kDefaultProductCap = 4096;

class FourierFn {
 public:
  FourierFn() = default;
  FourierFn(double constant, std::vector<double> cos_coeffs, std::vector<double> sin_coeffs)
      : constant_(constant), cos_(std::move(cos_coeffs)), sin_(std::move(sin_coeffs)) {
    const std::size_t k = std::max(cos_.size(), sin_.size());
    cos_.resize(k, 0.0);
    sin_.resize(k, 0.0);
    if (!std::isfinite(constant_)) throw ValidationError("FourierFn constant must be finite");
    for (std::size_t i = 0; i < k; ++i) {
      if (!std::isfinite(cos_[i]) || !std::isfinite(sin_[i])) {
        throw ValidationError("FourierFn coefficients must be finite");
      }
    }
    trim();
  }

  static FourierFn constant_fn(double c) { return FourierFn(c, {}, {}); }

  /// amplitude * cos(2 pi k x)
  static FourierFn cosine(std::size_t k, double amplitude = 1.0) {
    if (k == 0) return constant_fn(amplitude);
    std::vector<double> a(k, 0.0);
    a[k - 1] = amplitude;
    return FourierFn(0.0, std::move(a), {});
  }

  /// amplitude * sin(2 pi k x)
  static FourierFn sine(std::size_t k, double amplitude = 1.0) {
    if (k == 0) return FourierFn();
    std::vector<double> b(k, 0.0);
    b[k - 1] = amplitude;
    return FourierFn(0.0, {}, std::move(b));
  }

  double constant() const { return constant_; }
  const std::vector<double>& cos_coeffs() const { return cos_; }
  const std::vector<double>& sin_coeffs() const { return sin_; }
  std::size_t max_freq() const { return cos_.size(); }

  /// Cosine coefficient at frequency k >= 1 (0 beyond max_freq).
  double a(std::size_t k) const { return k >= 1 && k <= cos_.size() ? cos_[k - 1] : 0.0; }
  double b(std::size_t k) const { return k >= 1 && k <= sin_.size() ? sin_[k - 1] : 0.0; }

  bool is_zero() const { return constant_ == 0.0 && cos_.empty(); }
  bool is_centered(double tol = 0.0) const { return std::abs(constant_) <= tol; }

  /// Integral over [0, 1) with respect to Lebesgue measure.
  double mean() const { return constant_; }

  /// Sum of |coefficients|; bounds sup |f|.
  double l1_coeff_norm() const {
    double s = std::abs(constant_);
    for (std::size_t i = 0; i < cos_.size(); ++i) s += std::abs(cos_[i]) + std::abs(sin_[i]);
    return s;
  }

  /// Bound on sup |f'|.
  double derivative_bound() const {
    double s = 0.0;
    for (std::size_t i = 0; i < cos_.size(); ++i) {
      s += static_cast<double>(i + 1) * (std::abs(cos_[i]) + std::abs(sin_[i]));
    }
    return 2.0 * std::numbers::pi * s;
  }

  double max_abs_coeff() const {
    double m = std::abs(constant_);
    for (std::size_t i = 0; i < cos_.size(); ++i) {
      m = std::max({m, std::abs(cos_[i]), std::abs(sin_[i])});
    }
    return m;
  }

  /// Exact evaluation by angle-addition recurrence on (cos 2 pi x, sin 2 pi x).
  double operator()(double x) const {
    double value = constant_;
    if (cos_.empty()) return value;
    const double theta = 2.0 * std::numbers::pi * x;
    const double c1 = std::cos(theta);
    const double s1 = std::sin(theta);
    double ck = c1, sk = s1;
    for (std::size_t i = 0; i < cos_.size(); ++i) {
      value += cos_[i] * ck + sin_[i] * sk;
      if (i + 1 < cos_.size()) {
        // Re-anchor every 32 steps to keep the recurrence error bounded.
        if ((i + 2) % 32 == 0) {
          const double th = theta * static_cast<double>(i + 2);
          ck = std::cos(th);
          sk = std::sin(th);
        } else {
          const double cn = ck * c1 - sk * s1;
          sk = sk * c1 + ck * s1;
          ck = cn;
        }
      }
    }
    return value;
  }

  double eval(double x) const { return (*this)(x); }

  FourierFn& operator+=(const FourierFn& g) {
    constant_ += g.constant_;
    grow(g.max_freq());
    for (std::size_t i = 0; i < g.cos_.size(); ++i) {
      cos_[i] += g.cos_[i];
      sin_[i] += g.sin_[i];
    }
    trim();
    return *this;
  }

  FourierFn& operator-=(const FourierFn& g) { return *this += g * -1.0; }

  FourierFn& operator*=(double s) {
    constant_ *= s;
    for (std::size_t i = 0; i < cos_.size(); ++i) {
      cos_[i] *= s;
      sin_[i] *= s;
    }
    trim();
    return *this;
  }

  friend FourierFn operator+(FourierFn f, const FourierFn& g) { return f += g; }
  friend FourierFn operator-(FourierFn f, const FourierFn& g) { return f -= g; }
  friend FourierFn operator*(FourierFn f, double s) { return f *= s; }
  friend FourierFn operator*(double s, FourierFn f) { return f *= s; }

  FourierFn plus_constant(double c) const {
    FourierFn g(*this);
    g.constant_ += c;
    return g;
  }

  /// g(x) = f(x + shift) with shift = j * rotation (mod 1).
  FourierFn shifted(const Rotation& rotation, std::int64_t j) const {
    FourierFn g(*this);
    for (std::size_t i = 0; i < cos_.size(); ++i) {
      const std::int64_t k = static_cast<std::int64_t>(i + 1) * j;
      const double c = rotation.cos_multiple(k);
      const double s = rotation.sin_multiple(k);
      g.cos_[i] = cos_[i] * c + sin_[i] * s;
      g.sin_[i] = -cos_[i] * s + sin_[i] * c;
    }
    g.trim();
    return g;
  }

  /// g(x) = f(2^d x mod 1): frequency k moves to k 2^d.
  FourierFn dilated(unsigned d) const {
    if (d == 0 || cos_.empty()) return *this;
    const std::size_t factor = std::size_t{1} << d;
    std::vector<double> a(cos_.size() * factor, 0.0), b(cos_.size() * factor, 0.0);
    for (std::size_t i = 0; i < cos_.size(); ++i) {
      a[(i + 1) * factor - 1] = cos_[i];
      b[(i + 1) * factor - 1] = sin_[i];
    }
    return FourierFn(constant_, std::move(a), std::move(b));
  }

  bool operator==(const FourierFn& g) const {
    return constant_ == g.constant_ && cos_ == g.cos_ && sin_ == g.sin_;
  }

  /// Largest coefficient difference, including the constant.
  friend double coeff_distance(const FourierFn& f, const FourierFn& g) {
    return (f - g).max_abs_coeff();
  }

  /// Compact human-readable form without commas, e.g. "1*cos(1)+0.5*sin(3)".
  std::string label() const {
    std::ostringstream os;
    os.precision(6);
    bool first = true;
    auto term = [&](double coeff, const std::string& body) {
      if (coeff == 0.0) return;
      if (!first && coeff > 0) os << '+';
      os << coeff << body;
      first = false;
    };
    term(constant_, "");
    for (std::size_t i = 0; i < cos_.size(); ++i) {
      term(cos_[i], "*cos(" + std::to_string(i + 1) + ")");
      term(sin_[i], "*sin(" + std::to_string(i + 1) + ")");
    }
    if (first) os << '0';
    return os.str();
  }

 private:
  void grow(std::size_t k) {
    if (k > cos_.size()) {
      cos_.resize(k, 0.0);
      sin_.resize(k, 0.0);
    }
  }

  void trim() {
    while (!cos_.empty() && cos_.back() == 0.0 && sin_.back() == 0.0) {
      cos_.pop_back();
      sin_.pop_back();
    }
  }

  double constant_ = 0.0;
  std::vector<double> cos_;
  std::vector<double> sin_;
};

/// L2 inner product over [0, 1): c d + (1/2) sum (a a' + b b').
inline double inner(const FourierFn& f, const FourierFn& g) {
  double s = f.constant() * g.constant();
  const std::size_t k = std::min(f.max_freq(), g.max_freq());
  double acc = 0.0;
  for (std::size_t i = 1; i <= k; ++i) acc += f.a(i) * g.a(i) + f.b(i) * g.b(i);
  return s + 0.5 * acc;
}

struct ProductResult {
  FourierFn fn;
  double dropped_l1 = 0.0;  // sum of |coefficients| above the cap
  bool truncated() const { return dropped_l1 > 0.0; }
};

/// Coefficient convolution of f and g, truncated at frequency `cap`.
inline ProductResult product(const FourierFn& f, const FourierFn& g,
                             std::size_t cap = kDefaultProductCap) {
  const std::size_t kf = f.max_freq();
  const std::size_t kg = g.max_freq();
  const std::size_t kh = kf + kg;
  // Complex coefficients on 0..K; negative frequencies are conjugates.
  auto complex_coeffs = [](const FourierFn& u) {
    std::vector<std::complex<double>> c(u.max_freq() + 1);
    c[0] = u.constant();
    for (std::size_t k = 1; k <= u.max_freq(); ++k) c[k] = {0.5 * u.a(k), -0.5 * u.b(k)};
    return c;
  };
  const auto cf = complex_coeffs(f);
  const auto cg = complex_coeffs(g);
  auto at = [](const std::vector<std::complex<double>>& c, long k) {
    if (k >= 0) return c[static_cast<std::size_t>(k)];
    return std::conj(c[static_cast<std::size_t>(-k)]);
  };
  std::vector<std::complex<double>> h(kh + 1);
  for (long i = -static_cast<long>(kf); i <= static_cast<long>(kf); ++i) {
    const auto ci = at(cf, i);
    if (ci == 0.0) continue;
    // n = i + j with 0 <= n <= kh and |j| <= kg
    const long jlo = std::max(-static_cast<long>(kg), -i);
    const long jhi = std::min(static_cast<long>(kg), static_cast<long>(kh) - i);
    for (long j = jlo; j <= jhi; ++j) h[static_cast<std::size_t>(i + j)] += ci * at(cg, j);
  }
  const std::size_t keep = std::min(kh, cap);
  std::vector<double> a(keep), b(keep);
  double dropped = 0.0;
  for (std::size_t k = 1; k <= kh; ++k) {
    const double ak = 2.0 * h[k].real();
    const double bk = -2.0 * h[k].imag();
    if (k <= keep) {
      a[k - 1] = ak;
      b[k - 1] = bk;
    } else {
      dropped += std::abs(ak) + std::abs(bk);
    }
  }
  return {FourierFn(h[0].real(), std::move(a), std::move(b)), dropped};
}

/// Product that throws when truncation would drop mass.
inline FourierFn multiply(const FourierFn& f, const FourierFn& g,
                          std::size_t cap = kDefaultProductCap) {
  auto r = product(f, g, cap);
  if (r.truncated()) {
    throw ResourceError("Fourier product exceeds the frequency cap " + std::to_string(cap) +
                        " (dropped l1 mass " + std::to_string(r.dropped_l1) + ")");
  }
  return std::move(r.fn);
}

}  // namespace meanclt
