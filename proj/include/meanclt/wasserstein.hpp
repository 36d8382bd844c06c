#pragma once

// Exact W1 and Kolmogorov distances between empirical samples or finite
// laws and centered Gaussian laws N(0, sigma^2).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "meanclt/distributions.hpp"
#include "meanclt/errors.hpp"
#include "meanclt/numerics.hpp"

namespace meanclt {

namespace detail {

inline void require_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("sigma must be positive and finite");
}

// G(u) = -sigma * pdf(quantile(u)), an antiderivative of sigma * quantile(u)
// on (0, 1) that vanishes at both ends.
inline double scaled_quantile_antideriv(double u, double sigma) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  return -sigma * gauss::pdf(gauss::quantile(u));
}

// int_l^r (Phi(x / sigma) - c) dx, written to avoid cancellation in the
// right tail. Infinite r is allowed when c = 1; infinite l when c = 0.
inline double plateau_gap_integral(double l, double r, double c, double sigma) {
  if (std::isinf(r)) return -sigma * gauss::cdf_antideriv(-l / sigma);         // c = 1
  if (std::isinf(l)) return sigma * gauss::cdf_antideriv(r / sigma);           // c = 0
  if (l >= 0.0) {
    return (1.0 - c) * (r - l) -
           sigma * (gauss::cdf_antideriv(-l / sigma) - gauss::cdf_antideriv(-r / sigma));
  }
  return sigma * (gauss::cdf_antideriv(r / sigma) - gauss::cdf_antideriv(l / sigma)) - c * (r - l);
}

// int_l^r |Phi(x / sigma) - c| dx, split at the level crossing.
inline double plateau_abs_integral(double l, double r, double c, double sigma) {
  if (!(r > l)) return 0.0;
  if (c <= 0.0) return plateau_gap_integral(l, r, 0.0, sigma);
  if (c >= 1.0) return -plateau_gap_integral(l, r, 1.0, sigma);
  const double x_star = sigma * gauss::quantile(c);
  if (x_star <= l) return plateau_gap_integral(l, r, c, sigma);
  if (x_star >= r) return -plateau_gap_integral(l, r, c, sigma);
  return -plateau_gap_integral(l, x_star, c, sigma) + plateau_gap_integral(x_star, r, c, sigma);
}

}  // namespace detail

/// W1(F_sample, N(0, sigma^2)) = int_0^1 |F^-1(u) - sigma quantile(u)| du,
/// integrated in closed form slab by slab. Equal values share one slab.
inline double w1_sample_gauss(const EmpiricalSample& s, double sigma) {
  detail::require_sigma(sigma);
  const auto v = s.values();
  const double m = static_cast<double>(v.size());
  double total = 0.0;
  std::size_t i = 0;
  double G_lo = 0.0;  // G at the current slab's lower end
  while (i < v.size()) {
    std::size_t j = i;
    while (j + 1 < v.size() && v[j + 1] == v[i]) ++j;
    const double x = v[i];
    const double u0 = static_cast<double>(i) / m;
    const double u1 = static_cast<double>(j + 1) / m;
    const double G_hi = j + 1 == v.size() ? 0.0 : detail::scaled_quantile_antideriv(u1, sigma);
    const double u_star = gauss::cdf(x / sigma);
    if (u_star <= u0) {
      // sigma q(u) >= x throughout
      total += (G_hi - G_lo) - x * (u1 - u0);
    } else if (u_star >= u1) {
      total += x * (u1 - u0) - (G_hi - G_lo);
    } else {
      const double G_star = -sigma * gauss::pdf(x / sigma);
      total += x * (u_star - u0) - (G_star - G_lo);
      total += (G_hi - G_star) - x * (u1 - u_star);
    }
    G_lo = G_hi;
    i = j + 1;
  }
  return total;
}

/// Exact int |F_p(x) - Phi(x / sigma)| dx for a finite law.
inline double w1_pmf_gauss(const FinitePmf& p, double sigma) {
  detail::require_sigma(sigma);
  const auto atoms = p.atoms();
  const auto probs = p.probs();
  const double inf = std::numeric_limits<double>::infinity();
  double total = detail::plateau_abs_integral(-inf, atoms[0], 0.0, sigma);
  double c = 0.0;
  for (std::size_t k = 0; k < atoms.size(); ++k) {
    c += probs[k];
    if (k + 1 == atoms.size()) break;
    total += detail::plateau_abs_integral(atoms[k], atoms[k + 1], std::min(c, 1.0), sigma);
  }
  total += detail::plateau_abs_integral(atoms.back(), inf, 1.0, sigma);
  return total;
}

/// W1 between two empirical laws through the quantile coupling. Breakpoints
/// i/m and j/n are compared as integers i*n and j*m.
inline double w1_sample_sample(const EmpiricalSample& s1, const EmpiricalSample& s2) {
  const auto x = s1.values();
  const auto y = s2.values();
  const std::uint64_t m = x.size(), n = y.size();
  if (m == n) {
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) total += std::abs(x[i] - y[i]);
    return total / static_cast<double>(m);
  }
  const double denom = static_cast<double>(m) * static_cast<double>(n);
  std::uint64_t i = 0, j = 0, pos = 0;
  double total = 0.0;
  while (i < m && j < n) {
    const std::uint64_t next_i = (i + 1) * n;
    const std::uint64_t next_j = (j + 1) * m;
    const std::uint64_t next = std::min(next_i, next_j);
    total += std::abs(x[i] - y[j]) * static_cast<double>(next - pos);
    pos = next;
    if (next_i == next) ++i;
    if (next_j == next) ++j;
  }
  return total / denom;
}

/// sup_x |F_sample(x) - Phi(x / sigma)|.
inline double ks_sample_gauss(const EmpiricalSample& s, double sigma) {
  detail::require_sigma(sigma);
  const auto v = s.values();
  const double m = static_cast<double>(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double c = gauss::cdf(v[i] / sigma);
    d = std::max({d, std::abs(static_cast<double>(i + 1) / m - c),
                  std::abs(static_cast<double>(i) / m - c)});
  }
  return d;
}

inline double ks_pmf_gauss(const FinitePmf& p, double sigma) {
  detail::require_sigma(sigma);
  double d = 0.0, F = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double c = gauss::cdf(p.atoms()[k] / sigma);
    const double before = F;
    F += p.probs()[k];
    d = std::max({d, std::abs(before - c), std::abs(std::min(F, 1.0) - c)});
  }
  return d;
}

/// One value per line; blank lines and lines starting with '#' are skipped.
inline EmpiricalSample read_sample_csv(std::istream& in, const std::string& source = "<stream>") {
  std::vector<double> values;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r,");
    const std::string field = line.substr(first, last - first + 1);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(field, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != field.size() || !std::isfinite(v)) {
      throw ValidationError(source + ":" + std::to_string(line_no) + ": not a finite number: '" +
                            field + "'");
    }
    values.push_back(v);
  }
  if (values.empty()) throw ValidationError(source + ": no values");
  return EmpiricalSample(std::move(values));
}

inline EmpiricalSample read_sample_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  return read_sample_csv(in, path);
}

}  // namespace meanclt
