#pragma once

// Explicit bound formulas for d1(S_n, sigma sqrt(n) Y) and their
// ingredients. Conditional expectations E_0(.) are transfer-operator images,
// so every norm is a deterministic quadrature in xi_0.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "meanclt/errors.hpp"
#include "meanclt/fourier.hpp"
#include "meanclt/numerics.hpp"
#include "meanclt/processes.hpp"

namespace meanclt {

struct MomentSummary {
  double sigma2 = 0.0;  // long-run variance
  double var0 = 0.0;    // E X_0^2
  double abs3 = 0.0;    // E |X_0|^3
  double lambda = 0.0;  // abs3 / sigma2
  double linf = 0.0;    // ||X_0||_inf, +inf for unbounded laws
  double linf_upper = 0.0;  // certified upper bound on linf
};

namespace detail {

// Max of |f| on a grid of N points, refined by golden-section search around
// the best grid points; the certificate is grid max + L h / 2 with L the
// derivative bound.
inline std::pair<double, double> sup_norm(const FourierFn& f) {
  if (f.max_freq() == 0) return {std::abs(f.constant()), std::abs(f.constant())};
  const std::size_t N = std::max<std::size_t>(4096, 64 * f.max_freq());
  const double h = 1.0 / static_cast<double>(N);
  std::vector<double> v(N);
  double grid_max = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    v[i] = std::abs(f(static_cast<double>(i) * h));
    grid_max = std::max(grid_max, v[i]);
  }
  double best = grid_max;
  for (std::size_t i = 0; i < N; ++i) {
    const double l = v[(i + N - 1) % N], r = v[(i + 1) % N];
    if (v[i] < l || v[i] < r || v[i] < 0.5 * grid_max) continue;
    double a = (static_cast<double>(i) - 1.0) * h, b = (static_cast<double>(i) + 1.0) * h;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 60; ++it) {
      const double c = b - g * (b - a), d = a + g * (b - a);
      if (std::abs(f(c)) > std::abs(f(d))) b = d;
      else a = c;
    }
    best = std::max(best, std::abs(f(0.5 * (a + b))));
  }
  return {best, std::max(best, grid_max + 0.5 * f.derivative_bound() * h)};
}

inline std::size_t m_cutoff(std::size_t n) {
  // floor(sqrt(2n)) in integers
  std::size_t m = static_cast<std::size_t>(std::sqrt(2.0 * static_cast<double>(n)));
  while ((m + 1) * (m + 1) <= 2 * n) ++m;
  while (m * m > 2 * n) --m;
  return m;
}

inline void require_fourier_bounds(const ProcessSpec& spec, const char* op) {
  if (std::holds_alternative<FiniteChain>(spec)) {
    throw TypeError(std::string(op) + " is implemented for FourierFn observables only");
  }
}

// Sum of norms of a sequence of functions, evaluating each distinct
// function once and in parallel; results are combined in index order.
template <class Norm>
std::vector<double> norms_of(const std::vector<FourierFn>& fns, Norm&& norm) {
  std::vector<std::size_t> rep(fns.size());
  std::vector<std::size_t> unique;
  for (std::size_t i = 0; i < fns.size(); ++i) {
    if (i > 0 && fns[i] == fns[rep[i - 1]]) {
      rep[i] = rep[i - 1];
    } else {
      rep[i] = i;
      unique.push_back(i);
    }
  }
  std::vector<double> value(fns.size(), 0.0);
  parallel_for(unique.size(), [&](std::size_t u) { value[unique[u]] = norm(fns[unique[u]]); });
  for (std::size_t i = 0; i < fns.size(); ++i) value[i] = value[rep[i]];
  return value;
}

}  // namespace detail

/// Marginal and long-run moments. FiniteChain uses its state values
/// (centered under pi) and ignores f; an IIDLaw with a direct law ignores f.
inline MomentSummary moments(const ProcessSpec& spec, const FourierFn& f, const Tolerance& tol = {}) {
  validate(spec);
  MomentSummary s;
  if (const auto* c = std::get_if<FiniteChain>(&spec)) {
    const double mean = detail::pi_mean(*c, c->values);
    for (std::size_t x = 0; x < c->states(); ++x) {
      const double v = c->values[x] - mean;
      s.var0 += c->pi[x] * v * v;
      s.abs3 += c->pi[x] * std::abs(v) * v * v;
      if (c->pi[x] > 0.0) s.linf = std::max(s.linf, std::abs(v));
    }
    s.linf_upper = s.linf;
    s.sigma2 = long_run_variance(*c).sigma2;
  } else if (const auto* l = std::get_if<IIDLaw>(&spec); l && l->law) {
    const auto& law = *l->law;
    if (law.kind == MarginalLaw::Kind::discrete && std::abs(law.pmf->mean()) > 1e-12) {
      throw PreconditionError("moments requires a centered law");
    }
    switch (law.kind) {
      case MarginalLaw::Kind::rademacher:
        s.var0 = s.abs3 = s.linf = 1.0;
        break;
      case MarginalLaw::Kind::gaussian:
        s.var0 = law.sd * law.sd;
        s.abs3 = law.sd * law.sd * law.sd * std::sqrt(8.0 / std::numbers::pi);
        s.linf = std::numeric_limits<double>::infinity();
        break;
      case MarginalLaw::Kind::discrete:
        s.var0 = law.pmf->variance();
        s.abs3 = law.pmf->moment([](double x) { return std::abs(x * x * x); });
        for (double a : law.pmf->atoms()) s.linf = std::max(s.linf, std::abs(a));
        break;
    }
    s.linf_upper = s.linf;
    s.sigma2 = long_run_variance(spec, f).sigma2;
  } else {
    if (!f.is_centered(1e-14)) throw PreconditionError("moments requires a centered observable");
    s.var0 = inner(f, f);
    s.abs3 = abs_power_integral(f, 3.0, tol);
    std::tie(s.linf, s.linf_upper) = detail::sup_norm(f);
    s.sigma2 = long_run_variance(spec, f).sigma2;
  }
  s.lambda = s.abs3 / s.sigma2;
  return s;
}

struct NormPair {
  double l1 = 0.0;     // int |g|
  double x0_l1 = 0.0;  // int |f g|
};

namespace detail {

inline NormPair norm_pair(const FourierFn& f, const FourierFn& g, const Tolerance& tol) {
  if (g.is_zero()) return {};
  return {l1_norm(g, tol), l1_norm(multiply(f, g), tol)};
}

inline bool trivially_independent(const ProcessSpec& spec) { return detail::has_direct_law(spec); }

// U_1, ..., U_M with U_m = sum_{k=1}^m K^k(f^2) - m var0.
inline std::vector<FourierFn> u_sequence(const ProcessSpec& spec, const FourierFn& f, std::size_t M) {
  const FourierFn f2 = multiply(f, f);
  const double var0 = f2.constant();
  std::vector<FourierFn> out;
  FourierFn acc;
  FourierFn power = f2;
  for (std::size_t m = 1; m <= M; ++m) {
    power = transfer(spec, power, 1);
    acc += power.plus_constant(-var0);
    out.push_back(acc);
  }
  return out;
}

// W_1, ..., W_M with W_m = sum_{k=1}^m K^k z, z = f^2 + 2 f g_J - sigma2.
inline std::vector<FourierFn> w_sequence(const ProcessSpec& spec, const FourierFn& f, std::size_t M) {
  const double sigma2 = long_run_variance(spec, f).sigma2;
  const FourierFn gJ = resolvent_tail(spec, f, 1);
  FourierFn z = multiply(f, f) + 2.0 * multiply(f, gJ);
  z = z.plus_constant(-sigma2);
  std::vector<FourierFn> out;
  FourierFn acc, power = z;
  for (std::size_t m = 1; m <= M; ++m) {
    power = transfer(spec, power, 1);
    acc += power;
    out.push_back(acc);
  }
  return out;
}

}  // namespace detail

/// (||U_m||_1, ||X_0 U_m||_1) for a martingale-difference observable.
inline NormPair u_norms(const ProcessSpec& spec, const FourierFn& f, std::size_t m,
                        const Tolerance& tol = {}) {
  if (m < 1) throw DomainError("u_norms requires m >= 1");
  detail::require_fourier_bounds(spec, "u_norms");
  if (detail::trivially_independent(spec)) return {};
  if (!is_martingale(spec, f)) throw PreconditionError("u_norms requires a martingale-difference f");
  return detail::norm_pair(f, detail::u_sequence(spec, f, m).back(), tol);
}

/// (||W_m||_1, ||X_0 W_m||_1).
inline NormPair w_norms(const ProcessSpec& spec, const FourierFn& f, std::size_t m,
                        const Tolerance& tol = {}) {
  if (m < 1) throw DomainError("w_norms requires m >= 1");
  detail::require_fourier_bounds(spec, "w_norms");
  if (detail::trivially_independent(spec)) return {};
  return detail::norm_pair(f, detail::w_sequence(spec, f, m).back(), tol);
}

struct BoundTerm {
  std::string name;
  double value = 0.0;
};

struct BoundReport {
  std::string theorem;  // T21, T22, T23a, T23b
  std::size_t n = 0;
  double total = 0.0;
  std::vector<BoundTerm> terms;     // constant, log, series[, dprime]
  std::vector<double> per_m;        // series entries for m = 1..m_cutoff
  std::vector<double> dprime_first;   // per-m D' first-sum entries
  std::vector<double> dprime_second;  // per-m D' second-sum entries
  std::size_t m_cutoff = 0;
  double sigma = 0.0;
  double lambda = 0.0;

  double term(const std::string& name) const {
    for (const auto& t : terms) {
      if (t.name == name) return t.value;
    }
    throw DomainError("bound report has no term " + name);
  }
};

struct DPrime {
  double value = 0.0;
  std::vector<double> first;   // (1 / (sigma sqrt m)) ||X_0 sum_{l >= m} E_0 X_l||_1
  std::vector<double> second;  // (1 / 2m) ||(1 + X_0^2 / sigma^2) E_0(S_m)||_1
};

/// D' with E_0(S_m) = sum_{k=1}^m K^k f (X_0 excluded).
inline DPrime dprime(const ProcessSpec& spec, const FourierFn& f, std::size_t n,
                     const Tolerance& tol = {}) {
  if (n < 1) throw DomainError("dprime requires n >= 1");
  detail::require_fourier_bounds(spec, "dprime");
  DPrime d;
  d.first.assign(n, 0.0);
  d.second.assign(n, 0.0);
  if (detail::trivially_independent(spec)) return d;
  const double sigma2 = long_run_variance(spec, f).sigma2;
  const double sigma = std::sqrt(sigma2);
  const FourierFn weight = (multiply(f, f) * (1.0 / sigma2)).plus_constant(1.0);
  std::vector<FourierFn> tails, partial;
  FourierFn acc, power = f;
  for (std::size_t m = 1; m <= n; ++m) {
    power = transfer(spec, power, 1);
    acc += power;
    tails.push_back(multiply(f, resolvent_tail(spec, f, static_cast<unsigned>(m))));
    partial.push_back(multiply(weight, acc));
  }
  const auto a = detail::norms_of(tails, [&](const FourierFn& g) { return l1_norm(g, tol); });
  const auto b = detail::norms_of(partial, [&](const FourierFn& g) { return l1_norm(g, tol); });
  for (std::size_t m = 1; m <= n; ++m) {
    d.first[m - 1] = a[m - 1] / (sigma * std::sqrt(static_cast<double>(m)));
    d.second[m - 1] = b[m - 1] / (2.0 * static_cast<double>(m));
  }
  for (std::size_t m = 0; m < n; ++m) d.value += d.first[m];
  for (std::size_t m = 0; m < n; ++m) d.value += d.second[m];
  return d;
}

namespace detail {

inline BoundReport bound_head(const char* theorem, const MomentSummary& mom, std::size_t n) {
  if (n < 1) throw DomainError("bounds are reported for n >= 1");
  BoundReport r;
  r.theorem = theorem;
  r.n = n;
  r.sigma = std::sqrt(mom.sigma2);
  r.lambda = mom.lambda;
  r.m_cutoff = m_cutoff(n);
  r.terms.push_back({"constant", 13.0 * r.sigma / 6.0});
  r.terms.push_back({"log", mom.lambda / 6.0 * std::log(1.0 + 2.0 * static_cast<double>(n))});
  return r;
}

inline std::vector<double> series_entries(const ProcessSpec& spec, const FourierFn& f,
                                          const std::vector<FourierFn>& seq, double sigma,
                                          const Tolerance& tol) {
  std::vector<double> out(seq.size(), 0.0);
  if (trivially_independent(spec)) return out;
  const auto l1 = norms_of(seq, [&](const FourierFn& g) { return l1_norm(g, tol); });
  const auto x0 = norms_of(seq, [&](const FourierFn& g) { return l1_norm(multiply(f, g), tol); });
  for (std::size_t m = 1; m <= seq.size(); ++m) {
    out[m - 1] = (x0[m - 1] + 2.0 * sigma * l1[m - 1]) / (static_cast<double>(m) * sigma * sigma);
  }
  return out;
}

inline void finish_bound(BoundReport& r) {
  double series = 0.0;
  for (double v : r.per_m) series += v;
  r.terms.push_back({"series", series});
  r.total = 0.0;
  for (const auto& t : r.terms) r.total += t.value;
}

}  // namespace detail

/// 13 sigma / 6 + (Lambda / 6) log(1 + 2n) + sum_{m <= floor(sqrt 2n)}
/// (||X_0 U_m||_1 + 2 sigma ||U_m||_1) / (m sigma^2), natural log.
inline BoundReport thm21_bound(const ProcessSpec& spec, const FourierFn& f, std::size_t n,
                               const Tolerance& tol = {}) {
  detail::require_fourier_bounds(spec, "thm21_bound");
  const MomentSummary mom = moments(spec, f, tol);
  BoundReport r = detail::bound_head("T21", mom, n);
  if (!detail::trivially_independent(spec)) {
    if (!is_martingale(spec, f)) throw PreconditionError("thm21_bound requires a martingale-difference f");
    r.per_m = detail::series_entries(spec, f, detail::u_sequence(spec, f, r.m_cutoff), r.sigma, tol);
  } else {
    r.per_m.assign(r.m_cutoff, 0.0);
  }
  detail::finish_bound(r);
  return r;
}

/// The same head plus the W-series and D'.
inline BoundReport thm22_bound(const ProcessSpec& spec, const FourierFn& f, std::size_t n,
                               const Tolerance& tol = {}) {
  detail::require_fourier_bounds(spec, "thm22_bound");
  const MomentSummary mom = moments(spec, f, tol);
  BoundReport r = detail::bound_head("T22", mom, n);
  if (!detail::trivially_independent(spec)) {
    r.per_m = detail::series_entries(spec, f, detail::w_sequence(spec, f, r.m_cutoff), r.sigma, tol);
  } else {
    r.per_m.assign(r.m_cutoff, 0.0);
  }
  const DPrime d = dprime(spec, f, n, tol);
  r.dprime_first = d.first;
  r.dprime_second = d.second;
  detail::finish_bound(r);
  r.terms.push_back({"dprime", d.value});
  r.total += d.value;
  return r;
}

struct Thm23Terms {
  double square_dev = 0.0;  // ||E_0(S_m^2) - m sigma^2||_1
  double j_norm = 0.0;      // ||E_0(J_m)||_1 = ||K^m g_J||_1
};

/// E_0(S_m^2) = sum_k K^k(f^2) + 2 sum_{k<l} K^k(f K^{l-k} f), built as
/// sum_{k=1}^{m-1} K^k(f P_{m-k}) with P_r = sum_{d=1}^r K^d f.
inline Thm23Terms thm23_terms(const ProcessSpec& spec, const FourierFn& f, std::size_t m,
                              const Tolerance& tol = {}) {
  if (m < 1) throw DomainError("thm23_terms requires m >= 1");
  detail::require_fourier_bounds(spec, "thm23_terms");
  if (detail::trivially_independent(spec)) return {};
  const double sigma2 = long_run_variance(spec, f).sigma2;
  std::vector<FourierFn> P(m + 1);
  FourierFn power = f;
  for (std::size_t r = 1; r <= m; ++r) {
    power = transfer(spec, power, 1);
    P[r] = P[r - 1] + power;
  }
  const FourierFn f2 = multiply(f, f);
  FourierFn sq;
  for (std::size_t k = 1; k <= m; ++k) {
    FourierFn inner_fn = f2;
    if (k < m) inner_fn += 2.0 * multiply(f, P[m - k]);
    sq += transfer(spec, inner_fn, static_cast<unsigned>(k));
  }
  sq = sq.plus_constant(-static_cast<double>(m) * sigma2);
  Thm23Terms t;
  t.square_dev = l1_norm(sq, tol);
  t.j_norm = l1_norm(transfer(spec, resolvent_tail(spec, f, 1), static_cast<unsigned>(m)), tol);
  return t;
}

struct Thm23Report {
  BoundReport explicit_part;  // sum_{m <= floor(sqrt 2n)} ((2 + L) / (m sigma)) ||E_0(S_m^2) - m sigma^2||_1
  std::vector<double> square_dev;  // ||E_0(S_m^2) - m sigma^2||_1, m = 1..m_cutoff
  std::vector<double> j_norms;     // ||E_0(J_m)||_1, m = 0..m_cutoff
  double j_sum = 0.0;              // partial sum of j_norms
  double L = 0.0;                  // ||X_0||_inf / sigma
};

/// The explicit part of the bounded-sequence bound. The constants C and
/// C_delta are not synthesised; the report carries the J-series partial sum
/// that they depend on. E_0(S_m^2) is accumulated as E_0(S_{m-1}^2) +
/// K^m(f^2) + 2 sum_{k<m} K^k(f K^{m-k} f).
inline Thm23Report thm23_bound(const ProcessSpec& spec, const FourierFn& f, std::size_t n,
                               const Tolerance& tol = {}) {
  detail::require_fourier_bounds(spec, "thm23_bound");
  const MomentSummary mom = moments(spec, f, tol);
  Thm23Report out;
  BoundReport& r = out.explicit_part;
  if (n < 1) throw DomainError("bounds are reported for n >= 1");
  r.theorem = "T23a";
  r.n = n;
  r.sigma = std::sqrt(mom.sigma2);
  r.lambda = mom.lambda;
  r.m_cutoff = detail::m_cutoff(n);
  out.L = mom.linf / r.sigma;
  if (!std::isfinite(out.L)) throw DomainError("thm23_bound requires a bounded observable");
  const std::size_t M = r.m_cutoff;
  if (detail::trivially_independent(spec)) {
    r.per_m.assign(M, 0.0);
    out.square_dev.assign(M, 0.0);
    out.j_norms.assign(M + 1, 0.0);
  } else {
    std::vector<FourierFn> cross(M + 1);  // f K^d f
    FourierFn Kd = f;
    for (std::size_t d = 1; d <= M; ++d) {
      Kd = transfer(spec, Kd, 1);
      cross[d] = multiply(f, Kd);
    }
    const FourierFn f2 = multiply(f, f);
    std::vector<FourierFn> dev;
    FourierFn acc, Kf2 = f2;
    for (std::size_t m = 1; m <= M; ++m) {
      Kf2 = transfer(spec, Kf2, 1);
      acc += Kf2;
      for (std::size_t k = 1; k < m; ++k) {
        acc += 2.0 * transfer(spec, cross[m - k], static_cast<unsigned>(k));
      }
      dev.push_back(acc.plus_constant(-static_cast<double>(m) * mom.sigma2));
    }
    out.square_dev = detail::norms_of(dev, [&](const FourierFn& g) { return l1_norm(g, tol); });
    std::vector<FourierFn> js;
    FourierFn J = resolvent_tail(spec, f, 1);
    for (std::size_t m = 0; m <= M; ++m) {
      js.push_back(J);
      J = transfer(spec, J, 1);
    }
    out.j_norms = detail::norms_of(js, [&](const FourierFn& g) { return l1_norm(g, tol); });
    for (std::size_t m = 1; m <= M; ++m) {
      r.per_m.push_back((2.0 + out.L) / (static_cast<double>(m) * r.sigma) * out.square_dev[m - 1]);
    }
  }
  for (double v : out.j_norms) out.j_sum += v;
  detail::finish_bound(r);
  return out;
}

/// (int |K^l(f^2) - var0|^{3/2})^{2/3}.
inline double jan_norm(const ProcessSpec& spec, const FourierFn& f, std::size_t l,
                       const Tolerance& tol = {}) {
  if (l < 1) throw DomainError("jan_norm requires l >= 1");
  detail::require_fourier_bounds(spec, "jan_norm");
  if (detail::trivially_independent(spec)) return 0.0;
  if (!is_martingale(spec, f)) throw PreconditionError("jan_norm requires a martingale-difference f");
  const FourierFn f2 = multiply(f, f);
  const FourierFn g = transfer(spec, f2, static_cast<unsigned>(l)).plus_constant(-f2.constant());
  return std::pow(abs_power_integral(g, 1.5, tol), 2.0 / 3.0);
}

// ---------------------------------------------------------------------------
// Three-moment law G = Z + B
// ---------------------------------------------------------------------------

/// Z ~ N(0, beta2 / 2) plus an independent two-point B with P(B = m) = t,
/// P(B = m') = 1 - t, matching moments (0, beta2, beta3).
struct ThreeMomentDist {
  double beta2 = 0.0;
  double beta3 = 0.0;
  double m = 0.0;
  double m_prime = 0.0;
  double t = 0.0;
  double t_complement = 0.0;  // 1 - t, formed directly: t can sit within 1e-5 of 1

  struct Moments {
    double mean, second, third;
  };

  /// Moments of G from the two-point law and the Gaussian part.
  Moments analytic_moments() const {
    const double u = t_complement;
    const double eb = t * m + u * m_prime;
    const double eb2 = t * m * m + u * m_prime * m_prime;
    const double eb3 = t * m * m * m + u * m_prime * m_prime * m_prime;
    const double z2 = 0.5 * beta2;
    return {eb, z2 + eb2, eb3 + 3.0 * z2 * eb};
  }

  double sample(RandomStream& rng) const {
    const double z = std::sqrt(0.5 * beta2) * rng.normal();
    return z + (rng.uniform() < t ? m : m_prime);
  }
};

/// m = (beta3 + s) / beta2 with s = sqrt(beta3^2 + beta2^3 / 2), m' =
/// -beta2 / (2m), t = beta2^3 / (2 beta2^3 + 4 beta3 (beta3 + s)) =
/// (s - beta3) / (2s), 1 - t = (s + beta3) / (2s). beta3 + s and s - beta3
/// are formed without cancellation.
inline ThreeMomentDist three_moment(double beta2, double beta3) {
  if (!(beta2 > 0.0) || !std::isfinite(beta2) || !std::isfinite(beta3)) {
    throw DomainError("three_moment requires beta2 > 0 and finite beta3");
  }
  const double c = 0.5 * beta2 * beta2 * beta2;
  const double s = std::sqrt(beta3 * beta3 + c);
  const double plus = beta3 >= 0.0 ? beta3 + s : c / (s - beta3);    // beta3 + s
  const double minus = beta3 <= 0.0 ? s - beta3 : c / (s + beta3);   // s - beta3
  ThreeMomentDist d;
  d.beta2 = beta2;
  d.beta3 = beta3;
  d.m = plus / beta2;
  d.m_prime = -beta2 / (2.0 * d.m);
  d.t = minus / (2.0 * s);
  d.t_complement = plus / (2.0 * s);
  return d;
}

// ---------------------------------------------------------------------------
// b(l), Zolotarev's constant, rate fits
// ---------------------------------------------------------------------------

/// b(l) = E X0^3 + 3 sum_{i<=l} E(X0 Xi^2 + X0^2 Xi) + 6 sum_{i<=l} sum_{j<i}
/// E(X0 Xj Xi), with E(X0 Xj Xi) = int f K^j(f K^{i-j} f). Integrals of
/// products are taken exactly on coefficients.
inline double b_l(const ProcessSpec& spec, const FourierFn& f, std::size_t l,
                  const Tolerance& tol = {}) {
  validate(spec);
  if (const auto* c = std::get_if<FiniteChain>(&spec)) {
    std::vector<double> v(c->values);
    const double mean = detail::pi_mean(*c, v);
    for (double& x : v) x -= mean;
    auto times = [](std::vector<double> a, const std::vector<double>& b) {
      for (std::size_t i = 0; i < a.size(); ++i) a[i] *= b[i];
      return a;
    };
    const auto v2 = times(v, v);
    double b = detail::pi_inner(*c, v, v2);
    for (std::size_t i = 1; i <= l; ++i) {
      b += 3.0 * (detail::pi_inner(*c, v, chain_transfer(*c, v2, static_cast<unsigned>(i))) +
                  detail::pi_inner(*c, v2, chain_transfer(*c, v, static_cast<unsigned>(i))));
      for (std::size_t j = 1; j < i; ++j) {
        const auto inner_v = times(v, chain_transfer(*c, v, static_cast<unsigned>(i - j)));
        b += 6.0 * detail::pi_inner(*c, v, chain_transfer(*c, inner_v, static_cast<unsigned>(j)));
      }
    }
    return b;
  }
  if (const auto* law = std::get_if<IIDLaw>(&spec); law && law->law) {
    return law_expectation(*law->law, [](double x) { return x * x * x; }, tol);
  }
  if (!f.is_centered(1e-14)) throw PreconditionError("b_l requires a centered observable");
  const FourierFn f2 = multiply(f, f);
  double b = inner(f, f2);
  std::vector<FourierFn> Kf(l + 1);
  for (std::size_t d = 1; d <= l; ++d) Kf[d] = transfer(spec, f, static_cast<unsigned>(d));
  for (std::size_t i = 1; i <= l; ++i) {
    b += 3.0 * (inner(f, transfer(spec, f2, static_cast<unsigned>(i))) + inner(f2, Kf[i]));
    for (std::size_t j = 1; j < i; ++j) {
      b += 6.0 * inner(f, transfer(spec, multiply(f, Kf[i - j]), static_cast<unsigned>(j)));
    }
  }
  return b;
}

/// E|X|^3 / (2 var).
inline double zolotarev(double abs3, double var) {
  if (!(var > 0.0)) throw DomainError("zolotarev requires var > 0");
  return abs3 / (2.0 * var);
}

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Least squares of log d on log n.
inline RateFit rate_fit(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) throw DomainError("rate_fit needs at least 3 points");
  std::vector<double> x, y;
  for (const auto& [n, d] : points) {
    if (!(d > 0.0) || !(n > 0.0)) throw DomainError("rate_fit needs n > 0 and d > 0");
    for (double prev : x) {
      if (prev == std::log(n)) throw DomainError("rate_fit needs distinct n");
    }
    x.push_back(std::log(n));
    y.push_back(std::log(d));
  }
  const double k = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / k;
    my += y[i] / k;
  }
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  RateFit r;
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (r.intercept + r.slope * x[i]);
    ss_res += e * e;
  }
  r.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return r;
}

}  // namespace meanclt
