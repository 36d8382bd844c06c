#pragma once

// Dependence coefficients (theta, indicator-product alpha), quantile
// functions, mixing-integral diagnostics, the quantile covariance
// inequality for finite joint laws, and Diophantine sums for rotations.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "meanclt/distributions.hpp"
#include "meanclt/errors.hpp"
#include "meanclt/fourier.hpp"
#include "meanclt/numerics.hpp"
#include "meanclt/processes.hpp"
#include "meanclt/rotation.hpp"

namespace meanclt {

// ---------------------------------------------------------------------------
// Coefficient sequences and quantile functions
// ---------------------------------------------------------------------------

/// alpha(0), alpha(1), ... on a finite tabulation; nonincreasing, in [0, 1].
class AlphaSeq {
 public:
  AlphaSeq() = default;
  explicit AlphaSeq(std::vector<double> values) : values_(std::move(values)) {
    for (std::size_t i = 0; i < values_.size(); ++i) {
      double& v = values_[i];
      if (!std::isfinite(v) || v < 0.0) throw ValidationError("alpha values must be in [0, 1]");
      if (v > 1.0) {
        if (v > 1.0 + 1e-9) throw ValidationError("alpha value exceeds 1");
        warnings_.push_back("alpha(" + std::to_string(i) + ") = " + std::to_string(v) +
                            " clipped to 1");
        v = 1.0;
      }
      if (i > 0 && v > values_[i - 1]) throw ValidationError("alpha sequence must be nonincreasing");
    }
  }

  /// Raw per-index values turned into the sup over later indices, which is
  /// what the coefficient definitions take.
  static AlphaSeq from_tabulation(std::vector<double> raw) {
    std::vector<std::string> notes;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] > 1.0) {
        notes.push_back("alpha(" + std::to_string(i) + ") = " + std::to_string(raw[i]) +
                        " clipped to 1");
        raw[i] = 1.0;
      }
    }
    for (std::size_t i = raw.size(); i-- > 1;) raw[i - 1] = std::max(raw[i - 1], raw[i]);
    AlphaSeq a(std::move(raw));
    a.warnings_.insert(a.warnings_.begin(), notes.begin(), notes.end());
    return a;
  }

  static AlphaSeq geometric(double ratio, std::size_t length) {
    std::vector<double> v(length);
    for (std::size_t i = 0; i < length; ++i) v[i] = std::pow(ratio, static_cast<double>(i));
    return AlphaSeq(std::move(v));
  }

  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_.at(i); }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  std::vector<double> values_;
  std::vector<std::string> warnings_;
};

/// Nonincreasing function on (0, 1): either a right-continuous step function
/// (piece i covers [u_hi(i-1), u_hi(i)), the first starting at 0, the last
/// ending at 1) or a callable closed form integrated by quadrature.
class QuantileSeq {
 public:
  struct Step {
    double u_hi;
    double value;
  };

  static QuantileSeq steps(std::vector<Step> pieces) {
    if (pieces.empty()) throw ValidationError("quantile step function needs at least one piece");
    double lo = 0.0;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      if (!(pieces[i].u_hi > lo) || !std::isfinite(pieces[i].value)) {
        throw ValidationError("quantile breakpoints must increase and values be finite");
      }
      if (i > 0 && pieces[i].value > pieces[i - 1].value) {
        throw ValidationError("quantile function must be nonincreasing");
      }
      lo = pieces[i].u_hi;
    }
    if (std::abs(lo - 1.0) > 1e-12) throw ValidationError("quantile step function must end at u = 1");
    pieces.back().u_hi = 1.0;
    QuantileSeq q;
    q.steps_ = std::move(pieces);
    return q;
  }

  static QuantileSeq constant(double c) { return steps({{1.0, c}}); }

  static QuantileSeq closed_form(std::function<double(double)> fn) {
    QuantileSeq q;
    q.fn_ = std::move(fn);
    return q;
  }

  bool is_step() const { return !fn_; }
  const std::vector<Step>& pieces() const { return steps_; }

  double operator()(double u) const {
    if (fn_) return (*fn_)(u);
    for (const auto& s : steps_) {
      if (u < s.u_hi) return s.value;
    }
    return steps_.back().value;
  }

  bool nonnegative() const {
    if (fn_) return true;  // callers supply tail quantiles of |X|
    return steps_.back().value >= 0.0;
  }

  /// Interior breakpoints in (0, 1).
  std::vector<double> breakpoints() const {
    std::vector<double> b;
    for (std::size_t i = 0; i + 1 < steps_.size(); ++i) b.push_back(steps_[i].u_hi);
    return b;
  }

  /// int_lo^hi Q(u)^p du; exact for step functions.
  double integral_power(double lo, double hi, int p, const Tolerance& tol = {}) const {
    if (!(hi > lo)) return 0.0;
    if (fn_) {
      return integrate([&](double u) { return std::pow((*fn_)(u), p); }, lo, hi, tol).value;
    }
    double total = 0.0, start = 0.0;
    for (const auto& s : steps_) {
      const double a = std::max(start, lo), b = std::min(s.u_hi, hi);
      if (b > a) total += std::pow(s.value, p) * (b - a);
      start = s.u_hi;
      if (start >= hi) break;
    }
    return total;
  }

 private:
  std::vector<Step> steps_;
  std::optional<std::function<double(double)>> fn_;
};

namespace detail {

// Step function from sorted breakpoints, sampling eval at piece midpoints so
// boundary conventions of generalized inverses never matter.
template <class Eval>
QuantileSeq step_from_breaks(std::vector<double> breaks, Eval&& eval) {
  breaks.push_back(0.0);
  breaks.push_back(1.0);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  std::vector<QuantileSeq::Step> pieces;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double lo = breaks[i], hi = breaks[i + 1];
    if (!(lo >= 0.0 && hi <= 1.0) || !(hi > lo)) continue;
    const double v = eval(0.5 * (lo + hi));
    if (!pieces.empty() && pieces.back().value == v) {
      pieces.back().u_hi = hi;
    } else {
      pieces.push_back({hi, v});
    }
  }
  return QuantileSeq::steps(std::move(pieces));
}

// Tail probabilities P(X > a_j) for each atom, summed from the top.
inline std::vector<double> upper_tails(const FinitePmf& p) {
  std::vector<double> t(p.size());
  double acc = 0.0;
  for (std::size_t j = p.size(); j-- > 0;) {
    t[j] = acc;
    acc += p.probs()[j];
  }
  return t;
}

inline std::vector<double> cumulative(const FinitePmf& p) {
  std::vector<double> c(p.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) c[j] = (acc += p.probs()[j]);
  return c;
}

}  // namespace detail

/// Q_X(u) = inf{x : P(X > x) <= u}.
inline double tail_quantile(const FinitePmf& p, double u) {
  const auto tails = detail::upper_tails(p);
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (tails[j] <= u) return p.atoms()[j];
  }
  return p.atoms().back();
}

/// F^{-1}(u) = inf{x : F(x) >= u}.
inline double left_quantile(const FinitePmf& p, double u) {
  const auto cum = detail::cumulative(p);
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (cum[j] >= u) return p.atoms()[j];
  }
  return p.atoms().back();
}

inline QuantileSeq quantile_from_pmf(const FinitePmf& p) {
  return detail::step_from_breaks(detail::upper_tails(p),
                                  [&](double u) { return tail_quantile(p, u); });
}

inline QuantileSeq quantile_from_sample(const EmpiricalSample& s) {
  std::vector<std::pair<double, double>> w;
  for (double x : s.values()) w.emplace_back(x, 1.0);
  return quantile_from_pmf(FinitePmf::from_weights(w));
}

/// Law of h(X) for X ~ p.
template <class H>
FinitePmf pushforward(const FinitePmf& p, H&& h) {
  std::vector<std::pair<double, double>> w;
  for (std::size_t i = 0; i < p.size(); ++i) w.emplace_back(h(p.atoms()[i]), p.probs()[i]);
  return FinitePmf::from_weights(w);
}

/// D_X(u) = (F^{-1}(1 - u) - F^{-1}(u))_+ as a step function on (0, 1).
inline QuantileSeq dispersion_function(const FinitePmf& p) {
  std::vector<double> breaks;
  for (double c : detail::cumulative(p)) {
    breaks.push_back(c);
    breaks.push_back(1.0 - c);
  }
  return detail::step_from_breaks(breaks, [&](double u) {
    return std::max(0.0, left_quantile(p, 1.0 - u) - left_quantile(p, u));
  });
}

/// alpha^{-1}(u) = #{i : u < alpha(i)} over the tabulated indices.
inline std::size_t alpha_inverse(const AlphaSeq& a, double u) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("alpha_inverse requires u in (0, 1)");
  std::size_t n = 0;
  for (double v : a.values()) n += u < v ? 1 : 0;
  return n;
}

/// int_0^c prod_i Q_i(u) du for step functions, exact.
inline double step_product_integral(const std::vector<const QuantileSeq*>& fns, double c) {
  if (!(c > 0.0)) return 0.0;
  c = std::min(c, 1.0);
  std::vector<double> breaks{0.0, c};
  for (const auto* q : fns) {
    if (!q->is_step()) throw TypeError("step_product_integral needs step functions");
    for (double b : q->breakpoints()) {
      if (b < c) breaks.push_back(b);
    }
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double mid = 0.5 * (breaks[i] + breaks[i + 1]);
    double prod = 1.0;
    for (const auto* q : fns) prod *= (*q)(mid);
    total += prod * (breaks[i + 1] - breaks[i]);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Convergence trends
// ---------------------------------------------------------------------------

enum class Trend { converging, inconclusive, diverging };

inline const char* trend_name(Trend t) {
  switch (t) {
    case Trend::converging: return "converging";
    case Trend::inconclusive: return "inconclusive";
    case Trend::diverging: return "diverging";
  }
  return "?";
}

struct TrendVerdict {
  double ratio = std::numeric_limits<double>::quiet_NaN();  // S(K) / S(K/10)
  Trend trend = Trend::inconclusive;
};

/// Verdict from partial sums S(1..K) (index 0 holds S(1)) of a nonnegative
/// series: converging when the last decade adds at most 1%, diverging when
/// it at least doubles the sum, inconclusive otherwise or when K < 20
/// (below that the reference S(K/10) is a single term).
inline TrendVerdict last_decade_trend(const std::vector<double>& partial) {
  TrendVerdict v;
  const std::size_t K = partial.size();
  if (K == 0) return v;
  const double total = partial.back();
  if (total == 0.0) {
    v.ratio = 1.0;
    v.trend = Trend::converging;
    return v;
  }
  if (K < 20) return v;
  const double ref = partial[K / 10 - 1];
  v.ratio = ref > 0.0 ? total / ref : std::numeric_limits<double>::infinity();
  if (v.ratio <= 1.01) v.trend = Trend::converging;
  else if (v.ratio >= 2.0) v.trend = Trend::diverging;
  return v;
}

// ---------------------------------------------------------------------------
// Mixing integrals
// ---------------------------------------------------------------------------

struct MixingIntegralReport {
  int power = 0;
  int weight = 0;
  std::size_t kmax_requested = 0;
  std::size_t kmax_used = 0;                  // limited by the alpha tabulation
  std::vector<double> partial_sums;           // S(1), ..., S(kmax_used)
  double series = 0.0;                        // sum_k k^b int_0^alpha(k) Q^p
  double rearranged = 0.0;                    // int sum_{k=1}^{N(u)-1} k^b Q^p du, same value
  double power_form = 0.0;                    // int N(u)^{b+1} Q^p du, finite iff series is
  TrendVerdict verdict;
};

/// sum_{k=1}^{kmax} k^b int_0^{alpha(k)} Q^p du and its u-domain forms, where
/// N(u) = alpha^{-1}(u) counts tabulated i <= kmax with u < alpha(i).
inline MixingIntegralReport mixing_integral(const AlphaSeq& a, const QuantileSeq& Q, int power,
                                            int weight, std::size_t kmax,
                                            const Tolerance& tol = {}) {
  if (power < 1 || weight < 0 || kmax < 1) {
    throw DomainError("mixing_integral requires power >= 1, weight >= 0, kmax >= 1");
  }
  if (!Q.nonnegative()) throw DomainError("mixing_integral requires a nonnegative Q");
  MixingIntegralReport r;
  r.power = power;
  r.weight = weight;
  r.kmax_requested = kmax;
  r.kmax_used = a.size() == 0 ? 0 : std::min(kmax, a.size() - 1);
  const std::size_t K = r.kmax_used;
  std::vector<double> kb(K + 2, 0.0);  // kb[n] = sum_{k=1}^{n} k^b
  for (std::size_t k = 1; k <= K + 1; ++k) {
    kb[k] = kb[k - 1] + std::pow(static_cast<double>(k), weight);
  }
  double s = 0.0;
  for (std::size_t k = 1; k <= K; ++k) {
    s += std::pow(static_cast<double>(k), weight) * Q.integral_power(0.0, a[k], power, tol);
    r.partial_sums.push_back(s);
  }
  r.series = s;
  r.verdict = last_decade_trend(r.partial_sums);

  std::vector<double> breaks{0.0, 1.0};
  for (std::size_t i = 0; i <= K && i < a.size(); ++i) {
    if (a[i] > 0.0 && a[i] < 1.0) breaks.push_back(a[i]);
  }
  for (double b : Q.breakpoints()) breaks.push_back(b);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double lo = breaks[i], hi = breaks[i + 1];
    const double mid = 0.5 * (lo + hi);
    std::size_t n = 0;
    for (std::size_t j = 0; j <= K; ++j) n += mid < a[j] ? 1 : 0;
    if (n == 0) continue;
    const double q = Q.integral_power(lo, hi, power, tol);
    r.rearranged += kb[n - 1] * q;
    r.power_form += std::pow(static_cast<double>(n), weight + 1) * q;
  }
  return r;
}

// ---------------------------------------------------------------------------
// theta coefficients
// ---------------------------------------------------------------------------

struct ThetaReport {
  double value = 0.0;               // windowed lower bound of the supremum
  std::vector<std::size_t> argmax;  // (k_1, ..., k_j), k_1 = 0 when i >= 1
  std::size_t shapes = 0;
  int window = 0;
};

namespace detail {

// Index tuples of the windowed set, normalised by stationarity: the first
// past index is 0; with no past indices the conditioning time is 0.
inline std::vector<std::vector<std::size_t>> theta_shapes(int i, int j, int gap, int window) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> k(static_cast<std::size_t>(j));
  const std::size_t W = static_cast<std::size_t>(window);
  std::function<void(int, std::size_t, std::size_t)> future = [&](int pos, std::size_t lo,
                                                                   std::size_t hi) {
    if (pos == j) {
      out.push_back(k);
      return;
    }
    for (std::size_t v = lo; v <= hi; ++v) {
      k[static_cast<std::size_t>(pos)] = v;
      future(pos + 1, v, hi);
    }
  };
  std::function<void(int, std::size_t)> past = [&](int pos, std::size_t lo) {
    if (pos == i) {
      const std::size_t present = i == 0 ? 0 : k[static_cast<std::size_t>(i - 1)];
      future(i, present + static_cast<std::size_t>(gap), present + static_cast<std::size_t>(gap) + W);
      return;
    }
    const std::size_t hi = pos == 0 ? 0 : W;
    for (std::size_t v = lo; v <= hi; ++v) {
      k[static_cast<std::size_t>(pos)] = v;
      past(pos + 1, v);
    }
  };
  past(0, 0);
  return out;
}

// Distinct times with multiplicities.
inline std::vector<std::pair<std::size_t, int>> group_times(const std::vector<std::size_t>& k,
                                                            std::size_t from, std::size_t to) {
  std::vector<std::pair<std::size_t, int>> g;
  for (std::size_t m = from; m < to; ++m) {
    if (!g.empty() && g.back().first == k[m]) {
      ++g.back().second;
    } else {
      g.emplace_back(k[m], 1);
    }
  }
  return g;
}

inline FourierFn fourier_power(const FourierFn& f, int e) {
  FourierFn r = FourierFn::constant_fn(1.0);
  for (int m = 0; m < e; ++m) r = multiply(r, f);
  return r;
}

// E_{present}(X_{k_{i+1}} ... X_{k_j}) as a function of xi_present.
inline FourierFn future_conditional(const ProcessSpec& spec, const FourierFn& f,
                                    const std::vector<std::size_t>& k, int i, std::size_t present) {
  const std::size_t j = k.size();
  FourierFn h = f;
  for (std::size_t m = j - 1; m-- > static_cast<std::size_t>(i);) {
    h = multiply(f, transfer(spec, h, static_cast<unsigned>(k[m + 1] - k[m])));
  }
  return transfer(spec, h, static_cast<unsigned>(k[static_cast<std::size_t>(i)] - present));
}

inline double theta_shape_fourier(const ProcessSpec& spec, const FourierFn& f,
                                  const std::vector<std::size_t>& k, int i, const Tolerance& tol) {
  const std::size_t present = i == 0 ? 0 : k[static_cast<std::size_t>(i - 1)];
  FourierFn cond = future_conditional(spec, f, k, i, present);
  cond = cond.plus_constant(-cond.constant());
  if (i == 0) return l1_norm(cond, tol);
  const auto past = group_times(k, 0, static_cast<std::size_t>(i));
  if (std::holds_alternative<DoublingMap>(spec)) {
    // Earlier states are T^d of the present one.
    FourierFn g = cond;
    for (const auto& [t, e] : past) {
      g = multiply(g, fourier_power(f, e).dilated(static_cast<unsigned>(present - t)));
    }
    return l1_norm(g, tol);
  }
  if (const auto* c = std::get_if<CircleWalk>(&spec)) {
    // Earlier states are the present one displaced by symmetric +/-a walks.
    std::vector<FourierFn> factors;
    std::vector<std::size_t> gaps;
    std::size_t later = present;
    for (std::size_t s = past.size(); s-- > 0;) {
      factors.push_back(fourier_power(f, past[s].second));
      gaps.push_back(later - past[s].first);
      later = past[s].first;
    }
    double total = 0.0;
    std::vector<std::int64_t> disp(gaps.size());
    std::function<void(std::size_t, std::int64_t, double)> walk = [&](std::size_t s,
                                                                       std::int64_t offset,
                                                                       double weight) {
      if (s == gaps.size()) {
        FourierFn g = cond;
        for (std::size_t m = 0; m < factors.size(); ++m) {
          g = multiply(g, factors[m].shifted(c->a, disp[m]));
        }
        total += weight * l1_norm(g, tol);
        return;
      }
      const auto n = static_cast<std::int64_t>(gaps[s]);
      for (std::int64_t up = 0; up <= n; ++up) {
        const double w = std::exp(std::lgamma(n + 1.0) - std::lgamma(up + 1.0) -
                                  std::lgamma(n - up + 1.0) - n * std::log(2.0));
        disp[s] = offset + 2 * up - n;
        walk(s + 1, disp[s], weight * w);
      }
    };
    walk(0, 0, 1.0);
    return total;
  }
  // i.i.d. uniform driver: distinct earlier times are independent of the present.
  FourierFn g = cond;
  double scale = 1.0;
  for (const auto& [t, e] : past) {
    if (t == present) {
      g = multiply(g, fourier_power(f, e));
    } else {
      scale *= abs_power_integral(f, e, tol);
    }
  }
  return scale * l1_norm(g, tol);
}

// i.i.d. with a direct law: everything factorises into absolute moments.
inline double theta_shape_law(const MarginalLaw& law, const std::vector<std::size_t>& k, int i,
                              const Tolerance& tol) {
  const std::size_t present = i == 0 ? 0 : k[static_cast<std::size_t>(i - 1)];
  int q = 0, r = 0;
  double scale = 1.0;
  for (const auto& [t, e] : group_times(k, 0, static_cast<std::size_t>(i))) {
    if (t == present) q = e;
    else scale *= law_expectation(law, [e = e](double x) { return std::pow(std::abs(x), e); }, tol);
  }
  for (const auto& [t, e] : group_times(k, static_cast<std::size_t>(i), k.size())) {
    if (t == present) r = e;
    else scale *= law_expectation(law, [e = e](double x) { return std::pow(x, e); }, tol);
  }
  if (r == 0) return 0.0;
  const double mr = law_expectation(law, [r](double x) { return std::pow(x, r); }, tol);
  return std::abs(scale) *
         law_expectation(law, [&](double x) { return std::abs(std::pow(x, q) * (std::pow(x, r) - mr)); },
                         tol);
}

inline std::vector<std::vector<double>> matrix_power(const std::vector<std::vector<double>>& P,
                                                     std::size_t n) {
  const std::size_t s = P.size();
  std::vector<std::vector<double>> R(s, std::vector<double>(s, 0.0));
  for (std::size_t a = 0; a < s; ++a) R[a][a] = 1.0;
  for (std::size_t step = 0; step < n; ++step) {
    std::vector<std::vector<double>> next(s, std::vector<double>(s, 0.0));
    for (std::size_t a = 0; a < s; ++a) {
      for (std::size_t b = 0; b < s; ++b) {
        for (std::size_t c = 0; c < s; ++c) next[a][c] += R[a][b] * P[b][c];
      }
    }
    R.swap(next);
  }
  return R;
}

inline double theta_shape_chain(const FiniteChain& c, const std::vector<std::size_t>& k, int i) {
  const std::size_t s = c.states();
  const std::size_t present = i == 0 ? 0 : k[static_cast<std::size_t>(i - 1)];
  std::vector<double> h(c.values);
  for (std::size_t m = k.size() - 1; m-- > static_cast<std::size_t>(i);) {
    h = chain_transfer(c, h, static_cast<unsigned>(k[m + 1] - k[m]));
    for (std::size_t x = 0; x < s; ++x) h[x] *= c.values[x];
  }
  h = chain_transfer(c, h, static_cast<unsigned>(k[static_cast<std::size_t>(i)] - present));
  const double mean = detail::pi_mean(c, h);
  for (double& v : h) v -= mean;
  if (i == 0) {
    double total = 0.0;
    for (std::size_t x = 0; x < s; ++x) total += c.pi[x] * std::abs(h[x]);
    return total;
  }
  const auto past = group_times(k, 0, static_cast<std::size_t>(i));
  std::vector<std::vector<std::vector<double>>> steps;  // P^{t_{s+1} - t_s}
  for (std::size_t m = 0; m + 1 < past.size(); ++m) {
    steps.push_back(matrix_power(c.P, past[m + 1].first - past[m].first));
  }
  double total = 0.0;
  std::function<void(std::size_t, std::size_t, double, double)> walk =
      [&](std::size_t m, std::size_t x, double prob, double prod) {
        prod *= std::pow(c.values[x], past[m].second);
        if (m + 1 == past.size()) {  // the last past time is the present
          total += prob * std::abs(prod * h[x]);
          return;
        }
        for (std::size_t y = 0; y < s; ++y) {
          const double p = steps[m][x][y];
          if (p > 0.0) walk(m + 1, y, prob * p, prod);
        }
      };
  for (std::size_t x = 0; x < s; ++x) {
    if (c.pi[x] > 0.0) walk(0, x, c.pi[x], 1.0);
  }
  return total;
}

}  // namespace detail

/// theta_{i,j}(gap) over the windowed index set; a lower bound of the
/// supremum over all index tuples. For FiniteChain f is ignored and the
/// chain's state values are used.
inline ThetaReport theta_coeff(const ProcessSpec& spec, const FourierFn& f, int i, int j, int gap,
                               int window, const Tolerance& tol = {}) {
  if (!(0 <= i && i < j && j <= 4)) throw DomainError("theta_coeff requires 0 <= i < j <= 4");
  if (gap < 0) throw DomainError("theta_coeff requires gap >= 0");
  if (window < 0) throw DomainError("theta_coeff requires window >= 0");
  validate(spec);
  const auto* law = std::get_if<IIDLaw>(&spec);
  if (!std::holds_alternative<FiniteChain>(spec) && !(law && law->law) && !f.is_centered(1e-14)) {
    throw PreconditionError("theta_coeff requires a centered observable");
  }
  ThetaReport r;
  r.window = window;
  const auto shapes = detail::theta_shapes(i, j, gap, window);
  r.shapes = shapes.size();
  std::vector<double> values(shapes.size(), 0.0);
  parallel_for(shapes.size(), [&](std::size_t s) {
    const auto& k = shapes[s];
    if (const auto* c = std::get_if<FiniteChain>(&spec)) {
      values[s] = detail::theta_shape_chain(*c, k, i);
    } else if (law && law->law) {
      values[s] = detail::theta_shape_law(*law->law, k, i, tol);
    } else {
      values[s] = detail::theta_shape_fourier(spec, f, k, i, tol);
    }
  });
  std::size_t best = 0;
  for (std::size_t s = 1; s < shapes.size(); ++s) {
    if (values[s] > values[best]) best = s;
  }
  r.value = values[best];
  r.argmax = shapes[best];
  return r;
}

// ---------------------------------------------------------------------------
// Indicator-product alpha
// ---------------------------------------------------------------------------

struct AlphaEstimate {
  double value = 0.0;               // certified lower bound of the supremum
  std::vector<double> thresholds;   // maximiser found
  std::size_t candidates = 0;       // threshold tuples evaluated
  bool clipped = false;             // raw value exceeded 1 and was clipped
};

namespace detail {

inline constexpr double kAlphaBudget = 4e9;  // elementary operations

inline void finish_alpha(AlphaEstimate& a) {
  if (a.value > 1.0) {
    a.value = 1.0;
    a.clipped = true;
  }
}

template <class Eval>
AlphaEstimate maximise_thresholds(const std::vector<std::vector<double>>& cand, Eval&& eval) {
  std::size_t total = 1;
  for (const auto& c : cand) total *= c.size();
  std::vector<double> values(total, 0.0);
  auto decode = [&](std::size_t idx) {
    std::vector<double> t(cand.size());
    for (std::size_t d = cand.size(); d-- > 0;) {
      t[d] = cand[d][idx % cand[d].size()];
      idx /= cand[d].size();
    }
    return t;
  };
  parallel_for(total, [&](std::size_t idx) { values[idx] = eval(decode(idx)); });
  AlphaEstimate a;
  a.candidates = total;
  std::size_t best = 0;
  for (std::size_t idx = 0; idx < total; ++idx) {
    if (values[idx] > values[best]) best = idx;
  }
  if (total > 0) {
    a.value = values[best];
    a.thresholds = decode(best);
  }
  finish_alpha(a);
  return a;
}

// ||E(prod g_{t_s}(xi_{i_s}) | xi_0) - E(...)||_1 for the doubling chain.
// Given xi_0 = x, xi_{i_s} = (x + (m mod 2^{i_s})) / 2^{i_s} with m uniform on
// [0, 2^L); the conditional mean is piecewise constant in x with breaks at
// frac(2^{i_s} t_s).
inline double doubling_alpha_objective(const std::vector<unsigned>& idx,
                                       const std::vector<double>& t) {
  const unsigned L = idx.back();
  const std::uint64_t branches = std::uint64_t{1} << L;
  std::vector<double> breaks{0.0, 1.0};
  for (std::size_t s = 0; s < idx.size(); ++s) {
    const double y = std::ldexp(t[s], static_cast<int>(idx[s]));
    const double b = y - std::floor(y);
    if (b > 0.0) breaks.push_back(b);
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  std::vector<double> level(breaks.size() - 1), width(breaks.size() - 1);
  double mean = 0.0;
  for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
    const double x = 0.5 * (breaks[p] + breaks[p + 1]);
    double acc = 0.0;
    for (std::uint64_t m = 0; m < branches; ++m) {
      double prod = 1.0;
      for (std::size_t s = 0; s < idx.size(); ++s) {
        const std::uint64_t mask = (std::uint64_t{1} << idx[s]) - 1;
        const double xi = std::ldexp(x + static_cast<double>(m & mask), -static_cast<int>(idx[s]));
        prod *= (xi <= t[s] ? 1.0 : 0.0) - t[s];
      }
      acc += prod;
    }
    level[p] = acc / static_cast<double>(branches);
    width[p] = breaks[p + 1] - breaks[p];
    mean += level[p] * width[p];
  }
  double norm = 0.0;
  for (std::size_t p = 0; p < level.size(); ++p) norm += std::abs(level[p] - mean) * width[p];
  return norm;
}

inline double chain_alpha_objective(const FiniteChain& c, const std::vector<unsigned>& idx,
                                    const std::vector<double>& t) {
  const std::size_t s = c.states();
  auto g = [&](std::size_t state, std::size_t d) {
    double below = 0.0;
    for (std::size_t y = 0; y < s; ++y) below += static_cast<double>(y) <= t[d] ? c.pi[y] : 0.0;
    return (static_cast<double>(state) <= t[d] ? 1.0 : 0.0) - below;
  };
  std::vector<double> h(s);
  for (std::size_t x = 0; x < s; ++x) h[x] = g(x, idx.size() - 1);
  for (std::size_t d = idx.size() - 1; d-- > 0;) {
    h = chain_transfer(c, h, idx[d + 1] - idx[d]);
    for (std::size_t x = 0; x < s; ++x) h[x] *= g(x, d);
  }
  h = chain_transfer(c, h, idx.front());
  const double mean = pi_mean(c, h);
  double norm = 0.0;
  for (std::size_t x = 0; x < s; ++x) norm += c.pi[x] * std::abs(h[x] - mean);
  return norm;
}

}  // namespace detail

/// alpha(M_0, (xi_{i_1}, ..., xi_{i_l})) maximised over threshold tuples.
/// DoublingMap: thresholds on the dyadic grid k / 2^grid plus branch
/// midpoints (q + 1/2) / 2^i (all for one index, 2^grid spread ones for
/// several); exact objective per
/// tuple, so the maximum is a certified lower bound. FiniteChain: xi is the
/// state index and every threshold pattern is enumerated, so the value is
/// exact. IIDLaw gives 0 for indices >= 1.
inline AlphaEstimate alpha_exact(const ProcessSpec& spec, const std::vector<unsigned>& indices,
                                 int grid) {
  if (indices.empty() || indices.size() > 3) throw DomainError("alpha_exact takes 1 to 3 indices");
  for (std::size_t d = 1; d < indices.size(); ++d) {
    if (!(indices[d] > indices[d - 1])) throw DomainError("alpha_exact indices must increase");
  }
  if (grid < 0 || grid > 20) throw DomainError("alpha_exact grid must be in [0, 20]");
  validate(spec);
  if (std::holds_alternative<IIDLaw>(spec)) {
    if (indices.front() >= 1) return {};
    throw DomainError("alpha_exact for i.i.d. sequences needs indices >= 1");
  }
  if (std::holds_alternative<DoublingMap>(spec)) {
    if (indices.back() > 14) {
      throw ResourceError("alpha_exact: doubling map indices above 14 need more than 2^14 branches");
    }
    std::vector<std::vector<double>> cand;
    for (unsigned i : indices) {
      std::vector<double> c;
      const double n = std::ldexp(1.0, grid);
      for (int k = 1; k < static_cast<int>(n); ++k) c.push_back(k / n);
      // Branch midpoints (q + 1/2) / 2^i: all of them for a single index,
      // 2^grid evenly spread ones otherwise.
      const double branches = std::ldexp(1.0, static_cast<int>(i));
      const double step = indices.size() == 1 ? 1.0 : std::max(1.0, branches / n);
      for (double q = 0.0; q < branches; q += step) c.push_back((q + 0.5) / branches);
      std::sort(c.begin(), c.end());
      c.erase(std::unique(c.begin(), c.end()), c.end());
      if (c.empty()) c.push_back(0.5);
      cand.push_back(std::move(c));
    }
    double cost = std::ldexp(1.0, static_cast<int>(indices.back())) *
                  static_cast<double>(indices.size() * (indices.size() + 1));
    for (const auto& c : cand) cost *= static_cast<double>(c.size());
    if (cost > detail::kAlphaBudget) {
      throw ResourceError("alpha_exact: threshold search exceeds the work budget; lower grid");
    }
    return detail::maximise_thresholds(
        cand, [&](const std::vector<double>& t) { return detail::doubling_alpha_objective(indices, t); });
  }
  if (const auto* c = std::get_if<FiniteChain>(&spec)) {
    std::vector<std::vector<double>> cand(indices.size());
    for (auto& v : cand) {
      for (std::size_t x = 0; x + 1 < c->states(); ++x) v.push_back(static_cast<double>(x) + 0.5);
      if (v.empty()) v.push_back(0.5);
    }
    double cost = std::pow(static_cast<double>(c->states()), 2.0) *
                  static_cast<double>(indices.back() + indices.size());
    for (const auto& v : cand) cost *= static_cast<double>(v.size());
    if (cost > detail::kAlphaBudget) throw ResourceError("alpha_exact: chain search too large");
    return detail::maximise_thresholds(
        cand, [&](const std::vector<double>& t) { return detail::chain_alpha_objective(*c, indices, t); });
  }
  throw TypeError("alpha_exact supports DoublingMap, FiniteChain and IIDLaw");
}

// ---------------------------------------------------------------------------
// Finite joint laws and the quantile covariance inequality
// ---------------------------------------------------------------------------

/// Law of (X_1, ..., X_k) on finitely many points.
class JointPmf {
 public:
  JointPmf(std::vector<std::vector<double>> points, std::vector<double> probs)
      : points_(std::move(points)), probs_(std::move(probs)) {
    if (points_.empty() || points_.size() != probs_.size()) {
      throw ValidationError("joint pmf needs matching non-empty points and probs");
    }
    if (points_.size() > 64) throw ValidationError("joint pmf support is limited to 64 points");
    k_ = points_.front().size();
    if (k_ < 1 || k_ > 4) throw ValidationError("joint pmf dimension must be 1 to 4");
    double total = 0.0;
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (points_[i].size() != k_) throw ValidationError("joint pmf points differ in dimension");
      for (double x : points_[i]) {
        if (!std::isfinite(x)) throw ValidationError("joint pmf coordinates must be finite");
      }
      if (!(probs_[i] >= 0.0)) throw ValidationError("joint pmf probabilities must be nonnegative");
      total += probs_[i];
    }
    if (std::abs(total - 1.0) > 1e-12) throw ValidationError("joint pmf probabilities must sum to 1");
  }

  std::size_t dim() const { return k_; }
  std::size_t size() const { return points_.size(); }
  const std::vector<std::vector<double>>& points() const { return points_; }
  const std::vector<double>& probs() const { return probs_; }

  FinitePmf marginal(std::size_t i) const {
    std::vector<std::pair<double, double>> w;
    for (std::size_t s = 0; s < points_.size(); ++s) w.emplace_back(points_[s][i], probs_[s]);
    return FinitePmf::from_weights(w);
  }

  template <class G>
  double expect(G&& g) const {
    double s = 0.0;
    for (std::size_t p = 0; p < points_.size(); ++p) s += probs_[p] * g(points_[p]);
    return s;
  }

 private:
  std::vector<std::vector<double>> points_;
  std::vector<double> probs_;
  std::size_t k_ = 0;
};

namespace detail {

inline std::vector<double> atom_midpoints(const FinitePmf& m) {
  std::vector<double> mids;
  for (std::size_t a = 0; a + 1 < m.size(); ++a) mids.push_back(0.5 * (m.atoms()[a] + m.atoms()[a + 1]));
  return mids;
}

inline void check_budget(const std::vector<std::vector<double>>& grids, std::size_t support) {
  double cost = static_cast<double>(support);
  for (const auto& g : grids) cost *= static_cast<double>(std::max<std::size_t>(g.size(), 1));
  if (cost > 5e8) throw ResourceError("threshold enumeration exceeds the work budget");
}

template <class Body>
void for_each_tuple(const std::vector<std::vector<double>>& grids, Body&& body) {
  std::vector<std::size_t> pos(grids.size(), 0);
  std::vector<double> t(grids.size());
  while (true) {
    for (std::size_t d = 0; d < grids.size(); ++d) t[d] = grids[d][pos[d]];
    body(t);
    std::size_t d = grids.size();
    while (d-- > 0) {
      if (++pos[d] < grids[d].size()) break;
      pos[d] = 0;
    }
    if (d == static_cast<std::size_t>(-1)) return;
  }
}

}  // namespace detail

/// sup over thresholds of |E prod_i (1{X_i > x_i} - P(X_i > x_i))|; exact,
/// thresholds at midpoints between consecutive atoms of each coordinate.
inline double joint_alpha(const JointPmf& j) {
  std::vector<std::vector<double>> grids;
  for (std::size_t i = 0; i < j.dim(); ++i) {
    grids.push_back(detail::atom_midpoints(j.marginal(i)));
    if (grids.back().empty()) return 0.0;  // a constant coordinate
  }
  detail::check_budget(grids, j.size());
  double best = 0.0;
  std::vector<double> tail(j.dim());
  detail::for_each_tuple(grids, [&](const std::vector<double>& x) {
    for (std::size_t i = 0; i < j.dim(); ++i) {
      tail[i] = j.expect([&](const std::vector<double>& p) { return p[i] > x[i] ? 1.0 : 0.0; });
    }
    const double v = j.expect([&](const std::vector<double>& p) {
      double prod = 1.0;
      for (std::size_t i = 0; i < j.dim(); ++i) prod *= (p[i] > x[i] ? 1.0 : 0.0) - tail[i];
      return prod;
    });
    best = std::max(best, std::abs(v));
  });
  return best;
}

/// alpha(sigma(X_c), (X_i)_{i != c}) with indicator products 1{X_i <= x_i} -
/// P(X_i <= x_i); the L1 norm of the conditional deviation is a finite sum
/// over the atoms of X_c.
inline double joint_alpha_conditional(const JointPmf& j, std::size_t c) {
  if (c >= j.dim()) throw DomainError("conditioning coordinate out of range");
  if (j.dim() < 2) return 0.0;
  std::vector<std::size_t> rest;
  std::vector<std::vector<double>> grids;
  for (std::size_t i = 0; i < j.dim(); ++i) {
    if (i == c) continue;
    rest.push_back(i);
    grids.push_back(detail::atom_midpoints(j.marginal(i)));
    if (grids.back().empty()) return 0.0;
  }
  detail::check_budget(grids, j.size());
  const FinitePmf cond = j.marginal(c);
  double best = 0.0;
  std::vector<double> below(rest.size());
  detail::for_each_tuple(grids, [&](const std::vector<double>& x) {
    for (std::size_t r = 0; r < rest.size(); ++r) {
      below[r] = j.expect([&](const std::vector<double>& p) { return p[rest[r]] <= x[r] ? 1.0 : 0.0; });
    }
    auto prod = [&](const std::vector<double>& p) {
      double v = 1.0;
      for (std::size_t r = 0; r < rest.size(); ++r) v *= (p[rest[r]] <= x[r] ? 1.0 : 0.0) - below[r];
      return v;
    };
    const double mean = j.expect(prod);
    double norm = 0.0;
    for (std::size_t a = 0; a < cond.size(); ++a) {
      const double s = cond.atoms()[a];
      const double mass = j.expect([&](const std::vector<double>& p) {
        return p[c] == s ? prod(p) : 0.0;
      });
      norm += std::abs(mass - cond.probs()[a] * mean);
    }
    best = std::max(best, norm);
  });
  return best;
}

struct CovarianceBoundReport {
  double lhs = 0.0;                  // |E prod (X_i - E X_i)|
  double alpha = 0.0;                // the alpha used on the right-hand side
  double alpha_unconditional = 0.0;  // always the unconditional form
  double rhs = 0.0;                  // 2 int_0^{alpha/2} prod D_i(u) du
  bool holds = false;
  bool ordering_holds = true;        // alpha_unconditional <= conditional alpha
  std::optional<std::size_t> conditioning;
};

inline CovarianceBoundReport covariance_bound_check(const JointPmf& j,
                                                    std::optional<std::size_t> conditioning = {}) {
  CovarianceBoundReport r;
  r.conditioning = conditioning;
  std::vector<double> means(j.dim());
  std::vector<QuantileSeq> D;
  for (std::size_t i = 0; i < j.dim(); ++i) {
    const FinitePmf m = j.marginal(i);
    means[i] = m.mean();
    D.push_back(dispersion_function(m));
  }
  r.lhs = std::abs(j.expect([&](const std::vector<double>& p) {
    double prod = 1.0;
    for (std::size_t i = 0; i < j.dim(); ++i) prod *= p[i] - means[i];
    return prod;
  }));
  r.alpha_unconditional = joint_alpha(j);
  r.alpha = r.alpha_unconditional;
  if (conditioning) {
    r.alpha = joint_alpha_conditional(j, *conditioning);
    r.ordering_holds = r.alpha_unconditional <= r.alpha + 1e-12;
  }
  std::vector<const QuantileSeq*> fns;
  for (const auto& d : D) fns.push_back(&d);
  r.rhs = 2.0 * step_product_integral(fns, r.alpha / 2.0);
  r.holds = r.lhs <= r.rhs + 1e-12;
  return r;
}

/// f_i = up - down with both parts nondecreasing, given by their values at
/// the sorted distinct atoms of coordinate i.
struct MonotoneDifference {
  std::vector<double> up;
  std::vector<double> down;
};

struct CorollaryReport {
  double lhs = 0.0;
  double alpha = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

/// |E prod (f_i(X_i) - E f_i(X_i))| <= 2^{k+1} sum over sign patterns of
/// int_0^{alpha/2} prod_i Q_{|f_i^{(j_i)}(X_i)|}. With a conditioning
/// coordinate c, alpha is the conditional form and coordinate c enters
/// through Q_{|f_c(X_c)|} only.
inline CorollaryReport corollary_a1_check(const JointPmf& j,
                                          const std::vector<MonotoneDifference>& fs,
                                          std::optional<std::size_t> conditioning = {}) {
  const std::size_t k = j.dim();
  if (fs.size() != k) throw ValidationError("one monotone difference per coordinate is required");
  std::vector<FinitePmf> marg;
  for (std::size_t i = 0; i < k; ++i) {
    marg.push_back(j.marginal(i));
    const auto& f = fs[i];
    if (f.up.size() != marg[i].size() || f.down.size() != marg[i].size()) {
      throw ValidationError("monotone difference must give one value per atom");
    }
    for (std::size_t a = 1; a < f.up.size(); ++a) {
      if (f.up[a] < f.up[a - 1] || f.down[a] < f.down[a - 1]) {
        throw ValidationError("monotone difference parts must be nondecreasing");
      }
    }
  }
  auto atom_index = [&](std::size_t i, double x) {
    const auto atoms = marg[i].atoms();
    return static_cast<std::size_t>(std::lower_bound(atoms.begin(), atoms.end(), x) - atoms.begin());
  };
  auto value = [&](std::size_t i, double x, int part) {
    const std::size_t a = atom_index(i, x);
    if (part == 1) return fs[i].up[a];
    if (part == 2) return fs[i].down[a];
    return fs[i].up[a] - fs[i].down[a];
  };
  std::vector<double> means(k);
  for (std::size_t i = 0; i < k; ++i) {
    means[i] = marg[i].moment([&](double x) { return value(i, x, 0); });
  }
  CorollaryReport r;
  r.lhs = std::abs(j.expect([&](const std::vector<double>& p) {
    double prod = 1.0;
    for (std::size_t i = 0; i < k; ++i) prod *= value(i, p[i], 0) - means[i];
    return prod;
  }));
  r.alpha = conditioning ? joint_alpha_conditional(j, *conditioning) : joint_alpha(j);
  // Q of |f_i^{(part)}(X_i)| for part in {0 (whole f), 1, 2}.
  std::vector<std::array<QuantileSeq, 3>> Q;
  for (std::size_t i = 0; i < k; ++i) {
    std::array<QuantileSeq, 3> q;
    for (int part = 0; part < 3; ++part) {
      q[static_cast<std::size_t>(part)] =
          quantile_from_pmf(pushforward(marg[i], [&](double x) { return std::abs(value(i, x, part)); }));
    }
    Q.push_back(std::move(q));
  }
  double sum = 0.0;
  for (std::size_t pattern = 0; pattern < (std::size_t{1} << k); ++pattern) {
    std::vector<const QuantileSeq*> fns;
    bool skip = false;
    for (std::size_t i = 0; i < k; ++i) {
      const int part = (pattern >> i) & 1 ? 2 : 1;
      if (conditioning && i == *conditioning) {
        if (part == 2) skip = true;  // coordinate c is not split
        fns.push_back(&Q[i][0]);
      } else {
        fns.push_back(&Q[i][static_cast<std::size_t>(part)]);
      }
    }
    if (!skip) sum += step_product_integral(fns, r.alpha / 2.0);
  }
  r.rhs = std::ldexp(sum, static_cast<int>(k) + 1);
  r.holds = r.lhs <= r.rhs + 1e-12;
  return r;
}

struct DispersionReport {
  bool holds = false;             // 0 <= D <= Q+ + Q- <= 2 Q_|X| a.e. on (0, 1/2)
  bool zero_is_median = false;
  bool equality_holds = true;     // D = Q+ + Q- when 0 is a median
  double worst_violation = 0.0;
  std::size_t probes = 0;
};

/// Checks the dispersion-quantile inequalities on every piece between
/// breakpoints in (0, 1/2) and on a dense grid of 1000 points. Points within
/// 1e-12 of a breakpoint are skipped: the inequalities hold almost
/// everywhere, and generalised inverses disagree on breakpoints.
inline DispersionReport dispersion_check(const FinitePmf& p) {
  const QuantileSeq D = dispersion_function(p);
  const QuantileSeq Qp = quantile_from_pmf(pushforward(p, [](double x) { return std::max(0.0, x); }));
  const QuantileSeq Qm = quantile_from_pmf(pushforward(p, [](double x) { return std::max(0.0, -x); }));
  const QuantileSeq Qa = quantile_from_pmf(pushforward(p, [](double x) { return std::abs(x); }));
  std::vector<double> breaks{0.0, 0.5};
  for (const auto* q : {&D, &Qp, &Qm, &Qa}) {
    for (double b : q->breakpoints()) {
      if (b < 0.5) breaks.push_back(b);
    }
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  std::vector<double> probes;
  // Slivers narrower than the tolerance are rounding splits of one breakpoint
  // computed two ways (1 - F versus upper tail sums).
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    if (breaks[i + 1] - breaks[i] > 2e-12) probes.push_back(0.5 * (breaks[i] + breaks[i + 1]));
  }
  for (int g = 0; g < 1000; ++g) {
    const double u = (g + 0.5) / 2000.0;
    const bool near = std::any_of(breaks.begin(), breaks.end(),
                                  [u](double b) { return std::abs(u - b) < 1e-12; });
    if (!near) probes.push_back(u);
  }
  double below = 0.0, above = 0.0;
  for (std::size_t a = 0; a < p.size(); ++a) {
    if (p.atoms()[a] <= 0.0) below += p.probs()[a];
    if (p.atoms()[a] >= 0.0) above += p.probs()[a];
  }
  DispersionReport r;
  r.zero_is_median = below >= 0.5 - 1e-15 && above >= 0.5 - 1e-15;
  r.probes = probes.size();
  r.holds = true;
  for (double u : probes) {
    const double d = D(u), s = Qp(u) + Qm(u), t = 2.0 * Qa(u);
    const double v = std::max({-d, d - s, s - t});
    r.worst_violation = std::max(r.worst_violation, v);
    if (v > 1e-12) r.holds = false;
    if (r.zero_is_median && std::abs(d - s) > 1e-12) r.equality_holds = false;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Diophantine sums for the circle walk
// ---------------------------------------------------------------------------

/// sum over k in [2^N, 2^{N+1}) of d(k a, Z)^{-p}.
inline double frac_part_sum(const Rotation& a, int N, int p) {
  if (N < 0 || N > 20) throw DomainError("frac_part_sum requires 0 <= N <= 20");
  if (p < 2) throw DomainError("frac_part_sum requires p >= 2");
  a.require_irrational("frac_part_sum");
  double total = 0.0;
  const std::int64_t lo = std::int64_t{1} << N;
  for (std::int64_t k = lo; k < 2 * lo; ++k) {
    const double d = a.dist_multiple(k);
    if (d < 1e-14) {
      throw PrecisionError("frac_part_sum: d(ka, Z) below 1e-14 at k = " + std::to_string(k));
    }
    total += std::pow(d, -p);
  }
  return total;
}

/// 2 C^p 2^{p (N + 2)(1 + eta)}, the growth envelope for frac_part_sum.
inline double frac_sum_envelope(int N, int p, double eta, double C) {
  return 2.0 * std::pow(C, p) * std::exp2(p * (N + 2) * (1.0 + eta));
}

/// Smallest C with frac_part_sum(a, N, p) <= frac_sum_envelope(N, p, eta, C)
/// for every N in [0, n_max].
inline double fit_envelope_constant(const Rotation& a, int n_max, int p, double eta) {
  double C = 0.0;
  for (int N = 0; N <= n_max; ++N) {
    const double ratio = frac_part_sum(a, N, p) / frac_sum_envelope(N, p, eta, 1.0);
    C = std::max(C, std::pow(ratio, 1.0 / p));
  }
  return C;
}

struct KernelDecay {
  double value = 0.0;       // 2 sum_{k <= kmax} |cos 2 pi k a|^n k^{-s}
  double tail_bound = 0.0;  // 2 kmax^{1-s} / (s - 1)
};

inline KernelDecay kernel_decay_sum(const Rotation& a, double s, unsigned n, std::int64_t kmax) {
  if (!(s > 1.0)) throw DomainError("kernel_decay_sum requires s > 1");
  if (kmax < 1) throw DomainError("kernel_decay_sum requires kmax >= 1");
  KernelDecay r;
  r.tail_bound = 2.0 * std::pow(static_cast<double>(kmax), 1.0 - s) / (s - 1.0);
  if (r.tail_bound > 1e-12) {
    throw DomainError("kernel_decay_sum: kmax too small, tail bound " + std::to_string(r.tail_bound));
  }
  for (std::int64_t k = kmax; k >= 1; --k) {  // small terms first
    r.value += std::pow(std::abs(a.cos_multiple(k)), n) * std::pow(static_cast<double>(k), -s);
  }
  r.value *= 2.0;
  return r;
}

}  // namespace meanclt
