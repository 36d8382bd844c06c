#pragma once

// Gaussian special functions, adaptive Gauss-Kronrod quadrature and the
// counter-based random streams shared by every other module.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

#include "meanclt/errors.hpp"

namespace meanclt {

struct Tolerance {
  double abs_tol = 1e-12;
  double rel_tol = 1e-12;
  int max_depth = 60;

  void validate() const {
    if (!(abs_tol > 0.0) || !(rel_tol >= 0.0) || max_depth < 1) {
      throw ValidationError("tolerance requires abs_tol > 0, rel_tol >= 0, max_depth >= 1");
    }
  }
};

// ---------------------------------------------------------------------------
// Standard normal law
// ---------------------------------------------------------------------------

namespace gauss {

inline constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934381868;
inline constexpr double kSqrt2Pi = 2.50662827463100050241576528481104525;

inline double pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

/// Phi(x) through erfc so that both tails keep full relative accuracy.
inline double cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// I(x) = x Phi(x) + phi(x); I'(x) = Phi(x), I(-inf) = 0.
inline double cdf_antideriv(double x) {
  if (x < -38.0) return 0.0;
  return x * cdf(x) + pdf(x);
}

namespace detail {

// Rational initial guess for the lower half, p <= 0.5 (Acklam).
inline double quantile_guess(double p) {
  static constexpr std::array<double, 6> a{-3.969683028665376e+01, 2.209460984245205e+02,
                                           -2.759285104469687e+02, 1.383577518672690e+02,
                                           -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr std::array<double, 5> b{-5.447609879822406e+01, 1.615858368580409e+02,
                                           -1.556989798598866e+02, 6.680131188771972e+01,
                                           -1.328068155288572e+01};
  static constexpr std::array<double, 6> c{-7.784894002430293e-03, -3.223964580411365e-01,
                                           -2.400758277161838e+00, -2.549671010331745e+00,
                                           4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr std::array<double, 4> d{7.784695709041462e-03, 3.224671290700398e-01,
                                           2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

inline double lower_quantile(double p) {
  double x = quantile_guess(p);
  for (int it = 0; it < 2; ++it) {
    const double dens = pdf(x);
    if (dens <= 0.0) break;
    const double u = (cdf(x) - p) / dens;
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

}  // namespace detail

/// Phi^{-1}(p). Throws DomainError outside (0, 1).
inline double quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("gaussian quantile requires 0 < p < 1, got " + std::to_string(p));
  }
  if (p <= 0.5) return detail::lower_quantile(p);
  return -detail::lower_quantile(1.0 - p);  // 1 - p is exact for p >= 1/2
}

}  // namespace gauss

enum class GaussianKind { pdf, cdf, quantile, cdf_antideriv };

inline double gaussian(GaussianKind kind, double x) {
  switch (kind) {
    case GaussianKind::pdf: return gauss::pdf(x);
    case GaussianKind::cdf: return gauss::cdf(x);
    case GaussianKind::quantile: return gauss::quantile(x);
    case GaussianKind::cdf_antideriv: return gauss::cdf_antideriv(x);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

// ---------------------------------------------------------------------------
// Adaptive Gauss-Kronrod 7-15 quadrature
// ---------------------------------------------------------------------------

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  long evaluations = 0;
};

namespace detail {

inline constexpr std::array<double, 8> kKronrodNodes{
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr std::array<double, 8> kKronrodWeights{
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for Kronrod nodes 1, 3, 5 and the centre.
inline constexpr std::array<double, 4> kGaussWeights{
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

// One Gauss-Kronrod evaluation: the K15 value and its null-rule estimate.
struct RuleValue {
  double kronrod = 0.0;
  double null_error = 0.0;
};

// A panel carries the K15 values of its two halves so that its error can be
// judged against the next level as well as its own null rules.
struct Panel {
  double a, b, value, error;
  int depth;
  RuleValue left, right;
};

// Cubic extrapolation weights from the four outermost Kronrod nodes on one
// side (t = -x_0 .. -x_3) to the endpoint t = -1.
inline std::array<double, 4> edge_weights() {
  std::array<double, 4> w{};
  for (int k = 0; k < 4; ++k) {
    double num = 1.0, den = 1.0;
    for (int l = 0; l < 4; ++l) {
      if (l == k) continue;
      num *= -1.0 + kKronrodNodes[l];
      den *= -kKronrodNodes[k] + kKronrodNodes[l];
    }
    w[k] = num / den;
  }
  return w;
}

// Weights of the symmetric 9-point interpolatory rule on the Kronrod-only
// nodes (x_0, x_2, x_4, x_6 and the centre), exact for degree <= 9.
inline std::array<double, 5> secondary_weights() {
  // Moment equations sum_j w_j t_j^{2k} = int t^{2k}, k = 0..4; paired nodes
  // count twice, the centre only in the k = 0 row.
  constexpr std::array<int, 4> paired{0, 2, 4, 6};
  std::array<std::array<double, 6>, 5> m{};
  for (int k = 0; k < 5; ++k) {
    for (int j = 0; j < 4; ++j) m[k][j] = 2.0 * std::pow(kKronrodNodes[paired[j]], 2 * k);
    m[k][4] = k == 0 ? 1.0 : 0.0;
    m[k][5] = 2.0 / (2.0 * k + 1.0);
  }
  for (int c = 0; c < 5; ++c) {
    int piv = c;
    for (int r = c + 1; r < 5; ++r) {
      if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
    }
    std::swap(m[c], m[piv]);
    for (int r = 0; r < 5; ++r) {
      if (r == c) continue;
      const double f = m[r][c] / m[c][c];
      for (int j = c; j < 6; ++j) m[r][j] -= f * m[c][j];
    }
  }
  std::array<double, 5> w{};
  for (int k = 0; k < 5; ++k) w[k] = m[k][5] / m[k][k];
  return w;
}

// G7-K15 on [a, b]. The null error is the larger of |K - G| and |K - R|,
// R being a second embedded rule on disjoint nodes, plus an edge term: a
// kink between an endpoint and the first node is invisible to every rule,
// but shows up as a mismatch between g at the endpoint and the cubic
// extrapolation of the nearest nodes. A residual r bounds the hidden area
// by r times the edge gap.
template <class F>
RuleValue gk15(F& g, double a, double b) {
  static const std::array<double, 4> kEdge = edge_weights();
  static const std::array<double, 5> kSecondary = secondary_weights();
  const double centre = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = static_cast<double>(g(centre));
  double kronrod = fc * kKronrodWeights[7];
  double gauss = fc * kGaussWeights[3];
  double secondary = fc * kSecondary[4];
  double left_fit = 0.0, right_fit = 0.0;
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kKronrodNodes[j];
    const double fl = static_cast<double>(g(centre - dx));
    const double fr = static_cast<double>(g(centre + dx));
    kronrod += kKronrodWeights[j] * (fl + fr);
    if (j % 2 == 1) {
      gauss += kGaussWeights[j / 2] * (fl + fr);
    } else {
      secondary += kSecondary[j / 2] * (fl + fr);
    }
    if (j < 4) {
      left_fit += kEdge[j] * fl;
      right_fit += kEdge[j] * fr;
    }
  }
  kronrod *= half;
  gauss *= half;
  secondary *= half;
  const double gap = half * (1.0 - kKronrodNodes[0]);
  double edge = gap * (std::abs(static_cast<double>(g(a)) - left_fit) +
                       std::abs(static_cast<double>(g(b)) - right_fit));
  if (!std::isfinite(edge)) edge = std::abs(kronrod);  // endpoint singularity
  const double interior = std::max(std::abs(kronrod - gauss), std::abs(kronrod - secondary));
  return {kronrod, interior + edge};
}

// Panel value K(left) + K(right); error max(|K(whole) - value|, null rules of
// the halves).
template <class F>
Panel make_panel(F& g, double a, double b, int depth, const RuleValue& whole) {
  const double mid = 0.5 * (a + b);
  const RuleValue l = gk15(g, a, mid);
  const RuleValue r = gk15(g, mid, b);
  const double value = l.kronrod + r.kronrod;
  const double error = std::max(std::abs(whole.kronrod - value), l.null_error + r.null_error);
  return {a, b, value, error, depth, l, r};
}

}  // namespace detail

/// Globally adaptive integration of g over [a, b]: the panel with the
/// largest error estimate is bisected until the summed estimate meets
/// max(abs_tol, rel_tol * |I|). Throws AccuracyError when a panel that
/// needs splitting has reached max_depth.
template <class F>
QuadratureResult integrate(F&& g, double a, double b, const Tolerance& tol = {}) {
  tol.validate();
  if (a == b) return {};
  constexpr long kMaxPanels = 400000;
  auto worse = [](const detail::Panel& x, const detail::Panel& y) { return x.error < y.error; };
  std::vector<detail::Panel> heap;
  heap.push_back(detail::make_panel(g, a, b, 0, detail::gk15(g, a, b)));
  long evaluations = 51;
  double total = heap.front().value;
  double total_err = heap.front().error;
  long iteration = 0;
  while (true) {
    if (++iteration % 64 == 0) {
      total = 0.0;
      total_err = 0.0;
      for (const auto& p : heap) {
        total += p.value;
        total_err += p.error;
      }
    }
    if (total_err <= std::max(tol.abs_tol, tol.rel_tol * std::abs(total))) break;
    std::pop_heap(heap.begin(), heap.end(), worse);
    const detail::Panel worst = heap.back();
    if (worst.depth >= tol.max_depth || static_cast<long>(heap.size()) >= kMaxPanels) {
      throw AccuracyError("adaptive quadrature did not converge within max_depth", total,
                          total_err);
    }
    heap.pop_back();
    const double mid = 0.5 * (worst.a + worst.b);
    const auto left = detail::make_panel(g, worst.a, mid, worst.depth + 1, worst.left);
    const auto right = detail::make_panel(g, mid, worst.b, worst.depth + 1, worst.right);
    evaluations += 68;
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    heap.push_back(left);
    std::push_heap(heap.begin(), heap.end(), worse);
    heap.push_back(right);
    std::push_heap(heap.begin(), heap.end(), worse);
  }
  total = 0.0;
  total_err = 0.0;
  for (const auto& p : heap) {
    total += p.value;
    total_err += p.error;
  }
  return {total, total_err, evaluations};
}

template <class F>
double integrate_unit(F&& g, const Tolerance& tol = {}) {
  return integrate(std::forward<F>(g), 0.0, 1.0, tol).value;
}

/// L1 norm of the i-th derivative of the standard normal density, by
/// quadrature over |x| <= 12.
inline double phi_deriv_l1(int i) {
  if (i < 1 || i > 3) throw DomainError("phi_deriv_l1 supports i in {1, 2, 3}");
  auto integrand = [i](double x) {
    const double p = gauss::pdf(x);
    switch (i) {
      case 1: return std::abs(x * p);
      case 2: return std::abs((x * x - 1.0) * p);
      default: return std::abs((3.0 * x - x * x * x) * p);
    }
  };
  return integrate(integrand, -12.0, 12.0, {1e-14, 1e-14, 60}).value;
}

// ---------------------------------------------------------------------------
// Random streams: Philox4x32-10 keyed by the seed, counter = (draw, stream)
// ---------------------------------------------------------------------------

namespace detail {

inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::array<std::uint32_t, 2> key) {
  constexpr std::uint64_t kM0 = 0xD2511F53u;
  constexpr std::uint64_t kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u;
  constexpr std::uint32_t kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kW0;
      key[1] += kW1;
    }
    const std::uint64_t p0 = kM0 * ctr[0];
    const std::uint64_t p1 = kM1 * ctr[2];
    ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
  }
  return ctr;
}

}  // namespace detail

/// Reproducible stream of random bits. The pair (seed, stream_index) fixes
/// the output completely; distinct indices address disjoint counter ranges.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  RandomStream(std::uint64_t seed, std::uint64_t stream_index)
      : seed_(seed), stream_index_(stream_index) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_index() const { return stream_index_; }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64() {
    if (buffered_ == 0) refill();
    --buffered_;
    return buffer_[buffered_];
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on the open interval (0, 1).
  double uniform_open() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  /// A fair bit, drawn from a cached 64-bit word.
  unsigned bit() {
    if (bits_left_ == 0) {
      bit_word_ = next_u64();
      bits_left_ = 64;
    }
    const unsigned b = static_cast<unsigned>(bit_word_ & 1u);
    bit_word_ >>= 1;
    --bits_left_;
    return b;
  }

  /// Uniform integer in [0, n), n >= 1, by rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  /// Standard normal draw by inversion.
  double normal() { return gauss::quantile(uniform_open()); }

 private:
  void refill() {
    const auto out = detail::philox4x32_10(
        {static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
         static_cast<std::uint32_t>(stream_index_), static_cast<std::uint32_t>(stream_index_ >> 32)},
        {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
    ++counter_;
    buffer_[1] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
    buffer_[0] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
    buffered_ = 2;
  }

  std::uint64_t seed_;
  std::uint64_t stream_index_;
  std::uint64_t counter_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
  std::uint64_t bit_word_ = 0;
  int bits_left_ = 0;
};

inline RandomStream substream(std::uint64_t seed, std::uint64_t index) { return {seed, index}; }

// ---------------------------------------------------------------------------
// Worker pool sizing and a deterministic blocked parallel loop
// ---------------------------------------------------------------------------

/// Worker count: MEANCLT_THREADS when set (>= 1), else hardware concurrency.
inline unsigned worker_count() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MEANCLT_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  return hw;
}

/// Calls body(i) for i in [0, count). Each index is processed exactly once;
/// results written by index are independent of the worker count.
template <class Body>
void parallel_for(std::size_t count, Body&& body) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> failures(workers);
  pool.reserve(workers);
  const std::size_t block = (count + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t lo = w * block;
    const std::size_t hi = std::min(count, lo + block);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, w, &body, &failures] {
      try {
        for (std::size_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        failures[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
}

}  // namespace meanclt
