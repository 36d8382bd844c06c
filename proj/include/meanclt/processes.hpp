#pragma once

// Stationary processes X_i = f(xi_i) driven by a Markov chain xi, the exact
// action of the transfer operator K on Fourier observables, path simulation
// and long-run variance series.

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "meanclt/distributions.hpp"
#include "meanclt/errors.hpp"
#include "meanclt/fourier.hpp"
#include "meanclt/numerics.hpp"
#include "meanclt/rotation.hpp"

namespace meanclt {

/// xi_{i+1} = (xi_i + B) / 2 with a fair bit B; Kf(x) = (f(x/2) + f((x+1)/2)) / 2.
struct DoublingMap {};

/// xi_{i+1} = xi_i +/- a (mod 1) with a fair sign; Kf(x) = (f(x+a) + f(x-a)) / 2.
struct CircleWalk {
  Rotation a = Rotation::sqrt2_minus_1();
};

/// Finite-state chain. Observables are state-value vectors, not FourierFn.
struct FiniteChain {
  std::vector<std::vector<double>> P;
  std::vector<double> pi;
  std::vector<double> values;

  std::size_t states() const { return P.size(); }
};

/// Marginal law of an i.i.d. sequence given directly (no observable).
struct MarginalLaw {
  enum class Kind { rademacher, gaussian, discrete };
  Kind kind = Kind::rademacher;
  double sd = 1.0;                 // gaussian only
  std::optional<FinitePmf> pmf;    // discrete only
};

/// i.i.d. sequence. Without a law, xi_i are i.i.d. uniform on [0, 1) and
/// X_i = f(xi_i). With a law, X_i are drawn from it and f is ignored.
struct IIDLaw {
  std::optional<MarginalLaw> law;
};

using ProcessSpec = std::variant<DoublingMap, CircleWalk, FiniteChain, IIDLaw>;

inline std::string process_name(const ProcessSpec& spec) {
  struct {
    std::string operator()(const DoublingMap&) const { return "doubling"; }
    std::string operator()(const CircleWalk&) const { return "circle"; }
    std::string operator()(const FiniteChain&) const { return "chain"; }
    std::string operator()(const IIDLaw& l) const {
      if (!l.law) return "iid";
      switch (l.law->kind) {
        case MarginalLaw::Kind::rademacher: return "iid-rademacher";
        case MarginalLaw::Kind::gaussian: return "iid-gaussian";
        case MarginalLaw::Kind::discrete: return "iid-discrete";
      }
      return "iid";
    }
  } visitor;
  return std::visit(visitor, spec);
}

// ---------------------------------------------------------------------------
// Construction and validation
// ---------------------------------------------------------------------------

/// Stationary row vector of a row-stochastic matrix (unique solution assumed).
inline std::vector<double> stationary_distribution(const std::vector<std::vector<double>>& P) {
  const std::size_t s = P.size();
  if (s == 0) throw ValidationError("transition matrix must be non-empty");
  Eigen::MatrixXd A(s + 1, s);
  for (std::size_t i = 0; i < s; ++i) {
    if (P[i].size() != s) throw ValidationError("transition matrix must be square");
    for (std::size_t j = 0; j < s; ++j) A(j, i) = P[i][j] - (i == j ? 1.0 : 0.0);
  }
  A.row(s).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s + 1));
  rhs(static_cast<Eigen::Index>(s)) = 1.0;
  const Eigen::VectorXd pi = A.colPivHouseholderQr().solve(rhs);
  return {pi.data(), pi.data() + pi.size()};
}

inline void validate(const FiniteChain& c) {
  const std::size_t s = c.states();
  if (s == 0) throw ValidationError("finite chain needs at least one state");
  if (c.pi.size() != s || c.values.size() != s) {
    throw ValidationError("finite chain: P, pi and values must have matching sizes");
  }
  for (std::size_t i = 0; i < s; ++i) {
    if (c.P[i].size() != s) throw ValidationError("finite chain: P must be square");
    double row = 0.0;
    for (double p : c.P[i]) {
      if (!(p >= 0.0) || !std::isfinite(p)) {
        throw ValidationError("finite chain: transition probabilities must be in [0, 1]");
      }
      row += p;
    }
    if (std::abs(row - 1.0) > 1e-12) throw ValidationError("finite chain: rows of P must sum to 1");
    if (!std::isfinite(c.values[i])) throw ValidationError("finite chain: values must be finite");
  }
  for (std::size_t j = 0; j < s; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < s; ++i) col += c.pi[i] * c.P[i][j];
    if (std::abs(col - c.pi[j]) > 1e-12 || c.pi[j] < -1e-15) {
      throw ValidationError("finite chain: pi is not stationary for P");
    }
  }
}

/// Builds a validated chain, solving for pi.
inline FiniteChain make_chain(std::vector<std::vector<double>> P, std::vector<double> values) {
  FiniteChain c{std::move(P), {}, std::move(values)};
  c.pi = stationary_distribution(c.P);
  for (double& p : c.pi) p = std::max(p, 0.0);
  validate(c);
  return c;
}

inline void validate(const MarginalLaw& law) {
  switch (law.kind) {
    case MarginalLaw::Kind::rademacher: return;
    case MarginalLaw::Kind::gaussian:
      if (!(law.sd > 0.0) || !std::isfinite(law.sd)) throw ValidationError("gaussian sd must be > 0");
      return;
    case MarginalLaw::Kind::discrete:
      if (!law.pmf) throw ValidationError("discrete law needs a pmf");
      return;
  }
}

inline void validate(const ProcessSpec& spec) {
  if (const auto* c = std::get_if<CircleWalk>(&spec)) c->a.require_irrational("circle walk");
  if (const auto* c = std::get_if<FiniteChain>(&spec)) validate(*c);
  if (const auto* l = std::get_if<IIDLaw>(&spec); l && l->law) validate(*l->law);
}

namespace detail {

inline void require_fourier(const ProcessSpec& spec, const char* op) {
  if (std::holds_alternative<FiniteChain>(spec)) {
    throw TypeError(std::string(op) + ": finite chains take state-value vectors, not FourierFn");
  }
}

inline bool has_direct_law(const ProcessSpec& spec) {
  const auto* l = std::get_if<IIDLaw>(&spec);
  return l && l->law;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Transfer operator
// ---------------------------------------------------------------------------

/// K^m f, exact on coefficients.
inline FourierFn transfer(const ProcessSpec& spec, const FourierFn& f, unsigned m) {
  detail::require_fourier(spec, "transfer");
  if (m == 0) return f;
  if (std::holds_alternative<DoublingMap>(spec)) {
    const std::size_t K = f.max_freq();
    if (m >= 63 || (std::size_t{1} << m) > K) return FourierFn::constant_fn(f.constant());
    const std::size_t step = std::size_t{1} << m;
    const std::size_t J = K / step;
    std::vector<double> a(J), b(J);
    for (std::size_t j = 1; j <= J; ++j) {
      a[j - 1] = f.a(j * step);
      b[j - 1] = f.b(j * step);
    }
    return FourierFn(f.constant(), std::move(a), std::move(b));
  }
  if (const auto* c = std::get_if<CircleWalk>(&spec)) {
    std::vector<double> a(f.max_freq()), b(f.max_freq());
    for (std::size_t k = 1; k <= f.max_freq(); ++k) {
      const double factor = std::pow(c->a.cos_multiple(static_cast<std::int64_t>(k)), m);
      a[k - 1] = f.a(k) * factor;
      b[k - 1] = f.b(k) * factor;
    }
    return FourierFn(f.constant(), std::move(a), std::move(b));
  }
  return FourierFn::constant_fn(f.constant());
}

/// P^m v for a finite chain: (P^m v)(s) = E(v(xi_m) | xi_0 = s).
inline std::vector<double> chain_transfer(const FiniteChain& c, std::vector<double> v, unsigned m) {
  if (v.size() != c.states()) throw ValidationError("state vector size does not match the chain");
  std::vector<double> next(v.size());
  for (unsigned step = 0; step < m; ++step) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < v.size(); ++j) s += c.P[i][j] * v[j];
      next[i] = s;
    }
    v.swap(next);
  }
  return v;
}

/// sum_{l >= m} K^l f for centered f, in closed form.
inline FourierFn resolvent_tail(const ProcessSpec& spec, const FourierFn& f, unsigned m) {
  detail::require_fourier(spec, "resolvent_tail");
  if (m < 1) throw DomainError("resolvent_tail requires m >= 1");
  if (!f.is_centered()) throw PreconditionError("resolvent_tail requires a centered observable");
  if (std::holds_alternative<DoublingMap>(spec)) {
    FourierFn sum;
    for (unsigned l = m; l < 63 && (std::size_t{1} << l) <= f.max_freq(); ++l) {
      sum += transfer(spec, f, l);
    }
    return sum;
  }
  if (const auto* c = std::get_if<CircleWalk>(&spec)) {
    std::vector<double> a(f.max_freq()), b(f.max_freq());
    for (std::size_t k = 1; k <= f.max_freq(); ++k) {
      if (f.a(k) == 0.0 && f.b(k) == 0.0) continue;
      const double ck = c->a.cos_multiple(static_cast<std::int64_t>(k));
      const double gap = 2.0 * std::pow(std::sin(std::numbers::pi * c->a.frac_multiple(
                                                      static_cast<std::int64_t>(k))),
                                        2);  // 1 - cos(2 pi k a), without cancellation
      if (gap < 1e-14) {
        throw DivergenceError("resolvent_tail: cos(2 pi k a) = 1 at frequency " +
                              std::to_string(k));
      }
      const double factor = std::pow(ck, m) / gap;
      a[k - 1] = f.a(k) * factor;
      b[k - 1] = f.b(k) * factor;
    }
    return FourierFn(0.0, std::move(a), std::move(b));
  }
  return FourierFn();
}

// ---------------------------------------------------------------------------
// Martingale criterion
// ---------------------------------------------------------------------------

inline bool is_martingale(const ProcessSpec& spec, const FourierFn& f) {
  if (const auto* l = std::get_if<IIDLaw>(&spec); l && l->law) {
    if (l->law->kind == MarginalLaw::Kind::discrete) return std::abs(l->law->pmf->mean()) < 1e-14;
    return true;
  }
  const FourierFn kf = transfer(spec, f, 1);
  return kf.max_abs_coeff() < 1e-14;
}

inline bool is_martingale(const FiniteChain& c) {
  const auto pv = chain_transfer(c, c.values, 1);
  return std::all_of(pv.begin(), pv.end(), [](double x) { return std::abs(x) < 1e-14; });
}

// ---------------------------------------------------------------------------
// Long-run variance
// ---------------------------------------------------------------------------

struct LongRunVariance {
  double sigma2 = 0.0;
  double var0 = 0.0;
  std::vector<double> covariances;  // gamma(0), gamma(1), ... up to truncation
};

namespace detail {

inline constexpr std::size_t kCovarianceReportLength = 64;

inline LongRunVariance finish_variance(LongRunVariance r) {
  if (!(r.sigma2 > 1e-12 * std::max(r.var0, 1e-300))) {
    throw DegenerateVarianceError("long-run variance is not positive (sigma2 = " +
                                  std::to_string(r.sigma2) + ")");
  }
  return r;
}

inline double pi_inner(const FiniteChain& c, const std::vector<double>& u,
                       const std::vector<double>& v) {
  double s = 0.0;
  for (std::size_t i = 0; i < c.states(); ++i) s += c.pi[i] * u[i] * v[i];
  return s;
}

inline double pi_mean(const FiniteChain& c, const std::vector<double>& v) {
  double s = 0.0;
  for (std::size_t i = 0; i < c.states(); ++i) s += c.pi[i] * v[i];
  return s;
}

inline double law_variance(const MarginalLaw& law) {
  switch (law.kind) {
    case MarginalLaw::Kind::rademacher: return 1.0;
    case MarginalLaw::Kind::gaussian: return law.sd * law.sd;
    case MarginalLaw::Kind::discrete: return law.pmf->variance();
  }
  return 0.0;
}

}  // namespace detail

/// Chain version; values are centered under pi internally.
inline LongRunVariance long_run_variance(const FiniteChain& c) {
  validate(c);
  const std::size_t s = c.states();
  std::vector<double> v(c.values);
  const double mean = detail::pi_mean(c, v);
  for (double& x : v) x -= mean;
  // g = sum_{n >= 0} P^n v solves (I - P + 1 pi) g = v for centered v.
  Eigen::MatrixXd A(s, s);
  Eigen::VectorXd rhs(s);
  for (std::size_t i = 0; i < s; ++i) {
    rhs(static_cast<Eigen::Index>(i)) = v[i];
    for (std::size_t j = 0; j < s; ++j) {
      A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          (i == j ? 1.0 : 0.0) - c.P[i][j] + c.pi[j];
    }
  }
  const Eigen::VectorXd g = A.fullPivLu().solve(rhs);
  std::vector<double> gv(g.data(), g.data() + g.size());
  LongRunVariance r;
  r.var0 = detail::pi_inner(c, v, v);
  r.sigma2 = 2.0 * detail::pi_inner(c, v, gv) - r.var0;
  std::vector<double> pn(v);
  for (std::size_t n = 0; n < detail::kCovarianceReportLength; ++n) {
    r.covariances.push_back(detail::pi_inner(c, v, pn));
    pn = chain_transfer(c, pn, 1);
  }
  return detail::finish_variance(std::move(r));
}

/// sigma^2 = gamma(0) + 2 sum_{n > 0} gamma(n) with gamma(n) = int f K^n f.
inline LongRunVariance long_run_variance(const ProcessSpec& spec, const FourierFn& f) {
  if (const auto* c = std::get_if<FiniteChain>(&spec)) return long_run_variance(*c);
  if (const auto* l = std::get_if<IIDLaw>(&spec); l && l->law) {
    const double v = detail::law_variance(*l->law);
    return detail::finish_variance({v, v, {v}});
  }
  if (!f.is_centered(1e-14)) throw PreconditionError("long_run_variance requires a centered f");
  LongRunVariance r;
  r.var0 = inner(f, f);
  if (std::holds_alternative<DoublingMap>(spec)) {
    r.sigma2 = r.var0;
    r.covariances.push_back(r.var0);
    for (unsigned n = 1; n < 63 && (std::size_t{1} << n) <= f.max_freq(); ++n) {
      const double g = inner(f, transfer(spec, f, n));
      r.covariances.push_back(g);
      r.sigma2 += 2.0 * g;
    }
    return detail::finish_variance(std::move(r));
  }
  if (const auto* c = std::get_if<CircleWalk>(&spec)) {
    c->a.require_irrational("long_run_variance");
    std::vector<double> power(f.max_freq());
    std::vector<double> cosk(f.max_freq());
    for (std::size_t k = 1; k <= f.max_freq(); ++k) {
      const double energy = 0.5 * (f.a(k) * f.a(k) + f.b(k) * f.b(k));
      if (energy == 0.0) continue;
      const double t = std::tan(std::numbers::pi * c->a.frac_multiple(static_cast<std::int64_t>(k)));
      if (!(std::abs(t) > 1e-7)) {
        throw DivergenceError("long_run_variance: cot^2 series diverges at frequency " +
                              std::to_string(k));
      }
      r.sigma2 += energy / (t * t);
      power[k - 1] = energy;
      cosk[k - 1] = c->a.cos_multiple(static_cast<std::int64_t>(k));
    }
    for (std::size_t n = 0; n < detail::kCovarianceReportLength; ++n) {
      double g = 0.0;
      for (std::size_t k = 0; k < power.size(); ++k) g += power[k] * std::pow(cosk[k], n);
      r.covariances.push_back(g);
    }
    return detail::finish_variance(std::move(r));
  }
  r.sigma2 = r.var0;
  r.covariances = {r.var0};
  return detail::finish_variance(std::move(r));
}

// ---------------------------------------------------------------------------
// Expectations under the invariant law
// ---------------------------------------------------------------------------

/// int_0^1 |g(x)|^power dx, the L^power norm raised to power under Lebesgue
/// measure (the invariant law of every FourierFn-driven process here).
inline double abs_power_integral(const FourierFn& g, double power, const Tolerance& tol = {}) {
  if (g.max_freq() == 0) return std::pow(std::abs(g.constant()), power);
  return integrate_unit([&](double x) { return std::pow(std::abs(g(x)), power); }, tol);
}

inline double l1_norm(const FourierFn& g, const Tolerance& tol = {}) {
  if (g.max_freq() == 0) return std::abs(g.constant());
  return integrate_unit([&](double x) { return std::abs(g(x)); }, tol);
}

/// E h(X) for X drawn from a direct marginal law.
template <class H>
double law_expectation(const MarginalLaw& law, H&& h, const Tolerance& tol = {}) {
  switch (law.kind) {
    case MarginalLaw::Kind::rademacher: return 0.5 * (h(1.0) + h(-1.0));
    case MarginalLaw::Kind::discrete: return law.pmf->moment(h);
    case MarginalLaw::Kind::gaussian:
      return integrate([&](double z) { return h(law.sd * z) * gauss::pdf(z); }, -12.0, 12.0, tol)
          .value;
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// One stationary trajectory of the driving chain. For FiniteChain the
/// state is the state index stored as a double; for IIDLaw with a law it is
/// the value X_i itself.
class ChainWalker {
 public:
  ChainWalker(const ProcessSpec& spec, RandomStream& stream) : spec_(&spec), rng_(&stream) {
    if (std::holds_alternative<DoublingMap>(spec)) {
      word_ = rng_->next_u64();
    } else if (std::holds_alternative<CircleWalk>(spec)) {
      origin_ = rng_->uniform();
    } else if (const auto* c = std::get_if<FiniteChain>(&spec)) {
      state_ = categorical(c->pi);
    } else {
      redraw_iid();
    }
  }

  /// Current state xi_i.
  double state() const {
    if (std::holds_alternative<DoublingMap>(*spec_)) return static_cast<double>(word_ >> 11) * 0x1.0p-53;
    if (const auto* c = std::get_if<CircleWalk>(spec_)) {
      double x = origin_ + c->a.frac_multiple(position_);
      return x >= 1.0 ? x - 1.0 : x;
    }
    if (std::holds_alternative<FiniteChain>(*spec_)) return static_cast<double>(state_);
    return iid_;
  }

  /// Raw 64-bit fixed-point word of the doubling chain.
  std::uint64_t word() const { return word_; }
  std::size_t chain_state() const { return state_; }

  void step() {
    if (std::holds_alternative<DoublingMap>(*spec_)) {
      word_ = (word_ >> 1) | (static_cast<std::uint64_t>(rng_->bit()) << 63);
    } else if (std::holds_alternative<CircleWalk>(*spec_)) {
      position_ += rng_->bit() ? 1 : -1;
    } else if (const auto* c = std::get_if<FiniteChain>(spec_)) {
      state_ = categorical(c->P[state_]);
    } else {
      redraw_iid();
    }
  }

 private:
  std::size_t categorical(const std::vector<double>& probs) {
    const double u = rng_->uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return i;
    }
    return probs.size() - 1;
  }

  void redraw_iid() {
    const auto& l = std::get<IIDLaw>(*spec_);
    if (!l.law) {
      iid_ = rng_->uniform();
      return;
    }
    switch (l.law->kind) {
      case MarginalLaw::Kind::rademacher: iid_ = rng_->bit() ? 1.0 : -1.0; break;
      case MarginalLaw::Kind::gaussian: iid_ = l.law->sd * rng_->normal(); break;
      case MarginalLaw::Kind::discrete: {
        const auto probs = l.law->pmf->probs();
        const auto atoms = l.law->pmf->atoms();
        const double u = rng_->uniform();
        double acc = 0.0;
        std::size_t i = 0;
        for (; i + 1 < probs.size(); ++i) {
          acc += probs[i];
          if (u < acc) break;
        }
        iid_ = atoms[i];
        break;
      }
    }
  }

  const ProcessSpec* spec_;
  RandomStream* rng_;
  std::uint64_t word_ = 0;
  double origin_ = 0.0;
  std::int64_t position_ = 0;
  std::size_t state_ = 0;
  double iid_ = 0.0;
};

/// Observable X = f(state) for the given process.
class Observable {
 public:
  Observable(const ProcessSpec& spec, const FourierFn& f) : spec_(&spec), f_(&f) {}
  double operator()(const ChainWalker& w) const {
    if (const auto* c = std::get_if<FiniteChain>(spec_)) return c->values[w.chain_state()];
    if (detail::has_direct_law(*spec_)) return w.state();
    return (*f_)(w.state());
  }

 private:
  const ProcessSpec* spec_;
  const FourierFn* f_;
};

/// States xi_0, ..., xi_n of one trajectory.
inline std::vector<double> sample_states(const ProcessSpec& spec, std::size_t n, RandomStream& rng) {
  ChainWalker w(spec, rng);
  std::vector<double> out;
  out.reserve(n + 1);
  out.push_back(w.state());
  for (std::size_t i = 0; i < n; ++i) {
    w.step();
    out.push_back(w.state());
  }
  return out;
}

struct PathEnsemble {
  std::size_t n = 0;
  std::size_t reps = 0;
  std::vector<std::size_t> checkpoints;
  std::vector<double> partial_sums;  // reps x checkpoints, row-major
  double sigma_ref = 0.0;
  std::uint64_t seed = 0;

  double at(std::size_t rep, std::size_t checkpoint) const {
    return partial_sums[rep * checkpoints.size() + checkpoint];
  }

  /// S_{checkpoints[c]} over all replicates.
  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(reps);
    for (std::size_t r = 0; r < reps; ++r) out[r] = at(r, c);
    return out;
  }
};

/// Replicated partial sums S_k = X_1 + ... + X_k recorded at the checkpoints.
/// Row r is driven by substream(seed, r).
inline PathEnsemble simulate(const ProcessSpec& spec, const FourierFn& f, std::size_t n,
                             std::size_t reps, std::vector<std::size_t> checkpoints,
                             std::uint64_t seed) {
  if (n < 1) throw DomainError("simulate requires n >= 1");
  if (reps < 1) throw DomainError("simulate requires reps >= 1");
  validate(spec);
  if (const auto* c = std::get_if<FiniteChain>(&spec)) {
    if (std::abs(detail::pi_mean(*c, c->values)) > 1e-12) {
      throw PreconditionError("simulate requires centered chain values");
    }
  } else if (const auto* l = std::get_if<IIDLaw>(&spec); l && l->law) {
    if (l->law->kind == MarginalLaw::Kind::discrete && std::abs(l->law->pmf->mean()) > 1e-12) {
      throw PreconditionError("simulate requires a centered law");
    }
  } else if (!f.is_centered(1e-14)) {
    throw PreconditionError("simulate requires a centered observable");
  }
  if (checkpoints.empty()) checkpoints.push_back(n);
  std::sort(checkpoints.begin(), checkpoints.end());
  checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());
  if (checkpoints.front() < 1 || checkpoints.back() > n) {
    throw DomainError("checkpoints must lie in [1, n]");
  }

  PathEnsemble e;
  e.n = n;
  e.reps = reps;
  e.checkpoints = checkpoints;
  e.seed = seed;
  e.partial_sums.assign(reps * checkpoints.size(), 0.0);
  try {
    e.sigma_ref = std::sqrt(long_run_variance(spec, f).sigma2);
  } catch (const DegenerateVarianceError&) {
    e.sigma_ref = 0.0;
  }

  const Observable X(spec, f);
  const std::size_t ncp = checkpoints.size();
  parallel_for(reps, [&](std::size_t r) {
    RandomStream rng = substream(seed, r);
    ChainWalker w(spec, rng);
    double s = 0.0;
    std::size_t next = 0;
    for (std::size_t i = 1; i <= n; ++i) {
      w.step();
      s += X(w);
      if (i == checkpoints[next]) {
        e.partial_sums[r * ncp + next] = s;
        ++next;
      }
    }
  });
  return e;
}

}  // namespace meanclt
