#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "meanclt/errors.hpp"

namespace meanclt {

/// Sorted, finite, non-empty sample (the empirical law F_n).
class EmpiricalSample {
 public:
  explicit EmpiricalSample(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw ValidationError("empirical sample must be non-empty");
    for (double v : values_) {
      if (!std::isfinite(v)) throw ValidationError("empirical sample contains a non-finite value");
    }
    std::sort(values_.begin(), values_.end());
  }

  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double min() const { return values_.front(); }
  double max() const { return values_.back(); }

  /// Same sample multiplied by c > 0.
  EmpiricalSample scaled(double c) const {
    std::vector<double> v(values_);
    for (double& x : v) x *= c;
    return EmpiricalSample(std::move(v));
  }

 private:
  std::vector<double> values_;
};

/// Finite discrete law with strictly increasing atoms.
class FinitePmf {
 public:
  FinitePmf(std::vector<double> atoms, std::vector<double> probs)
      : atoms_(std::move(atoms)), probs_(std::move(probs)) {
    if (atoms_.empty() || atoms_.size() != probs_.size()) {
      throw ValidationError("pmf needs matching non-empty atoms and probs");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      if (!std::isfinite(atoms_[i]) || !(probs_[i] >= 0.0)) {
        throw ValidationError("pmf atoms must be finite and probs nonnegative");
      }
      if (i > 0 && !(atoms_[i] > atoms_[i - 1])) {
        throw ValidationError("pmf atoms must be strictly increasing");
      }
      total += probs_[i];
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw ValidationError("pmf probabilities must sum to 1 (got " + std::to_string(total) + ")");
    }
  }

  /// Builds a pmf from unsorted (atom, weight) pairs, merging equal atoms and
  /// renormalising the weights.
  static FinitePmf from_weights(const std::vector<std::pair<double, double>>& weighted) {
    std::map<double, double> merged;
    double total = 0.0;
    for (const auto& [x, w] : weighted) {
      if (w < 0.0) throw ValidationError("negative weight");
      merged[x] += w;
      total += w;
    }
    if (!(total > 0.0)) throw ValidationError("weights must have positive total");
    std::vector<double> a, p;
    for (const auto& [x, w] : merged) {
      a.push_back(x);
      p.push_back(w / total);
    }
    return FinitePmf(std::move(a), std::move(p));
  }

  static FinitePmf dirac(double x) { return FinitePmf({x}, {1.0}); }

  /// Exact law of S_n / sqrt(n) for i.i.d. Rademacher summands.
  static FinitePmf rademacher_sum(int n) {
    if (n < 1) throw DomainError("rademacher_sum requires n >= 1");
    std::vector<double> a(n + 1), p(n + 1);
    const double root = std::sqrt(static_cast<double>(n));
    const double log_half_n = n * std::log(0.5);
    double total = 0.0;
    for (int k = 0; k <= n; ++k) {
      a[k] = (2.0 * k - n) / root;
      p[k] = std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
                      log_half_n);
      total += p[k];
    }
    for (double& x : p) x /= total;
    return FinitePmf(std::move(a), std::move(p));
  }

  std::span<const double> atoms() const { return atoms_; }
  std::span<const double> probs() const { return probs_; }
  std::size_t size() const { return atoms_.size(); }

  double mean() const { return moment([](double x) { return x; }); }
  double variance() const {
    const double m = mean();
    return moment([m](double x) { return (x - m) * (x - m); });
  }

  template <class F>
  double moment(F&& g) const {
    double s = 0.0;
    for (std::size_t i = 0; i < atoms_.size(); ++i) s += probs_[i] * g(atoms_[i]);
    return s;
  }

  FinitePmf scaled(double c) const {
    std::vector<std::pair<double, double>> w;
    for (std::size_t i = 0; i < atoms_.size(); ++i) w.emplace_back(c * atoms_[i], probs_[i]);
    return from_weights(w);
  }

 private:
  std::vector<double> atoms_;
  std::vector<double> probs_;
};

}  // namespace meanclt
