#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "meanclt/wasserstein.hpp"

namespace {

using namespace meanclt;

const double kMeanAbsNormal = std::sqrt(2.0 / std::numbers::pi);

// Oracle: adaptive quadrature of |F(x) - Phi(x / sigma)| between consecutive
// jump points, over [min - 8 sigma, max + 8 sigma].
double dual_form_oracle(const std::vector<double>& atoms, const std::vector<double>& cum,
                        double sigma) {
  const Tolerance tol{1e-13, 0.0, 60};
  double total = 0.0;
  double left = atoms.front() - 8.0 * sigma;
  double level = 0.0;
  for (std::size_t k = 0; k <= atoms.size(); ++k) {
    const double right = k < atoms.size() ? atoms[k] : atoms.back() + 8.0 * sigma;
    if (right > left) {
      total += integrate([&](double x) { return std::abs(level - gauss::cdf(x / sigma)); }, left,
                         right, tol)
                   .value;
    }
    if (k < atoms.size()) level = cum[k];
    left = right;
  }
  return total;
}

double sample_oracle(const EmpiricalSample& s, double sigma) {
  std::vector<double> atoms, cum;
  const auto v = s.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i + 1 < v.size() && v[i + 1] == v[i]) continue;
    atoms.push_back(v[i]);
    cum.push_back(static_cast<double>(i + 1) / static_cast<double>(v.size()));
  }
  return dual_form_oracle(atoms, cum, sigma);
}

double pmf_oracle(const FinitePmf& p, double sigma) {
  std::vector<double> atoms(p.atoms().begin(), p.atoms().end()), cum;
  double c = 0.0;
  for (double q : p.probs()) cum.push_back(c += q);
  return dual_form_oracle(atoms, cum, sigma);
}

TEST(W1SampleGauss, Examples) {
  EXPECT_NEAR(w1_sample_gauss(EmpiricalSample({0.0}), 1.0), kMeanAbsNormal, 1e-15);
  const EmpiricalSample rad({-1.0, 1.0});
  EXPECT_NEAR(w1_sample_gauss(rad, 1.0), sample_oracle(rad, 1.0), 1e-10);
  // Growing sigma eventually dominates: W1 >= sigma E|Z| - E|X|.
  EXPECT_GT(w1_sample_gauss(rad, 100.0), 100.0 * kMeanAbsNormal - 1.0);
  EXPECT_THROW(w1_sample_gauss(rad, 0.0), DomainError);
}

TEST(W1SampleGauss, LargeGaussianSampleIsClose) {
  RandomStream rng = substream(1, 0);
  std::vector<double> v(100000);
  for (auto& x : v) x = rng.normal();
  EXPECT_LT(w1_sample_gauss(EmpiricalSample(v), 1.0), 0.02);
}

TEST(W1SampleGauss, AgreesWithDualFormOnRandomSamples) {
  RandomStream rng = substream(2, 0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 1 + rng.below(40);
    std::vector<double> v(m);
    const bool ties = trial % 3 == 0;
    for (auto& x : v) x = ties ? static_cast<double>(rng.below(5)) - 2.0 : 3.0 * rng.normal();
    const double sigma = 0.3 + 2.0 * rng.uniform();
    const EmpiricalSample s(v);
    EXPECT_NEAR(w1_sample_gauss(s, sigma), sample_oracle(s, sigma), 1e-9) << trial;
  }
}

TEST(W1SampleGauss, ScaleEquivarianceAndTriangle) {
  RandomStream rng = substream(3, 0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(30), w(17);
    for (auto& x : v) x = rng.normal() + 0.5;
    for (auto& x : w) x = 2.0 * rng.uniform() - 1.0;
    const EmpiricalSample s1(v), s2(w);
    const double c = 0.1 + 5.0 * rng.uniform();
    EXPECT_NEAR(w1_sample_gauss(s1.scaled(c), c * 1.3), c * w1_sample_gauss(s1, 1.3), 1e-10);
    EXPECT_LE(w1_sample_gauss(s1, 1.0), w1_sample_sample(s1, s2) + w1_sample_gauss(s2, 1.0) + 1e-9);
  }
}

TEST(W1SampleGauss, ContinuousAcrossCrossing) {
  // Move one point of a sample through the level crossing of its slab.
  std::vector<double> v{-1.2, -0.3, 0.4, 1.1};
  double prev = -1.0;
  const double step = 1e-4;
  for (double x = -0.05; x <= 0.05; x += step) {
    v[1] = -0.3 + x;
    const double w = w1_sample_gauss(EmpiricalSample(v), 1.0);
    if (prev >= 0.0) {
      EXPECT_LE(std::abs(w - prev), step / 4 + 1e-14);
    }
    prev = w;
  }
}

TEST(W1PmfGauss, Examples) {
  EXPECT_NEAR(w1_pmf_gauss(FinitePmf::dirac(0.0), 1.0), kMeanAbsNormal, 1e-15);
  const double r2 = std::sqrt(2.0);
  const FinitePmf two({-r2, 0.0, r2}, {0.25, 0.5, 0.25});
  EXPECT_NEAR(w1_pmf_gauss(two, 1.0), pmf_oracle(two, 1.0), 1e-8);
  EXPECT_NEAR(w1_pmf_gauss(two, 1.0), w1_pmf_gauss(two.scaled(-1.0), 1.0), 1e-15);
}

TEST(W1PmfGauss, AgreesWithSampleRouteAndOracle) {
  RandomStream rng = substream(4, 0);
  for (int trial = 0; trial < 30; ++trial) {
    // A sample with ties is also a finite law with rational weights.
    std::vector<double> v(1 + rng.below(25));
    for (auto& x : v) x = static_cast<double>(rng.below(7)) * 0.5 - 1.5;
    std::vector<std::pair<double, double>> w;
    for (double x : v) w.emplace_back(x, 1.0);
    const FinitePmf p = FinitePmf::from_weights(w);
    const double sigma = 0.5 + rng.uniform();
    EXPECT_NEAR(w1_pmf_gauss(p, sigma), w1_sample_gauss(EmpiricalSample(v), sigma), 1e-12);
    EXPECT_NEAR(w1_pmf_gauss(p, sigma), pmf_oracle(p, sigma), 1e-9);
  }
}

TEST(W1PmfGauss, FarTailAtomsStayAccurate) {
  const FinitePmf p({-30.0, 25.0}, {0.5, 0.5});
  EXPECT_NEAR(w1_pmf_gauss(p, 1.0), pmf_oracle(p, 1.0), 1e-9);
  EXPECT_NEAR(w1_pmf_gauss(p, 1.0), 27.5 - kMeanAbsNormal, 1e-9);
}

TEST(W1SampleSample, Examples) {
  const EmpiricalSample a({0.3, -2.0, 5.0});
  EXPECT_EQ(w1_sample_sample(a, a), 0.0);
  EXPECT_EQ(w1_sample_sample(EmpiricalSample({0.0}), EmpiricalSample({1.0})), 1.0);
  EXPECT_EQ(w1_sample_sample(EmpiricalSample({0.0, 0.0}), EmpiricalSample({0.0, 2.0})), 1.0);
  // Unequal sizes: {0} vs {0, 2} -> half the mass moves by 2.
  EXPECT_DOUBLE_EQ(w1_sample_sample(EmpiricalSample({0.0}), EmpiricalSample({0.0, 2.0})), 1.0);
  // {0, 1} vs {0, 1, 2}: sorted coupling integral over breakpoints 1/3, 1/2, 2/3.
  EXPECT_NEAR(w1_sample_sample(EmpiricalSample({0.0, 1.0}), EmpiricalSample({0.0, 1.0, 2.0})),
              (1.0 / 6) * 1 + (1.0 / 3) * 1, 1e-15);
}

TEST(W1SampleSample, EqualSizesAreMeanSortedDifference) {
  RandomStream rng = substream(5, 0);
  std::vector<double> x(500), y(500);
  for (auto& v : x) v = rng.normal();
  for (auto& v : y) v = rng.uniform();
  const EmpiricalSample sx(x), sy(y);
  double direct = 0.0;
  for (std::size_t i = 0; i < 500; ++i) direct += std::abs(sx[i] - sy[i]);
  EXPECT_NEAR(w1_sample_sample(sx, sy), direct / 500, 1e-12);
}

TEST(Kolmogorov, Examples) {
  EXPECT_DOUBLE_EQ(ks_sample_gauss(EmpiricalSample({0.0}), 1.0), 0.5);
  const int m = 50;
  std::vector<double> q(m);
  for (int i = 0; i < m; ++i) q[i] = 2.0 * gauss::quantile((i + 0.5) / m);
  EXPECT_NEAR(ks_sample_gauss(EmpiricalSample(q), 2.0), 1.0 / (2 * m), 1e-14);
  RandomStream rng = substream(6, 0);
  std::vector<double> v(10000);
  for (auto& x : v) x = rng.normal();
  EXPECT_LT(ks_sample_gauss(EmpiricalSample(v), 1.0), 1.63 / 100.0);
  EXPECT_DOUBLE_EQ(ks_pmf_gauss(FinitePmf::dirac(0.0), 1.0), 0.5);
}

TEST(CsvReader, ParsesAndReportsLineNumbers) {
  std::istringstream ok("# header\n1.5\n\n-2\n 3e-1 \n");
  const auto s = read_sample_csv(ok);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[0], -2.0);
  std::istringstream bad("1\nabc\n");
  try {
    read_sample_csv(bad, "data.csv");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("data.csv:2"), std::string::npos);
  }
  std::istringstream empty("# nothing\n");
  EXPECT_THROW(read_sample_csv(empty), ValidationError);
}

TEST(Distributions, RademacherSumLaw) {
  const auto p = FinitePmf::rademacher_sum(4);
  ASSERT_EQ(p.size(), 5u);
  EXPECT_NEAR(p.probs()[2], 6.0 / 16, 1e-15);
  EXPECT_NEAR(p.atoms()[0], -2.0, 1e-15);
  EXPECT_NEAR(p.variance(), 1.0, 1e-14);
  EXPECT_THROW(FinitePmf({0.0, 0.0}, {0.5, 0.5}), ValidationError);
  EXPECT_THROW(FinitePmf({0.0, 1.0}, {0.5, 0.6}), ValidationError);
  EXPECT_THROW(EmpiricalSample({}), ValidationError);
}

}  // namespace
