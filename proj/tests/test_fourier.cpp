#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "meanclt/fourier.hpp"
#include "meanclt/numerics.hpp"

namespace {

using namespace meanclt;

constexpr double kPi = std::numbers::pi;

FourierFn random_fn(RandomStream& rng, std::size_t K, bool centered) {
  std::vector<double> a(K), b(K);
  for (std::size_t k = 0; k < K; ++k) {
    a[k] = rng.uniform() - 0.5;
    b[k] = rng.uniform() - 0.5;
  }
  return FourierFn(centered ? 0.0 : rng.uniform() - 0.5, a, b);
}

TEST(FourierEval, Examples) {
  EXPECT_DOUBLE_EQ(FourierFn::cosine(1)(0.0), 1.0);
  EXPECT_NEAR(FourierFn::sine(1)(0.25), 1.0, 1e-15);
  EXPECT_NEAR(FourierFn::cosine(2)(0.25), -1.0, 1e-15);
}

TEST(FourierEval, MatchesDirectSumAtHighFrequency) {
  RandomStream rng = substream(3, 0);
  const FourierFn f = random_fn(rng, 200, false);
  for (double x : {0.0, 0.123, 0.5, 0.77777, 0.999}) {
    double direct = f.constant();
    for (std::size_t k = 1; k <= f.max_freq(); ++k) {
      direct += f.a(k) * std::cos(2 * kPi * k * x) + f.b(k) * std::sin(2 * kPi * k * x);
    }
    EXPECT_NEAR(f(x), direct, 1e-11) << x;
  }
}

TEST(FourierProduct, Identities) {
  const FourierFn c = FourierFn::cosine(1);
  const FourierFn s = FourierFn::sine(1);
  const auto cc = product(c, c);
  EXPECT_FALSE(cc.truncated());
  EXPECT_NEAR(cc.fn.constant(), 0.5, 1e-16);
  EXPECT_NEAR(cc.fn.a(1), 0.0, 1e-16);
  EXPECT_NEAR(cc.fn.a(2), 0.5, 1e-16);
  EXPECT_NEAR(cc.fn.b(2), 0.0, 1e-16);

  const auto cs = product(c, s).fn;
  EXPECT_NEAR(cs.constant(), 0.0, 1e-16);
  EXPECT_NEAR(cs.a(2), 0.0, 1e-16);
  EXPECT_NEAR(cs.b(2), 0.5, 1e-16);

  RandomStream rng = substream(4, 0);
  const FourierFn f = random_fn(rng, 7, false);
  EXPECT_LT(coeff_distance(product(f, FourierFn::constant_fn(1.0)).fn, f), 1e-16);
}

TEST(FourierProduct, AgreesWithPointwiseProduct) {
  RandomStream rng = substream(5, 0);
  for (int trial = 0; trial < 10; ++trial) {
    const FourierFn f = random_fn(rng, 6, false);
    const FourierFn g = random_fn(rng, 9, false);
    const FourierFn h = multiply(f, g);
    EXPECT_EQ(h.max_freq(), 15u);
    for (double x = 0.0; x < 1.0; x += 0.0371) EXPECT_NEAR(h(x), f(x) * g(x), 1e-13);
  }
}

TEST(FourierProduct, TruncationIsReported) {
  const FourierFn f = FourierFn::cosine(3);
  const auto r = product(f, f, 4);
  EXPECT_TRUE(r.truncated());
  EXPECT_NEAR(r.dropped_l1, 0.5, 1e-16);  // the cos(6) half
  EXPECT_NEAR(r.fn.constant(), 0.5, 1e-16);
  EXPECT_EQ(r.fn.max_freq(), 0u);
  EXPECT_THROW(multiply(f, f, 4), ResourceError);
}

TEST(FourierShift, MatchesTranslatedEvaluation) {
  RandomStream rng = substream(6, 0);
  const Rotation a = Rotation::sqrt2_minus_1();
  const FourierFn f = random_fn(rng, 5, false);
  for (std::int64_t j : {-3, -1, 1, 2, 17}) {
    const FourierFn g = f.shifted(a, j);
    for (double x = 0.0; x < 1.0; x += 0.113) {
      double y = x + j * a.value();
      y -= std::floor(y);
      EXPECT_NEAR(g(x), f(y), 1e-12);
    }
  }
}

TEST(FourierDilate, MatchesDoubledArgument) {
  RandomStream rng = substream(8, 0);
  const FourierFn f = random_fn(rng, 4, false);
  const FourierFn g = f.dilated(3);
  EXPECT_EQ(g.max_freq(), 32u);
  for (double x = 0.0; x < 1.0; x += 0.0917) {
    double y = 8 * x;
    y -= std::floor(y);
    EXPECT_NEAR(g(x), f(y), 1e-12);
  }
}

TEST(FourierBasics, NormsAndInnerProduct) {
  const FourierFn f(0.5, {1.0, 0.0, -2.0}, {0.0, 0.25});
  EXPECT_EQ(f.max_freq(), 3u);
  EXPECT_DOUBLE_EQ(f.l1_coeff_norm(), 3.75);
  EXPECT_DOUBLE_EQ(f.derivative_bound(), 2 * kPi * (1.0 + 2 * 0.25 + 3 * 2.0));
  EXPECT_DOUBLE_EQ(inner(f, f), 0.25 + 0.5 * (1.0 + 0.0625 + 4.0));
  EXPECT_FALSE(f.is_centered());
  EXPECT_TRUE((f - FourierFn::constant_fn(0.5)).is_centered());
  EXPECT_THROW(FourierFn(std::nan(""), {}, {}), ValidationError);
  // Trailing zeros are trimmed.
  EXPECT_EQ(FourierFn(0.0, {1.0, 0.0, 0.0}, {}).max_freq(), 1u);
}

TEST(FourierBasics, LabelHasNoCommas) {
  const FourierFn f(0.0, {1.0}, {0.0, -0.5});
  EXPECT_EQ(f.label(), "1*cos(1)-0.5*sin(2)");
  EXPECT_EQ(FourierFn().label(), "0");
}

}  // namespace
