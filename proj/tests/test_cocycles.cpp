#include <gtest/gtest.h>

#include "ergodec/cocycle.hpp"

namespace ergodec {
namespace {

Rational q(long p, long d = 1) { return Rational(p, d); }

ProductBernoulli<Rational> inhomogeneous(std::size_t window) {
  std::vector<Rational> p;
  for (std::size_t i = 0; i < window; ++i) p.push_back(q(static_cast<long>(i % 5 + 1), static_cast<long>(i % 3 + 7)));
  return ProductBernoulli<Rational>(p);
}

TEST(RhoF, ConstantWeightGivesConstantCocycle) {
  const auto rho = make_rho_f(WeightFunction<Rational>::one());
  EXPECT_EQ(rho.kind(), CocycleKind::constant_one);
  EXPECT_TRUE(rho.identically_one());
  EXPECT_EQ(rho(Permutation::transposition(1, 3), BinaryConfig::parse("100")), q(1));
}

TEST(RhoF, PowerOfFirstCoordinate) {
  WeightFunction<Rational> f([](const BinaryConfig& x) { return x.bit(1) ? q(2) : q(1); });
  const auto rho = make_rho_f(f);
  const auto x = BinaryConfig::parse("10");
  // f(01) / f(10) = 2^0 / 2^1
  EXPECT_EQ(rho(Permutation::transposition(1, 2), x), q(1, 2));
  EXPECT_EQ(rho(Permutation::identity(), x), q(1));
  EXPECT_EQ(rho.kind(), CocycleKind::from_weight);
}

TEST(RhoF, NonPositiveWeightRejected) {
  WeightFunction<Rational> f([](const BinaryConfig& x) { return x.bit(1) ? q(0) : q(1); });
  EXPECT_THROW(make_rho_f(f)(Permutation::transposition(1, 2), BinaryConfig::parse("01")), ConfigError);
}

TEST(Rn, Examples) {
  const ProductBernoulli<Rational> nu({q(1, 2), q(1, 4)});
  const auto rho = make_rn(nu);
  EXPECT_EQ(rho(Permutation::transposition(1, 2), BinaryConfig::parse("10")), q(1, 3));
  EXPECT_EQ(rho(Permutation::identity(), BinaryConfig::parse("01")), q(1));
  EXPECT_FALSE(rho.identically_one());
  const auto exch = make_rn(ProductBernoulli<Rational>::constant(q(1, 5), 4));
  EXPECT_TRUE(exch.identically_one());
  for (const auto& g : elements(ChainLevel(4))) {
    for (std::uint64_t code = 0; code < 16; ++code) {
      EXPECT_EQ(exch(g, BinaryConfig::from_index(code, 4)), q(1));
    }
  }
}

TEST(VerifyIdentity, ConstantOne) {
  RandomStream rng(1);
  const auto report = verify_identity(Cocycle<Rational>::constant_one(), 200, ChainLevel(6), 10, rng);
  EXPECT_TRUE(report.passed());
  EXPECT_EQ(report.trials, 200u);
}

TEST(VerifyIdentity, InhomogeneousRnExact) {
  RandomStream rng(2);
  const auto report = verify_identity(make_rn(inhomogeneous(16)), 1000, ChainLevel(6), 16, rng);
  EXPECT_TRUE(report.passed());
  EXPECT_TRUE(report.exact);
  EXPECT_EQ(report.violations, 0u);
}

TEST(VerifyIdentity, FloatingReportsRelativeError) {
  RandomStream rng(3);
  std::vector<double> p;
  for (int i = 0; i < 12; ++i) p.push_back(0.1 + 0.07 * i);
  const auto report = verify_identity(make_rn(ProductBernoulli<double>(p)), 500, ChainLevel(8), 12, rng, 1e-10);
  EXPECT_TRUE(report.passed());
  EXPECT_FALSE(report.exact);
  EXPECT_LT(report.max_relative_error, 1e-12);
}

TEST(VerifyIdentity, CorruptedCocycleYieldsWitness) {
  const auto good = make_rn(inhomogeneous(8));
  Cocycle<Rational> bad(
      [good](const Permutation& g, const BinaryConfig& x) {
        Rational v = good(g, x);
        if (g == Permutation::transposition(1, 2)) v += 1;
        return v;
      },
      CocycleKind::custom);
  RandomStream rng(4);
  const auto report = verify_identity(bad, 2000, ChainLevel(3), 8, rng);
  ASSERT_FALSE(report.passed());
  ASSERT_TRUE(report.first_violation.has_value());
  const auto& w = *report.first_violation;
  EXPECT_NE(bad(compose(w.g, w.h), w.x), bad(w.g, act(w.h, w.x)) * bad(w.h, w.x));
}

// rho_f and the Radon-Nikodym cocycle of nu = f * (exchangeable reference) / Z
// coincide; checked on every point and every group element.
TEST(RhoF, AgreesWithRnOfTiltedExchangeableMeasure) {
  const std::size_t n = 5;
  WeightFunction<Rational> f([](const BinaryConfig& x) {
    Rational v(1);
    for (Index i = 1; i <= x.size(); ++i) {
      if (x.bit(i)) v *= Rational(static_cast<long>(i + 1), 3);
    }
    return v;
  });
  const auto reference = ProductBernoulli<Rational>::constant(q(1, 3), n).to_atomic();
  AtomicMeasure<Rational> tilted(n);
  for (const auto& [x, m] : reference.atoms()) tilted.add(x, m * f(x));
  tilted = tilted.normalized();
  const auto rho_f = make_rho_f(f);
  const auto rho_rn = make_rn(tilted);
  for (const auto& g : elements(ChainLevel(n))) {
    for (const auto& [x, m] : tilted.atoms()) ASSERT_EQ(rho_f(g, x), rho_rn(g, x));
  }
}

TEST(Cocycle, PositiveAndOneAtIdentity) {
  const auto rho = make_rn(inhomogeneous(7));
  RandomStream rng(6);
  for (int t = 0; t < 100; ++t) {
    const auto g = haar_sample(ChainLevel(7), rng);
    BinaryConfig x(7);
    for (Index i = 1; i <= 7; ++i) x.set(i, rng.bernoulli(0.5));
    EXPECT_GT(rho(g, x), 0);
    EXPECT_EQ(rho(Permutation::identity(), x), 1);
  }
  EXPECT_TRUE(rho.fibrewise_continuous());
}

}  // namespace
}  // namespace ergodec
