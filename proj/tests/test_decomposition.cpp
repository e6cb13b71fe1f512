#include <gtest/gtest.h>

#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <map>

#include "ergodec/decomposition.hpp"

namespace ergodec {
namespace {

Rational q(long p, long d = 1) { return Rational(p, d); }

ConfigSampler bernoulli_mixture_sampler(double w, double p1, double p2, std::size_t window) {
  return [=](RandomStream& rng) {
    const double p = rng.uniform01() < w ? p1 : p2;
    BinaryConfig x(window);
    for (Index i = 1; i <= window; ++i) x.set(i, rng.bernoulli(p));
    return x;
  };
}

Mixture<Rational> two_bernoulli(std::size_t window) {
  return Mixture<Rational>({q(3, 10), q(7, 10)}, {ProductBernoulli<Rational>::constant(q(1, 5), window),
                                                  ProductBernoulli<Rational>::constant(q(4, 5), window)});
}

TEST(Dictionary, OrderedBySizeThenLex) {
  TestDictionary d(2, 3);
  const std::vector<std::vector<Index>> want = {{}, {1}, {2}, {3}, {1, 2}, {1, 3}, {2, 3}};
  EXPECT_EQ(d.subsets(), want);
  EXPECT_EQ(*d.index_of({3, 1}), 5u);
  EXPECT_FALSE(d.index_of({1, 2, 3}));
  EXPECT_EQ(TestDictionary(3).size(), 8u);
}

TEST(LimitStatistic, ExactCountsOnSmallWindow) {
  const auto x = BinaryConfig::parse("110100");
  RandomStream rng(3);
  LimitOptions opts{geometric_schedule(6), 1e-3, 100};
  const auto stat = pi_phi(x, Cocycle<Rational>::constant_one(), TestDictionary(2), opts, rng);
  EXPECT_DOUBLE_EQ(stat.value({}), 1.0);
  EXPECT_DOUBLE_EQ(stat.value({1}), 0.5);
  // 3 ones among 6: probability both of two distinct coordinates are ones.
  EXPECT_DOUBLE_EQ(stat.value({1, 2}), 3.0 * 2.0 / 30.0);
  EXPECT_FALSE(stat.all_converged() && stat.value({1}) == 0.0);
}

TEST(LimitStatistic, MonotoneUnderSharedDraws) {
  RandomStream rng(9);
  const auto sampler = bernoulli_mixture_sampler(0.5, 0.3, 0.6, 512);
  LimitOptions opts{{128, 256, 512}, 0.01, 500};
  TestDictionary dict(2, 3);
  for (int t = 0; t < 20; ++t) {
    const auto stat = pi_phi(sampler(rng), Cocycle<double>::constant_one(), dict, opts, rng);
    for (const auto& big : dict.subsets()) {
      for (const auto& small : dict.subsets()) {
        if (std::includes(big.begin(), big.end(), small.begin(), small.end())) {
          EXPECT_LE(stat.value(big), stat.value(small));
        }
      }
    }
  }
}

TEST(Representative, ExpectationsAndMasses) {
  const Representative b = BernoulliRepresentative{0.25, 8};
  EXPECT_DOUBLE_EQ(expectation(b, TestFunction<double>::monomial({1, 2})), 0.0625);
  Cylinder a;
  a.pin(1, 1).pin(3, 0);
  EXPECT_DOUBLE_EQ(mass(b, a), 0.25 * 0.75);
  const Representative atomic =
      orbit_component(BinaryConfig::parse("0011"), Cocycle<double>::constant_one(), 4);
  EXPECT_DOUBLE_EQ(expectation(atomic, TestFunction<double>::monomial({1})), 0.5);
  EXPECT_DOUBLE_EQ(expectation(atomic, TestFunction<double>::monomial({1, 2})), 1.0 / 6.0);
}

TEST(Ergodicity, ExactVerdicts) {
  RandomStream rng(4);
  LimitOptions opts{geometric_schedule(4), 1e-3, 100};
  const auto rho = Cocycle<double>::constant_one();
  TestDictionary dict(2, 4);
  const Representative orbit = orbit_component(BinaryConfig::parse("0011"), rho, 4);
  EXPECT_EQ(ergodicity_test(orbit, rho, dict, 20, opts, 0.03, rng).verdict, Verdict::ergodic);
  const Representative split =
      AtomicMeasure<double>::uniform({BinaryConfig::parse("0000"), BinaryConfig::parse("1111")});
  const auto v = ergodicity_test(split, rho, dict, 20, opts, 0.03, rng);
  EXPECT_EQ(v.verdict, Verdict::non_ergodic);
  EXPECT_EQ(v.failures, 20u);
  EXPECT_FALSE(v.witnesses.empty());
}

TEST(Ergodicity, BernoulliIsErgodicAtLargeWindow) {
  RandomStream rng(5);
  LimitOptions opts{{512, 1024, 2048}, 0.01, 2000};
  const auto v = ergodicity_test(BernoulliRepresentative{0.3, 2048}, Cocycle<double>::constant_one(),
                                 TestDictionary(2), 20, opts, 0.03, rng);
  EXPECT_EQ(v.verdict, Verdict::ergodic);
}

TEST(Decompose, TwoComponentMixture) {
  const std::size_t window = 1024;
  DecomposeConfig cfg;
  cfg.samples = 2000;
  cfg.limit = {{256, 512, 1024}, 0.02, 2000};
  cfg.ergodicity_probes = 10;
  const auto dm = decompose(bernoulli_mixture_sampler(0.3, 0.2, 0.8, window), window,
                            Cocycle<double>::constant_one(), cfg);
  ASSERT_EQ(dm.components.size(), 2u);
  EXPECT_NEAR(dm.components[0].weight, 0.3, 0.04);
  EXPECT_NEAR(dm.components[1].weight, 0.7, 0.04);
  EXPECT_NEAR(dm.components[0].center, 0.2, 0.01);
  EXPECT_NEAR(dm.components[1].center, 0.8, 0.01);
  EXPECT_TRUE(dm.admissible);
  EXPECT_LE(dm.nonconverged_fraction, 0.01);
  for (const auto& c : dm.components) EXPECT_EQ(c.ergodicity.verdict, Verdict::ergodic);
  const auto res = barycenter_residual(two_bernoulli(window), dm, 3);
  EXPECT_LE(res.max_residual, 0.03);
}

TEST(Decompose, IndependentOfWorkerCount) {
  const std::size_t window = 256;
  DecomposeConfig cfg;
  cfg.samples = 60;
  cfg.limit = {{64, 128, 256}, 0.02, 400};
  cfg.ergodicity_probes = 3;
  cfg.max_nonconvergence = 1.0;
  const auto sampler = bernoulli_mixture_sampler(0.5, 0.2, 0.8, window);
  const auto rho = Cocycle<double>::constant_one();
  const auto one = decompose(sampler, window, rho, cfg);
  cfg.workers = 3;
  const auto three = decompose(sampler, window, rho, cfg);
  EXPECT_EQ(one.statistics_csv(), three.statistics_csv());
  EXPECT_EQ(one.components.size(), three.components.size());
}

TEST(Decompose, NonConvergenceAborts) {
  const std::size_t window = 1024;
  // Ones on the first half only: level 512 sees frequency 1, level 1024 sees 1/2.
  ConfigSampler half = [](RandomStream&) {
    BinaryConfig x(1024);
    for (Index i = 1; i <= 512; ++i) x.set(i, 1);
    return x;
  };
  DecomposeConfig cfg;
  cfg.samples = 10;
  cfg.limit = {{512, 1024}, 0.01, 500};
  try {
    decompose(half, window, Cocycle<double>::constant_one(), cfg);
    FAIL() << "expected DecompositionError";
  } catch (const DecompositionError& e) {
    EXPECT_DOUBLE_EQ(e.nonconverged_fraction, 1.0);
  }
}

TEST(Decompose, ContinuousBetaMixing) {
  const std::size_t window = 1024;
  const BetaBernoulliMixture mix(q(2), q(3), window);
  DecomposeConfig cfg;
  cfg.samples = 1500;
  cfg.mode = DecomposeConfig::Mode::continuous;
  cfg.limit = {{256, 512, 1024}, 0.03, 2000};
  const auto dm = decompose([&mix](RandomStream& r) { return mix.sample(r); }, window,
                            Cocycle<double>::constant_one(), cfg);
  ASSERT_EQ(dm.empirical_parameters.size(), 1500u);
  const double ks = ks_distance(dm.empirical_parameters,
                                [](double t) { return t <= 0 ? 0.0 : t >= 1 ? 1.0 : boost::math::ibeta(2.0, 3.0, t); });
  EXPECT_LE(ks, 0.05);
  EXPECT_LE(barycenter_residual(mix, dm, 2).max_residual, 0.03);
}

TEST(Roundtrip, DecomposeAssembleDecompose) {
  const std::size_t window = 512;
  DecomposeConfig cfg;
  cfg.samples = 1000;
  cfg.limit = {{128, 256, 512}, 0.03, 1000};
  cfg.max_nonconvergence = 0.05;
  cfg.ergodicity_probes = 3;
  const auto rep = mes_ed_roundtrip(bernoulli_mixture_sampler(0.3, 0.2, 0.8, window), window,
                                    Cocycle<double>::constant_one(), cfg, 0.05);
  EXPECT_EQ(rep.components_first, 2u);
  EXPECT_EQ(rep.components_second, 2u);
  EXPECT_TRUE(rep.agree) << rep.max_weight_drift << " " << rep.max_center_drift;
}

TEST(Separation, BernoulliProductsAreSingularAtLargeWindow) {
  const auto s = separation_check(0.2, 0.8, 4096);
  EXPECT_TRUE(s.singular);
  EXPECT_LT(s.low_mass_outside, 1e-100);
  EXPECT_LT(s.high_mass_inside, 1e-100);
  EXPECT_LE(s.low_mass_outside, s.low_hoeffding);
  EXPECT_FALSE(separation_check(0.45, 0.55, 16).singular);
  EXPECT_THROW(separation_check(0.6, 0.8, 16), ConfigError);
}

TEST(ConditionalMeasures, ExchangeableSplitsByCount) {
  const auto nu = ProductBernoulli<Rational>::constant(q(1, 3), 4).to_atomic();
  const auto rho = Cocycle<Rational>::constant_one();
  const auto cm = conditional_measures_exact(nu, rho);
  EXPECT_EQ(cm.cells.size(), 5u);
  for (const auto& c : cm.cells) {
    EXPECT_TRUE(c.rn_verified);
    Rational first = c.measure.atoms().begin()->second;
    for (const auto& [x, m] : c.measure.atoms()) EXPECT_EQ(m, first);
  }
  EXPECT_EQ(cm.reconstruct(4), nu);
}

TEST(ConditionalMeasures, InhomogeneousMatchesFullStatistic) {
  const ProductBernoulli<Rational> prod({q(1, 3), q(1, 2), q(1, 4), q(2, 3)});
  const auto nu = prod.to_atomic();
  const auto rho = make_rn(prod);
  const auto cm = conditional_measures_exact(nu, rho);
  EXPECT_EQ(cm.reconstruct(4), nu);
  for (const auto& c : cm.cells) EXPECT_TRUE(c.rn_verified);

  // Level sets of the explicit full monomial statistic give the same partition.
  std::map<std::vector<Rational>, std::set<BinaryConfig>> by_statistic;
  for (const auto& [x, m] : nu.atoms()) by_statistic[full_statistic_exact(x, rho)].insert(x);
  std::set<std::set<BinaryConfig>> from_stat;
  for (auto& [k, s] : by_statistic) from_stat.insert(s);
  std::set<std::set<BinaryConfig>> from_cells;
  for (const auto& c : cm.cells) {
    std::set<BinaryConfig> s;
    for (const auto& [x, m] : c.measure.atoms()) s.insert(x);
    from_cells.insert(s);
  }
  EXPECT_EQ(from_stat, from_cells);
}

TEST(ConditionalMeasures, WrongCocycleFailsVerification) {
  const ProductBernoulli<Rational> prod({q(1, 3), q(1, 2), q(1, 4)});
  const auto cm = conditional_measures_exact(prod.to_atomic(), Cocycle<Rational>::constant_one());
  bool any_failed = false;
  for (const auto& c : cm.cells) any_failed |= !c.rn_verified;
  EXPECT_TRUE(any_failed);
}

TEST(Upgrade, InvariantAndNonInvariantSets) {
  const ProductBernoulli<Rational> prod({q(1, 3), q(1, 2), q(1, 4), q(2, 3)});
  const auto nu = prod.to_atomic();
  const auto rho = make_rn(prod);
  std::set<BinaryConfig> two;
  for (std::uint64_t c = 0; c < 16; ++c) {
    const auto x = BinaryConfig::from_index(c, 4);
    if (x.count_ones() == 2) two.insert(x);
  }
  const auto up = almost_invariant_upgrade(two, nu, rho);
  EXPECT_TRUE(up.almost_invariant);
  EXPECT_EQ(up.upgraded, two);
  EXPECT_EQ(up.symmetric_difference_mass, Rational(0));

  const std::set<BinaryConfig> single = {BinaryConfig::parse("1100")};
  const auto up2 = almost_invariant_upgrade(single, nu, rho);
  EXPECT_FALSE(up2.almost_invariant);
  ASSERT_TRUE(up2.witness);
  EXPECT_GT(up2.witness_mass, Rational(0));
  EXPECT_TRUE(up2.upgraded.empty());
  EXPECT_EQ(up2.symmetric_difference_mass, nu.atom(BinaryConfig::parse("1100")));
}

}  // namespace
}  // namespace ergodec
