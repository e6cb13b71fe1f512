#include <gtest/gtest.h>

#include <cmath>

#include "ergodec/sigma_finite.hpp"

namespace ergodec {
namespace {

Rational q(long p, long d = 1) { return Rational(p, d); }

BinaryConfig ones_at(std::initializer_list<Index> positions, std::size_t window) {
  BinaryConfig x(window);
  for (Index i : positions) x.set(i, 1);
  return x;
}

// Sum of prod base^{-i} over k-subsets of {1..limit} satisfying `keep`.
double truncated_orbit_sum(double base, std::size_t k, std::size_t limit,
                           const std::function<bool(const std::vector<Index>&)>& keep) {
  double total = 0.0;
  std::vector<Index> chosen;
  std::function<void(Index, double)> rec = [&](Index from, double value) {
    if (chosen.size() == k) {
      if (keep(chosen)) total += value;
      return;
    }
    for (Index i = from; i <= limit; ++i) {
      chosen.push_back(i);
      rec(i + 1, value * std::pow(base, -static_cast<double>(i)));
      chosen.pop_back();
    }
  };
  rec(1, 1.0);
  return total;
}

OrbitSigmaFinite random_orbit_model(RandomStream& rng, std::size_t max_orbit = 4) {
  OrbitSigmaFinite nu;
  while (nu.weights().empty()) {
    for (std::size_t k = 0; k <= max_orbit; ++k) {
      if (rng.bernoulli(0.5)) nu.set_weight(k, q(1 + static_cast<long>(rng.uniform_below(9)), 1 + static_cast<long>(rng.uniform_below(7))));
    }
  }
  return nu;
}

TEST(OrbitWeight, FibrewiseWeightValues) {
  const auto f = make_fibrewise_f();
  EXPECT_EQ(f(BinaryConfig(6)), q(1));
  EXPECT_EQ(f(ones_at({1, 3}, 5)), q(1, 4 * 64));
  EXPECT_EQ(*f.orbit_mass(1), q(1, 3));
  EXPECT_EQ(*f.orbit_mass(0), q(1));
  EXPECT_FALSE(OrbitWeight::constant_one().orbit_mass(1));
  EXPECT_EQ(*OrbitWeight::constant_one().orbit_mass(0), q(1));
  EXPECT_THROW(OrbitWeight::geometric(q(1)), ConfigError);
}

TEST(OrbitWeight, ClosedFormMatchesTruncatedSeries) {
  for (long base : {2L, 3L, 4L}) {
    const auto f = OrbitWeight::geometric(q(base));
    for (std::size_t k = 1; k <= 3; ++k) {
      const double series = truncated_orbit_sum(static_cast<double>(base), k, 45, [](const auto&) { return true; });
      EXPECT_NEAR(to_double(*f.orbit_mass(k)), series, 1e-10) << base << " " << k;
    }
  }
}

TEST(OrbitWeight, PositiveUnderAction) {
  const auto f = make_fibrewise_f();
  RandomStream rng(2);
  for (int t = 0; t < 50; ++t) {
    BinaryConfig x(10);
    for (Index i = 1; i <= 10; ++i) x.set(i, rng.bernoulli(0.5));
    EXPECT_GT(f(act(haar_sample(ChainLevel(10), rng), x)), 0);
  }
}

TEST(PF, GeometricExampleOnOrbitOne) {
  const auto mu = p_f(OrbitSigmaFinite::single_orbit(1), OrbitWeight::geometric(q(2)));
  EXPECT_EQ(mu.normalizer(), q(1));
  Rational power(1);
  for (Index i = 1; i <= 10; ++i) {
    power /= 2;
    EXPECT_EQ(mu.atom(ones_at({i}, 10)), power);
  }
  EXPECT_EQ(mu.atom(BinaryConfig(4)), q(0));
  EXPECT_EQ(mu.mass(Cylinder().pin(1, 1)), q(1, 2));
  EXPECT_EQ(mu.mass(Cylinder()), q(1));
}

TEST(PF, CylinderMassesMatchTruncatedSeries) {
  OrbitSigmaFinite nu({{0, q(1)}, {1, q(2)}, {2, q(3)}, {3, q(1, 2)}});
  const auto f = make_fibrewise_f();
  const auto mu = p_f(nu, f);
  for (const auto& a : cylinders_up_to(3)) {
    double oracle = a.contains(BinaryConfig(3)) ? 1.0 : 0.0;
    for (std::size_t k = 1; k <= 3; ++k) {
      const double s = truncated_orbit_sum(4.0, k, 30, [&](const std::vector<Index>& ones) {
        BinaryConfig x(30);
        for (Index i : ones) x.set(i, 1);
        return a.contains(x);
      });
      oracle += to_double(nu.weight(k)) * s;
    }
    oracle /= to_double(mu.normalizer());
    EXPECT_NEAR(to_double(mu.mass(a)), oracle, 1e-12) << a.to_string();
  }
}

TEST(PF, FinitelyAdditiveAndNormalized) {
  RandomStream rng(8);
  const auto f = make_fibrewise_f();
  for (int t = 0; t < 10; ++t) {
    const auto mu = p_f(random_orbit_model(rng), f);
    EXPECT_EQ(mu.mass(Cylinder()), q(1));
    for (const auto& a : cylinders_up_to(2)) {
      Cylinder a0 = a, a1 = a;
      a0.pin(3, 0);
      a1.pin(3, 1);
      EXPECT_EQ(mu.mass(a), mu.mass(a0) + mu.mass(a1));
    }
  }
}

TEST(PF, ScaleInvariance) {
  RandomStream rng(3);
  const auto f = make_fibrewise_f();
  for (int t = 0; t < 20; ++t) {
    const auto nu = random_orbit_model(rng);
    const Rational lambda = q(1 + static_cast<long>(rng.uniform_below(50)), 1 + static_cast<long>(rng.uniform_below(50)));
    const auto a = p_f(nu, f);
    const auto b = p_f(nu.scaled(lambda), f);
    for (const auto& c : cylinders_up_to(3)) EXPECT_EQ(a.mass(c), b.mass(c));
    EXPECT_EQ(a.atom(ones_at({2, 5}, 6)), b.atom(ones_at({2, 5}, 6)));
  }
}

TEST(PF, ConstantWeightLeavesProbabilityUnchanged) {
  const auto nu = ProductBernoulli<Rational>::constant(q(1, 3), 4).to_atomic();
  EXPECT_EQ(p_f(nu, OrbitWeight::constant_one()), nu);
  EXPECT_EQ(std::get<AtomicMeasure<Rational>>(inv_p_f(nu, OrbitWeight::constant_one()).representative()), nu);
}

TEST(PF, DivergesForConstantWeightOnInfiniteOrbits) {
  EXPECT_THROW(p_f(OrbitSigmaFinite::single_orbit(2), OrbitWeight::constant_one()), DivergenceError);
  EXPECT_NO_THROW(p_f(OrbitSigmaFinite::single_orbit(0), OrbitWeight::constant_one()));
  EXPECT_THROW(decompose_sigma_finite(OrbitSigmaFinite::single_orbit(1), OrbitWeight::constant_one()),
               DivergenceError);
}

TEST(ProjectiveClasses, RoundTrips) {
  RandomStream rng(4);
  const auto f = make_fibrewise_f();
  for (int t = 0; t < 20; ++t) {
    const auto nu = random_orbit_model(rng);
    const auto cls = inv_p_f(p_f(nu, f), f);
    EXPECT_EQ(cls, ProjectiveClass::of(nu, f));
    EXPECT_EQ(cls, ProjectiveClass::of(nu.scaled(q(7, 3)), f));
    // The stored representative satisfies nu(f) = 1 exactly.
    EXPECT_EQ(integrate(std::get<OrbitSigmaFinite>(cls.representative()), f), q(1));
    const auto mu = p_f(nu, f);
    const auto back = p_f(cls);
    for (const auto& c : cylinders_up_to(2)) EXPECT_EQ(back.mass(c), mu.mass(c));
  }
  EXPECT_FALSE(ProjectiveClass::of(OrbitSigmaFinite({{1, q(1)}, {2, q(1)}}), f) ==
               ProjectiveClass::of(OrbitSigmaFinite({{1, q(1)}, {2, q(2)}}), f));
}

TEST(ProjectiveClasses, GeometricExampleRecoversCounting) {
  const auto f = OrbitWeight::geometric(q(2));
  const auto cls = inv_p_f(p_f(OrbitSigmaFinite::single_orbit(1), f), f);
  EXPECT_EQ(std::get<OrbitSigmaFinite>(cls.representative()), OrbitSigmaFinite::single_orbit(1));
}

TEST(ProjectiveClasses, AtomicRoundTrip) {
  const auto f = make_fibrewise_f();
  const auto mu = ProductBernoulli<Rational>({q(1, 3), q(1, 2), q(2, 5)}).to_atomic();
  const auto cls = inv_p_f(mu, f);
  const auto& rep = std::get<AtomicMeasure<Rational>>(cls.representative());
  EXPECT_EQ(p_f(rep, f), mu);
}

TEST(SigmaFiniteDecomposition, Weights) {
  const auto f = make_fibrewise_f();
  const auto single = decompose_sigma_finite(OrbitSigmaFinite::single_orbit(2, q(5)), f);
  ASSERT_EQ(single.components.size(), 1u);
  EXPECT_EQ(single.components[0].weight, q(1));

  const OrbitSigmaFinite nu({{1, q(2)}, {2, q(3)}});
  const auto dec = decompose_sigma_finite(nu, f);
  ASSERT_EQ(dec.components.size(), 2u);
  const Rational m1 = *f.orbit_mass(1);
  const Rational m2 = *f.orbit_mass(2);
  EXPECT_EQ(m2, q(1, 64) / (q(3, 4) * q(15, 16)));
  EXPECT_EQ(dec.components[0].weight / dec.components[1].weight, (2 * m1) / (3 * m2));
  EXPECT_EQ(dec.components[0].weight + dec.components[1].weight, q(1));
  EXPECT_EQ(dec.barycenter(), nu.scaled(1 / dec.normalizer));

  // Dividing P_f(nu) by f recovers nu / nu(f) atomwise.
  const auto mu = p_f(nu, f);
  for (const auto& x : {ones_at({3}, 6), ones_at({1, 6}, 6), ones_at({2, 4, 5}, 6)}) {
    EXPECT_EQ(mu.atom(x) / f(x), dec.barycenter().atom(x));
  }
}

TEST(SigmaFiniteDecomposition, Reweighting) {
  const auto f = make_fibrewise_f();
  const auto dec = decompose_sigma_finite(OrbitSigmaFinite({{0, q(1)}, {1, q(2)}, {3, q(1, 3)}}), f);
  const auto same = reweight_decomposition(dec, [](std::size_t) { return q(1); });
  EXPECT_EQ(same.serialize(), dec.serialize());
  const auto doubled = reweight_decomposition(dec, [](std::size_t) { return q(2); });
  for (std::size_t j = 0; j < dec.components.size(); ++j) {
    EXPECT_EQ(doubled.components[j].weight, 2 * dec.components[j].weight);
    EXPECT_EQ(doubled.components[j].scale, dec.components[j].scale / 2);
  }
  EXPECT_EQ(doubled.barycenter(), dec.barycenter());

  RandomStream rng(6);
  for (int t = 0; t < 100; ++t) {
    std::map<std::size_t, Rational> phi;
    for (std::size_t k : {0, 1, 3}) phi[k] = q(1 + static_cast<long>(rng.uniform_below(30)), 1 + static_cast<long>(rng.uniform_below(30)));
    const auto re = reweight_decomposition(dec, [&](std::size_t k) { return phi.at(k); });
    EXPECT_EQ(pcl(re), pcl(dec));
    EXPECT_EQ(re.barycenter(), dec.barycenter());
  }
  EXPECT_THROW(reweight_decomposition(dec, [](std::size_t) { return q(0); }), ConfigError);
}

TEST(PCL, DescriptorsMatchMeasureRelations) {
  const auto f = make_fibrewise_f();
  const OrbitSigmaFinite a({{1, q(1)}, {2, q(1)}});
  const OrbitSigmaFinite b({{2, q(1)}, {3, q(4)}});
  EXPECT_EQ(pcl(a, f), pcl(a.scaled(q(3)), f));
  EXPECT_EQ(pcl(a, f).relation_to(pcl(b, f)), AcRelation::neither);
  EXPECT_EQ(pcl(a, f).relation_to(pcl(b, f)), ac_check(a, b));
  const auto one = OrbitSigmaFinite::single_orbit(1);
  const auto two = OrbitSigmaFinite::single_orbit(2);
  EXPECT_EQ(pcl(one, f).relation_to(pcl(two, f)), AcRelation::mutually_singular);
  EXPECT_EQ(pcl(one, f).relation_to(pcl(a, f)), AcRelation::absolutely_continuous);

  RandomStream rng(12);
  for (int t = 0; t < 50; ++t) {
    const auto n1 = random_orbit_model(rng);
    const auto n2 = random_orbit_model(rng);
    EXPECT_EQ(pcl(n1, f).relation_to(pcl(n2, f)), ac_check(n1, n2));
  }
}

TEST(ComponentSplitTest, FiniteAndInfiniteParts) {
  const auto only_zero = classify_components(OrbitSigmaFinite::single_orbit(0, q(2)));
  EXPECT_TRUE(only_zero.infinite_part.weights().empty());
  const OrbitSigmaFinite nu({{0, q(1)}, {1, q(2)}, {4, q(1, 2)}});
  const auto split = classify_components(nu);
  EXPECT_EQ(split.finite_part.support(), (std::set<std::size_t>{0}));
  EXPECT_EQ(split.infinite_part.support(), (std::set<std::size_t>{1, 4}));
  EXPECT_EQ(split.sum(), nu);
  // Parts are unions of orbits, hence invariant.
  RandomStream rng(1);
  for (int t = 0; t < 20; ++t) {
    BinaryConfig x(8);
    for (Index i = 1; i <= 8; ++i) x.set(i, rng.bernoulli(0.3));
    const auto y = act(haar_sample(ChainLevel(8), rng), x);
    EXPECT_EQ(split.infinite_part.atom(x) > 0, split.infinite_part.atom(y) > 0);
    EXPECT_EQ(split.finite_part.atom(x) > 0, split.finite_part.atom(y) > 0);
  }
}

TEST(Orbital, ExactValues) {
  const auto constant = OrbitalMeasure::exact(BinaryConfig::parse("111100"), 4);
  EXPECT_EQ(constant.atoms(), AtomicMeasure<Rational>::dirac(BinaryConfig::parse("111100")));
  const auto x = BinaryConfig::parse("10110000");
  const auto phi = TestFunction<double>::monomial({1});
  for (std::size_t n = 4; n <= 8; ++n) {
    const auto eta = OrbitalMeasure::exact(x, n);
    EXPECT_EQ(eta.atoms().mass(Cylinder().pin(1, 1)), q(3, static_cast<long>(n)));
    EXPECT_DOUBLE_EQ(eta.integrate(phi).value, 3.0 / static_cast<double>(n));
  }
  EXPECT_THROW(OrbitalMeasure::exact(BinaryConfig(12), 9), CapacityError);
}

TEST(Orbital, MonteCarloReplaysAndMatchesLLN) {
  RandomStream rng(77);
  BinaryConfig x(4096);
  for (Index i = 1; i <= 4096; ++i) x.set(i, rng.bernoulli(0.5));
  const auto eta = OrbitalMeasure::monte_carlo(x, 4096, 4000, 5);
  const auto phi = TestFunction<double>::monomial({1});
  const auto a = eta.integrate(phi);
  EXPECT_NEAR(a.value, 0.5, 0.03);
  EXPECT_EQ(a.method, Method::monte_carlo);
  EXPECT_GT(a.std_error, 0.0);
  EXPECT_EQ(eta.integrate(phi).value, a.value);
}

TEST(Orbital, DichotomyVerdicts) {
  BinaryConfig all_ones(1024);
  for (Index i = 1; i <= 1024; ++i) all_ones.set(i, 1);
  const auto ones = orbital_dichotomy(all_ones, {256, 512, 1024});
  EXPECT_EQ(ones.verdict, OrbitalVerdict::converges);

  const auto three = ones_at({1, 2, 3}, 1000);
  const auto esc = orbital_dichotomy(three, {1, 2, 4, 8, 125, 250, 500, 1000});
  EXPECT_EQ(esc.verdict, OrbitalVerdict::escapes_mass) << esc.diagnostic;
  for (std::size_t l = 0; l < 4; ++l) {
    const double n = static_cast<double>(esc.levels[l][0].level);
    EXPECT_DOUBLE_EQ(esc.levels[l][0].value, std::min(1.0, 3.0 / n));
  }

  RandomStream rng(21);
  BinaryConfig typical(4096);
  for (Index i = 1; i <= 4096; ++i) typical.set(i, rng.bernoulli(0.3));
  const auto conv = orbital_dichotomy(typical, {1024, 2048, 4096});
  EXPECT_EQ(conv.verdict, OrbitalVerdict::converges) << conv.diagnostic;
  const auto& last = conv.levels.back();
  const std::vector<double> moments = {0.3, 0.3, 0.3, 0.09, 0.09, 0.09, 0.027};
  for (std::size_t j = 0; j < last.size(); ++j) {
    EXPECT_NEAR(last[j].value, moments[j], 0.01 + 3 * last[j].std_error) << j;
  }
  EXPECT_EQ(conv.to_csv().substr(0, 34), "level,function,value,stderr,method");
}

}  // namespace
}  // namespace ergodec
