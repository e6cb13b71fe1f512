#ifndef ERGODEC_COCYCLE_HPP
#define ERGODEC_COCYCLE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>

#include "ergodec/error.hpp"
#include "ergodec/group.hpp"
#include "ergodec/measures.hpp"
#include "ergodec/random.hpp"
#include "ergodec/rational.hpp"

namespace ergodec {

enum class CocycleKind { constant_one, radon_nikodym, from_weight, custom };

inline std::string to_string(CocycleKind k) {
  switch (k) {
    case CocycleKind::constant_one: return "constant-one";
    case CocycleKind::radon_nikodym: return "radon-nikodym";
    case CocycleKind::from_weight: return "from-weight";
    case CocycleKind::custom: return "custom";
  }
  return "?";
}

/**
 * Positive multiplicative cocycle rho(g, x) over the S(n) action on windows,
 * meant to satisfy rho(gh, x) = rho(g, T_h x) rho(h, x).
 *
 * Evaluation is lazy. `identically_one()` marks cocycles known to be 1 on
 * every input, which lets the Monte Carlo averager skip drawing whole
 * permutations. Fibrewise continuity (continuity of g -> rho(g, x)) holds
 * trivially for finite subgroups and is recorded as a declared property.
 */
template <typename S>
class Cocycle {
 public:
  using Scalar = S;
  using Eval = std::function<S(const Permutation&, const BinaryConfig&)>;

  Cocycle(Eval eval, CocycleKind kind, bool identically_one = false)
      : eval_(std::move(eval)), kind_(kind), identically_one_(identically_one) {}

  static Cocycle constant_one() {
    return Cocycle([](const Permutation&, const BinaryConfig&) { return S(1); },
                   CocycleKind::constant_one, true);
  }

  S operator()(const Permutation& g, const BinaryConfig& x) const { return eval_(g, x); }

  CocycleKind kind() const { return kind_; }
  bool identically_one() const { return identically_one_; }
  bool fibrewise_continuous() const { return true; }

 private:
  Eval eval_;
  CocycleKind kind_;
  bool identically_one_;
};

/// Floating-point view of an exact cocycle, for Monte Carlo use.
inline Cocycle<double> to_floating(const Cocycle<Rational>& rho) {
  return Cocycle<double>(
      [rho](const Permutation& g, const BinaryConfig& x) { return to_double(rho(g, x)); },
      rho.kind(), rho.identically_one());
}
inline Cocycle<double> to_floating(const Cocycle<double>& rho) { return rho; }

/// Strictly positive function on configurations.
template <typename S>
class WeightFunction {
 public:
  using Fn = std::function<S(const BinaryConfig&)>;

  explicit WeightFunction(Fn f, bool constant = false) : f_(std::move(f)), constant_(constant) {}

  static WeightFunction one() {
    return WeightFunction([](const BinaryConfig&) { return S(1); }, true);
  }

  S operator()(const BinaryConfig& x) const {
    S v = f_(x);
    if (!(v > S(0))) throw ConfigError("weight function must be strictly positive at " + x.to_string());
    return v;
  }

  bool is_constant() const { return constant_; }
  bool fibrewise_continuous() const { return true; }

 private:
  Fn f_;
  bool constant_;
};

/// rho_f(g, x) = f(T_g x) / f(x).
template <typename S>
Cocycle<S> make_rho_f(const WeightFunction<S>& f) {
  if (f.is_constant()) return Cocycle<S>::constant_one();
  return Cocycle<S>(
      [f](const Permutation& g, const BinaryConfig& x) {
        if (g.is_identity()) return S(1);
        return f(act(g, x)) / f(x);
      },
      CocycleKind::from_weight);
}

/// Radon-Nikodym cocycle of nu: rho(g, x) = nu(T_g x) / nu(x).
template <typename M>
auto make_rn(const M& nu) {
  using S = typename M::Scalar;
  bool trivial = false;
  if constexpr (requires { nu.is_exchangeable(); }) trivial = nu.is_exchangeable();
  return Cocycle<S>(
      [nu](const Permutation& g, const BinaryConfig& x) -> S { return rn_derivative(nu, g, x); },
      CocycleKind::radon_nikodym, trivial);
}

struct CocycleWitness {
  Permutation g;
  Permutation h;
  BinaryConfig x;
  std::string lhs;
  std::string rhs;
};

struct IdentityReport {
  std::size_t trials = 0;
  std::size_t violations = 0;
  std::size_t positivity_failures = 0;
  bool exact = true;
  double max_relative_error = 0.0;
  std::optional<CocycleWitness> first_violation;

  bool passed() const { return violations == 0 && positivity_failures == 0; }
};

/**
 * Checks rho(gh, x) = rho(g, T_h x) rho(h, x) on random triples with g, h
 * Haar-distributed in S(n) and x uniform on {0,1}^window.
 *
 * Exact scalars are compared for equality. Floating scalars count as a
 * violation when the relative error exceeds `relative_tolerance`.
 */
template <typename S>
IdentityReport verify_identity(const Cocycle<S>& rho, std::size_t trials, ChainLevel level,
                               std::size_t window, RandomStream& rng,
                               double relative_tolerance = 1e-12) {
  if (level.n > window) throw DegreeOverflowError("chain level exceeds the window");
  IdentityReport report;
  report.exact = is_exact_v<S>;
  for (std::size_t t = 0; t < trials; ++t) {
    const Permutation g = haar_sample(level, rng);
    const Permutation h = haar_sample(level, rng);
    BinaryConfig x(window);
    for (Index i = 1; i <= window; ++i) x.set(i, rng.bernoulli(0.5));

    const S lhs = rho(compose(g, h), x);
    const S rho_h = rho(h, x);
    const S rhs = rho(g, act(h, x)) * rho_h;
    ++report.trials;

    if (!(lhs > S(0)) || !(rho_h > S(0))) ++report.positivity_failures;
    bool violated;
    if constexpr (is_exact_v<S>) {
      violated = lhs != rhs;
    } else {
      const double scale = std::max(std::abs(lhs), std::abs(rhs));
      const double rel = scale > 0 ? std::abs(lhs - rhs) / scale : 0.0;
      report.max_relative_error = std::max(report.max_relative_error, rel);
      violated = rel > relative_tolerance;
    }
    if (violated) {
      ++report.violations;
      if (!report.first_violation) {
        report.first_violation =
            CocycleWitness{g, h, x, format_scalar(lhs), format_scalar(rhs)};
      }
    }
  }
  return report;
}

}  // namespace ergodec

#endif  // ERGODEC_COCYCLE_HPP
