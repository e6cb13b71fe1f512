#ifndef ERGODEC_KOLMOGOROV_HPP
#define ERGODEC_KOLMOGOROV_HPP

#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "ergodec/cocycle.hpp"
#include "ergodec/error.hpp"
#include "ergodec/group.hpp"
#include "ergodec/measures.hpp"
#include "ergodec/parallel.hpp"
#include "ergodec/random.hpp"
#include "ergodec/rational.hpp"
#include "ergodec/stats.hpp"

namespace ergodec {

// Orbits of the group of all bijections of N on {0,1}^N.
enum class OrbitFamily { finite_ones, finite_zeros, both_infinite };

struct FullGroupOrbitLabel {
  OrbitFamily family = OrbitFamily::both_infinite;
  std::size_t count = 0;  // number of ones (finite_ones) or zeros (finite_zeros)

  static FullGroupOrbitLabel finite_ones(std::size_t k) { return {OrbitFamily::finite_ones, k}; }
  static FullGroupOrbitLabel finite_zeros(std::size_t k) { return {OrbitFamily::finite_zeros, k}; }
  static FullGroupOrbitLabel both_infinite() { return {OrbitFamily::both_infinite, 0}; }

  std::string to_string() const {
    switch (family) {
      case OrbitFamily::finite_ones: return "(" + std::to_string(count) + " ones, cofinitely zeros)";
      case OrbitFamily::finite_zeros: return "(cofinitely ones, " + std::to_string(count) + " zeros)";
      case OrbitFamily::both_infinite: return "(inf ones, inf zeros)";
    }
    return "?";
  }

  friend auto operator<=>(const FullGroupOrbitLabel&, const FullGroupOrbitLabel&) = default;
};

/// Symbolic description of an infinite 0-1 sequence.
struct SequenceDescription {
  std::optional<std::size_t> eventually_zero_ones;  // eventually 0, with this many ones
  std::optional<std::size_t> eventually_one_zeros;  // eventually 1, with this many zeros
  std::optional<double> typical_density;             // typical for B(p), 0 < p < 1

  static SequenceDescription eventually_zero(std::size_t ones) { return {ones, std::nullopt, std::nullopt}; }
  static SequenceDescription eventually_one(std::size_t zeros) { return {std::nullopt, zeros, std::nullopt}; }
  static SequenceDescription typical(double p) { return {std::nullopt, std::nullopt, p}; }

  // A finite window padded with zeros.
  static SequenceDescription zero_padded(const BinaryConfig& x) { return eventually_zero(x.count_ones()); }
};

inline FullGroupOrbitLabel orbit_class(const SequenceDescription& d) {
  const int given = d.eventually_zero_ones.has_value() + d.eventually_one_zeros.has_value() +
                    d.typical_density.has_value();
  if (given != 1) throw ConfigError("ambiguous sequence description: exactly one form must be given");
  if (d.eventually_zero_ones) return FullGroupOrbitLabel::finite_ones(*d.eventually_zero_ones);
  if (d.eventually_one_zeros) return FullGroupOrbitLabel::finite_zeros(*d.eventually_one_zeros);
  const double p = *d.typical_density;
  if (!(p > 0.0 && p < 1.0)) {
    throw ConfigError("ambiguous sequence description: typical density must lie strictly between 0 and 1");
  }
  return FullGroupOrbitLabel::both_infinite();
}

/// Finite or cofinite subset of the natural numbers.
class CountSet {
 public:
  static CountSet none() { return CountSet(false, {}); }
  static CountSet all() { return CountSet(true, {}); }
  static CountSet finite(std::set<std::size_t> s) { return CountSet(false, std::move(s)); }
  static CountSet cofinite(std::set<std::size_t> excluded) { return CountSet(true, std::move(excluded)); }

  bool contains(std::size_t k) const { return cofinite_ != (listed_.count(k) > 0); }
  bool is_cofinite() const { return cofinite_; }
  bool is_empty() const { return !cofinite_ && listed_.empty(); }
  bool is_everything() const { return cofinite_ && listed_.empty(); }

  CountSet complement() const { return CountSet(!cofinite_, listed_); }

  CountSet unite(const CountSet& o) const {
    if (!cofinite_ && !o.cofinite_) return finite(merge(listed_, o.listed_));
    if (cofinite_ && o.cofinite_) return cofinite(common(listed_, o.listed_));
    const auto& fin = cofinite_ ? o.listed_ : listed_;
    const auto& excl = cofinite_ ? listed_ : o.listed_;
    std::set<std::size_t> out;
    for (auto k : excl) {
      if (!fin.count(k)) out.insert(k);
    }
    return cofinite(out);
  }

  CountSet intersect(const CountSet& o) const { return complement().unite(o.complement()).complement(); }

  bool subset_of(const CountSet& o) const { return intersect(o.complement()).is_empty(); }

  std::string to_string() const {
    std::string s = cofinite_ ? "N\\{" : "{";
    for (auto it = listed_.begin(); it != listed_.end(); ++it) s += (it == listed_.begin() ? "" : ",") + std::to_string(*it);
    return s + "}";
  }

  friend bool operator==(const CountSet&, const CountSet&) = default;

 private:
  CountSet(bool cofinite, std::set<std::size_t> listed) : cofinite_(cofinite), listed_(std::move(listed)) {}

  static std::set<std::size_t> merge(const std::set<std::size_t>& a, const std::set<std::size_t>& b) {
    std::set<std::size_t> out = a;
    out.insert(b.begin(), b.end());
    return out;
  }
  static std::set<std::size_t> common(const std::set<std::size_t>& a, const std::set<std::size_t>& b) {
    std::set<std::size_t> out;
    for (auto k : a) {
      if (b.count(k)) out.insert(k);
    }
    return out;
  }

  bool cofinite_;
  std::set<std::size_t> listed_;
};

/// Union of full-group orbits, hence invariant under every bijection.
struct InvariantSetFullGroup {
  CountSet finite_ones = CountSet::none();
  CountSet finite_zeros = CountSet::none();
  bool both_infinite = false;

  static InvariantSetFullGroup empty() { return {}; }
  static InvariantSetFullGroup everything() { return {CountSet::all(), CountSet::all(), true}; }
  static InvariantSetFullGroup of(const FullGroupOrbitLabel& label) {
    InvariantSetFullGroup s;
    switch (label.family) {
      case OrbitFamily::finite_ones: s.finite_ones = CountSet::finite({label.count}); break;
      case OrbitFamily::finite_zeros: s.finite_zeros = CountSet::finite({label.count}); break;
      case OrbitFamily::both_infinite: s.both_infinite = true; break;
    }
    return s;
  }

  bool contains(const FullGroupOrbitLabel& label) const {
    switch (label.family) {
      case OrbitFamily::finite_ones: return finite_ones.contains(label.count);
      case OrbitFamily::finite_zeros: return finite_zeros.contains(label.count);
      case OrbitFamily::both_infinite: return both_infinite;
    }
    return false;
  }

  InvariantSetFullGroup complement() const {
    return {finite_ones.complement(), finite_zeros.complement(), !both_infinite};
  }
  InvariantSetFullGroup unite(const InvariantSetFullGroup& o) const {
    return {finite_ones.unite(o.finite_ones), finite_zeros.unite(o.finite_zeros), both_infinite || o.both_infinite};
  }
  InvariantSetFullGroup intersect(const InvariantSetFullGroup& o) const {
    return {finite_ones.intersect(o.finite_ones), finite_zeros.intersect(o.finite_zeros),
            both_infinite && o.both_infinite};
  }
  bool subset_of(const InvariantSetFullGroup& o) const {
    return finite_ones.subset_of(o.finite_ones) && finite_zeros.subset_of(o.finite_zeros) &&
           (!both_infinite || o.both_infinite);
  }

  std::string to_string() const {
    return "ones" + finite_ones.to_string() + " zeros" + finite_zeros.to_string() +
           (both_infinite ? " +generic" : "");
  }

  friend bool operator==(const InvariantSetFullGroup&, const InvariantSetFullGroup&) = default;
};

struct InvariantSetMass {
  Rational value{0};
  std::string justification;
};

namespace detail {

// Parameters of the i.i.d. components of nu; rejects anything else.
inline std::vector<Rational> iid_parameters(const ProductBernoulli<Rational>& nu) {
  if (!nu.is_exchangeable()) throw ConfigError("full-group mass needs an i.i.d. Bernoulli product");
  return {nu.marginal(1, true)};
}

inline std::vector<Rational> iid_parameters(const Mixture<Rational>& nu) {
  std::vector<Rational> out;
  for (const auto& c : nu.components()) {
    const auto* prod = std::get_if<ProductBernoulli<Rational>>(&c);
    if (!prod) throw ConfigError("full-group mass needs non-atomic Bernoulli mixture components");
    const auto p = iid_parameters(*prod);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

}  // namespace detail

/**
 * Mass of a full-group invariant set under an i.i.d. Bernoulli product or a
 * mixture of such with parameters in (0,1). Every orbit other than the
 * generic one is countable and each of its points is null, so the mass is
 * 1 exactly when the set contains the generic orbit.
 */
template <typename M>
InvariantSetMass measure_of_invariant_set(const M& nu, const InvariantSetFullGroup& a) {
  std::string params;
  for (const auto& p : detail::iid_parameters(nu)) {
    if (!(p > 0 && p < 1)) throw ConfigError("Bernoulli parameter must lie strictly between 0 and 1");
    params += (params.empty() ? "" : ",") + format_rational(p);
  }
  InvariantSetMass out;
  out.value = a.both_infinite ? Rational(1) : Rational(0);
  out.justification = a.both_infinite
                          ? "contains the generic orbit; its complement is countable and atomless-null under p in {" +
                                params + "}"
                          : "countable union of countable orbits; null under p in {" + params + "}";
  return out;
}

struct KolmogorovOptions {
  Rational p_low{1, 5};
  Rational p_high{4, 5};
  std::size_t max_count = 3;  // atoms {k ones}, {k zeros} for k <= max_count, plus tails
  std::size_t window = 4096;
  std::size_t samples = 10000;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  double event_tolerance = 0.02;
};

struct KolmogorovReport {
  // (a) the symbolic invariant-set algebra
  std::size_t algebra_atoms = 0;
  std::size_t sets_checked = 0;
  bool zero_one = false;
  bool monotone = false;
  bool complement_additive = false;
  bool ergodic_for_full_group = false;
  // (b) the convex split
  Rational weight_low{0};
  Rational weight_high{0};
  bool split_reproduces_mixture = false;
  // (c) the finite-permutation contrast event {window frequency <= 1/2}
  double event_mass = 0.0;
  double event_stderr = 0.0;
  double misclassification_bound = 0.0;  // per-sample Hoeffding bound for the window surrogate
  double sampling_bound = 0.0;           // Hoeffding bound for |estimate - mean| >= tolerance
  bool event_within_tolerance = false;

  bool passed() const { return ergodic_for_full_group && split_reproduces_mixture && event_within_tolerance; }

  std::string narrative(const KolmogorovOptions& o) const {
    std::ostringstream s;
    s << "Mixture nu = 1/2 B(" << format_rational(o.p_low) << ") + 1/2 B(" << format_rational(o.p_high) << ").\n";
    s << "(a) Full bijection group: orbits are {k ones}, {k zeros} and the generic orbit. Checked all "
      << sets_checked << " unions of " << algebra_atoms << " atoms: every set has nu-mass 0 or 1 ("
      << (zero_one ? "yes" : "no") << "), masses monotone (" << (monotone ? "yes" : "no")
      << "), complements add to 1 (" << (complement_additive ? "yes" : "no")
      << "). Verdict: " << (ergodic_for_full_group ? "ergodic for the full group" : "NOT ergodic") << ".\n";
    s << "(b) nu splits as " << format_rational(weight_low) << " B(" << format_rational(o.p_low) << ") + "
      << format_rational(weight_high) << " B(" << format_rational(o.p_high)
      << "), two distinct invariant probability measures: nu is decomposable.\n";
    s << "(c) Finitely supported permutations: the exchangeable event {frequency <= 1/2} on window " << o.window
      << " has empirical mass " << format_double(event_mass) << " (stderr " << format_double(event_stderr)
      << ", " << o.samples << " samples); window misclassification bound " << format_double(misclassification_bound)
      << ", sampling bound P(|err| >= " << format_double(o.event_tolerance) << ") <= "
      << format_double(sampling_bound) << ". Verdict: " << (event_within_tolerance ? "mass 1/2" : "OUT OF TOLERANCE")
      << ", so nu is not ergodic for finitary permutations.\n";
    return s.str();
  }
};

inline KolmogorovReport demonstrate_kolmogorov(const KolmogorovOptions& o = {}) {
  KolmogorovReport r;
  const auto low = ProductBernoulli<Rational>::constant(o.p_low, 1);
  const auto high = ProductBernoulli<Rational>::constant(o.p_high, 1);
  const Mixture<Rational> nu({Rational(1, 2), Rational(1, 2)}, {low, high});

  // (a) atoms: {k ones} and {k zeros} for k <= K, the two tails and the generic orbit.
  std::vector<InvariantSetFullGroup> atoms;
  std::set<std::size_t> head;
  for (std::size_t k = 0; k <= o.max_count; ++k) {
    atoms.push_back(InvariantSetFullGroup::of(FullGroupOrbitLabel::finite_ones(k)));
    atoms.push_back(InvariantSetFullGroup::of(FullGroupOrbitLabel::finite_zeros(k)));
    head.insert(k);
  }
  atoms.push_back({CountSet::cofinite(head), CountSet::none(), false});
  atoms.push_back({CountSet::none(), CountSet::cofinite(head), false});
  atoms.push_back(InvariantSetFullGroup::of(FullGroupOrbitLabel::both_infinite()));
  r.algebra_atoms = atoms.size();
  if (atoms.size() > 24) throw CapacityError("symbolic algebra too large to exhaust");

  const std::uint64_t count = std::uint64_t{1} << atoms.size();
  std::vector<Rational> mass(count);
  std::vector<InvariantSetFullGroup> sets(count);
  r.zero_one = r.monotone = r.complement_additive = true;
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    InvariantSetFullGroup a;
    for (std::size_t b = 0; b < atoms.size(); ++b) {
      if ((mask >> b) & 1U) a = a.unite(atoms[b]);
    }
    sets[mask] = a;
    mass[mask] = measure_of_invariant_set(nu, a).value;
    r.zero_one &= mass[mask] == 0 || mass[mask] == 1;
  }
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    r.complement_additive &= mass[mask] + mass[(count - 1) ^ mask] == 1;
    r.complement_additive &= sets[mask].complement() == sets[(count - 1) ^ mask];
    for (std::size_t b = 0; b < atoms.size(); ++b) r.monotone &= mass[mask] <= mass[mask | (std::uint64_t{1} << b)];
  }
  r.sets_checked = count;
  r.ergodic_for_full_group = r.zero_one && r.monotone && r.complement_additive && sets[count - 1] == InvariantSetFullGroup::everything();

  // (b) the split, checked on all cylinders of depth <= 4 at a finite window.
  r.weight_low = nu.weights()[0];
  r.weight_high = nu.weights()[1];
  const auto low4 = ProductBernoulli<Rational>::constant(o.p_low, 4);
  const auto high4 = ProductBernoulli<Rational>::constant(o.p_high, 4);
  const Mixture<Rational> nu4({Rational(1, 2), Rational(1, 2)}, {low4, high4});
  r.split_reproduces_mixture = r.weight_low == Rational(1, 2) && r.weight_high == Rational(1, 2) && low4.params() != high4.params();
  for (const auto& c : cylinders_up_to(4)) {
    r.split_reproduces_mixture &= nu4.mass(c) == r.weight_low * low4.mass(c) + r.weight_high * high4.mass(c);
  }

  // (c) sample point i uses its own derived stream, independent of workers.
  const double pl = to_double(o.p_low);
  const double ph = to_double(o.p_high);
  std::vector<double> hits(o.samples);
  parallel_for(o.samples, o.workers, [&](std::size_t i) {
    RandomStream rng = RandomStream::derive(o.seed, i);
    const double p = rng.bernoulli(0.5) ? ph : pl;
    std::size_t ones = 0;
    for (std::size_t j = 0; j < o.window; ++j) ones += rng.bernoulli(p);
    hits[i] = 2 * ones <= o.window ? 1.0 : 0.0;
  });
  const double n = static_cast<double>(o.samples);
  r.event_mass = pairwise_sum(hits) / n;
  r.event_stderr = std::sqrt(r.event_mass * (1 - r.event_mass) / n);
  const double w = static_cast<double>(o.window);
  r.misclassification_bound =
      std::max(std::exp(-2 * w * (0.5 - pl) * (0.5 - pl)), std::exp(-2 * w * (ph - 0.5) * (ph - 0.5)));
  r.sampling_bound = std::min(1.0, 2 * std::exp(-2 * n * o.event_tolerance * o.event_tolerance));
  r.event_within_tolerance = std::abs(r.event_mass - 0.5) <= o.event_tolerance;
  return r;
}

enum class IndecomposableRelation { equal, mutually_singular, neither };

inline std::string to_string(IndecomposableRelation r) {
  switch (r) {
    case IndecomposableRelation::equal: return "equal";
    case IndecomposableRelation::mutually_singular: return "mutually-singular";
    case IndecomposableRelation::neither: return "neither";
  }
  return "?";
}

struct EquivalenceVerdict {
  IndecomposableRelation relation = IndecomposableRelation::neither;
  Rational ac_mass{0};        // mass of the part of nu1 absolutely continuous w.r.t. nu2
  Rational singular_mass{0};  // mass of the part of nu1 singular w.r.t. nu2
  std::string trace;
  std::optional<BinaryConfig> witness;  // a point charged by both when neither holds

  bool passed() const { return relation != IndecomposableRelation::neither; }
};

namespace detail {

template <typename S>
void require_cocycle_class(const AtomicMeasure<S>& nu, const Cocycle<S>& rho, const char* name) {
  for (const auto& [x, m] : nu.atoms()) {
    for (Index i = 1; i < nu.window(); ++i) {
      const auto tau = Permutation::transposition(i, i + 1);
      if (nu.atom(act(tau, x)) != rho(tau, x) * m) {
        throw ConfigError(std::string(name) + " does not have the given cocycle at " + x.to_string() +
                          " under " + tau.to_string());
      }
    }
  }
}

// Invariant sets on the window are unions of the count classes 0..N.
template <typename S>
void require_weakly_indecomposable(const AtomicMeasure<S>& nu, const char* name) {
  const std::size_t n = nu.window();
  std::vector<S> class_mass(n + 1, S(0));
  for (const auto& [x, m] : nu.atoms()) class_mass[x.count_ones()] += m;
  const S total = nu.total();
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << (n + 1)); ++mask) {
    S a(0);
    for (std::size_t k = 0; k <= n; ++k) {
      if ((mask >> k) & 1U) a += class_mass[k];
    }
    if (a != S(0) && a != total) {
      throw ConfigError(std::string(name) + " is not weakly indecomposable: an invariant set has mass " +
                        format_scalar(a) + " of " + format_scalar(total));
    }
  }
}

}  // namespace detail

/**
 * For weakly indecomposable probability measures nu1, nu2 with the same
 * cocycle rho on {0,1}^N (group S(N)), confirms that either nu1 = nu2 or
 * nu1 and nu2 are mutually singular, with the Lebesgue decomposition of nu1
 * relative to nu2 as the trace.
 */
template <typename S>
EquivalenceVerdict weak_strong_equivalence_check(const AtomicMeasure<S>& nu1, const AtomicMeasure<S>& nu2,
                                                 const Cocycle<S>& rho) {
  if (nu1.window() != nu2.window()) throw ConfigError("measures live on different windows");
  if (nu1.empty() || nu2.empty()) throw ZeroMassError("measures must be nonzero");
  const auto a = nu1.normalized();
  const auto b = nu2.normalized();
  detail::require_cocycle_class(a, rho, "nu1");
  detail::require_cocycle_class(b, rho, "nu2");
  detail::require_weakly_indecomposable(a, "nu1");
  detail::require_weakly_indecomposable(b, "nu2");

  EquivalenceVerdict v;
  const auto parts = jordan_decompose(a, b);
  v.ac_mass = parts.absolutely_continuous.total();
  v.singular_mass = parts.singular.total();
  if (a == b) {
    v.relation = IndecomposableRelation::equal;
  } else if (parts.absolutely_continuous.empty()) {
    v.relation = IndecomposableRelation::mutually_singular;
  } else {
    v.relation = IndecomposableRelation::neither;
    v.witness = parts.absolutely_continuous.atoms().begin()->first;
  }
  v.trace = "nu1 = ac part (mass " + format_scalar(v.ac_mass) + ") + singular part (mass " +
            format_scalar(v.singular_mass) + ") relative to nu2; relation " + to_string(v.relation);
  return v;
}

}  // namespace ergodec

#endif  // ERGODEC_KOLMOGOROV_HPP
