#ifndef ERGODEC_MEASURES_HPP
#define ERGODEC_MEASURES_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ergodec/error.hpp"
#include "ergodec/group.hpp"
#include "ergodec/random.hpp"
#include "ergodec/rational.hpp"

namespace ergodec {

/// Cylinder set: finitely many coordinates pinned to 0 or 1.
class Cylinder {
 public:
  Cylinder() = default;

  static Cylinder whole_space() { return {}; }

  Cylinder& pin(Index i, bool value) {
    auto it = std::lower_bound(
        pins_.begin(), pins_.end(), i,
        [](const std::pair<Index, std::uint8_t>& p, Index v) { return p.first < v; });
    if (it != pins_.end() && it->first == i) {
      if (it->second != value) {
        throw ConfigError("cylinder pins coordinate " + std::to_string(i) +
                          " to both 0 and 1");
      }
      return *this;
    }
    pins_.insert(it, {i, value ? 1 : 0});
    return *this;
  }

  std::span<const std::pair<Index, std::uint8_t>> pins() const { return pins_; }
  std::size_t ones() const {
    return static_cast<std::size_t>(std::count_if(
        pins_.begin(), pins_.end(), [](const auto& p) { return p.second == 1; }));
  }
  std::size_t zeros() const { return pins_.size() - ones(); }
  Index max_index() const { return pins_.empty() ? 0 : pins_.back().first; }

  bool contains(const BinaryConfig& x) const {
    for (auto [i, b] : pins_) {
      const std::uint8_t xi = i <= x.size() ? x.bit(i) : 0;
      if (xi != b) return false;
    }
    return true;
  }

  std::string to_string() const {
    if (pins_.empty()) return "{}";
    std::string s = "{";
    for (std::size_t k = 0; k < pins_.size(); ++k) {
      if (k) s += ",";
      s += "x" + std::to_string(pins_[k].first) + "=" + std::to_string(pins_[k].second);
    }
    return s + "}";
  }

 private:
  std::vector<std::pair<Index, std::uint8_t>> pins_;
};

/// All cylinders pinning a subset of {1..depth} (including the whole space).
inline std::vector<Cylinder> cylinders_up_to(std::size_t depth) {
  std::vector<Cylinder> out;
  std::uint64_t patterns = 1;
  for (std::size_t i = 0; i < depth; ++i) patterns *= 3;
  for (std::uint64_t code = 0; code < patterns; ++code) {
    Cylinder c;
    std::uint64_t rest = code;
    for (Index i = 1; i <= depth; ++i, rest /= 3) {
      if (rest % 3 != 2) c.pin(i, rest % 3 == 1);
    }
    out.push_back(std::move(c));
  }
  return out;
}

/// Nonnegative value that may be the symbolic +infinity.
struct ExtendedReal {
  Rational value{0};
  bool infinite = false;

  static ExtendedReal infinity() { return {Rational(0), true}; }

  friend ExtendedReal operator+(const ExtendedReal& a, const ExtendedReal& b) {
    if (a.infinite || b.infinite) return infinity();
    return {a.value + b.value, false};
  }
  friend bool operator==(const ExtendedReal& a, const ExtendedReal& b) {
    return a.infinite == b.infinite && (a.infinite || a.value == b.value);
  }
  std::string to_string() const { return infinite ? "inf" : format_rational(value); }
};

/// Finitely supported measure on the window {0,1}^N.
template <typename S>
class AtomicMeasure {
 public:
  using Scalar = S;

  explicit AtomicMeasure(std::size_t window = 0) : window_(window) {}

  static AtomicMeasure dirac(const BinaryConfig& x) {
    AtomicMeasure m(x.size());
    m.add(x, S(1));
    return m;
  }

  // Uniform probability on the given points (duplicates accumulate).
  static AtomicMeasure uniform(const std::vector<BinaryConfig>& points) {
    if (points.empty()) throw ConfigError("uniform measure needs at least one point");
    AtomicMeasure m(points.front().size());
    const S w = S(1) / S(static_cast<long>(points.size()));
    for (const auto& p : points) m.add(p, w);
    return m;
  }

  void add(const BinaryConfig& x, const S& mass) {
    if (window_ == 0) window_ = x.size();
    if (x.size() != window_) throw ConfigError("atom length differs from window");
    if (mass < S(0)) throw ConfigError("atom masses must be nonnegative");
    if (mass == S(0)) return;
    atoms_[x] += mass;
  }

  S atom(const BinaryConfig& x) const {
    auto it = atoms_.find(x);
    return it == atoms_.end() ? S(0) : it->second;
  }

  S total() const {
    S t(0);
    for (const auto& [x, m] : atoms_) t += m;
    return t;
  }

  S mass(const Cylinder& a) const {
    S t(0);
    for (const auto& [x, m] : atoms_) {
      if (a.contains(x)) t += m;
    }
    return t;
  }

  template <typename Pred>
  S mass_where(Pred&& in_set) const {
    S t(0);
    for (const auto& [x, m] : atoms_) {
      if (in_set(x)) t += m;
    }
    return t;
  }

  AtomicMeasure normalized() const {
    const S t = total();
    if (t == S(0)) throw ZeroMassError("cannot normalize the zero measure");
    return scaled(S(1) / t);
  }

  AtomicMeasure scaled(const S& factor) const {
    AtomicMeasure out(window_);
    for (const auto& [x, m] : atoms_) out.add(x, m * factor);
    return out;
  }

  AtomicMeasure restricted(const std::set<BinaryConfig>& points) const {
    AtomicMeasure out(window_);
    for (const auto& [x, m] : atoms_) {
      if (points.count(x)) out.add(x, m);
    }
    return out;
  }

  std::set<BinaryConfig> support() const {
    std::set<BinaryConfig> s;
    for (const auto& [x, m] : atoms_) s.insert(x);
    return s;
  }

  const std::map<BinaryConfig, S>& atoms() const { return atoms_; }
  std::size_t window() const { return window_; }
  bool empty() const { return atoms_.empty(); }

  BinaryConfig sample(RandomStream& rng) const {
    if (atoms_.empty()) throw ZeroMassError("cannot sample from the zero measure");
    const double total_mass = to_double(total());
    double u = rng.uniform01() * total_mass;
    for (const auto& [x, m] : atoms_) {
      u -= to_double(m);
      if (u < 0) return x;
    }
    return atoms_.rbegin()->first;
  }

  // "atomic window=N atoms=K" followed by one "bits mass" line per atom,
  // atoms in lexicographic order of their bit strings.
  std::string serialize() const {
    std::ostringstream os;
    os << "atomic window=" << window_ << " atoms=" << atoms_.size() << "\n";
    std::vector<std::pair<std::string, std::string>> lines;
    for (const auto& [x, m] : atoms_) lines.emplace_back(x.to_string(), format_scalar(m));
    std::sort(lines.begin(), lines.end());
    for (const auto& [bits, m] : lines) os << bits << " " << m << "\n";
    return os.str();
  }

  friend bool operator==(const AtomicMeasure& a, const AtomicMeasure& b) {
    return a.window_ == b.window_ && a.atoms_ == b.atoms_;
  }

  friend AtomicMeasure operator+(const AtomicMeasure& a, const AtomicMeasure& b) {
    AtomicMeasure out = a;
    for (const auto& [x, m] : b.atoms_) out.add(x, m);
    return out;
  }

 private:
  std::size_t window_;
  std::map<BinaryConfig, S> atoms_;
};

/// Independent coordinates with P(x_i = 1) = p_i, each p_i in (0,1).
template <typename S>
class ProductBernoulli {
 public:
  using Scalar = S;

  explicit ProductBernoulli(std::vector<S> params) : params_(std::move(params)) {
    if (params_.empty()) throw ConfigError("product measure needs a window");
    for (const auto& p : params_) {
      if (!(p > S(0) && p < S(1))) {
        throw ConfigError("Bernoulli parameters must lie strictly inside (0,1)");
      }
    }
  }

  static ProductBernoulli constant(const S& p, std::size_t window) {
    return ProductBernoulli(std::vector<S>(window, p));
  }

  std::size_t window() const { return params_.size(); }
  const std::vector<S>& params() const { return params_; }
  const S& param(Index i) const { return params_[i - 1]; }

  bool is_exchangeable() const {
    return std::all_of(params_.begin(), params_.end(),
                       [&](const S& p) { return p == params_.front(); });
  }

  S marginal(Index i, bool value) const {
    return value ? params_[i - 1] : S(1) - params_[i - 1];
  }

  S atom(const BinaryConfig& x) const {
    check_window(x);
    S m(1);
    for (Index i = 1; i <= x.size(); ++i) m *= marginal(i, x.bit(i));
    return m;
  }

  S mass(const Cylinder& a) const {
    S m(1);
    for (auto [i, b] : a.pins()) {
      if (i > window()) throw ConfigError("cylinder pins a coordinate outside the window");
      m *= marginal(i, b);
    }
    return m;
  }

  // nu(T_g x) / nu(x): only coordinates moved by g contribute.
  S rn_derivative(const Permutation& g, const BinaryConfig& x) const {
    check_window(x);
    if (g.degree() > x.size()) {
      throw DegreeOverflowError("permutation moves indices beyond the window");
    }
    S num(1);
    S den(1);
    for (auto [p, q] : g.moved()) {
      num *= marginal(q, x.bit(p));
      den *= marginal(q, x.bit(q));
    }
    return num / den;
  }

  BinaryConfig sample(RandomStream& rng) const {
    BinaryConfig x(window());
    for (Index i = 1; i <= window(); ++i) x.set(i, rng.bernoulli(to_double(params_[i - 1])));
    return x;
  }

  AtomicMeasure<S> to_atomic() const {
    if (window() > 20) throw CapacityError("window too large to tabulate atoms");
    AtomicMeasure<S> m(window());
    for (std::uint64_t code = 0; code < (std::uint64_t{1} << window()); ++code) {
      const auto x = BinaryConfig::from_index(code, window());
      m.add(x, atom(x));
    }
    return m;
  }

  std::string serialize() const {
    std::string s = "product window=" + std::to_string(window()) + "\np";
    for (const auto& p : params_) s += " " + format_scalar(p);
    return s + "\n";
  }

 private:
  void check_window(const BinaryConfig& x) const {
    if (x.size() != window()) throw ConfigError("configuration length differs from window");
  }
  std::vector<S> params_;
};

/**
 * Exchangeable (Polya-type) measure: p ~ Beta(alpha, beta), then x ~ B(p)^N.
 *
 * Cylinder masses are the Beta moments E[p^a (1-p)^b], exact for rational
 * shape parameters.
 */
class BetaBernoulliMixture {
 public:
  BetaBernoulliMixture(Rational alpha, Rational beta, std::size_t window)
      : alpha_(std::move(alpha)), beta_(std::move(beta)), window_(window) {
    if (alpha_ <= 0 || beta_ <= 0) throw ConfigError("Beta shape parameters must be positive");
  }

  std::size_t window() const { return window_; }
  const Rational& alpha() const { return alpha_; }
  const Rational& beta() const { return beta_; }

  Rational moment(std::size_t ones, std::size_t zeros) const {
    Rational m(1);
    for (std::size_t i = 0; i < ones; ++i) m *= alpha_ + i;
    for (std::size_t j = 0; j < zeros; ++j) m *= beta_ + j;
    for (std::size_t l = 0; l < ones + zeros; ++l) m /= alpha_ + beta_ + l;
    return m;
  }

  Rational mass(const Cylinder& a) const { return moment(a.ones(), a.zeros()); }
  Rational atom(const BinaryConfig& x) const {
    return moment(x.count_ones(), x.size() - x.count_ones());
  }
  bool is_exchangeable() const { return true; }

  BinaryConfig sample(RandomStream& rng, double* mixing_draw = nullptr) const {
    const double p = rng.beta(to_double(alpha_), to_double(beta_));
    if (mixing_draw) *mixing_draw = p;
    BinaryConfig x(window_);
    for (Index i = 1; i <= window_; ++i) x.set(i, rng.bernoulli(p));
    return x;
  }

  std::string serialize() const {
    return "beta-bernoulli window=" + std::to_string(window_) +
           "\nalpha " + format_rational(alpha_) + "\nbeta " + format_rational(beta_) + "\n";
  }

 private:
  Rational alpha_;
  Rational beta_;
  std::size_t window_;
};

template <typename S>
using MixtureComponent = std::variant<ProductBernoulli<S>, AtomicMeasure<S>>;

/// Convex combination sum_j w_j nu_j with w_j > 0, sum w_j = 1.
template <typename S>
class Mixture {
 public:
  using Scalar = S;

  Mixture(std::vector<S> weights, std::vector<MixtureComponent<S>> components)
      : weights_(std::move(weights)), components_(std::move(components)) {
    if (weights_.empty() || weights_.size() != components_.size()) {
      throw ConfigError("mixture needs one positive weight per component");
    }
    S sum(0);
    for (const auto& w : weights_) {
      if (!(w > S(0))) throw ConfigError("mixture weights must be positive");
      sum += w;
    }
    if constexpr (is_exact_v<S>) {
      if (sum != S(1)) throw ConfigError("mixture weights must sum to exactly 1");
    } else {
      if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("mixture weights must sum to 1");
    }
    window_ = std::visit([](const auto& c) { return c.window(); }, components_.front());
    for (const auto& c : components_) {
      if (std::visit([](const auto& m) { return m.window(); }, c) != window_) {
        throw ConfigError("mixture components must share one window");
      }
    }
  }

  std::size_t window() const { return window_; }
  const std::vector<S>& weights() const { return weights_; }
  const std::vector<MixtureComponent<S>>& components() const { return components_; }

  S mass(const Cylinder& a) const {
    S m(0);
    for (std::size_t j = 0; j < weights_.size(); ++j) {
      m += weights_[j] * std::visit([&](const auto& c) { return c.mass(a); }, components_[j]);
    }
    return m;
  }

  S atom(const BinaryConfig& x) const {
    S m(0);
    for (std::size_t j = 0; j < weights_.size(); ++j) {
      m += weights_[j] * std::visit([&](const auto& c) { return c.atom(x); }, components_[j]);
    }
    return m;
  }

  bool is_exchangeable() const {
    return std::all_of(components_.begin(), components_.end(), [](const auto& c) {
      const auto* p = std::get_if<ProductBernoulli<S>>(&c);
      return p && p->is_exchangeable();
    });
  }

  BinaryConfig sample(RandomStream& rng, std::size_t* label = nullptr) const {
    double u = rng.uniform01();
    std::size_t j = 0;
    for (; j + 1 < weights_.size(); ++j) {
      u -= to_double(weights_[j]);
      if (u < 0) break;
    }
    if (label) *label = j;
    return std::visit([&](const auto& c) { return c.sample(rng); }, components_[j]);
  }

  std::string serialize() const {
    std::string s = "mixture window=" + std::to_string(window_) +
                    " components=" + std::to_string(weights_.size()) + "\n";
    for (std::size_t j = 0; j < weights_.size(); ++j) {
      s += "weight " + format_scalar(weights_[j]) + "\n";
      s += std::visit([](const auto& c) { return c.serialize(); }, components_[j]);
    }
    return s;
  }

 private:
  std::vector<S> weights_;
  std::vector<MixtureComponent<S>> components_;
  std::size_t window_ = 0;
};

/**
 * Sigma-finite invariant measure on finitely supported 0-1 sequences.
 *
 * Orbit k (sequences with exactly k ones) carries c_k times counting
 * measure. Orbit 0 is the single all-zero sequence; every orbit k >= 1 is
 * countably infinite and is never materialized.
 */
class OrbitSigmaFinite {
 public:
  OrbitSigmaFinite() = default;
  explicit OrbitSigmaFinite(std::map<std::size_t, Rational> weights) {
    for (auto& [k, c] : weights) set_weight(k, c);
  }

  static OrbitSigmaFinite single_orbit(std::size_t k, Rational c = Rational(1)) {
    OrbitSigmaFinite m;
    m.set_weight(k, std::move(c));
    return m;
  }

  void set_weight(std::size_t k, const Rational& c) {
    if (c < 0) throw ConfigError("orbit weights must be nonnegative");
    if (c == 0) {
      weights_.erase(k);
    } else {
      weights_[k] = c;
    }
  }

  Rational weight(std::size_t k) const {
    auto it = weights_.find(k);
    return it == weights_.end() ? Rational(0) : it->second;
  }

  const std::map<std::size_t, Rational>& weights() const { return weights_; }

  static bool orbit_is_finite(std::size_t k) { return k == 0; }

  std::set<std::size_t> support() const {
    std::set<std::size_t> s;
    for (const auto& [k, c] : weights_) s.insert(k);
    return s;
  }

  // Mass of the single sequence whose ones are those of x (zeros beyond x).
  Rational atom(const BinaryConfig& x) const { return weight(x.count_ones()); }

  ExtendedReal mass(const Cylinder& a) const {
    ExtendedReal total;
    const std::size_t pinned_ones = a.ones();
    for (const auto& [k, c] : weights_) {
      if (k < pinned_ones) continue;
      // k - pinned_ones further ones go to infinitely many free coordinates.
      if (k > pinned_ones) return ExtendedReal::infinity();
      total.value += c;
    }
    return total;
  }

  OrbitSigmaFinite scaled(const Rational& factor) const {
    OrbitSigmaFinite out;
    for (const auto& [k, c] : weights_) out.set_weight(k, c * factor);
    return out;
  }

  std::string serialize() const {
    std::string s = "orbit-sigma-finite orbits=" + std::to_string(weights_.size()) + "\n";
    for (const auto& [k, c] : weights_) {
      s += "k=" + std::to_string(k) + " c=" + format_rational(c) +
           (orbit_is_finite(k) ? " orbit=finite\n" : " orbit=infinite\n");
    }
    return s;
  }

  friend bool operator==(const OrbitSigmaFinite&, const OrbitSigmaFinite&) = default;

 private:
  std::map<std::size_t, Rational> weights_;
};

template <typename M>
concept AtomMeasure = requires(const M& m, const BinaryConfig& x) { m.atom(x); };

/// nu(T_g x) / nu(x) from atom masses.
template <AtomMeasure M>
auto rn_derivative(const M& nu, const Permutation& g, const BinaryConfig& x) {
  const auto at_x = nu.atom(x);
  if (at_x == 0) throw ZeroMassError("Radon-Nikodym ratio at a point of zero mass: " + x.to_string());
  return nu.atom(act(g, x)) / at_x;
}

template <typename S>
S rn_derivative(const ProductBernoulli<S>& nu, const Permutation& g, const BinaryConfig& x) {
  return nu.rn_derivative(g, x);
}

template <typename S>
struct JordanParts {
  AtomicMeasure<S> absolutely_continuous;
  AtomicMeasure<S> singular;
};

/// Lebesgue decomposition of nu1 with respect to nu2 on atoms.
template <typename S>
JordanParts<S> jordan_decompose(const AtomicMeasure<S>& nu1, const AtomicMeasure<S>& nu2) {
  JordanParts<S> parts{AtomicMeasure<S>(nu1.window()), AtomicMeasure<S>(nu1.window())};
  for (const auto& [x, m] : nu1.atoms()) {
    (nu2.atom(x) > S(0) ? parts.absolutely_continuous : parts.singular).add(x, m);
  }
  return parts;
}

enum class AcRelation { absolutely_continuous, mutually_singular, neither };

inline std::string to_string(AcRelation r) {
  switch (r) {
    case AcRelation::absolutely_continuous: return "absolutely-continuous";
    case AcRelation::mutually_singular: return "mutually-singular";
    case AcRelation::neither: return "neither";
  }
  return "?";
}

template <typename T>
AcRelation support_relation(const std::set<T>& s1, const std::set<T>& s2) {
  if (std::includes(s2.begin(), s2.end(), s1.begin(), s1.end())) {
    return AcRelation::absolutely_continuous;
  }
  for (const auto& v : s1) {
    if (s2.count(v)) return AcRelation::neither;
  }
  return AcRelation::mutually_singular;
}

template <typename S>
AcRelation ac_check(const AtomicMeasure<S>& nu1, const AtomicMeasure<S>& nu2) {
  return support_relation(nu1.support(), nu2.support());
}

// Orbit measures are positive on every point of a charged orbit, so the
// relation is decided by the sets of charged orbit labels.
inline AcRelation ac_check(const OrbitSigmaFinite& nu1, const OrbitSigmaFinite& nu2) {
  return support_relation(nu1.support(), nu2.support());
}

}  // namespace ergodec

#endif  // ERGODEC_MEASURES_HPP
