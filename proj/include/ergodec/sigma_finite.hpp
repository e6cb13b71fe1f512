#ifndef ERGODEC_SIGMA_FINITE_HPP
#define ERGODEC_SIGMA_FINITE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ergodec/averaging.hpp"
#include "ergodec/cocycle.hpp"
#include "ergodec/decomposition.hpp"
#include "ergodec/error.hpp"
#include "ergodec/group.hpp"
#include "ergodec/measures.hpp"
#include "ergodec/random.hpp"
#include "ergodec/rational.hpp"

namespace ergodec {

/**
 * Positive weight on finitely supported 0-1 sequences with closed-form
 * orbit sums. Either f = 1, or f(x) = prod_{x_i = 1} base^{-i}.
 *
 * For the geometric weight with q = 1 / base, the sum of f over the orbit
 * of sequences with k ones is q^{k(k+1)/2} / prod_{j=1..k} (1 - q^j).
 */
class OrbitWeight {
 public:
  static OrbitWeight constant_one() { return OrbitWeight(std::nullopt); }

  static OrbitWeight geometric(const Rational& base) {
    if (!(base > 1)) throw ConfigError("geometric weight base must exceed 1");
    return OrbitWeight(base);
  }

  bool is_constant() const { return !base_; }
  const std::optional<Rational>& base() const { return base_; }

  Rational operator()(const BinaryConfig& x) const {
    if (!base_) return Rational(1);
    const Rational q = 1 / *base_;
    Rational out(1);
    Rational qi(1);
    for (Index i = 1; i <= x.size(); ++i) {
      qi *= q;
      if (x.bit(i)) out *= qi;
    }
    return out;
  }

  // Sum of f over orbit k; nullopt when the series diverges.
  std::optional<Rational> orbit_mass(std::size_t k) const {
    if (k == 0) return Rational(1);
    if (!base_) return std::nullopt;
    const Rational q = 1 / *base_;
    Rational num(1);
    Rational den(1);
    Rational qj(1);
    for (std::size_t j = 1; j <= k; ++j) {
      qj *= q;
      den *= 1 - qj;
      for (std::size_t t = 0; t < j; ++t) num *= q;
    }
    return num / den;
  }

  WeightFunction<Rational> weight_function() const {
    const OrbitWeight self = *this;
    return WeightFunction<Rational>([self](const BinaryConfig& x) { return self(x); }, is_constant());
  }

  std::string to_string() const { return base_ ? "geometric base=" + format_rational(*base_) : "one"; }

  friend bool operator==(const OrbitWeight&, const OrbitWeight&) = default;

 private:
  explicit OrbitWeight(std::optional<Rational> base) : base_(std::move(base)) {}
  std::optional<Rational> base_;
};

/// f(x) = prod_{x_i = 1} 4^{-i}: positive and summable over every orbit.
inline OrbitWeight make_fibrewise_f() { return OrbitWeight::geometric(Rational(4)); }

/// nu(f) = sum_k c_k (orbit-k f-mass); throws DivergenceError when infinite.
inline Rational integrate(const OrbitSigmaFinite& nu, const OrbitWeight& f) {
  Rational total(0);
  for (const auto& [k, c] : nu.weights()) {
    const auto m = f.orbit_mass(k);
    if (!m) {
      throw DivergenceError("nu(f) diverges: orbit " + std::to_string(k) + " is infinite and f = " +
                            f.to_string());
    }
    total += c * *m;
  }
  return total;
}

/**
 * P_f(nu) = f nu / nu(f) for an orbit-counting measure nu. Atom and
 * cylinder masses are exact rationals.
 */
class OrbitProbability {
 public:
  OrbitProbability(OrbitSigmaFinite nu, OrbitWeight f) : nu_(std::move(nu)), f_(std::move(f)) {
    normalizer_ = integrate(nu_, f_);
    if (!(normalizer_ > 0)) throw ZeroMassError("nu(f) = 0");
  }

  const OrbitSigmaFinite& base_measure() const { return nu_; }
  const OrbitWeight& weight() const { return f_; }
  const Rational& normalizer() const { return normalizer_; }

  // Mass of the finitely supported sequence whose ones are those of x.
  Rational atom(const BinaryConfig& x) const { return nu_.atom(x) * f_(x) / normalizer_; }

  Rational mass(const Cylinder& a) const {
    Rational total(0);
    for (const auto& [k, c] : nu_.weights()) total += c * orbit_cylinder_mass(k, a);
    return total / normalizer_;
  }

  std::string serialize() const {
    return "orbit-probability f=" + f_.to_string() + " normalizer=" + format_rational(normalizer_) + "\n" +
           nu_.serialize();
  }

 private:
  // Sum of f over sequences with k ones lying in the cylinder a.
  Rational orbit_cylinder_mass(std::size_t k, const Cylinder& a) const {
    const std::size_t pinned_ones = a.ones();
    if (k < pinned_ones) return Rational(0);
    const std::size_t free_ones = k - pinned_ones;
    const std::size_t d = a.max_index();
    if (f_.is_constant()) {
      if (free_ones > 0) throw DivergenceError("cylinder mass diverges for f = 1");
      return Rational(1);
    }
    const Rational q = 1 / *f_.base();
    // Elementary symmetric polynomials of q^i over the free coordinates in 1..d.
    std::vector<Rational> e(free_ones + 1, Rational(0));
    e[0] = 1;
    Rational pinned(1);
    Rational qi(1);
    std::size_t next_pin = 0;
    const auto pins = a.pins();
    for (Index i = 1; i <= d; ++i) {
      qi *= q;
      if (next_pin < pins.size() && pins[next_pin].first == i) {
        if (pins[next_pin].second) pinned *= qi;
        ++next_pin;
        continue;
      }
      for (std::size_t j = free_ones; j >= 1; --j) e[j] += e[j - 1] * qi;
    }
    // Coordinates d+1, d+2, ...: the j-subset sum is q^{d j} m_j.
    Rational total(0);
    for (std::size_t j = 0; j <= free_ones; ++j) {
      Rational shift(1);
      for (std::size_t t = 0; t < d * (free_ones - j); ++t) shift *= q;
      total += e[j] * shift * *f_.orbit_mass(free_ones - j);
    }
    return pinned * total;
  }

  OrbitSigmaFinite nu_;
  OrbitWeight f_;
  Rational normalizer_;
};

inline OrbitProbability p_f(const OrbitSigmaFinite& nu, const OrbitWeight& f) { return OrbitProbability(nu, f); }

/// f nu / nu(f) for a finitely supported measure.
inline AtomicMeasure<Rational> p_f(const AtomicMeasure<Rational>& nu, const OrbitWeight& f) {
  AtomicMeasure<Rational> out(nu.window());
  for (const auto& [x, m] : nu.atoms()) out.add(x, m * f(x));
  if (out.empty()) throw ZeroMassError("nu(f) = 0");
  return out.normalized();
}

/**
 * Class of a measure up to a positive scalar. The stored representative is
 * normalized to nu(f) = 1 for the declared f (total mass 1 when f = 1).
 */
class ProjectiveClass {
 public:
  using Representative = std::variant<OrbitSigmaFinite, AtomicMeasure<Rational>>;

  static ProjectiveClass of(const OrbitSigmaFinite& nu, const OrbitWeight& f) {
    const Rational z = integrate(nu, f);
    if (!(z > 0)) throw ZeroMassError("cannot normalize the zero measure");
    return ProjectiveClass(nu.scaled(1 / z), f);
  }

  static ProjectiveClass of(const AtomicMeasure<Rational>& nu, const OrbitWeight& f) {
    Rational z(0);
    for (const auto& [x, m] : nu.atoms()) z += m * f(x);
    if (!(z > 0)) throw ZeroMassError("cannot normalize the zero measure");
    return ProjectiveClass(nu.scaled(1 / z), f);
  }

  const Representative& representative() const { return rep_; }
  const OrbitWeight& normalization() const { return f_; }

  // Same class iff the representatives are proportional; normalized
  // representatives then agree exactly whenever the normalizers match.
  friend bool operator==(const ProjectiveClass& a, const ProjectiveClass& b) {
    if (a.rep_.index() != b.rep_.index()) return false;
    if (a.f_ == b.f_) return a.rep_ == b.rep_;
    return std::visit(
        [&](const auto& ra) {
          using T = std::decay_t<decltype(ra)>;
          return proportional(ra, std::get<T>(b.rep_));
        },
        a.rep_);
  }

  std::string serialize() const {
    return "projective-class normalization=" + f_.to_string() + "\n" +
           std::visit([](const auto& r) { return r.serialize(); }, rep_);
  }

 private:
  ProjectiveClass(Representative rep, OrbitWeight f) : rep_(std::move(rep)), f_(std::move(f)) {}

  static bool proportional(const OrbitSigmaFinite& a, const OrbitSigmaFinite& b) {
    if (a.support() != b.support() || a.weights().empty()) return a.support() == b.support();
    const Rational ratio = a.weights().begin()->second / b.weights().begin()->second;
    return a == b.scaled(ratio);
  }
  static bool proportional(const AtomicMeasure<Rational>& a, const AtomicMeasure<Rational>& b) {
    if (a.support() != b.support() || a.empty()) return a.support() == b.support();
    const Rational ratio = a.atoms().begin()->second / b.atoms().begin()->second;
    return a == b.scaled(ratio);
  }

  Representative rep_;
  OrbitWeight f_;
};

/// Class of mu / f.
inline ProjectiveClass inv_p_f(const OrbitProbability& mu, const OrbitWeight& f) {
  // mu = f nu / nu(f') with f' = mu's weight; dividing by f gives nu f' / (f nu(f')).
  if (!(mu.weight() == f)) {
    throw ConfigError("inv_p_f on orbit models needs the weight used to build the probability");
  }
  return ProjectiveClass::of(mu.base_measure().scaled(1 / mu.normalizer()), f);
}

inline ProjectiveClass inv_p_f(const AtomicMeasure<Rational>& mu, const OrbitWeight& f) {
  AtomicMeasure<Rational> out(mu.window());
  for (const auto& [x, m] : mu.atoms()) out.add(x, m / f(x));
  return ProjectiveClass::of(out, f);
}

/// Probability measure of the class normalized by f.
inline OrbitProbability p_f(const ProjectiveClass& cls) {
  return OrbitProbability(std::get<OrbitSigmaFinite>(cls.representative()), cls.normalization());
}

struct SigmaFiniteComponent {
  std::size_t orbit = 0;
  Rational weight{0};  // decomposing-measure mass
  Rational scale{0};   // component = scale * counting measure on the orbit
};

/**
 * nu / nu(f) = sum_k w_k eta_k with eta_k = counting(orbit k) / m_k
 * (so eta_k(f) = 1) and w_k = c_k m_k / nu(f).
 */
struct SigmaFiniteDecomposition {
  OrbitWeight f = OrbitWeight::constant_one();
  Rational normalizer{1};  // nu(f) of the input measure
  std::vector<SigmaFiniteComponent> components;

  OrbitSigmaFinite barycenter() const {
    OrbitSigmaFinite out;
    for (const auto& c : components) out.set_weight(c.orbit, out.weight(c.orbit) + c.weight * c.scale);
    return out;
  }

  std::set<std::size_t> support() const {
    std::set<std::size_t> s;
    for (const auto& c : components) {
      if (c.weight > 0) s.insert(c.orbit);
    }
    return s;
  }

  std::string serialize() const {
    std::string s = "sigma-finite-decomposition f=" + f.to_string() + " normalizer=" + format_rational(normalizer) +
                    " components=" + std::to_string(components.size()) + "\n";
    for (const auto& c : components) {
      s += "orbit " + std::to_string(c.orbit) + " weight " + format_rational(c.weight) + " scale " +
           format_rational(c.scale) + "\n";
    }
    return s;
  }
};

inline SigmaFiniteDecomposition decompose_sigma_finite(const OrbitSigmaFinite& nu, const OrbitWeight& f) {
  SigmaFiniteDecomposition out;
  out.f = f;
  out.normalizer = integrate(nu, f);
  if (!(out.normalizer > 0)) throw ZeroMassError("nu(f) = 0");
  for (const auto& [k, c] : nu.weights()) {
    const Rational m = *f.orbit_mass(k);
    out.components.push_back({k, c * m / out.normalizer, 1 / m});
  }
  return out;
}

/// Decomposing measure phi * nu-bar with components eta / phi(eta).
inline SigmaFiniteDecomposition reweight_decomposition(const SigmaFiniteDecomposition& dec,
                                                       const std::function<Rational(std::size_t)>& phi) {
  SigmaFiniteDecomposition out = dec;
  for (auto& c : out.components) {
    const Rational v = phi(c.orbit);
    if (!(v > 0)) throw ConfigError("reweighting function must be positive on the support");
    c.weight *= v;
    c.scale /= v;
  }
  return out;
}

/// Support of the decomposing measure, as a set of orbit labels.
struct MeasureClassDescriptor {
  std::set<std::size_t> labels;

  AcRelation relation_to(const MeasureClassDescriptor& other) const {
    return support_relation(labels, other.labels);
  }

  std::string to_string() const {
    std::string s = "{";
    for (auto it = labels.begin(); it != labels.end(); ++it) s += (it == labels.begin() ? "" : ",") + std::to_string(*it);
    return s + "}";
  }

  friend bool operator==(const MeasureClassDescriptor&, const MeasureClassDescriptor&) = default;
};

inline MeasureClassDescriptor pcl(const SigmaFiniteDecomposition& dec) { return {dec.support()}; }

inline MeasureClassDescriptor pcl(const OrbitSigmaFinite& nu, const OrbitWeight& f) {
  return pcl(decompose_sigma_finite(nu, f));
}

/// Finite-orbit part (k = 0) and infinite-orbit part (k >= 1).
struct ComponentSplit {
  OrbitSigmaFinite finite_part;
  OrbitSigmaFinite infinite_part;

  OrbitSigmaFinite sum() const {
    OrbitSigmaFinite out = finite_part;
    for (const auto& [k, c] : infinite_part.weights()) out.set_weight(k, out.weight(k) + c);
    return out;
  }
};

inline ComponentSplit classify_components(const OrbitSigmaFinite& nu) {
  ComponentSplit out;
  for (const auto& [k, c] : nu.weights()) {
    (OrbitSigmaFinite::orbit_is_finite(k) ? out.finite_part : out.infinite_part).set_weight(k, c);
  }
  return out;
}

/**
 * Orbital measure eta_x^n: the image of normalized Haar measure on S(n)
 * under k -> T_k x. Exact mode tabulates it (n <= 8); Monte Carlo mode keeps
 * (x, n, samples, seed) and replays the same draws on every evaluation.
 */
class OrbitalMeasure {
 public:
  enum class Mode { exact, monte_carlo };

  static OrbitalMeasure exact(const BinaryConfig& x, std::size_t n) {
    if (n > kMaxEnumerableLevel) {
      throw CapacityError("exact orbital measure limited to n <= " + std::to_string(kMaxEnumerableLevel));
    }
    if (n > x.size()) throw DegreeOverflowError("chain level exceeds the window");
    OrbitalMeasure m(x, n, Mode::exact, 0, 0);
    m.atoms_ = orbit_component(x, Cocycle<Rational>::constant_one(), n);
    return m;
  }

  static OrbitalMeasure monte_carlo(const BinaryConfig& x, std::size_t n, std::size_t samples, std::uint64_t seed) {
    if (n > x.size()) throw DegreeOverflowError("chain level exceeds the window");
    if (samples < 2) throw ConfigError("Monte Carlo orbital measure needs at least 2 samples");
    return OrbitalMeasure(x, n, Mode::monte_carlo, samples, seed);
  }

  Mode mode() const { return mode_; }
  std::size_t level() const { return n_; }
  const BinaryConfig& point() const { return x_; }
  const AtomicMeasure<Rational>& atoms() const {
    if (mode_ != Mode::exact) throw ConfigError("Monte Carlo orbital measures are not tabulated");
    return atoms_;
  }

  std::vector<AveragingReport<double>> integrate(std::span<const TestFunction<double>> phis) const {
    std::vector<AveragingReport<double>> out;
    if (mode_ == Mode::exact) {
      for (const auto& phi : phis) {
        Rational v(0);
        for (const auto& [y, m] : atoms_.atoms()) v += Rational(phi(y)) * m;
        out.push_back({to_double(v), n_, Method::exact, 0.0, atoms_.atoms().size()});
      }
      return out;
    }
    RandomStream rng(seed_);
    return average_mc(ChainLevel(n_), Cocycle<double>::constant_one(), phis, x_, samples_, rng);
  }

  AveragingReport<double> integrate(const TestFunction<double>& phi) const {
    return integrate(std::span<const TestFunction<double>>(&phi, 1)).front();
  }

 private:
  OrbitalMeasure(BinaryConfig x, std::size_t n, Mode mode, std::size_t samples, std::uint64_t seed)
      : x_(std::move(x)), n_(n), mode_(mode), samples_(samples), seed_(seed) {}

  BinaryConfig x_;
  std::size_t n_;
  Mode mode_;
  std::size_t samples_;
  std::uint64_t seed_;
  AtomicMeasure<Rational> atoms_;
};

/// Exact for n <= 8, Monte Carlo above.
inline OrbitalMeasure orbital_measure(const BinaryConfig& x, std::size_t n, std::size_t mc_samples = 2000,
                                      std::uint64_t seed = 1) {
  if (n <= kMaxEnumerableLevel) return OrbitalMeasure::exact(x, n);
  return OrbitalMeasure::monte_carlo(x, n, mc_samples, seed);
}

enum class OrbitalVerdict { converges, escapes_mass, inconclusive };

inline std::string to_string(OrbitalVerdict v) {
  switch (v) {
    case OrbitalVerdict::converges: return "converges-to-probability";
    case OrbitalVerdict::escapes_mass: return "escapes-mass";
    case OrbitalVerdict::inconclusive: return "inconclusive";
  }
  return "?";
}

struct OrbitalOptions {
  double tolerance = 0.01;
  double escape_threshold = 0.01;
  std::size_t mc_samples = 4000;
  std::uint64_t seed = 1;
};

struct OrbitalScan {
  OrbitalVerdict verdict = OrbitalVerdict::inconclusive;
  std::vector<std::vector<Index>> battery;
  std::vector<std::vector<AveragingReport<double>>> levels;  // levels[l][j]
  std::string diagnostic;

  // level,<battery label>,stderr,method per row and function.
  std::string to_csv() const {
    std::string s = "level,function,value,stderr,method\n";
    for (const auto& row : levels) {
      for (std::size_t j = 0; j < row.size(); ++j) {
        s += std::to_string(row[j].level) + "," + TestDictionary::label(battery[j]) + "," +
             format_double(row[j].value) + "," + format_double(row[j].std_error) + "," + to_string(row[j].method) +
             "\n";
      }
    }
    return s;
  }
};

/**
 * Tracks eta_x^n on the monomials over nonempty subsets of {1,2,3} along
 * the schedule. Escapes mass when every value at the last level is below
 * the threshold and the per-level maxima never rise beyond noise; converges
 * when the last two levels agree as in limit detection; otherwise
 * inconclusive.
 */
inline OrbitalScan orbital_dichotomy(const BinaryConfig& x, const std::vector<std::size_t>& schedule,
                                     const OrbitalOptions& options = {}) {
  detail::check_schedule(schedule, x.size());
  OrbitalScan scan;
  const TestDictionary dict(3, 3);
  std::vector<TestFunction<double>> battery;
  for (std::size_t j = 1; j < dict.size(); ++j) {
    scan.battery.push_back(dict.subsets()[j]);
    battery.push_back(TestFunction<double>::monomial(dict.subsets()[j]));
  }
  for (std::size_t l = 0; l < schedule.size(); ++l) {
    const auto eta = orbital_measure(x, schedule[l], options.mc_samples, splitmix64(options.seed + l));
    scan.levels.push_back(eta.integrate(battery));
  }

  auto level_max = [](const std::vector<AveragingReport<double>>& row) {
    const auto it = std::max_element(row.begin(), row.end(),
                                     [](const auto& a, const auto& b) { return a.value < b.value; });
    return *it;
  };
  const auto last = level_max(scan.levels.back());
  bool trend_down = true;
  for (std::size_t l = 1; l < scan.levels.size(); ++l) {
    const auto a = level_max(scan.levels[l - 1]);
    const auto b = level_max(scan.levels[l]);
    trend_down &= b.value <= a.value + 3.0 * std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
  }
  if (last.value < options.escape_threshold && trend_down) {
    scan.verdict = OrbitalVerdict::escapes_mass;
    scan.diagnostic = "max value " + format_double(last.value) + " below " +
                      format_double(options.escape_threshold) + " at level " + std::to_string(last.level);
    return scan;
  }
  if (scan.levels.size() < 2) {
    scan.diagnostic = "need at least two schedule levels";
    return scan;
  }
  bool cauchy = true;
  for (std::size_t j = 0; j < battery.size(); ++j) {
    LimitReport r;
    r.levels = {scan.levels[scan.levels.size() - 2][j], scan.levels.back()[j]};
    detail::declare_convergence(r, options.tolerance);
    if (!r.converged) {
      cauchy = false;
      scan.diagnostic = TestDictionary::label(scan.battery[j]) + ": " + r.diagnostic;
      break;
    }
  }
  scan.verdict = cauchy ? OrbitalVerdict::converges : OrbitalVerdict::inconclusive;
  if (cauchy) scan.diagnostic = "last two levels agree on the battery";
  return scan;
}

}  // namespace ergodec

#endif  // ERGODEC_SIGMA_FINITE_HPP
