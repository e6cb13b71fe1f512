#ifndef ERGODEC_AVERAGING_HPP
#define ERGODEC_AVERAGING_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ergodec/cocycle.hpp"
#include "ergodec/error.hpp"
#include "ergodec/group.hpp"
#include "ergodec/measures.hpp"
#include "ergodec/random.hpp"
#include "ergodec/rational.hpp"
#include "ergodec/stats.hpp"

namespace ergodec {

/**
 * Bounded function of finitely many coordinates.
 *
 * The evaluator receives the bits at `support()` (in support order). Reading
 * only the support lets the averagers evaluate phi(T_k x) from the preimages
 * k^{-1}(s) alone.
 */
template <typename S>
class TestFunction {
 public:
  using Eval = std::function<S(std::span<const std::uint8_t>)>;

  TestFunction(std::vector<Index> support, Eval eval, std::string name = "phi")
      : support_(std::move(support)), eval_(std::move(eval)), name_(std::move(name)) {
    if (!std::is_sorted(support_.begin(), support_.end()) ||
        std::adjacent_find(support_.begin(), support_.end()) != support_.end()) {
      throw ConfigError("test function support must be sorted and distinct");
    }
  }

  static TestFunction constant(S c) {
    TestFunction f({}, [c](std::span<const std::uint8_t>) { return c; }, "const");
    f.constant_ = c;
    return f;
  }

  // phi_S(x) = prod_{i in S} x_i; the empty product is the constant 1.
  static TestFunction monomial(std::vector<Index> subset) {
    std::sort(subset.begin(), subset.end());
    if (subset.empty()) return constant(S(1));
    std::string name = "x";
    for (std::size_t j = 0; j < subset.size(); ++j) {
      name += (j ? "*x" : "") + std::to_string(subset[j]);
    }
    return TestFunction(
        std::move(subset),
        [](std::span<const std::uint8_t> b) {
          for (auto v : b) {
            if (!v) return S(0);
          }
          return S(1);
        },
        name);
  }

  static TestFunction indicator(const Cylinder& c) {
    std::vector<Index> support;
    std::vector<std::uint8_t> wanted;
    for (auto [i, b] : c.pins()) {
      support.push_back(i);
      wanted.push_back(b);
    }
    if (support.empty()) return constant(S(1));
    return TestFunction(
        std::move(support),
        [wanted](std::span<const std::uint8_t> b) {
          return std::equal(b.begin(), b.end(), wanted.begin()) ? S(1) : S(0);
        },
        "1" + c.to_string());
  }

  // Arbitrary function of the first `window` coordinates.
  static TestFunction on_window(std::size_t window, std::function<S(const BinaryConfig&)> f,
                                std::string name = "phi") {
    std::vector<Index> support(window);
    for (std::size_t i = 0; i < window; ++i) support[i] = static_cast<Index>(i + 1);
    return TestFunction(
        std::move(support),
        [f = std::move(f)](std::span<const std::uint8_t> b) {
          return f(BinaryConfig(std::vector<std::uint8_t>(b.begin(), b.end())));
        },
        std::move(name));
  }

  std::span<const Index> support() const { return support_; }
  const std::string& name() const { return name_; }
  bool is_constant() const { return constant_.has_value(); }
  const std::optional<S>& constant_value() const { return constant_; }

  S evaluate_bits(std::span<const std::uint8_t> bits) const { return eval_(bits); }

  S operator()(const BinaryConfig& x) const {
    std::vector<std::uint8_t> bits(support_.size());
    for (std::size_t j = 0; j < support_.size(); ++j) {
      if (support_[j] > x.size()) throw DegreeOverflowError("test function reads beyond the window");
      bits[j] = x.bit(support_[j]);
    }
    return eval_(bits);
  }

  // phi(T_k x), given k^{-1}.
  S at_translate(const Permutation& k_inverse, const BinaryConfig& x) const {
    std::vector<std::uint8_t> bits(support_.size());
    for (std::size_t j = 0; j < support_.size(); ++j) bits[j] = x.bit(k_inverse(support_[j]));
    return eval_(bits);
  }

 private:
  std::vector<Index> support_;
  Eval eval_;
  std::string name_;
  std::optional<S> constant_;
};

enum class Method { exact, monte_carlo };

inline std::string to_string(Method m) { return m == Method::exact ? "exact" : "monte-carlo"; }

template <typename S>
struct AveragingReport {
  S value{};
  std::size_t level = 0;
  Method method = Method::exact;
  double std_error = 0.0;
  std::size_t sample_count = 0;
};

namespace detail {

inline void check_level(ChainLevel level, const BinaryConfig& x) {
  if (level.n > x.size()) {
    throw DegreeOverflowError("S(" + std::to_string(level.n) + ") does not act on a window of length " +
                              std::to_string(x.size()));
  }
}

}  // namespace detail

/**
 * Weighted orbit averages over S(n) by full enumeration:
 *
 *   A_n phi(x) = sum_k phi(T_k x) rho(k, x) / sum_k rho(k, x),
 *
 * and 0 when the denominator is infinite (floating scalars only). One pass
 * over the group serves every function in `phis`.
 */
template <typename S>
std::vector<AveragingReport<S>> average_exact(ChainLevel level, const Cocycle<S>& rho,
                                              std::span<const TestFunction<S>> phis,
                                              const BinaryConfig& x) {
  detail::check_level(level, x);
  const auto& group = elements(level);
  std::vector<S> num(phis.size(), S(0));
  S den(0);
  for (const auto& k : group) {
    const S w = rho(k, x);
    den += w;
    const Permutation k_inverse = k.inverse();
    for (std::size_t j = 0; j < phis.size(); ++j) {
      if (phis[j].is_constant()) continue;
      num[j] += phis[j].at_translate(k_inverse, x) * w;
    }
  }
  std::vector<AveragingReport<S>> out;
  for (std::size_t j = 0; j < phis.size(); ++j) {
    AveragingReport<S> r;
    r.level = level.n;
    r.method = Method::exact;
    r.sample_count = group.size();
    if (phis[j].is_constant()) {
      r.value = *phis[j].constant_value();
    } else {
      if constexpr (!is_exact_v<S>) {
        if (std::isinf(den)) {
          r.value = S(0);
          out.push_back(r);
          continue;
        }
      }
      r.value = num[j] / den;
    }
    out.push_back(r);
  }
  return out;
}

template <typename S>
AveragingReport<S> average_exact(ChainLevel level, const Cocycle<S>& rho, const TestFunction<S>& phi,
                                 const BinaryConfig& x) {
  return average_exact(level, rho, std::span<const TestFunction<S>>(&phi, 1), x).front();
}

/**
 * Exact orbit average through the distinct points of the S(n)-orbit.
 *
 * If k_y is any element carrying x to y, every k with T_k x = y is k_y s with
 * s in the stabilizer of x, and rho(s, x) = 1 (a homomorphism from a finite
 * group into the positive reals is trivial). Hence
 *
 *   A_n phi(x) = sum_y phi(y) rho(k_y, x) / sum_y rho(k_y, x),
 *
 * which costs C(n, #ones) terms instead of n!.
 */
template <typename S>
S average_orbit(ChainLevel level, const Cocycle<S>& rho, const TestFunction<S>& phi,
                const BinaryConfig& x) {
  detail::check_level(level, x);
  if (phi.is_constant()) return *phi.constant_value();
  S num(0);
  S den(0);
  for (const auto& y : orbit_points(x, level.n)) {
    const S w = rho(transporter(x, y, level.n), x);
    num += phi(y) * w;
    den += w;
  }
  return num / den;
}

/**
 * Self-normalized Monte Carlo orbit averages: with k_1..k_m Haar draws from
 * S(n), estimates sum_j phi(T_{k_j} x) rho(k_j, x) / sum_j rho(k_j, x).
 *
 * All functions share the same draws. When the cocycle is identically one
 * only the preimages of the coordinates read by `phis` are drawn. The
 * standard error is the delta-method value
 * sqrt(sum_j rho_j^2 (phi_j - value)^2) / sum_j rho_j.
 */
template <typename S>
std::vector<AveragingReport<double>> average_mc(ChainLevel level, const Cocycle<S>& rho,
                                                std::span<const TestFunction<S>> phis,
                                                const BinaryConfig& x, std::size_t samples,
                                                RandomStream& rng) {
  detail::check_level(level, x);
  if (samples < 2) throw ConfigError("Monte Carlo averaging needs at least 2 samples");

  std::vector<Index> coords;
  for (const auto& phi : phis) coords.insert(coords.end(), phi.support().begin(), phi.support().end());
  std::sort(coords.begin(), coords.end());
  coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
  std::vector<std::vector<std::size_t>> slots(phis.size());
  for (std::size_t j = 0; j < phis.size(); ++j) {
    for (Index s : phis[j].support()) {
      slots[j].push_back(static_cast<std::size_t>(
          std::lower_bound(coords.begin(), coords.end(), s) - coords.begin()));
    }
    for (Index s : phis[j].support()) {
      if (s > x.size()) throw DegreeOverflowError("test function reads beyond the window");
    }
  }

  std::vector<double> weights(samples);
  std::vector<std::vector<double>> values(phis.size(), std::vector<double>(samples));
  std::vector<Index> preimages(coords.size());
  std::vector<std::uint8_t> bits;
  const bool trivial = rho.identically_one();
  for (std::size_t t = 0; t < samples; ++t) {
    double w = 1.0;
    if (trivial) {
      sample_preimages(level.n, coords, rng, preimages);
    } else {
      const Permutation k = haar_sample(level, rng);
      w = to_double(rho(k, x));
      const Permutation k_inverse = k.inverse();
      for (std::size_t c = 0; c < coords.size(); ++c) preimages[c] = k_inverse(coords[c]);
    }
    weights[t] = w;
    for (std::size_t j = 0; j < phis.size(); ++j) {
      if (phis[j].is_constant()) continue;
      bits.resize(slots[j].size());
      for (std::size_t b = 0; b < slots[j].size(); ++b) bits[b] = x.bit(preimages[slots[j][b]]);
      values[j][t] = to_double(phis[j].evaluate_bits(bits));
    }
  }

  const double den = pairwise_sum(weights);
  std::vector<AveragingReport<double>> out;
  std::vector<double> terms(samples);
  for (std::size_t j = 0; j < phis.size(); ++j) {
    AveragingReport<double> r;
    r.level = level.n;
    r.method = Method::monte_carlo;
    r.sample_count = samples;
    if (phis[j].is_constant()) {
      r.value = to_double(*phis[j].constant_value());
      out.push_back(r);
      continue;
    }
    for (std::size_t t = 0; t < samples; ++t) terms[t] = values[j][t] * weights[t];
    r.value = std::isinf(den) ? 0.0 : pairwise_sum(terms) / den;
    for (std::size_t t = 0; t < samples; ++t) {
      const double d = weights[t] * (values[j][t] - r.value);
      terms[t] = d * d;
    }
    r.std_error = std::isinf(den) ? 0.0 : std::sqrt(pairwise_sum(terms)) / den;
    out.push_back(r);
  }
  return out;
}

template <typename S>
AveragingReport<double> average_mc(ChainLevel level, const Cocycle<S>& rho, const TestFunction<S>& phi,
                                   const BinaryConfig& x, std::size_t samples, RandomStream& rng) {
  return average_mc(level, rho, std::span<const TestFunction<S>>(&phi, 1), x, samples, rng).front();
}

struct LimitReport {
  std::vector<AveragingReport<double>> levels;
  std::optional<double> limit;
  bool converged = false;
  std::string diagnostic;

  double std_error() const { return levels.empty() ? 0.0 : levels.back().std_error; }

  // "level,value,stderr,method" with one row per schedule level.
  std::string to_csv() const {
    std::string s = "level,value,stderr,method\n";
    for (const auto& r : levels) {
      s += std::to_string(r.level) + "," + format_double(r.value) + "," + format_double(r.std_error) +
           "," + to_string(r.method) + "\n";
    }
    return s;
  }
};

struct LimitOptions {
  std::vector<std::size_t> schedule;
  double tolerance = 1e-3;
  std::size_t mc_samples = 2000;
};

// 1, 2, 4, ..., capped by and ending at `window`.
inline std::vector<std::size_t> geometric_schedule(std::size_t window, std::size_t first = 1) {
  std::vector<std::size_t> s;
  for (std::size_t n = std::max<std::size_t>(first, 1); n < window; n *= 2) s.push_back(n);
  s.push_back(window);
  return s;
}

namespace detail {

inline void check_schedule(const std::vector<std::size_t>& schedule, std::size_t window) {
  if (schedule.empty()) throw ConfigError("schedule must contain at least one level");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (schedule[i] == 0 || schedule[i] > window) {
      throw ConfigError("schedule level " + std::to_string(schedule[i]) + " outside 1.." +
                        std::to_string(window));
    }
    if (i && schedule[i] <= schedule[i - 1]) throw ConfigError("schedule must be increasing");
  }
}

inline void declare_convergence(LimitReport& report, double tolerance) {
  if (report.levels.size() < 2) {
    report.diagnostic = "need at least two schedule levels";
    return;
  }
  const auto& a = report.levels[report.levels.size() - 2];
  const auto& b = report.levels.back();
  const double gap = std::abs(a.value - b.value);
  const double allowed =
      tolerance + 3.0 * std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
  std::ostringstream os;
  os << "levels " << a.level << "->" << b.level << " gap=" << format_double(gap)
     << " allowed=" << format_double(allowed);
  report.diagnostic = os.str();
  if (gap < allowed) {
    report.converged = true;
    report.limit = b.value;
  }
}

}  // namespace detail

/**
 * Runs the averaging operators along an increasing schedule of levels (exact
 * enumeration up to n = 8, Monte Carlo above) and declares a limit when the
 * last two levels agree within tolerance + 3 * combined standard error.
 * Constant functions short-circuit at the first level.
 */
template <typename S>
std::vector<LimitReport> limit_average(const Cocycle<S>& rho, std::span<const TestFunction<S>> phis,
                                       const BinaryConfig& x, const LimitOptions& options,
                                       RandomStream& rng) {
  detail::check_schedule(options.schedule, x.size());
  if (!(options.tolerance > 0)) throw ConfigError("tolerance must be positive");
  std::vector<LimitReport> reports(phis.size());
  for (std::size_t n : options.schedule) {
    std::vector<AveragingReport<double>> level_reports;
    if (n <= kMaxEnumerableLevel) {
      for (const auto& r : average_exact(ChainLevel(n), rho, phis, x)) {
        level_reports.push_back({to_double(r.value), r.level, r.method, 0.0, r.sample_count});
      }
    } else {
      level_reports = average_mc(ChainLevel(n), rho, phis, x, options.mc_samples, rng);
    }
    for (std::size_t j = 0; j < phis.size(); ++j) {
      if (phis[j].is_constant() && !reports[j].levels.empty()) continue;
      reports[j].levels.push_back(level_reports[j]);
    }
  }
  for (std::size_t j = 0; j < phis.size(); ++j) {
    if (phis[j].is_constant()) {
      reports[j].converged = true;
      reports[j].limit = reports[j].levels.front().value;
      reports[j].diagnostic = "constant function";
    } else {
      detail::declare_convergence(reports[j], options.tolerance);
    }
  }
  return reports;
}

template <typename S>
LimitReport limit_average(const Cocycle<S>& rho, const TestFunction<S>& phi, const BinaryConfig& x,
                          const LimitOptions& options, RandomStream& rng) {
  return limit_average(rho, std::span<const TestFunction<S>>(&phi, 1), x, options, rng).front();
}

/// x -> A_n phi(x) as a test function on the window, memoized per point.
template <typename S>
TestFunction<S> averaged_function(ChainLevel level, const Cocycle<S>& rho, const TestFunction<S>& phi,
                                  std::size_t window) {
  struct Cache {
    std::mutex mutex;
    std::map<BinaryConfig, S> values;
  };
  auto cache = std::make_shared<Cache>();
  return TestFunction<S>::on_window(
      window,
      [level, rho, phi, cache](const BinaryConfig& x) {
        {
          std::lock_guard lock(cache->mutex);
          if (auto it = cache->values.find(x); it != cache->values.end()) return it->second;
        }
        S v = average_exact(level, rho, phi, x).value;
        std::lock_guard lock(cache->mutex);
        cache->values.emplace(x, v);
        return v;
      },
      "A" + std::to_string(level.n) + "[" + phi.name() + "]");
}

struct IdentityCheck {
  std::size_t checked = 0;
  std::size_t failures = 0;
  std::optional<BinaryConfig> witness;
  std::string lhs;
  std::string rhs;

  bool passed() const { return failures == 0; }
};

/// A_m(inner) = A_m(phi) on every atom of positive nu-mass, for a given inner = A_n phi.
template <typename S>
IdentityCheck tower_check_with(ChainLevel outer, const Cocycle<S>& rho, const TestFunction<S>& phi,
                               const TestFunction<S>& inner, const AtomicMeasure<S>& nu) {
  IdentityCheck report;
  for (const auto& [x, mass] : nu.atoms()) {
    const S lhs = average_exact(outer, rho, inner, x).value;
    const S rhs = average_exact(outer, rho, phi, x).value;
    ++report.checked;
    if (lhs != rhs) {
      if (!report.witness) {
        report.witness = x;
        report.lhs = format_scalar(lhs);
        report.rhs = format_scalar(rhs);
      }
      ++report.failures;
    }
  }
  return report;
}

/// A_m(A_n phi) = A_m phi for n <= m on every atom of nu (m, n <= 5).
template <typename S>
IdentityCheck tower_check(ChainLevel outer, ChainLevel inner_level, const Cocycle<S>& rho,
                          const TestFunction<S>& phi, const AtomicMeasure<S>& nu) {
  if (inner_level.n > outer.n) throw ConfigError("tower check needs n <= m");
  if (outer.n > 5) throw CapacityError("tower check supports levels up to 5");
  return tower_check_with(outer, rho, phi, averaged_function(inner_level, rho, phi, nu.window()), nu);
}

/// S(n)-orbit classes of the whole window {0,1}^N, in order of first appearance.
inline std::vector<std::vector<BinaryConfig>> orbit_classes(std::size_t window, std::size_t n) {
  if (window > 20) throw CapacityError("window too large to enumerate orbit classes");
  std::map<BinaryConfig, std::size_t> class_of;
  std::vector<std::vector<BinaryConfig>> classes;
  for (std::uint64_t code = 0; code < (std::uint64_t{1} << window); ++code) {
    auto x = BinaryConfig::from_index(code, window);
    if (class_of.count(x)) continue;
    classes.emplace_back();
    for (auto& y : orbit_points(x, n)) {
      class_of.emplace(y, classes.size() - 1);
      classes.back().push_back(std::move(y));
    }
  }
  return classes;
}

struct ConditionalExpectationReport {
  std::size_t classes = 0;
  std::size_t sets_checked = 0;
  bool exhaustive = false;
  bool precondition_holds = true;
  std::size_t failures = 0;
  std::optional<std::vector<BinaryConfig>> witness;  // class representatives of a failing set
  std::string lhs;
  std::string rhs;

  bool passed() const { return precondition_holds && failures == 0; }
};

/**
 * Checks int_A phi dnu = int_A A_n phi dnu for every S(n)-invariant subset A
 * of the window (all unions of orbit classes when there are at most 20
 * classes, otherwise each class, which implies the rest by additivity).
 *
 * Also checks the precondition that rho restricted to S(n) is the
 * Radon-Nikodym cocycle of nu, on adjacent transpositions at every atom.
 */
template <typename S>
ConditionalExpectationReport conditional_expectation_check(ChainLevel level, const Cocycle<S>& rho,
                                                           const TestFunction<S>& phi,
                                                           const AtomicMeasure<S>& nu) {
  const std::size_t window = nu.window();
  ConditionalExpectationReport report;
  for (Index i = 1; i < level.n; ++i) {
    const auto tau = Permutation::transposition(i, i + 1);
    for (const auto& [x, m] : nu.atoms()) {
      if (nu.atom(act(tau, x)) != rho(tau, x) * m) report.precondition_holds = false;
    }
  }

  const auto classes = orbit_classes(window, level.n);
  report.classes = classes.size();
  std::vector<S> lhs_parts;
  std::vector<S> rhs_parts;
  for (const auto& cls : classes) {
    S lhs(0);
    S rhs(0);
    for (const auto& x : cls) {
      const S mass = nu.atom(x);
      if (mass == S(0)) continue;
      lhs += phi(x) * mass;
      rhs += average_exact(level, rho, phi, x).value * mass;
    }
    lhs_parts.push_back(lhs);
    rhs_parts.push_back(rhs);
  }

  auto record_failure = [&](std::uint64_t members, const S& lhs, const S& rhs) {
    ++report.failures;
    if (report.witness) return;
    std::vector<BinaryConfig> reps;
    for (std::size_t c = 0; c < classes.size(); ++c) {
      if ((members >> c) & 1U) reps.push_back(classes[c].front());
    }
    report.witness = std::move(reps);
    report.lhs = format_scalar(lhs);
    report.rhs = format_scalar(rhs);
  };

  if (classes.size() <= 20) {
    report.exhaustive = true;
    // Gray-code walk over all unions of classes.
    S lhs(0);
    S rhs(0);
    std::uint64_t members = 0;
    const std::uint64_t total = std::uint64_t{1} << classes.size();
    for (std::uint64_t step = 0; step < total; ++step) {
      if (step) {
        const auto c = static_cast<std::size_t>(__builtin_ctzll(step));
        members ^= std::uint64_t{1} << c;
        if ((members >> c) & 1U) {
          lhs += lhs_parts[c];
          rhs += rhs_parts[c];
        } else {
          lhs -= lhs_parts[c];
          rhs -= rhs_parts[c];
        }
      }
      ++report.sets_checked;
      bool equal;
      if constexpr (is_exact_v<S>) {
        equal = lhs == rhs;
      } else {
        equal = std::abs(lhs - rhs) <= 1e-12;
      }
      if (!equal) record_failure(members, lhs, rhs);
    }
  } else {
    for (std::size_t c = 0; c < classes.size(); ++c) {
      ++report.sets_checked;
      if (lhs_parts[c] != rhs_parts[c]) record_failure(std::uint64_t{1} << c, lhs_parts[c], rhs_parts[c]);
    }
  }
  return report;
}

struct FubiniReport {
  std::string lhs;
  std::string rhs;
  bool holds = false;
};

/// sum_x sum_k phi(T_k x) rho(k, x) nu(x) / n!  versus  sum_x phi(x) nu(x).
template <typename S>
FubiniReport fubini_check(ChainLevel level, const Cocycle<S>& rho, const TestFunction<S>& phi,
                          const AtomicMeasure<S>& nu) {
  const auto& group = elements(level);
  S lhs(0);
  S rhs(0);
  for (const auto& [x, mass] : nu.atoms()) {
    S inner(0);
    for (const auto& k : group) inner += phi(act(k, x)) * rho(k, x);
    lhs += inner * mass;
    rhs += phi(x) * mass;
  }
  lhs /= S(static_cast<long>(group.size()));
  FubiniReport r{format_scalar(lhs), format_scalar(rhs), false};
  if constexpr (is_exact_v<S>) {
    r.holds = lhs == rhs;
  } else {
    r.holds = std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs));
  }
  return r;
}

}  // namespace ergodec

#endif  // ERGODEC_AVERAGING_HPP
