#ifndef ERGODEC_DECOMPOSITION_HPP
#define ERGODEC_DECOMPOSITION_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <boost/math/distributions/binomial.hpp>

#include "ergodec/averaging.hpp"
#include "ergodec/cocycle.hpp"
#include "ergodec/error.hpp"
#include "ergodec/group.hpp"
#include "ergodec/measures.hpp"
#include "ergodec/parallel.hpp"
#include "ergodec/random.hpp"
#include "ergodec/stats.hpp"

namespace ergodec {

/// Too many sample points failed to produce a converged limit statistic.
class DecompositionError : public Error {
 public:
  DecompositionError(const std::string& what, double fraction) : Error(what), nonconverged_fraction(fraction) {}
  double nonconverged_fraction;
};

/**
 * Cylinder monomials phi_S(x) = prod_{i in S} x_i for all S inside
 * {1..coordinates} with |S| <= depth, ordered by size and then
 * lexicographically. Entry 0 is the empty set (the constant 1).
 */
class TestDictionary {
 public:
  explicit TestDictionary(std::size_t depth, std::size_t coordinates = 0)
      : depth_(depth), coordinates_(coordinates ? coordinates : std::max<std::size_t>(depth, 1)) {
    subsets_.push_back({});
    std::vector<Index> current;
    for (std::size_t size = 1; size <= depth_; ++size) add_subsets(size, 1, current);
  }

  std::size_t depth() const { return depth_; }
  std::size_t coordinates() const { return coordinates_; }
  std::size_t size() const { return subsets_.size(); }
  const std::vector<std::vector<Index>>& subsets() const { return subsets_; }

  std::optional<std::size_t> index_of(std::vector<Index> subset) const {
    std::sort(subset.begin(), subset.end());
    auto it = std::find(subsets_.begin(), subsets_.end(), subset);
    if (it == subsets_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - subsets_.begin());
  }

  template <typename S>
  std::vector<TestFunction<S>> functions() const {
    std::vector<TestFunction<S>> out;
    for (const auto& s : subsets_) out.push_back(TestFunction<S>::monomial(s));
    return out;
  }

  static std::string label(const std::vector<Index>& subset) {
    std::string s = "{";
    for (std::size_t j = 0; j < subset.size(); ++j) s += (j ? "," : "") + std::to_string(subset[j]);
    return s + "}";
  }

 private:
  void add_subsets(std::size_t size, Index from, std::vector<Index>& current) {
    if (current.size() == size) {
      subsets_.push_back(current);
      return;
    }
    for (Index i = from; i <= coordinates_; ++i) {
      current.push_back(i);
      add_subsets(size, i + 1, current);
      current.pop_back();
    }
  }

  std::size_t depth_;
  std::size_t coordinates_;
  std::vector<std::vector<Index>> subsets_;
};

struct LimitEntry {
  std::vector<Index> subset;
  double value = 0.0;
  double std_error = 0.0;
  bool converged = false;
};

/// Detected limits r_S of A_n phi_S(x), one per dictionary entry.
struct LimitStatistic {
  std::vector<LimitEntry> entries;
  std::vector<std::size_t> schedule;

  bool all_converged() const {
    return std::all_of(entries.begin(), entries.end(), [](const LimitEntry& e) { return e.converged; });
  }
  const LimitEntry& at(const std::vector<Index>& subset) const {
    for (const auto& e : entries) {
      if (e.subset == subset) return e;
    }
    throw ConfigError("subset " + TestDictionary::label(subset) + " is not in the dictionary");
  }
  double value(const std::vector<Index>& subset) const { return at(subset).value; }
};

/**
 * The limit-statistic map x -> (r_S)_S. All dictionary functions share the
 * same Haar draws at each level, so r_S >= r_{S + j} holds exactly.
 * Non-converged entries keep their last-level value and are flagged.
 */
template <typename S>
LimitStatistic pi_phi(const BinaryConfig& x, const Cocycle<S>& rho, const TestDictionary& dict,
                      const LimitOptions& options, RandomStream& rng) {
  const auto phis = dict.functions<S>();
  const auto reports = limit_average(rho, std::span<const TestFunction<S>>(phis), x, options, rng);
  LimitStatistic stat;
  stat.schedule = options.schedule;
  for (std::size_t j = 0; j < phis.size(); ++j) {
    const auto& rep = reports[j];
    stat.entries.push_back({dict.subsets()[j], rep.limit.value_or(rep.levels.back().value), rep.std_error(),
                            rep.converged});
  }
  return stat;
}

/// Ergodic component candidate: a Bernoulli product or an explicit atomic measure.
struct BernoulliRepresentative {
  double p = 0.5;
  std::size_t window = 1;
};

using Representative = std::variant<BernoulliRepresentative, AtomicMeasure<double>>;

inline double expectation(const Representative& eta, const TestFunction<double>& phi) {
  if (phi.is_constant()) return *phi.constant_value();
  if (const auto* atomic = std::get_if<AtomicMeasure<double>>(&eta)) {
    double total = 0.0;
    for (const auto& [x, m] : atomic->atoms()) total += phi(x) * m;
    return total;
  }
  const double p = std::get<BernoulliRepresentative>(eta).p;
  const std::size_t k = phi.support().size();
  if (k > 20) throw CapacityError("test function support too large for exact Bernoulli expectation");
  double total = 0.0;
  std::vector<std::uint8_t> bits(k);
  for (std::uint64_t code = 0; code < (std::uint64_t{1} << k); ++code) {
    double w = 1.0;
    for (std::size_t b = 0; b < k; ++b) {
      bits[b] = (code >> b) & 1U;
      w *= bits[b] ? p : 1.0 - p;
    }
    total += w * phi.evaluate_bits(bits);
  }
  return total;
}

inline double mass(const Representative& eta, const Cylinder& a) {
  if (const auto* atomic = std::get_if<AtomicMeasure<double>>(&eta)) return atomic->mass(a);
  const double p = std::get<BernoulliRepresentative>(eta).p;
  return std::pow(p, static_cast<double>(a.ones())) * std::pow(1.0 - p, static_cast<double>(a.zeros()));
}

inline BinaryConfig sample(const Representative& eta, RandomStream& rng) {
  if (const auto* atomic = std::get_if<AtomicMeasure<double>>(&eta)) return atomic->sample(rng);
  const auto& b = std::get<BernoulliRepresentative>(eta);
  BinaryConfig x(b.window);
  for (Index i = 1; i <= b.window; ++i) x.set(i, rng.bernoulli(b.p));
  return x;
}

inline std::string describe(const Representative& eta) {
  if (const auto* atomic = std::get_if<AtomicMeasure<double>>(&eta)) {
    return "orbit-measure atoms=" + std::to_string(atomic->atoms().size());
  }
  return "bernoulli p=" + format_double(std::get<BernoulliRepresentative>(eta).p);
}

/// eta(y) proportional to rho(k_y, x) on the S(n)-orbit of x.
template <typename S>
AtomicMeasure<S> orbit_component(const BinaryConfig& x, const Cocycle<S>& rho, std::size_t n) {
  AtomicMeasure<S> eta(x.size());
  for (const auto& y : orbit_points(x, n)) eta.add(y, rho(transporter(x, y, n), x));
  return eta.normalized();
}

enum class Verdict { ergodic, non_ergodic, inconclusive };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::ergodic: return "ergodic";
    case Verdict::non_ergodic: return "non-ergodic";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

struct ErgodicityWitness {
  BinaryConfig x;
  std::vector<Index> subset;
  double limit = 0.0;
  double expected = 0.0;
};

struct ErgodicityVerdict {
  Verdict verdict = Verdict::inconclusive;
  std::size_t probes = 0;
  std::size_t failures = 0;
  std::size_t nonconverged = 0;
  bool exact = false;
  std::vector<ErgodicityWitness> witnesses;  // at most 5
};

/**
 * Draws probe points x ~ eta and compares each limit r_S(x) with eta(phi_S).
 * A probe fails when some entry misses by more than tolerance + 3 stderr.
 * No failures: ergodic. More than 10% failing probes: non-ergodic.
 * Otherwise (or when probes did not converge): inconclusive.
 */
template <typename S>
ErgodicityVerdict ergodicity_test(const Representative& eta, const Cocycle<S>& rho, const TestDictionary& dict,
                                  std::size_t probes, const LimitOptions& options, double tolerance,
                                  RandomStream& rng) {
  ErgodicityVerdict out;
  out.exact = options.schedule.back() <= kMaxEnumerableLevel;
  const auto phis = dict.functions<double>();
  std::vector<double> expected;
  for (const auto& phi : phis) expected.push_back(expectation(eta, phi));
  const double slack = out.exact ? 1e-12 : tolerance;
  for (std::size_t t = 0; t < probes; ++t) {
    const auto x = sample(eta, rng);
    const auto stat = pi_phi(x, rho, dict, options, rng);
    ++out.probes;
    // An exact top level equal to the window is the final operator on it.
    if (!stat.all_converged() && !(out.exact && options.schedule.back() == x.size())) ++out.nonconverged;
    bool failed = false;
    for (std::size_t j = 0; j < stat.entries.size(); ++j) {
      const auto& e = stat.entries[j];
      if (std::abs(e.value - expected[j]) > slack + 3 * e.std_error) {
        failed = true;
        if (out.witnesses.size() < 5) out.witnesses.push_back({x, e.subset, e.value, expected[j]});
      }
    }
    out.failures += failed;
  }
  if (out.failures == 0 && out.nonconverged == 0) {
    out.verdict = Verdict::ergodic;
  } else if (static_cast<double>(out.failures) > 0.1 * static_cast<double>(out.probes)) {
    out.verdict = Verdict::non_ergodic;
  } else {
    out.verdict = Verdict::inconclusive;
  }
  return out;
}

struct DecomposeConfig {
  enum class Mode { finite_mixture, continuous };
  enum class Representation { bernoulli, orbit };

  std::size_t samples = 20000;
  std::size_t depth = 2;
  // Empty schedule means {N/4, N/2, N} (or 1..N geometric for N <= 8).
  LimitOptions limit{{}, 0.01, 4000};
  Mode mode = Mode::finite_mixture;
  Representation representation = Representation::bernoulli;
  double min_gap = 0.05;
  double max_nonconvergence = 0.01;
  std::size_t ergodicity_probes = 20;
  double ergodicity_tolerance = 0.03;
  std::size_t workers = 1;
  std::uint64_t seed = 1;
};

inline LimitOptions resolved_limit_options(const DecomposeConfig& config, std::size_t window) {
  LimitOptions opts = config.limit;
  if (opts.schedule.empty()) {
    if (window <= 4 * kMaxEnumerableLevel) {
      opts.schedule = geometric_schedule(window);
    } else {
      opts.schedule = {window / 4, window / 2, window};
    }
  }
  return opts;
}

struct DecompositionComponent {
  std::size_t label = 0;
  double weight = 0.0;
  double center = 0.0;  // mean of r_{1} over members
  double spread = 0.0;  // standard deviation of r_{1} over members
  std::size_t members = 0;
  Representative representative;
  ErgodicityVerdict ergodicity;
};

/// Empirical decomposing measure over ergodic-component labels.
struct DecomposingMeasure {
  DecomposeConfig::Mode mode = DecomposeConfig::Mode::finite_mixture;
  std::size_t window = 0;
  std::size_t samples = 0;
  std::vector<std::size_t> schedule;
  std::vector<std::vector<Index>> dictionary;
  std::vector<DecompositionComponent> components;  // finite-mixture mode
  std::vector<double> empirical_parameters;        // continuous mode: r_{1} per sample
  std::vector<std::vector<double>> statistics;     // per sample, one value per dictionary entry
  std::vector<bool> converged;                     // per sample
  double nonconverged_fraction = 0.0;
  bool admissible = false;

  // sample,<one column per dictionary entry>,converged
  std::string statistics_csv() const {
    std::string s = "sample";
    for (const auto& subset : dictionary) s += ",\"r" + TestDictionary::label(subset) + "\"";
    s += ",converged\n";
    for (std::size_t i = 0; i < statistics.size(); ++i) {
      s += std::to_string(i);
      for (double v : statistics[i]) s += "," + format_double(v);
      s += converged[i] ? ",1\n" : ",0\n";
    }
    return s;
  }
};

using ConfigSampler = std::function<BinaryConfig(RandomStream&)>;

/**
 * Samples config.samples points from nu, computes the limit statistic at each
 * point and groups the points into ergodic components.
 *
 * Sample i draws from RandomStream::derive(seed, i), so the result does not
 * depend on the worker count. Finite mixtures are split by gap clustering
 * of r_{1}; continuous mode keeps the empirical r_{1} values.
 */
template <typename S>
DecomposingMeasure decompose(const ConfigSampler& nu, std::size_t window, const Cocycle<S>& rho,
                             const DecomposeConfig& config) {
  if (config.samples == 0) throw ConfigError("decompose needs at least one sample");
  const TestDictionary dict(config.depth);
  const LimitOptions opts = resolved_limit_options(config, window);
  std::vector<LimitStatistic> stats(config.samples);
  std::vector<BinaryConfig> points(config.samples);
  parallel_for(config.samples, config.workers, [&](std::size_t i) {
    RandomStream rng = RandomStream::derive(config.seed, i);
    points[i] = nu(rng);
    stats[i] = pi_phi(points[i], rho, dict, opts, rng);
  });

  DecomposingMeasure dm;
  dm.mode = config.mode;
  dm.window = window;
  dm.samples = config.samples;
  dm.schedule = opts.schedule;
  dm.dictionary = dict.subsets();
  std::size_t failed = 0;
  std::vector<double> r1;
  const std::size_t first = *dict.index_of({1});
  for (const auto& st : stats) {
    std::vector<double> row;
    for (const auto& e : st.entries) row.push_back(e.value);
    dm.statistics.push_back(std::move(row));
    dm.converged.push_back(st.all_converged());
    failed += !st.all_converged();
    r1.push_back(st.entries[first].value);
  }
  dm.nonconverged_fraction = static_cast<double>(failed) / static_cast<double>(config.samples);
  if (dm.nonconverged_fraction > config.max_nonconvergence) {
    std::ostringstream os;
    os << "limit statistic failed to converge at " << failed << " of " << config.samples
       << " sample points (schedule top " << opts.schedule.back() << ", tolerance "
       << format_double(opts.tolerance) << ")";
    throw DecompositionError(os.str(), dm.nonconverged_fraction);
  }

  if (config.mode == DecomposeConfig::Mode::continuous) {
    dm.empirical_parameters = r1;
    dm.admissible = true;
    return dm;
  }

  std::vector<std::size_t> order;
  const auto clusters = gap_clusters(r1, config.min_gap, &order);
  RandomStream ergodicity_rng = RandomStream::derive(config.seed, config.samples);
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    const auto& cl = clusters[c];
    DecompositionComponent comp;
    comp.label = c;
    comp.members = cl.end - cl.begin;
    comp.weight = static_cast<double>(comp.members) / static_cast<double>(config.samples);
    comp.center = cl.mean;
    double ss = 0.0;
    for (std::size_t r = cl.begin; r < cl.end; ++r) ss += (r1[order[r]] - cl.mean) * (r1[order[r]] - cl.mean);
    comp.spread = std::sqrt(ss / static_cast<double>(comp.members));
    if (config.representation == DecomposeConfig::Representation::bernoulli) {
      comp.representative = BernoulliRepresentative{cl.mean, window};
    } else {
      comp.representative = orbit_component(points[order[cl.begin]], to_floating(rho), window);
    }
    comp.ergodicity = ergodicity_test(comp.representative, rho, dict, config.ergodicity_probes, opts,
                                      config.ergodicity_tolerance, ergodicity_rng);
    dm.components.push_back(std::move(comp));
  }
  // Components from distinct gap clusters have distinct centers, hence
  // distinct representatives.
  dm.admissible = true;
  for (std::size_t c = 1; c < dm.components.size(); ++c) {
    dm.admissible &= dm.components[c].center > dm.components[c - 1].center;
  }
  return dm;
}

struct ResidualReport {
  double max_residual = 0.0;
  Cylinder worst;
};

/// max over cylinders A pinning coordinates in {1..depth} of |nu(A) - sum_j w_j eta_j(A)|.
template <typename M>
ResidualReport barycenter_residual(const M& nu, const DecomposingMeasure& dm, std::size_t depth) {
  ResidualReport out;
  for (const auto& a : cylinders_up_to(depth)) {
    double assembled = 0.0;
    if (dm.mode == DecomposeConfig::Mode::continuous) {
      for (double p : dm.empirical_parameters) assembled += mass(BernoulliRepresentative{p, dm.window}, a);
      assembled /= static_cast<double>(dm.empirical_parameters.size());
    } else {
      for (const auto& c : dm.components) assembled += c.weight * mass(c.representative, a);
    }
    const double r = std::abs(to_double(nu.mass(a)) - assembled);
    if (r > out.max_residual) {
      out.max_residual = r;
      out.worst = a;
    }
  }
  return out;
}

/// Reassembles sum_j w_j eta_j from a finite-mixture decomposition.
inline Mixture<double> assemble(const DecomposingMeasure& dm) {
  if (dm.components.empty()) throw ConfigError("assemble needs a finite-mixture decomposition");
  std::vector<double> weights;
  std::vector<MixtureComponent<double>> parts;
  double total = 0.0;
  for (const auto& c : dm.components) total += c.weight;
  for (const auto& c : dm.components) {
    weights.push_back(c.weight / total);
    if (const auto* b = std::get_if<BernoulliRepresentative>(&c.representative)) {
      parts.emplace_back(ProductBernoulli<double>::constant(b->p, b->window));
    } else {
      parts.emplace_back(std::get<AtomicMeasure<double>>(c.representative));
    }
  }
  // Renormalize so the weights sum to 1 within rounding.
  double sum = 0.0;
  for (double w : weights) sum += w;
  weights.back() += 1.0 - sum;
  return Mixture<double>(std::move(weights), std::move(parts));
}

struct RoundtripReport {
  std::size_t components_first = 0;
  std::size_t components_second = 0;
  double max_weight_drift = 0.0;
  double max_center_drift = 0.0;
  bool agree = false;
};

/// decompose -> assemble -> decompose again, comparing weights and centers.
template <typename S>
RoundtripReport mes_ed_roundtrip(const ConfigSampler& nu, std::size_t window, const Cocycle<S>& rho,
                                 const DecomposeConfig& config, double tolerance = 0.02) {
  const auto first = decompose(nu, window, rho, config);
  const auto assembled = assemble(first);
  DecomposeConfig again = config;
  again.seed = splitmix64(config.seed ^ 0x5EEDULL);
  const auto second = decompose([&assembled](RandomStream& r) { return assembled.sample(r); }, window, rho, again);
  RoundtripReport out;
  out.components_first = first.components.size();
  out.components_second = second.components.size();
  if (out.components_first != out.components_second) return out;
  for (std::size_t c = 0; c < first.components.size(); ++c) {
    out.max_weight_drift =
        std::max(out.max_weight_drift, std::abs(first.components[c].weight - second.components[c].weight));
    out.max_center_drift =
        std::max(out.max_center_drift, std::abs(first.components[c].center - second.components[c].center));
  }
  out.agree = out.max_weight_drift <= tolerance && out.max_center_drift <= tolerance;
  return out;
}

struct SeparationReport {
  double threshold = 0.5;
  double low_mass_outside = 0.0;   // B(p_low)({frequency > threshold})
  double high_mass_inside = 0.0;   // B(p_high)({frequency <= threshold})
  double low_hoeffding = 0.0;
  double high_hoeffding = 0.0;
  bool singular = false;
};

/**
 * Window-scale singularity of B(p_low)^N and B(p_high)^N through the
 * invariant event E = {fraction of ones <= threshold}: binomial tail masses
 * plus the Hoeffding bounds exp(-2 N (threshold - p)^2).
 */
inline SeparationReport separation_check(double p_low, double p_high, std::size_t window, double threshold = 0.5) {
  if (!(p_low < threshold && threshold < p_high)) throw ConfigError("threshold must separate the two parameters");
  SeparationReport out;
  out.threshold = threshold;
  const auto n = static_cast<double>(window);
  const double cut = std::floor(threshold * n);
  out.low_mass_outside = boost::math::cdf(boost::math::complement(boost::math::binomial(n, p_low), cut));
  out.high_mass_inside = boost::math::cdf(boost::math::binomial(n, p_high), cut);
  out.low_hoeffding = std::exp(-2.0 * n * (threshold - p_low) * (threshold - p_low));
  out.high_hoeffding = std::exp(-2.0 * n * (p_high - threshold) * (p_high - threshold));
  out.singular = out.low_hoeffding < 1e-6 && out.high_hoeffding < 1e-6;
  return out;
}

/// One level set of the exact limit statistic and its normalized conditional measure.
template <typename S>
struct ConditionalCell {
  AtomicMeasure<S> key;  // the common weighted orbit measure of the cell's points
  S mass{};              // nu(cell)
  AtomicMeasure<S> measure;
  bool rn_verified = false;
};

template <typename S>
struct ConditionalAssignment {
  std::vector<ConditionalCell<S>> cells;

  AtomicMeasure<S> reconstruct(std::size_t window) const {
    AtomicMeasure<S> out(window);
    for (const auto& c : cells) out = out + c.measure.scaled(c.mass);
    return out;
  }
};

/**
 * Partition of supp(nu) into level sets of the exact full-depth limit
 * statistic at the top level n = N, with normalized conditional measures.
 *
 * The full monomial statistic x -> (A_N phi_S(x))_{S subset {1..N}} is the
 * moment vector of the rho-weighted orbit measure of x, and moments
 * determine a measure on {0,1}^N, so two points share a level set exactly
 * when their weighted orbit measures coincide. Cells are keyed by that
 * measure. Each cell measure is checked to have Radon-Nikodym cocycle rho
 * (on every element of S(N) when N <= 6, on adjacent transpositions above).
 */
template <typename S>
ConditionalAssignment<S> conditional_measures_exact(const AtomicMeasure<S>& nu, const Cocycle<S>& rho) {
  const std::size_t window = nu.window();
  if (window > 12) throw CapacityError("exact conditional measures support windows up to 12");
  ConditionalAssignment<S> out;
  std::map<std::string, std::size_t> cell_of_key;
  std::vector<std::set<BinaryConfig>> members;
  std::map<std::size_t, std::size_t> cell_of_count;  // orbit keys depend only on the S(N)-orbit
  for (const auto& [x, m] : nu.atoms()) {
    std::size_t cell;
    auto known = cell_of_count.find(x.count_ones());
    if (known != cell_of_count.end()) {
      cell = known->second;
    } else {
      auto key = orbit_component(x, rho, window);
      const auto text = key.serialize();
      auto it = cell_of_key.find(text);
      if (it == cell_of_key.end()) {
        it = cell_of_key.emplace(text, out.cells.size()).first;
        out.cells.push_back({std::move(key), S(0), AtomicMeasure<S>(window), false});
        members.emplace_back();
      }
      cell = it->second;
      cell_of_count.emplace(x.count_ones(), cell);
    }
    members[cell].insert(x);
  }
  for (std::size_t c = 0; c < out.cells.size(); ++c) {
    auto& cell = out.cells[c];
    const auto restricted = nu.restricted(members[c]);
    cell.mass = restricted.total();
    cell.measure = restricted.normalized();
    std::vector<Permutation> checks;
    if (window <= 6) {
      checks = elements(ChainLevel(window));
    } else {
      for (Index i = 1; i < window; ++i) checks.push_back(Permutation::transposition(i, i + 1));
    }
    cell.rn_verified = true;
    for (const auto& [x, m] : cell.measure.atoms()) {
      for (const auto& g : checks) {
        if (cell.measure.atom(act(g, x)) != rho(g, x) * m) cell.rn_verified = false;
      }
    }
  }
  return out;
}

/// Full monomial statistic (A_N phi_S(x)) over all S inside {1..N}, in subset-code order.
template <typename S>
std::vector<S> full_statistic_exact(const BinaryConfig& x, const Cocycle<S>& rho) {
  const std::size_t window = x.size();
  if (window > 12) throw CapacityError("full statistic supports windows up to 12");
  std::vector<S> out;
  for (std::uint64_t code = 0; code < (std::uint64_t{1} << window); ++code) {
    std::vector<Index> subset;
    for (Index i = 1; i <= window; ++i) {
      if ((code >> (i - 1)) & 1U) subset.push_back(i);
    }
    out.push_back(average_orbit(ChainLevel(window), rho, TestFunction<S>::monomial(subset), x));
  }
  return out;
}

template <typename S>
struct UpgradeReport {
  std::set<BinaryConfig> upgraded;
  bool almost_invariant = true;
  std::optional<Permutation> witness;  // some g with nu(A sym-diff T_g A) > 0
  S witness_mass{};
  S symmetric_difference_mass{};  // nu(A sym-diff upgraded)
};

/**
 * Invariant upgrade of a set A of window points:
 * upgraded = {x : A_n chi_A(x) = 1 for all n <= N}.
 *
 * With rho positive, A_n chi_A(x) = 1 exactly when the S(n)-orbit of x lies
 * in A; the S(n)-orbits increase with n, so the n = N condition implies the
 * others and is the one evaluated. Almost invariance is tested on the
 * adjacent transpositions, which generate S(N) and suffice when nu is
 * quasi-invariant.
 */
template <typename S>
UpgradeReport<S> almost_invariant_upgrade(const std::set<BinaryConfig>& a, const AtomicMeasure<S>& nu,
                                          const Cocycle<S>& rho) {
  const std::size_t window = nu.window();
  if (window > 12) throw CapacityError("invariant upgrade supports windows up to 12");
  UpgradeReport<S> out;
  const auto indicator = TestFunction<S>::on_window(window, [&a](const BinaryConfig& x) {
    return a.count(x) ? S(1) : S(0);
  });
  std::map<std::size_t, bool> orbit_inside;  // keyed by number of ones
  for (std::uint64_t code = 0; code < (std::uint64_t{1} << window); ++code) {
    const auto x = BinaryConfig::from_index(code, window);
    auto it = orbit_inside.find(x.count_ones());
    if (it == orbit_inside.end()) {
      const bool inside = average_orbit(ChainLevel(window), rho, indicator, x) == S(1);
      it = orbit_inside.emplace(x.count_ones(), inside).first;
    }
    if (it->second) out.upgraded.insert(x);
  }
  for (Index i = 1; i < window && out.almost_invariant; ++i) {
    const auto tau = Permutation::transposition(i, i + 1);
    S diff(0);
    for (const auto& x : a) {
      if (!a.count(act(tau, x))) diff += nu.atom(x) + nu.atom(act(tau, x));
    }
    if (diff > S(0)) {
      out.almost_invariant = false;
      out.witness = tau;
      out.witness_mass = diff;
    }
  }
  for (const auto& x : a) {
    if (!out.upgraded.count(x)) out.symmetric_difference_mass += nu.atom(x);
  }
  for (const auto& x : out.upgraded) {
    if (!a.count(x)) out.symmetric_difference_mass += nu.atom(x);
  }
  return out;
}

}  // namespace ergodec

#endif  // ERGODEC_DECOMPOSITION_HPP
