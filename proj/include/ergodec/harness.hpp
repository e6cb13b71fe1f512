#ifndef ERGODEC_HARNESS_HPP
#define ERGODEC_HARNESS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "CLI11.hpp"
#include "json.hpp"

#include "ergodec/averaging.hpp"
#include "ergodec/cocycle.hpp"
#include "ergodec/decomposition.hpp"
#include "ergodec/error.hpp"
#include "ergodec/group.hpp"
#include "ergodec/kolmogorov.hpp"
#include "ergodec/measures.hpp"
#include "ergodec/random.hpp"
#include "ergodec/rational.hpp"
#include "ergodec/sigma_finite.hpp"

namespace ergodec::harness {

using json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

/**
 * Flat key = value experiment configuration (TOML subset: scalars, quoted
 * strings and one-level arrays). Every value read through a getter is
 * echoed, with defaults filled in, into the result record.
 */
class ExperimentConfig {
 public:
  static ExperimentConfig parse(std::istream& in) {
    ExperimentConfig cfg;
    CLI::ConfigTOML reader;
    for (const auto& item : reader.from_config(in)) {
      if (!item.parents.empty()) {
        if (item.name == "++" || item.name == "--") continue;
        throw ConfigError("config sections are not supported: " + item.fullname());
      }
      cfg.raw_[item.name] = item.inputs;
    }
    return cfg;
  }

  static ExperimentConfig from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    return parse(in);
  }

  static ExperimentConfig from_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  void set(const std::string& key, std::vector<std::string> values) { raw_[key] = std::move(values); }
  bool has(const std::string& key) const { return raw_.count(key) > 0; }

  void require_known(const std::set<std::string>& allowed) const {
    for (const auto& [k, v] : raw_) {
      if (!allowed.count(k)) {
        std::string list;
        for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
        throw ConfigError("unknown config key '" + k + "' (allowed: " + list + ")");
      }
    }
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    return echo(key, single(key).value_or(fallback));
  }

  std::size_t get_size(const std::string& key, std::size_t fallback) const {
    const auto v = single(key);
    return v ? echo_number(key, to_size(key, *v)) : echo_number(key, fallback);
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto v = single(key);
    return v ? echo_number(key, to_u64(key, *v)) : echo_number(key, fallback);
  }

  double get_double(const std::string& key, double fallback) const {
    const auto v = single(key);
    const double d = v ? to_double_value(key, *v) : fallback;
    echo(key, format_double(d));
    return d;
  }

  Rational get_rational(const std::string& key, const Rational& fallback) const {
    const auto v = single(key);
    const Rational r = v ? to_rational(key, *v) : fallback;
    echo(key, format_rational(r));
    return r;
  }

  std::vector<std::size_t> get_size_list(const std::string& key, const std::vector<std::size_t>& fallback) const {
    std::vector<std::size_t> out = fallback;
    if (auto it = raw_.find(key); it != raw_.end()) {
      out.clear();
      for (const auto& s : it->second) out.push_back(to_size(key, s));
    }
    std::string text;
    for (auto v : out) text += (text.empty() ? "" : ",") + std::to_string(v);
    echo(key, "[" + text + "]");
    return out;
  }

  std::vector<Rational> get_rational_list(const std::string& key, const std::vector<Rational>& fallback) const {
    std::vector<Rational> out = fallback;
    if (auto it = raw_.find(key); it != raw_.end()) {
      out.clear();
      for (const auto& s : it->second) out.push_back(to_rational(key, s));
    }
    std::string text;
    for (const auto& v : out) text += (text.empty() ? "" : ",") + format_rational(v);
    echo(key, "[" + text + "]");
    return out;
  }

  // Resolved values of every key read so far.
  const std::map<std::string, std::string>& echoed() const { return echo_; }

 private:
  std::optional<std::string> single(const std::string& key) const {
    auto it = raw_.find(key);
    if (it == raw_.end()) return std::nullopt;
    if (it->second.size() != 1) throw ConfigError("config key '" + key + "' expects a single value");
    return it->second.front();
  }

  const std::string& echo(const std::string& key, const std::string& value) const {
    return echo_[key] = value;
  }
  template <typename T>
  T echo_number(const std::string& key, T value) const {
    echo_[key] = std::to_string(value);
    return value;
  }

  static std::uint64_t to_u64(const std::string& key, const std::string& s) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw ConfigError("config key '" + key + "' expects a nonnegative integer, got '" + s + "'");
    }
    return v;
  }
  static std::size_t to_size(const std::string& key, const std::string& s) {
    return static_cast<std::size_t>(to_u64(key, s));
  }
  static double to_double_value(const std::string& key, const std::string& s) {
    double v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw ConfigError("config key '" + key + "' expects a number, got '" + s + "'");
    }
    return v;
  }
  static Rational to_rational(const std::string& key, const std::string& s) {
    try {
      return parse_rational(s);
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "' expects a rational (p/q or decimal), got '" + s + "'");
    }
  }

  std::map<std::string, std::vector<std::string>> raw_;
  mutable std::map<std::string, std::string> echo_;
};

struct RunOptions {
  std::uint64_t seed = 1;
  std::size_t workers = 1;  // affects speed only, never results
};

using Cell = std::variant<std::int64_t, double, std::string>;

/// A numeric series emitted both as CSV and inside the result record.
struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) {
    if (row.size() != columns.size()) throw Error("table " + name + ": row width differs from header");
    rows.push_back(std::move(row));
  }

  // RFC 4180 quoting for fields holding commas, quotes or newlines.
  static std::string csv_field(const std::string& v) {
    if (v.find_first_of(",\"\n") == std::string::npos) return v;
    std::string q = "\"";
    for (char c : v) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  }

  std::string to_csv() const {
    std::string s;
    for (std::size_t j = 0; j < columns.size(); ++j) s += (j ? "," : "") + csv_field(columns[j]);
    s += "\n";
    for (const auto& row : rows) {
      for (std::size_t j = 0; j < row.size(); ++j) {
        if (j) s += ",";
        std::visit(
            [&s](const auto& v) {
              using T = std::decay_t<decltype(v)>;
              if constexpr (std::is_same_v<T, double>) {
                s += format_double(v);
              } else if constexpr (std::is_same_v<T, std::int64_t>) {
                s += std::to_string(v);
              } else {
                s += csv_field(v);
              }
            },
            row[j]);
      }
      s += "\n";
    }
    return s;
  }

  json to_json() const {
    json rows_json = json::array();
    for (const auto& row : rows) {
      json r = json::array();
      for (const auto& c : row) std::visit([&r](const auto& v) { r.push_back(v); }, c);
      rows_json.push_back(std::move(r));
    }
    return json{{"columns", columns}, {"rows", std::move(rows_json)}};
  }
};

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ResultRecord {
  std::string experiment;
  std::map<std::string, std::string> config;
  std::uint64_t seed = 0;
  std::vector<Check> checks;
  std::vector<Table> tables;
  json summary = json::object();
  std::string narrative;

  bool passed() const {
    return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
  }

  void check(std::string name, bool ok, std::string detail) {
    checks.push_back({std::move(name), ok, std::move(detail)});
  }

  const Table& table(const std::string& name) const {
    for (const auto& t : tables) {
      if (t.name == name) return t;
    }
    throw Error("no table named " + name);
  }

  json to_json() const {
    json j;
    j["experiment"] = experiment;
    // Seed is reported once at top level; worker count never enters the record.
    auto echoed = config;
    echoed.erase("seed");
    echoed.erase("workers");
    j["config"] = std::move(echoed);
    j["seed"] = seed;
    j["passed"] = passed();
    json cs = json::array();
    for (const auto& c : checks) cs.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    j["verdicts"] = std::move(cs);
    j["summary"] = summary;
    json ts = json::object();
    for (const auto& t : tables) ts[t.name] = t.to_json();
    j["tables"] = std::move(ts);
    if (!narrative.empty()) j["narrative"] = narrative;
    j["runtime"] = {{"library_version", kVersion}, {"exact_level_cap", kMaxEnumerableLevel}};
    return j;
  }
};

/// An estimate with its method tag and standard error.
inline json estimate(double value, Method method, double std_error) {
  return {{"value", value}, {"method", to_string(method)}, {"stderr", std_error}};
}
inline json exact_value(const Rational& value) {
  return {{"value", format_rational(value)}, {"method", "exact"}, {"stderr", 0.0}};
}

namespace detail {

inline const std::set<std::string>& common_keys() {
  static const std::set<std::string> keys = {"seed", "workers"};
  return keys;
}

inline std::set<std::string> with_common(std::set<std::string> keys) {
  keys.insert(common_keys().begin(), common_keys().end());
  return keys;
}

inline std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (auto x : v) s += (s.empty() ? "" : ",") + std::to_string(x);
  return s;
}

// Inhomogeneous rational product with parameters in {1/7, ..., 6/7}.
inline ProductBernoulli<Rational> random_product(std::size_t window, RandomStream& rng) {
  std::vector<Rational> p;
  for (std::size_t i = 0; i < window; ++i) p.emplace_back(1 + static_cast<long>(rng.uniform_below(6)), 7);
  return ProductBernoulli<Rational>(std::move(p));
}

inline TestFunction<Rational> random_window_function(std::size_t window, RandomStream& rng) {
  std::vector<Rational> table;
  for (std::uint64_t c = 0; c < (std::uint64_t{1} << window); ++c) {
    table.emplace_back(static_cast<long>(rng.uniform_below(21)) - 10, 10);
  }
  return TestFunction<Rational>::on_window(window, [table](const BinaryConfig& x) { return table[x.index()]; });
}

}  // namespace detail

/// De Finetti decomposition of a Bernoulli mixture or a Beta-Bernoulli measure.
inline ResultRecord run_definetti(const ExperimentConfig& cfg, const RunOptions& run) {
  cfg.require_known(detail::with_common({"model", "window", "samples", "weights", "params", "alpha", "beta",
                                          "depth", "schedule", "tolerance", "mc_samples", "min_gap",
                                          "max_nonconvergence", "probes", "ergodicity_tolerance",
                                          "residual_depth", "residual_tolerance", "recovery_tolerance",
                                          "ks_tolerance"}));
  ResultRecord rec;
  rec.experiment = "definetti";
  rec.seed = run.seed;
  const std::string model = cfg.get_string("model", "bernoulli-mixture");
  if (model != "bernoulli-mixture" && model != "beta") {
    throw ConfigError("model must be 'bernoulli-mixture' or 'beta'");
  }
  const std::size_t window = cfg.get_size("window", 4096);
  if (window < 4) throw ConfigError("window must be at least 4");

  DecomposeConfig dc;
  dc.samples = cfg.get_size("samples", 20000);
  dc.depth = cfg.get_size("depth", 2);
  dc.limit.schedule = cfg.get_size_list("schedule", resolved_limit_options(dc, window).schedule);
  dc.limit.tolerance = cfg.get_double("tolerance", 0.01);
  dc.limit.mc_samples = cfg.get_size("mc_samples", 4000);
  dc.min_gap = cfg.get_double("min_gap", 0.05);
  dc.max_nonconvergence = cfg.get_double("max_nonconvergence", 0.01);
  dc.ergodicity_probes = cfg.get_size("probes", 20);
  dc.ergodicity_tolerance = cfg.get_double("ergodicity_tolerance", 0.03);
  dc.workers = run.workers;
  dc.seed = run.seed;
  const std::size_t residual_depth = cfg.get_size("residual_depth", 3);
  const double residual_tolerance = cfg.get_double("residual_tolerance", 0.01);

  std::function<ResidualReport(const DecomposingMeasure&)> residual;
  ConfigSampler sampler;
  std::vector<Rational> weights;
  std::vector<Rational> params;
  std::optional<BetaBernoulliMixture> beta;
  double recovery_tolerance = 0.0;
  double ks_tolerance = 0.0;
  if (model == "bernoulli-mixture") {
    weights = cfg.get_rational_list("weights", {Rational(3, 10), Rational(7, 10)});
    params = cfg.get_rational_list("params", {Rational(1, 5), Rational(4, 5)});
    recovery_tolerance = cfg.get_double("recovery_tolerance", 0.02);
    if (weights.size() != params.size() || weights.empty()) {
      throw ConfigError("weights and params must be nonempty lists of equal length");
    }
    std::vector<MixtureComponent<Rational>> exact_parts;
    std::vector<MixtureComponent<double>> parts;
    std::vector<double> wd;
    for (std::size_t j = 0; j < params.size(); ++j) {
      exact_parts.emplace_back(ProductBernoulli<Rational>::constant(params[j], window));
      parts.emplace_back(ProductBernoulli<double>::constant(to_double(params[j]), window));
      wd.push_back(to_double(weights[j]));
    }
    const Mixture<Rational> exact(weights, std::move(exact_parts));
    const Mixture<double> approx(wd, std::move(parts));
    sampler = [approx](RandomStream& r) { return approx.sample(r); };
    residual = [exact, residual_depth](const DecomposingMeasure& dm) {
      return barycenter_residual(exact, dm, residual_depth);
    };
    dc.mode = DecomposeConfig::Mode::finite_mixture;
  } else {
    beta.emplace(cfg.get_rational("alpha", Rational(2)), cfg.get_rational("beta", Rational(3)), window);
    ks_tolerance = cfg.get_double("ks_tolerance", 0.02);
    const BetaBernoulliMixture m = *beta;
    sampler = [m](RandomStream& r) { return m.sample(r); };
    residual = [m, residual_depth](const DecomposingMeasure& dm) {
      return barycenter_residual(m, dm, residual_depth);
    };
    dc.mode = DecomposeConfig::Mode::continuous;
  }
  rec.config = cfg.echoed();

  DecomposingMeasure dm;
  try {
    dm = decompose(sampler, window, Cocycle<double>::constant_one(), dc);
  } catch (const DecompositionError& e) {
    rec.check("convergence", false, e.what());
    rec.summary["nonconverged_fraction"] = e.nonconverged_fraction;
    return rec;
  }
  rec.summary["nonconverged_fraction"] = dm.nonconverged_fraction;
  rec.summary["schedule"] = dm.schedule;
  rec.check("convergence", dm.nonconverged_fraction <= dc.max_nonconvergence,
            "non-converged fraction " + format_double(dm.nonconverged_fraction) + " <= " +
                format_double(dc.max_nonconvergence));

  Table stats{"statistics", {"sample"}, {}};
  for (const auto& s : dm.dictionary) stats.columns.push_back("r" + TestDictionary::label(s));
  stats.columns.push_back("converged");
  for (std::size_t i = 0; i < dm.statistics.size(); ++i) {
    std::vector<Cell> row{static_cast<std::int64_t>(i)};
    for (double v : dm.statistics[i]) row.emplace_back(v);
    row.emplace_back(static_cast<std::int64_t>(dm.converged[i]));
    stats.add(std::move(row));
  }

  const auto res = residual(dm);
  rec.summary["barycenter_residual"] = estimate(res.max_residual, Method::monte_carlo, 0.0);
  rec.summary["worst_cylinder"] = res.worst.to_string();
  rec.check("barycenter-residual", res.max_residual <= residual_tolerance,
            "max residual " + format_double(res.max_residual) + " at " + res.worst.to_string() +
                " (depth <= " + std::to_string(residual_depth) + ", tolerance " + format_double(residual_tolerance) +
                ")");

  if (dc.mode == DecomposeConfig::Mode::finite_mixture) {
    Table comps{"components", {"label", "weight", "center", "spread", "members", "representative", "ergodicity",
                               "method"}, {}};
    for (const auto& c : dm.components) {
      comps.add({static_cast<std::int64_t>(c.label), c.weight, c.center, c.spread,
                 static_cast<std::int64_t>(c.members), describe(c.representative), to_string(c.ergodicity.verdict),
                 std::string("monte-carlo")});
    }
    rec.tables.push_back(std::move(comps));

    // Components come out ordered by center; match against the truth sorted by parameter.
    std::vector<std::size_t> order(params.size());
    for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return params[a] < params[b]; });
    const bool count_ok = dm.components.size() == params.size();
    rec.check("component-count", count_ok,
              std::to_string(dm.components.size()) + " components, expected " + std::to_string(params.size()));
    double max_w = 0.0;
    double max_c = 0.0;
    bool ergodic = true;
    if (count_ok) {
      for (std::size_t j = 0; j < order.size(); ++j) {
        max_w = std::max(max_w, std::abs(dm.components[j].weight - to_double(weights[order[j]])));
        max_c = std::max(max_c, std::abs(dm.components[j].center - to_double(params[order[j]])));
        ergodic &= dm.components[j].ergodicity.verdict == Verdict::ergodic;
      }
    }
    rec.check("weights", count_ok && max_w <= recovery_tolerance,
              "max weight error " + format_double(max_w) + " <= " + format_double(recovery_tolerance));
    rec.check("centers", count_ok && max_c <= recovery_tolerance,
              "max center error " + format_double(max_c) + " <= " + format_double(recovery_tolerance));
    rec.check("components-ergodic", count_ok && ergodic, "ergodicity test on every component");
    rec.check("admissible", dm.admissible, "distinct component representatives");
  } else {
    const double a = to_double(beta->alpha());
    const double b = to_double(beta->beta());
    const double ks = ks_distance(dm.empirical_parameters, [a, b](double t) {
      return t <= 0 ? 0.0 : t >= 1 ? 1.0 : boost::math::ibeta(a, b, t);
    });
    rec.summary["ks_distance"] = estimate(ks, Method::monte_carlo, 0.0);
    rec.check("ks-distance", ks <= ks_tolerance,
              "KS distance of r{1} to Beta(" + format_double(a) + "," + format_double(b) + ") = " + format_double(ks) +
                  " <= " + format_double(ks_tolerance));
  }
  rec.tables.push_back(std::move(stats));
  return rec;
}

inline ResultRecord run_kolmogorov(const ExperimentConfig& cfg, const RunOptions& run) {
  cfg.require_known(
      detail::with_common({"p_low", "p_high", "max_count", "window", "samples", "event_tolerance"}));
  KolmogorovOptions o;
  o.p_low = cfg.get_rational("p_low", o.p_low);
  o.p_high = cfg.get_rational("p_high", o.p_high);
  o.max_count = cfg.get_size("max_count", o.max_count);
  o.window = cfg.get_size("window", o.window);
  o.samples = cfg.get_size("samples", o.samples);
  o.event_tolerance = cfg.get_double("event_tolerance", o.event_tolerance);
  o.seed = run.seed;
  o.workers = run.workers;
  ResultRecord rec;
  rec.experiment = "kolmogorov";
  rec.seed = run.seed;
  rec.config = cfg.echoed();
  const auto r = demonstrate_kolmogorov(o);
  rec.narrative = r.narrative(o);
  rec.check("ergodic-for-full-group", r.ergodic_for_full_group,
            std::to_string(r.sets_checked) + " invariant sets over " + std::to_string(r.algebra_atoms) +
                " atoms, all of mass 0 or 1");
  rec.check("decomposable", r.split_reproduces_mixture,
            "split weights (" + format_rational(r.weight_low) + ", " + format_rational(r.weight_high) + ")");
  rec.check("finitary-event-mass", r.event_within_tolerance,
            "mass " + format_double(r.event_mass) + " within " + format_double(o.event_tolerance) + " of 1/2");
  rec.summary["event_mass"] = estimate(r.event_mass, Method::monte_carlo, r.event_stderr);
  rec.summary["misclassification_bound"] = r.misclassification_bound;
  rec.summary["sampling_bound"] = r.sampling_bound;
  rec.summary["split_weights"] = {format_rational(r.weight_low), format_rational(r.weight_high)};
  rec.summary["verdict"] = r.passed() ? "ergodic for full group, decomposable" : "demonstration failed";
  return rec;
}

inline ResultRecord run_sigma_finite(const ExperimentConfig& cfg, const RunOptions& run) {
  cfg.require_known(detail::with_common(
      {"orbits", "weights", "base", "reweightings", "ac_pairs", "roundtrips", "max_orbit", "cylinder_depth"}));
  ResultRecord rec;
  rec.experiment = "sigma-finite";
  rec.seed = run.seed;
  const auto orbits = cfg.get_size_list("orbits", {1, 2, 3});
  const auto weights = cfg.get_rational_list("weights", {Rational(2), Rational(3), Rational(1, 2)});
  const auto base = cfg.get_rational("base", Rational(4));
  const std::size_t reweightings = cfg.get_size("reweightings", 100);
  const std::size_t ac_pairs = cfg.get_size("ac_pairs", 10);
  const std::size_t roundtrips = cfg.get_size("roundtrips", 50);
  const std::size_t max_orbit = cfg.get_size("max_orbit", 4);
  const std::size_t depth = cfg.get_size("cylinder_depth", 3);
  rec.config = cfg.echoed();
  if (orbits.size() != weights.size() || orbits.empty()) {
    throw ConfigError("orbits and weights must be nonempty lists of equal length");
  }
  std::map<std::size_t, Rational> w;
  for (std::size_t j = 0; j < orbits.size(); ++j) {
    if (w.count(orbits[j])) throw ConfigError("orbit labels must be distinct");
    w[orbits[j]] = weights[j];
  }
  const OrbitSigmaFinite nu(w);
  const OrbitWeight f = OrbitWeight::geometric(base);
  RandomStream rng(run.seed);
  auto random_rational = [&rng]() {
    return Rational(1 + static_cast<long>(rng.uniform_below(30)), 1 + static_cast<long>(rng.uniform_below(30)));
  };
  auto random_model = [&]() {
    OrbitSigmaFinite m;
    while (m.weights().empty()) {
      for (std::size_t k = 0; k <= max_orbit; ++k) {
        if (rng.bernoulli(0.5)) m.set_weight(k, random_rational());
      }
    }
    return m;
  };

  const auto dec = decompose_sigma_finite(nu, f);
  Table comps{"components", {"orbit", "weight", "scale", "method"}, {}};
  for (const auto& c : dec.components) {
    comps.add({static_cast<std::int64_t>(c.orbit), format_rational(c.weight), format_rational(c.scale),
               std::string("exact")});
  }
  rec.tables.push_back(std::move(comps));
  rec.summary["normalizer"] = exact_value(dec.normalizer);
  rec.summary["pcl"] = pcl(dec).to_string();

  // PCL invariance under random positive reweightings.
  Table rw{"reweightings", {"index", "descriptor", "barycenter_unchanged"}, {}};
  bool pcl_constant = true;
  for (std::size_t t = 0; t < reweightings; ++t) {
    std::map<std::size_t, Rational> phi;
    for (const auto& c : dec.components) phi[c.orbit] = random_rational();
    const auto re = reweight_decomposition(dec, [&phi](std::size_t k) { return phi.at(k); });
    const bool same_bary = re.barycenter() == dec.barycenter();
    pcl_constant &= pcl(re) == pcl(dec) && same_bary;
    rw.add({static_cast<std::int64_t>(t), pcl(re).to_string(), static_cast<std::int64_t>(same_bary)});
  }
  rec.tables.push_back(std::move(rw));
  rec.summary["pcl_constant"] = pcl_constant;
  rec.check("pcl-constant", pcl_constant,
            "PCL constant: " + std::string(pcl_constant ? "true" : "false") + " across " +
                std::to_string(reweightings) + " reweightings");

  // AC and singularity transfer to descriptors.
  Table ac{"ac_pairs", {"index", "descriptor_1", "descriptor_2", "measure_relation", "descriptor_relation"}, {}};
  bool ac_ok = true;
  for (std::size_t t = 0; t < ac_pairs; ++t) {
    const auto a = random_model();
    const auto b = random_model();
    const auto measure_rel = ac_check(a, b);
    const auto desc_rel = pcl(a, f).relation_to(pcl(b, f));
    ac_ok &= measure_rel == desc_rel;
    ac.add({static_cast<std::int64_t>(t), pcl(a, f).to_string(), pcl(b, f).to_string(), to_string(measure_rel),
            to_string(desc_rel)});
  }
  rec.tables.push_back(std::move(ac));
  rec.check("ac-transfer", ac_ok, std::to_string(ac_pairs) + " random pairs");

  // P_f round trips and scale invariance.
  bool roundtrip_ok = true;
  bool scale_ok = true;
  const auto cylinders = cylinders_up_to(depth);
  for (std::size_t t = 0; t < roundtrips; ++t) {
    const auto m = random_model();
    const auto mu = p_f(m, f);
    const auto cls = inv_p_f(mu, f);
    roundtrip_ok &= cls == ProjectiveClass::of(m, f);
    roundtrip_ok &= integrate(std::get<OrbitSigmaFinite>(cls.representative()), f) == 1;
    const auto back = p_f(cls);
    const auto scaled = p_f(m.scaled(random_rational()), f);
    for (const auto& c : cylinders) {
      roundtrip_ok &= back.mass(c) == mu.mass(c);
      scale_ok &= scaled.mass(c) == mu.mass(c);
    }
  }
  rec.check("pf-roundtrip", roundtrip_ok,
            std::to_string(roundtrips) + " random orbit models, exact on cylinders of depth <= " +
                std::to_string(depth));
  rec.check("pf-scale-invariance", scale_ok, "p_f(c nu) = p_f(nu) exactly");

  const auto split = classify_components(nu);
  const auto finite = split.finite_part.support();
  const auto infinite = split.infinite_part.support();
  const std::string finite_text = detail::join({finite.begin(), finite.end()});
  const std::string infinite_text = detail::join({infinite.begin(), infinite.end()});
  rec.check("component-split", split.sum() == nu,
            "finite orbits {" + finite_text + "}, infinite orbits {" + infinite_text + "}, sum reproduces nu");
  rec.summary["finite_orbits"] = finite_text;
  rec.summary["infinite_orbits"] = infinite_text;
  return rec;
}

inline Table orbital_table(const std::string& name, const OrbitalScan& scan) {
  Table t{name, {"level", "function", "value", "stderr", "method"}, {}};
  for (const auto& row : scan.levels) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      t.add({static_cast<std::int64_t>(row[j].level), TestDictionary::label(scan.battery[j]), row[j].value,
             row[j].std_error, to_string(row[j].method)});
    }
  }
  return t;
}

inline ResultRecord run_orbital(const ExperimentConfig& cfg, const RunOptions& run) {
  cfg.require_known(detail::with_common({"window", "sparse_ones", "sparse_schedule", "typical_p",
                                          "typical_schedule", "mc_samples", "tolerance", "escape_threshold",
                                          "typical_tolerance"}));
  ResultRecord rec;
  rec.experiment = "orbital";
  rec.seed = run.seed;
  const std::size_t window = cfg.get_size("window", 4096);
  const std::size_t k = cfg.get_size("sparse_ones", 3);
  const auto sparse_schedule = cfg.get_size_list("sparse_schedule", {3, 4, 5, 6, 7, 8, 125, 250, 500, 1000});
  const double p = cfg.get_double("typical_p", 0.5);
  const auto typical_schedule = cfg.get_size_list("typical_schedule", {1024, 2048, 4096});
  OrbitalOptions o;
  o.mc_samples = cfg.get_size("mc_samples", 4000);
  o.tolerance = cfg.get_double("tolerance", 0.01);
  o.escape_threshold = cfg.get_double("escape_threshold", 0.01);
  const double typical_tolerance = cfg.get_double("typical_tolerance", 0.03);
  o.seed = run.seed;
  rec.config = cfg.echoed();
  if (k == 0 || k > window) throw ConfigError("sparse_ones must lie in 1..window");
  if (!(p > 0 && p < 1)) throw ConfigError("typical_p must lie strictly between 0 and 1");

  BinaryConfig sparse(window);
  for (Index i = 1; i <= k; ++i) sparse.set(i, 1);
  const auto esc = orbital_dichotomy(sparse, sparse_schedule, o);
  bool exact_ok = true;
  std::size_t exact_levels = 0;
  for (std::size_t n : sparse_schedule) {
    if (n > kMaxEnumerableLevel || n < k) continue;
    ++exact_levels;
    const auto eta = OrbitalMeasure::exact(sparse, n);
    exact_ok &= eta.atoms().mass(Cylinder().pin(1, 1)) == Rational(static_cast<long>(k), static_cast<long>(n));
  }
  const auto& last = esc.levels.back()[0];
  rec.check("sparse-exact-levels", exact_ok && exact_levels > 0,
            "eta_x^n({x1=1}) = " + std::to_string(k) + "/n exactly at " + std::to_string(exact_levels) +
                " exact levels");
  rec.check("sparse-escapes-mass",
            esc.verdict == OrbitalVerdict::escapes_mass && last.value <= o.escape_threshold,
            to_string(esc.verdict) + "; value " + format_double(last.value) + " at n = " + std::to_string(last.level));
  rec.tables.push_back(orbital_table("orbital_sparse", esc));

  RandomStream rng = RandomStream::derive(run.seed, 1);
  BinaryConfig typical(window);
  for (Index i = 1; i <= window; ++i) typical.set(i, rng.bernoulli(p));
  OrbitalOptions ot = o;
  ot.seed = splitmix64(run.seed + 1);
  const auto conv = orbital_dichotomy(typical, typical_schedule, ot);
  const auto& tl = conv.levels.back()[0];
  rec.check("typical-converges",
            conv.verdict == OrbitalVerdict::converges && std::abs(tl.value - p) <= typical_tolerance,
            to_string(conv.verdict) + "; value " + format_double(tl.value) + " at n = " + std::to_string(tl.level) +
                ", target " + format_double(p) + " +- " + format_double(typical_tolerance));
  rec.tables.push_back(orbital_table("orbital_typical", conv));

  BinaryConfig ones(window);
  for (Index i = 1; i <= window; ++i) ones.set(i, 1);
  const auto all = orbital_dichotomy(ones, typical_schedule, o);
  rec.check("all-ones-converges", all.verdict == OrbitalVerdict::converges, to_string(all.verdict));
  rec.tables.push_back(orbital_table("orbital_all_ones", all));

  rec.summary["sparse_verdict"] = to_string(esc.verdict);
  rec.summary["typical_verdict"] = to_string(conv.verdict);
  rec.summary["typical_limit"] = estimate(tl.value, tl.method, tl.std_error);
  return rec;
}

/// Property suite: cocycle identity, conditional expectation, tower, Fubini and invariance.
inline ResultRecord run_validate(const ExperimentConfig& cfg, const RunOptions& run) {
  cfg.require_known(detail::with_common({"cocycle_trials", "cocycle_level", "cocycle_window", "ce_window",
                                          "ce_level", "ce_depth", "tower_window", "tower_max_level",
                                          "fubini_max_window", "fubini_max_level", "invariance_window",
                                          "invariance_trials"}));
  ResultRecord rec;
  rec.experiment = "validate";
  rec.seed = run.seed;
  const std::size_t trials = cfg.get_size("cocycle_trials", 1000);
  const std::size_t c_level = cfg.get_size("cocycle_level", 6);
  const std::size_t c_window = cfg.get_size("cocycle_window", 16);
  const std::size_t ce_window = cfg.get_size("ce_window", 4);
  const std::size_t ce_level = cfg.get_size("ce_level", 2);
  const std::size_t ce_depth = cfg.get_size("ce_depth", 2);
  const std::size_t t_window = cfg.get_size("tower_window", 6);
  const std::size_t t_max = cfg.get_size("tower_max_level", 5);
  const std::size_t f_window = cfg.get_size("fubini_max_window", 4);
  const std::size_t f_level = cfg.get_size("fubini_max_level", 3);
  const std::size_t i_window = cfg.get_size("invariance_window", 6);
  const std::size_t i_trials = cfg.get_size("invariance_trials", 200);
  rec.config = cfg.echoed();
  if (ce_window > 8 || ce_level > ce_window) throw ConfigError("ce_window <= 8 and ce_level <= ce_window required");
  if (t_max > t_window || t_max > 5) throw ConfigError("tower_max_level must be <= min(5, tower_window)");
  if (f_window > 6 || f_level > kMaxEnumerableLevel) throw ConfigError("fubini limits too large");
  if (i_window > kMaxEnumerableLevel) throw CapacityError("invariance_window must be <= 8");

  RandomStream rng(run.seed);

  // Cocycle identity on the RN cocycle of an inhomogeneous product and on rho_f.
  {
    const auto prod = detail::random_product(c_window, rng);
    const auto rep = verify_identity(make_rn(prod), trials, ChainLevel(c_level), c_window, rng);
    rec.check("cocycle-identity", rep.passed() && rep.exact,
              std::to_string(rep.trials) + " exact triples in S(" + std::to_string(c_level) + "), N = " +
                  std::to_string(c_window) + ", " + std::to_string(rep.violations) + " violations");
    const auto rho_f = make_rho_f(make_fibrewise_f().weight_function());
    const auto rep_f = verify_identity(rho_f, trials, ChainLevel(c_level), c_window, rng);
    rec.check("cocycle-identity-rho-f", rep_f.passed(),
              std::to_string(rep_f.trials) + " exact triples, " + std::to_string(rep_f.violations) + " violations");
  }

  // Conditional expectation over all invariant sets and all dictionary functions.
  {
    const auto prod = detail::random_product(ce_window, rng);
    const auto nu = prod.to_atomic();
    const auto rho = make_rn(prod);
    const TestDictionary dict(ce_depth, ce_window);
    Table t{"conditional_expectation", {"function", "classes", "sets", "failures", "method"}, {}};
    bool ok = true;
    for (const auto& phi : dict.functions<Rational>()) {
      const auto r = conditional_expectation_check(ChainLevel(ce_level), rho, phi, nu);
      ok &= r.passed() && r.exhaustive;
      t.add({phi.name(), static_cast<std::int64_t>(r.classes), static_cast<std::int64_t>(r.sets_checked),
             static_cast<std::int64_t>(r.failures), std::string("exact")});
    }
    rec.check("conditional-expectation", ok,
              std::to_string(dict.size()) + " functions, every invariant set, N = " + std::to_string(ce_window) +
                  ", n = " + std::to_string(ce_level));
    rec.tables.push_back(std::move(t));
  }

  // Tower property for 1 <= n <= m <= t_max on every atom.
  {
    const auto prod = detail::random_product(t_window, rng);
    const auto nu = prod.to_atomic();
    const auto rho = make_rn(prod);
    const auto phi = detail::random_window_function(t_window, rng);
    Table t{"tower", {"n", "m", "atoms", "failures", "method"}, {}};
    bool ok = true;
    for (std::size_t m = 1; m <= t_max; ++m) {
      for (std::size_t n = 1; n <= m; ++n) {
        const auto r = tower_check(ChainLevel(m), ChainLevel(n), rho, phi, nu);
        ok &= r.passed();
        t.add({static_cast<std::int64_t>(n), static_cast<std::int64_t>(m), static_cast<std::int64_t>(r.checked),
               static_cast<std::int64_t>(r.failures), std::string("exact")});
      }
    }
    rec.check("tower", ok, "A_m A_n phi = A_m phi for 1 <= n <= m <= " + std::to_string(t_max) + ", N = " +
                               std::to_string(t_window));
    rec.tables.push_back(std::move(t));
  }

  // Fubini identity.
  {
    Table t{"fubini", {"window", "n", "lhs", "rhs", "method"}, {}};
    bool ok = true;
    for (std::size_t w = 1; w <= f_window; ++w) {
      const auto prod = detail::random_product(w, rng);
      const auto nu = prod.to_atomic();
      const auto rho = make_rn(prod);
      const auto phi = detail::random_window_function(w, rng);
      for (std::size_t n = 1; n <= std::min(w, f_level); ++n) {
        const auto r = fubini_check(ChainLevel(n), rho, phi, nu);
        ok &= r.holds;
        t.add({static_cast<std::int64_t>(w), static_cast<std::int64_t>(n), r.lhs, r.rhs, std::string("exact")});
      }
    }
    rec.check("fubini", ok, "exact for N <= " + std::to_string(f_window) + ", n <= " + std::to_string(f_level));
    rec.tables.push_back(std::move(t));
  }

  // Invariance: A_n phi(T_g x) = A_n phi(x) for g in S(n).
  {
    const auto prod = detail::random_product(i_window, rng);
    const auto rho = make_rn(prod);
    const auto phi = detail::random_window_function(i_window, rng);
    std::size_t failures = 0;
    for (std::size_t t = 0; t < i_trials; ++t) {
      const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform_below(i_window));
      BinaryConfig x(i_window);
      for (Index i = 1; i <= i_window; ++i) x.set(i, rng.bernoulli(0.5));
      const auto g = haar_sample(ChainLevel(n), rng);
      failures += average_orbit(ChainLevel(n), rho, phi, act(g, x)) != average_orbit(ChainLevel(n), rho, phi, x);
    }
    rec.check("invariance", failures == 0,
              std::to_string(i_trials) + " random (n, g, x), " + std::to_string(failures) + " failures");
  }
  return rec;
}

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {"definetti", "kolmogorov", "sigma-finite", "orbital", "validate"};
  return names;
}

inline ResultRecord run(const std::string& subcommand, const ExperimentConfig& cfg, const RunOptions& options) {
  if (subcommand == "definetti") return run_definetti(cfg, options);
  if (subcommand == "kolmogorov") return run_kolmogorov(cfg, options);
  if (subcommand == "sigma-finite") return run_sigma_finite(cfg, options);
  if (subcommand == "orbital") return run_orbital(cfg, options);
  if (subcommand == "validate") return run_validate(cfg, options);
  throw ConfigError("unknown subcommand '" + subcommand + "'");
}

/// results.json, one CSV per table, and <experiment>.txt when a narrative exists.
inline void write_artifacts(const ResultRecord& rec, const std::filesystem::path& out) {
  std::filesystem::create_directories(out);
  auto write = [&out](const std::string& name, const std::string& text) {
    std::ofstream f(out / name, std::ios::binary);
    if (!f) throw Error("cannot write " + (out / name).string());
    f << text;
  };
  write("results.json", rec.to_json().dump(2) + "\n");
  for (const auto& t : rec.tables) write(t.name + ".csv", t.to_csv());
  if (!rec.narrative.empty()) write(rec.experiment + ".txt", rec.narrative);
}

}  // namespace ergodec::harness

#endif  // ERGODEC_HARNESS_HPP
