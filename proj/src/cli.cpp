#include "maser/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "maser/dynamics.hpp"
#include "maser/parallel.hpp"
#include "maser/resonance.hpp"
#include "maser/spectral.hpp"

#ifndef MASER_VERSION
#define MASER_VERSION "0.0.0"
#endif

namespace maser::cli {

using json = nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Reads one config section. Every value handed out, defaults included, is
// recorded in the resolved document; keys never read are rejected.
class Section {
 public:
  Section(const json& doc, const std::string& name, json& resolved) : name_(name) {
    if (doc.contains(name)) {
      if (!doc.at(name).is_object()) throw ValidationError("section '" + name + "' must be an object");
      src_ = doc.at(name);
    } else {
      src_ = json::object();
    }
    resolved[name] = json::object();
    out_ = &resolved[name];
  }

  bool has(const std::string& key) const { return src_.contains(key); }

  double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
    double v = 0.0;
    if (has(key)) {
      const json& j = take(key);
      if (!j.is_number()) fail(key, "must be a number");
      v = j.get<double>();
    } else if (fallback) {
      v = *fallback;
    } else {
      fail(key, "is required");
    }
    if (!std::isfinite(v)) fail(key, "must be finite");
    (*out_)[key] = v;
    return v;
  }

  std::optional<double> optional_number(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return number(key);
  }

  long integer(const std::string& key, std::optional<long> fallback = std::nullopt) {
    long v = 0;
    if (has(key)) {
      const json& j = take(key);
      if (!j.is_number_integer()) fail(key, "must be an integer");
      v = j.get<long>();
    } else if (fallback) {
      v = *fallback;
    } else {
      fail(key, "is required");
    }
    (*out_)[key] = v;
    return v;
  }

  bool boolean(const std::string& key, bool fallback) {
    bool v = fallback;
    if (has(key)) {
      const json& j = take(key);
      if (!j.is_boolean()) fail(key, "must be true or false");
      v = j.get<bool>();
    }
    (*out_)[key] = v;
    return v;
  }

  std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
    std::string v;
    if (has(key)) {
      const json& j = take(key);
      if (!j.is_string()) fail(key, "must be a string");
      v = j.get<std::string>();
    } else if (fallback) {
      v = *fallback;
    } else {
      fail(key, "is required");
    }
    (*out_)[key] = v;
    return v;
  }

  std::string choice(const std::string& key, const std::string& fallback,
                     std::initializer_list<const char*> options) {
    const std::string v = text(key, fallback);
    for (const char* o : options)
      if (v == o) return v;
    std::string list;
    for (const char* o : options) list += std::string(list.empty() ? "" : ", ") + o;
    fail(key, "must be one of " + list);
    return v;
  }

  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) {
    std::vector<double> v = fallback;
    if (has(key)) {
      const json& j = take(key);
      if (!j.is_array() || j.empty()) fail(key, "must be a non-empty array of numbers");
      v.clear();
      for (const json& e : j) {
        if (!e.is_number() || !std::isfinite(e.get<double>())) fail(key, "must hold finite numbers");
        v.push_back(e.get<double>());
      }
    }
    (*out_)[key] = v;
    return v;
  }

  std::vector<long> integers(const std::string& key, const std::vector<long>& fallback) {
    std::vector<long> v = fallback;
    if (has(key)) {
      const json& j = take(key);
      if (!j.is_array()) fail(key, "must be an array of integers");
      v.clear();
      for (const json& e : j) {
        if (!e.is_number_integer()) fail(key, "must hold integers");
        v.push_back(e.get<long>());
      }
    }
    (*out_)[key] = v;
    return v;
  }

  void finish() const {
    for (const auto& item : src_.items())
      if (!seen_.count(item.key())) throw ValidationError("unknown key '" + name_ + "." + item.key() + "'");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ValidationError("'" + name_ + "." + key + "' " + what);
  }

 private:
  const json& take(const std::string& key) {
    seen_.insert(key);
    return src_.at(key);
  }

  std::string name_;
  json src_;
  json* out_ = nullptr;
  std::set<std::string> seen_;
};

struct SimulateKnobs {
  long steps = 1000;
  std::string initial;
  double alpha = 1.0;
  long fock = 0;
  std::string path;
  std::string picture;
  std::vector<long> tracked_bands;
  long record_every = 1;
  double leakage_budget = 1e-8;
  double leakage_threshold = 1e-10;
  std::optional<double> stop_below;
  std::optional<double> mixing_tol;
};

struct SpectrumKnobs {
  bool zero_quasi = false;
  std::vector<long> n_max_list;
};

struct ResonanceKnobs {
  long bound = 1000;
  std::string mode;
  double tol = 1e-9;
  std::string eta_exact, xi_exact;
};

struct MetastableKnobs {
  long k_max = 4;
  double threshold = 0.5;
  std::string threshold_mode;
  long budget = 1000000;
  long quasi_bound = 10000;
  bool d0 = false;
};

struct WitnessKnobs {
  std::string epsilon;
  long budget = 10000;
  long n0 = 1;
  long k_max = 8;
  long coherence_bands = 2;
  long headroom = 40;
  long quasi_bound = 10000;
};

struct SweepKnobs {
  std::vector<double> eta, xi, beta_omega0;
  std::vector<long> n_max;
  long resonance_bound = 1000;
  long quasi_bound = 1000;
  long max_points = 10000;
};

struct Config {
  Kind kind = Kind::Simulate;
  ModelParams model;
  int d_max = 0;
  std::uint64_t seed = 0;
  json resolved;
  SimulateKnobs simulate;
  SpectrumKnobs spectrum;
  ResonanceKnobs resonances;
  MetastableKnobs metastable;
  WitnessKnobs witness;
  SweepKnobs sweep;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

void parse_block(Config& c, const json& doc) {
  Section s(doc, to_string(c.kind), c.resolved);
  const int n_max = c.model.n_max;
  switch (c.kind) {
    case Kind::Simulate: {
      auto& k = c.simulate;
      k.steps = s.integer("steps", 1000);
      k.initial = s.choice("initial", "ground", {"ground", "fock", "thermal", "coherent", "random"});
      if (k.initial == "coherent") k.alpha = s.number("alpha", 1.0);
      if (k.initial == "fock") k.fock = s.integer("fock", 0);
      k.path = s.choice("path", "kraus", {"kraus", "band"});
      k.picture = s.choice("picture", "trace", {"trace", "interaction"});
      std::vector<long> bands;
      for (long d = 0; d <= c.d_max; ++d) bands.push_back(d);
      k.tracked_bands = s.integers("tracked_bands", bands);
      k.record_every = s.integer("record_every", 1);
      k.leakage_budget = s.number("leakage_budget", 1e-8);
      k.leakage_threshold = s.number("leakage_threshold", 1e-10);
      k.stop_below = s.optional_number("stop_below");
      k.mixing_tol = s.optional_number("mixing_tol");
      require(k.steps >= 0, "'simulate.steps' must be >= 0");
      require(k.fock >= 0 && k.fock <= n_max, "'simulate.fock' must lie in [0, n_max]");
      require(k.record_every >= 1, "'simulate.record_every' must be >= 1");
      require(k.leakage_budget > 0, "'simulate.leakage_budget' must be > 0");
      require(k.leakage_threshold > 0, "'simulate.leakage_threshold' must be > 0");
      require(!k.stop_below || *k.stop_below > 0, "'simulate.stop_below' must be > 0");
      require(!k.mixing_tol || (*k.mixing_tol > 0 && *k.mixing_tol < 1),
              "'simulate.mixing_tol' must lie in (0, 1)");
      for (long d : k.tracked_bands)
        require(std::abs(d) <= c.d_max, "'simulate.tracked_bands' entries must satisfy |d| <= d_max");
      break;
    }
    case Kind::Spectrum: {
      auto& k = c.spectrum;
      k.zero_quasi = s.boolean("zero_quasi", false);
      k.n_max_list = s.integers("n_max_list", {});
      for (long n : k.n_max_list) require(n >= 1 && n <= 1000000, "'spectrum.n_max_list' entries must lie in [1, 1e6]");
      break;
    }
    case Kind::Resonances: {
      auto& k = c.resonances;
      k.bound = s.integer("bound", 1000);
      k.mode = s.choice("mode", "float", {"float", "exact"});
      k.tol = s.number("tol", 1e-9);
      if (k.mode == "exact") {
        k.eta_exact = s.text("eta_exact");
        k.xi_exact = s.text("xi_exact");
      }
      require(k.bound >= 2 && k.bound <= 100000000, "'resonances.bound' must lie in [2, 1e8]");
      require(k.tol > 0, "'resonances.tol' must be > 0");
      break;
    }
    case Kind::Metastable: {
      auto& k = c.metastable;
      k.k_max = s.integer("k_max", 4);
      k.threshold = s.number("threshold", 0.5);
      k.threshold_mode = s.choice("threshold_mode", "relative", {"relative", "absolute"});
      k.budget = s.integer("budget", 1000000);
      k.quasi_bound = s.integer("quasi_bound", 10000);
      k.d0 = s.boolean("d0", false);
      require(k.k_max >= 1, "'metastable.k_max' must be >= 1");
      require(k.threshold > 0, "'metastable.threshold' must be > 0");
      require(k.budget >= 1, "'metastable.budget' must be >= 1");
      require(k.quasi_bound >= n_max + 2, "'metastable.quasi_bound' must be >= n_max + 2");
      break;
    }
    case Kind::Witness: {
      auto& k = c.witness;
      k.epsilon = s.choice("epsilon", "inverse", {"inverse", "inverse_sqrt", "inverse_log", "geometric"});
      k.budget = s.integer("budget", 10000);
      k.n0 = s.integer("n0", 1);
      k.k_max = s.integer("k_max", 8);
      k.coherence_bands = s.integer("coherence_bands", 2);
      k.headroom = s.integer("headroom", 40);
      k.quasi_bound = s.integer("quasi_bound", 10000);
      require(k.budget >= 1 && k.n0 >= 1 && k.n0 <= k.budget, "'witness' needs 1 <= n0 <= budget");
      require(k.k_max >= 1, "'witness.k_max' must be >= 1");
      require(k.coherence_bands >= 0, "'witness.coherence_bands' must be >= 0");
      require(k.headroom >= 0, "'witness.headroom' must be >= 0");
      require(k.quasi_bound >= n_max + 2, "'witness.quasi_bound' must be >= n_max + 2");
      break;
    }
    case Kind::Sweep: {
      auto& k = c.sweep;
      k.eta = s.numbers("eta", {c.model.eta});
      k.xi = s.numbers("xi", {c.model.xi});
      k.beta_omega0 = s.numbers("beta_omega0", {c.model.beta_omega0});
      k.n_max = s.integers("n_max", {static_cast<long>(n_max)});
      k.resonance_bound = s.integer("resonance_bound", 1000);
      k.quasi_bound = s.integer("quasi_bound", 1000);
      k.max_points = s.integer("max_points", 10000);
      require(!k.n_max.empty(), "'sweep.n_max' must be non-empty");
      require(k.resonance_bound >= 1, "'sweep.resonance_bound' must be >= 1");
      require(k.quasi_bound >= 2, "'sweep.quasi_bound' must be >= 2");
      const double points = static_cast<double>(k.eta.size()) * static_cast<double>(k.xi.size()) *
                            static_cast<double>(k.beta_omega0.size()) * static_cast<double>(k.n_max.size());
      require(points <= static_cast<double>(k.max_points), "sweep grid exceeds 'sweep.max_points'");
      break;
    }
  }
  s.finish();
}

Config parse_config(Kind kind, const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  require(doc.is_object(), "config must be a JSON object");
  const std::string block = to_string(kind);
  const std::set<std::string> sections{"experiment", "dimensionless", "physical", "thermal", "truncation", block};
  for (const auto& item : doc.items())
    require(sections.count(item.key()) > 0, "unknown section '" + item.key() + "'");

  Config c;
  c.kind = kind;
  c.resolved = json::object();
  {
    Section s(doc, "experiment", c.resolved);
    const std::string k = s.text("kind", block);
    require(k == block, "config is for '" + k + "' but the subcommand is '" + block + "'");
    const long seed = s.integer("seed", 0);
    require(seed >= 0, "'experiment.seed' must be >= 0");
    c.seed = static_cast<std::uint64_t>(seed);
    s.finish();
  }
  double beta_omega0 = 0.0;
  {
    Section s(doc, "thermal", c.resolved);
    beta_omega0 = s.number("beta_omega0");
    s.finish();
  }
  long n_max = 0, d_max = 0;
  {
    Section s(doc, "truncation", c.resolved);
    n_max = s.integer("n_max");
    d_max = s.integer("d_max", 0);
    s.finish();
  }
  require(n_max >= 1 && n_max <= 10000000, "'truncation.n_max' must lie in [1, 1e7]");
  require(d_max >= 0 && d_max <= n_max, "'truncation.d_max' must lie in [0, n_max]");

  const bool physical = doc.contains("physical");
  require(physical != doc.contains("dimensionless"),
          "exactly one of the 'physical' and 'dimensionless' sections is required");
  if (physical) {
    Section s(doc, "physical", c.resolved);
    PhysicalParams pp;
    pp.omega = s.number("omega");
    pp.omega0 = s.number("omega0");
    pp.lambda = s.number("lambda");
    pp.tau = s.number("tau");
    s.finish();
    require(pp.omega0 > 0, "'physical.omega0' must be > 0");
    pp.beta = beta_omega0 / pp.omega0;
    pp.n_max = static_cast<int>(n_max);
    pp.validate();
    c.model = ModelParams::from_physical(pp);
  } else {
    Section s(doc, "dimensionless", c.resolved);
    c.model.eta = s.number("eta");
    c.model.xi = s.number("xi");
    c.model.omega_tau = s.number("omega_tau", 1.0);
    s.finish();
  }
  c.model.beta_omega0 = beta_omega0;
  c.model.n_max = static_cast<int>(n_max);
  c.model.validate();
  c.d_max = static_cast<int>(d_max);

  parse_block(c, doc);
  return c;
}

std::string csv_text(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

class CsvWriter {
 public:
  explicit CsvWriter(std::initializer_list<std::string> header) { add_header(header); }
  explicit CsvWriter(const std::vector<std::string>& header) { add_header(header); }

  CsvWriter& operator<<(double v) { return field(format_double(v)); }
  CsvWriter& operator<<(long v) { return field(std::to_string(v)); }
  CsvWriter& operator<<(int v) { return field(std::to_string(v)); }
  CsvWriter& operator<<(bool v) { return field(v ? "1" : "0"); }
  CsvWriter& operator<<(const std::string& v) { return field(csv_text(v)); }
  void end_row() {
    text_ += '\n';
    first_ = true;
  }
  const std::string& str() const { return text_; }

 private:
  template <class C>
  void add_header(const C& header) {
    for (const auto& h : header) field(h);
    end_row();
  }
  CsvWriter& field(const std::string& s) {
    if (!first_) text_ += ',';
    text_ += s;
    first_ = false;
    return *this;
  }

  std::string text_;
  bool first_ = true;
};

struct Output {
  std::vector<std::pair<std::string, std::string>> files;  // name, content
  json results = json::object();
  double leakage_total = 0.0;
  long leakage_flags = 0;
};

json model_json(const ModelParams& p, int d_max) {
  return {{"eta", p.eta},
          {"xi", p.xi},
          {"beta_omega0", p.beta_omega0},
          {"omega_tau", p.omega_tau},
          {"n_max", p.n_max},
          {"d_max", d_max}};
}

std::vector<long> quasi_sites(const ModelParams& p, long bound) {
  return find_quasi_resonances(p.eta, p.xi, p.beta_omega0, 1.0, bound).sites;
}

BandedState initial_state(const Config& c) {
  const auto& k = c.simulate;
  const int n_max = c.model.n_max;
  if (k.initial == "coherent") return coherent_state(k.alpha, n_max, c.d_max);
  if (k.initial == "random") {
    std::mt19937_64 rng(c.seed);
    std::normal_distribution<double> g;
    Eigen::MatrixXcd m(n_max + 1, n_max + 1);
    for (int i = 0; i <= n_max; ++i)
      for (int j = 0; j <= n_max; ++j) m(i, j) = cplx{g(rng), g(rng)};
    Eigen::MatrixXcd rho = m * m.adjoint();
    rho = (0.5 * (rho + rho.adjoint())).eval();
    rho /= rho.trace().real();
    return BandedState::from_dense(rho, c.d_max);
  }
  std::vector<double> pops(static_cast<size_t>(n_max) + 1, 0.0);
  if (k.initial == "thermal") {
    pops = thermal_state(c.model).values;
  } else {
    pops[static_cast<size_t>(k.initial == "fock" ? k.fock : 0)] = 1.0;
  }
  return BandedState::diagonal(pops, c.d_max);
}

Output run_simulate(const Config& c) {
  const auto& k = c.simulate;
  Output out;
  IterateOptions o;
  o.path = k.path == "band" ? IterationPath::Band : IterationPath::Kraus;
  o.picture = k.picture == "interaction" ? Picture::Interaction : Picture::Trace;
  o.tracked_bands.assign(k.tracked_bands.begin(), k.tracked_bands.end());
  o.leakage_budget = k.leakage_budget;
  o.leakage_threshold = k.leakage_threshold;
  o.record_every = k.record_every;
  o.threads = thread_count();
  long steps = k.steps;
  if (k.mixing_tol) {
    require(c.model.beta_omega0 > 0, "'simulate.mixing_tol' needs beta_omega0 > 0");
    const std::vector<int> ns{c.model.n_max};
    const double gap = gap_scan(c.model, ns)[0].gap;
    steps = mixing_budget(gap, *k.mixing_tol, k.steps);
    o.stop_below = *k.mixing_tol;
    out.results["gap"] = gap;
    out.results["mixing_budget"] = steps;
  }
  if (k.stop_below) o.stop_below = *k.stop_below;

  const Trajectory t = iterate(initial_state(c), c.model, steps, o);
  std::vector<std::string> header{"step", "trace_distance", "leakage", "band0_fixednorm"};
  for (long d : k.tracked_bands) header.push_back("band_d" + std::to_string(d) + "_l1");
  CsvWriter csv(header);
  for (const auto& r : t.records) {
    csv << r.step << r.trace_distance << r.leakage << r.band0_fixednorm;
    for (double v : r.band_l1) csv << v;
    csv.end_row();
  }
  out.files.emplace_back("simulate.csv", csv.str());
  out.results["steps_requested"] = steps;
  out.results["steps_run"] = t.steps_run;
  out.results["stopped_early"] = t.stopped_early;
  out.results["distance"] = t.exact_distance ? "exact" : "band_lower_bound";
  out.results["initial_distance"] = t.records.front().trace_distance;
  out.results["final_distance"] = t.records.back().trace_distance;
  out.results["final_distance_upper"] = t.records.back().trace_distance_upper;
  out.results["distance_non_increasing"] = t.distance_non_increasing();
  if (k.mixing_tol) out.results["reached_tolerance"] = t.records.back().trace_distance_upper < *k.mixing_tol;
  out.leakage_total = t.total_leakage;
  out.leakage_flags = t.leakage_flags;
  return out;
}

Output run_spectrum(const Config& c) {
  const auto& k = c.spectrum;
  Output out;
  const unsigned threads = thread_count();
  std::vector<long> zeroed;
  if (k.zero_quasi) zeroed = quasi_sites(c.model, c.model.n_max + 2);
  const SpectrumReport r = l0_spectrum(c.model, zeroed, threads);
  CsvWriter csv({"index", "eigenvalue"});
  for (size_t i = 0; i < r.eigenvalues.size(); ++i) {
    csv << static_cast<long>(i) << r.eigenvalues[i];
    csv.end_row();
  }
  out.files.emplace_back("spectrum.csv", csv.str());
  json& res = out.results;
  res["size"] = r.eigenvalues.size();
  res["top"] = r.top;
  res["top_multiplicity"] = r.top_multiplicity;
  res["second_modulus"] = r.second_modulus;
  res["gap"] = r.gap;
  res["lambda_min"] = r.eigenvalues.front();
  res["top_residual"] = r.top_residual;
  res["zeroed_sites"] = zeroed;
  if (c.model.beta_omega0 > 0) {
    const SpectralBounds b = l0_bounds(c.model.beta_omega0, 1.0);
    res["lower_bound"] = b.lower;
    res["within_bounds"] = r.eigenvalues.front() >= b.lower - 1e-10 && r.top <= b.upper + 1e-10;
  }
  if (!k.zero_quasi) {
    const TopEigenpairCheck t = top_eigenpair_check(c.model);
    res["top_cosine"] = t.cosine;
    res["lambda2"] = t.lambda2;
    res["resonant"] = t.resonant;
  }
  if (!k.n_max_list.empty()) {
    std::vector<int> ns(k.n_max_list.begin(), k.n_max_list.end());
    const auto rows = gap_scan(c.model, ns, zeroed, threads);
    CsvWriter g({"n_max", "lambda_max", "lambda2", "lambda_min", "multiplicity_at_one", "gap"});
    for (const auto& row : rows) {
      g << row.n_max << row.lambda_max << row.lambda2 << row.lambda_min << row.multiplicity_at_one << row.gap;
      g.end_row();
    }
    out.files.emplace_back("gap_scan.csv", g.str());
  }
  return out;
}

Output run_resonances(const Config& c) {
  const auto& k = c.resonances;
  Output out;
  ResonanceReport r;
  if (k.mode == "exact") {
    const Rational eta = Rational::parse(k.eta_exact);
    const Rational xi = Rational::parse(k.xi_exact);
    auto close = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); };
    require(close(eta.value(), c.model.eta) && close(xi.value(), c.model.xi),
            "'resonances.eta_exact' and 'xi_exact' must match the model parameters");
    r = resonance_report_exact(eta, xi, c.model.beta_omega0, k.bound);
  } else {
    r = resonance_report(c.model.eta, c.model.xi, c.model.beta_omega0, k.bound, k.tol);
  }
  CsvWriter res({"n", "xi_n_plus_eta", "root"});
  for (long n : r.resonances) {
    const double u = c.model.xi * static_cast<double>(n) + c.model.eta;
    res << n << u << std::nearbyint(std::sqrt(u));
    res.end_row();
  }
  CsvWriter quasi({"k", "m_k", "d_value", "k2_over_xi"});
  for (size_t i = 0; i < r.quasi.sites.size(); ++i) {
    const double kk = static_cast<double>(i + 1);
    quasi << static_cast<long>(i + 1) << r.quasi.sites[i] << r.quasi.d_values[i] << kk * kk / c.model.xi;
    quasi.end_row();
  }
  CsvWriter summary({"mode", "bound", "resonance_count", "classification", "label", "quasi_count",
                     "fit_available", "fit_slope", "fit_points"});
  summary << std::string(to_string(r.mode)) << r.bound << static_cast<long>(r.resonances.size())
          << std::string(to_string(r.classification)) << r.label()
          << static_cast<long>(r.quasi.sites.size()) << r.quasi.fit.available
          << (r.quasi.fit.available ? r.quasi.fit.slope : kNaN) << r.quasi.fit.points;
  summary.end_row();
  out.files.emplace_back("resonances.csv", res.str());
  out.files.emplace_back("quasi.csv", quasi.str());
  out.files.emplace_back("summary.csv", summary.str());
  out.results["classification"] = to_string(r.classification);
  out.results["label"] = r.label();
  out.results["resonance_count"] = r.resonances.size();
  json partition = json::array();
  for (const Interval& iv : r.partition) partition.push_back({iv.begin, iv.end});
  out.results["partition"] = partition;
  out.results["quasi_count"] = r.quasi.sites.size();
  if (r.quasi.fit.available) out.results["fit_slope"] = r.quasi.fit.slope;
  return out;
}

Output run_metastable(const Config& c) {
  const auto& k = c.metastable;
  Output out;
  const ModelParams& p = c.model;
  require(p.beta_omega0 > 0, "metastable runs need beta_omega0 > 0");
  const QuasiResonances q = find_quasi_resonances(p.eta, p.xi, p.beta_omega0, 1.0, k.quasi_bound);
  std::vector<long> in_range;
  for (long m : q.sites)
    if (m <= p.n_max + 1) in_range.push_back(m);
  const GradientForm d0_form = trace_diagonal_form(p, in_range);

  LifetimeOptions lo;
  lo.threshold = k.threshold;
  lo.mode = k.threshold_mode == "absolute" ? ThresholdMode::Absolute : ThresholdMode::Relative;
  lo.budget = k.budget;
  if (k.d0) lo.zeroed = in_range;

  CsvWriter csv({"k", "m_k", "d_value", "lifetime", "reached", "infinite", "escape_distance",
                 "threshold_distance", "final_distance", "d0_fixed_defect"});
  long previous = 0;
  bool increasing = true;
  long rows = 0;
  for (long kk = 1; kk <= k.k_max && static_cast<size_t>(kk) <= q.sites.size(); ++kk) {
    const long m = q.sites[static_cast<size_t>(kk - 1)];
    if (m >= p.n_max) break;
    const int ki = static_cast<int>(kk);
    const LifetimeResult r = metastable_lifetime(p, q.sites, ki, lo);
    const DiagonalState rho = metastable_state(ki, q.sites, p.beta_omega0, 1.0, p.n_max);
    const std::vector<double> image = d0_form.apply(rho.values);
    double defect = 0.0;
    for (size_t i = 0; i < image.size(); ++i) defect += std::abs(image[i] - rho.values[i]);
    csv << kk << m << q.d_values[static_cast<size_t>(kk - 1)] << r.steps << r.reached << r.infinite
        << r.escape_distance << r.threshold_distance << r.final_distance << defect;
    csv.end_row();
    increasing = increasing && r.steps > previous;
    previous = r.steps;
    ++rows;
  }
  require(rows > 0, "no quasi-resonance lies below n_max");
  out.files.emplace_back("metastable.csv", csv.str());
  out.results["rows"] = rows;
  out.results["lifetimes_increasing"] = increasing;
  out.results["quasi_sites"] = in_range;
  return out;
}

Output run_witness(const Config& c) {
  const auto& k = c.witness;
  Output out;
  const ModelParams& p = c.model;
  require(p.beta_omega0 > 0, "witness search needs beta_omega0 > 0");
  const std::vector<long> quasi = quasi_sites(p, k.quasi_bound);
  WitnessOptions o;
  o.budget = k.budget;
  o.n0 = k.n0;
  o.k_max = static_cast<int>(k.k_max);
  o.d_max = static_cast<int>(k.coherence_bands);
  o.headroom = k.headroom;
  const WitnessResult w = slow_mixing_witness(p, quasi, epsilon_sequence(k.epsilon), o);
  CsvWriter csv({"k", "d", "m_k", "certified", "constant", "min_ratio", "worst_step", "sign_constant"});
  for (const auto& t : w.tried) {
    csv << t.k << t.d << t.m_k << t.certified << t.constant << t.min_ratio << t.worst_step << t.sign_constant;
    csv.end_row();
  }
  out.files.emplace_back("witness.csv", csv.str());
  out.results["found"] = w.found;
  out.results["candidates"] = w.tried.size();
  if (w.found) {
    out.results["k"] = w.witness.k;
    out.results["d"] = w.witness.d;
    out.results["m_k"] = w.witness.m_k;
    out.results["constant"] = w.witness.constant;
    out.results["observable"] = w.observable.name;
    out.results["full_sequence"] = w.full_sequence;
  }
  return out;
}

struct SweepRow {
  double eta = 0.0, xi = 0.0, bw = 0.0;
  long n_max = 0;
  double gap = kNaN, lambda2 = kNaN, lambda_min = kNaN, lower = kNaN, slope = kNaN;
  long resonances = 0, quasi = 0;
  std::string error;
};

template <class T>
std::vector<T> sorted_unique(std::vector<T> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

Output run_sweep(const Config& c) {
  const auto& k = c.sweep;
  Output out;
  const auto etas = sorted_unique(k.eta);
  const auto xis = sorted_unique(k.xi);
  const auto bws = sorted_unique(k.beta_omega0);
  const auto ns = sorted_unique(k.n_max);
  std::vector<SweepRow> rows;
  for (double eta : etas)
    for (double xi : xis)
      for (double bw : bws)
        for (long n : ns) {
          SweepRow& r = rows.emplace_back();
          r.eta = eta;
          r.xi = xi;
          r.bw = bw;
          r.n_max = n;
        }

  parallel_for(rows.size(), thread_count(), [&](size_t i) {
    SweepRow& r = rows[i];
    try {
      ModelParams p = c.model;
      p.eta = r.eta;
      p.xi = r.xi;
      p.beta_omega0 = r.bw;
      require(r.n_max >= 1 && r.n_max <= 1000000, "n_max must lie in [1, 1e6]");
      p.n_max = static_cast<int>(r.n_max);
      p.validate();
      if (r.bw > 0) r.lower = l0_bounds(r.bw, 1.0).lower;
      r.resonances = static_cast<long>(find_resonances(r.eta, r.xi, k.resonance_bound).size());
      const QuasiResonances q = find_quasi_resonances(r.eta, r.xi, r.bw, 1.0, k.quasi_bound);
      r.quasi = static_cast<long>(q.sites.size());
      if (q.fit.available) r.slope = q.fit.slope;
      const std::vector<int> one{p.n_max};
      const GapRow g = gap_scan(p, one)[0];
      r.gap = g.gap;
      r.lambda2 = g.lambda2;
      r.lambda_min = g.lambda_min;
    } catch (const std::exception& e) {
      r.error = e.what();
    }
  });

  CsvWriter csv({"eta", "xi", "beta_omega0", "n_max", "gap", "lambda2", "lambda_min", "lower_bound",
                 "resonance_count", "quasi_count", "decay_slope", "error"});
  long failures = 0;
  for (const auto& r : rows) {
    csv << r.eta << r.xi << r.bw << r.n_max << r.gap << r.lambda2 << r.lambda_min << r.lower << r.resonances
        << r.quasi << r.slope << r.error;
    csv.end_row();
    if (!r.error.empty()) ++failures;
  }
  out.files.emplace_back("sweep.csv", csv.str());
  out.results["points"] = rows.size();
  out.results["failures"] = failures;
  return out;
}

std::vector<std::string> output_names(const Config& c) {
  switch (c.kind) {
    case Kind::Simulate:
      return {"simulate.csv"};
    case Kind::Spectrum:
      if (c.spectrum.n_max_list.empty()) return {"spectrum.csv"};
      return {"spectrum.csv", "gap_scan.csv"};
    case Kind::Resonances:
      return {"resonances.csv", "quasi.csv", "summary.csv"};
    case Kind::Metastable:
      return {"metastable.csv"};
    case Kind::Witness:
      return {"witness.csv"};
    case Kind::Sweep:
      return {"sweep.csv"};
  }
  return {};
}

Output dispatch(const Config& c) {
  switch (c.kind) {
    case Kind::Simulate:
      return run_simulate(c);
    case Kind::Spectrum:
      return run_spectrum(c);
    case Kind::Resonances:
      return run_resonances(c);
    case Kind::Metastable:
      return run_metastable(c);
    case Kind::Witness:
      return run_witness(c);
    case Kind::Sweep:
      return run_sweep(c);
  }
  throw ValidationError("unknown experiment kind");
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << content;
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

json manifest(const Config& c, const std::string& status) {
  json m = json::object();
  m["tool"] = "maser";
  m["version"] = MASER_VERSION;
  m["csv_schema"] = kCsvSchemaVersion;
  m["kind"] = to_string(c.kind);
  m["status"] = status;
  m["config"] = c.resolved;
  m["model"] = model_json(c.model, c.d_max);
  m["wall_time_seconds"] = nullptr;
  return m;
}

}  // namespace

const char* to_string(Kind k) {
  switch (k) {
    case Kind::Simulate:
      return "simulate";
    case Kind::Spectrum:
      return "spectrum";
    case Kind::Resonances:
      return "resonances";
    case Kind::Metastable:
      return "metastable";
    case Kind::Witness:
      return "witness";
    case Kind::Sweep:
      return "sweep";
  }
  return "unknown";
}

Kind parse_kind(const std::string& name) {
  for (Kind k : {Kind::Simulate, Kind::Spectrum, Kind::Resonances, Kind::Metastable, Kind::Witness, Kind::Sweep})
    if (name == to_string(k)) return k;
  throw ValidationError("unknown experiment kind '" + name + "'");
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string resolve_config(Kind kind, const std::string& config_text) {
  return parse_config(kind, config_text).resolved.dump(2) + "\n";
}

RunResult run_experiment(Kind kind, const std::string& config_text, const RunOptions& options) {
  RunResult result;
  const auto start = std::chrono::steady_clock::now();
  Config c;
  try {
    c = parse_config(kind, config_text);
    if (options.out.empty()) throw ValidationError("an output directory is required");
    std::vector<std::string> names = output_names(c);
    names.push_back("manifest.json");
    if (!options.overwrite) {
      for (const auto& n : names)
        if (std::filesystem::exists(options.out / n))
          throw ValidationError((options.out / n).string() + " exists; pass --overwrite to replace it");
    }
    std::filesystem::create_directories(options.out);
  } catch (const ValidationError& e) {
    result.exit_code = kExitValidation;
    result.message = e.what();
    return result;
  } catch (const std::exception& e) {
    result.exit_code = kExitFailure;
    result.message = e.what();
    return result;
  }

  json m;
  try {
    Output out = dispatch(c);
    m = manifest(c, "ok");
    m["results"] = out.results;
    m["leakage"] = {{"total", out.leakage_total}, {"flagged_steps", out.leakage_flags}};
    json files = json::array();
    for (const auto& [name, content] : out.files) {
      write_file(options.out / name, content);
      result.files.push_back(options.out / name);
      files.push_back(name);
    }
    m["files"] = files;
  } catch (const ValidationError& e) {
    result.exit_code = kExitValidation;
    result.message = e.what();
    return result;
  } catch (const BudgetExceeded& e) {
    result.exit_code = kExitBudget;
    result.message = e.what();
    m = manifest(c, "budget_exceeded");
    m["error"] = e.what();
  } catch (const std::exception& e) {
    result.exit_code = kExitFailure;
    result.message = e.what();
    return result;
  }
  if (options.record_time) {
    m["wall_time_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  try {
    write_file(options.out / "manifest.json", m.dump(2) + "\n");
    result.files.push_back(options.out / "manifest.json");
  } catch (const std::exception& e) {
    result.exit_code = kExitFailure;
    result.message = e.what();
  }
  return result;
}

RunResult run_experiment_file(Kind kind, const std::filesystem::path& config, const RunOptions& options) {
  std::ifstream f(config, std::ios::binary);
  if (!f) {
    RunResult r;
    r.exit_code = kExitValidation;
    r.message = "cannot read config " + config.string();
    return r;
  }
  std::ostringstream text;
  text << f.rdbuf();
  return run_experiment(kind, text.str(), options);
}

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"One-atom maser reduced dynamics: simulation, spectra and resonance analysis"};
  app.require_subcommand(1);
  struct Args {
    std::string config, out;
    bool overwrite = false, record_time = false;
  };
  std::vector<std::pair<CLI::App*, Kind>> subs;
  Args args;
  const std::pair<Kind, const char*> kinds[] = {
      {Kind::Simulate, "Iterate the reduced dynamics and record the distance to equilibrium"},
      {Kind::Spectrum, "Spectrum of the diagonal HS sector and gap scans"},
      {Kind::Resonances, "Resonance classification and quasi-resonance scan"},
      {Kind::Metastable, "Metastable lifetimes and D0 fixed points"},
      {Kind::Witness, "Search for a slow-mixing witness"},
      {Kind::Sweep, "Parameter grid sweep of spectral and resonance summaries"}};
  for (const auto& [kind, help] : kinds) {
    CLI::App* s = app.add_subcommand(to_string(kind), help);
    s->add_option("--config", args.config, "JSON config file")->required();
    s->add_option("--out", args.out, "Output directory")->required();
    s->add_flag("--overwrite", args.overwrite, "Replace existing outputs");
    s->add_flag("--record-time", args.record_time, "Record wall time in the manifest");
    subs.emplace_back(s, kind);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }
  Kind kind = Kind::Simulate;
  for (const auto& [s, k] : subs)
    if (s->parsed()) kind = k;
  const RunResult r = run_experiment_file(kind, args.config, {args.out, args.overwrite, args.record_time});
  if (r.exit_code != kExitOk) {
    err << "maser " << to_string(kind) << ": " << r.message << "\n";
  } else {
    for (const auto& f : r.files) out << f.string() << "\n";
  }
  return r.exit_code;
}

}  // namespace maser::cli
