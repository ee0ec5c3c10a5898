#include "maser/dynamics.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

#include "maser/parallel.hpp"
#include "maser/resonance.hpp"

namespace maser {

cplx Observable::expectation(const BandedState& rho) const {
  if (std::abs(d) > rho.d_max()) return {};
  const auto b = rho.band(d);
  cplx s{};
  const size_t len = std::min(b.size(), coeff.size());
  for (size_t i = 0; i < len; ++i) s += b[i] * coeff[i];
  return s;
}

Observable Observable::number(int n_max) {
  Observable o{"number", 0, std::vector<cplx>(static_cast<size_t>(n_max) + 1)};
  for (int n = 0; n <= n_max; ++n) o.coeff[static_cast<size_t>(n)] = static_cast<double>(n);
  return o;
}

Observable Observable::tail_projector(int n_max, long m) {
  Observable o{"tail_" + std::to_string(m), 0, std::vector<cplx>(static_cast<size_t>(n_max) + 1)};
  for (long n = std::max(0L, m); n <= n_max; ++n) o.coeff[static_cast<size_t>(n)] = 1.0;
  return o;
}

Observable Observable::band_sum(int n_max, int d) {
  const int len = BandedState::band_length(n_max, d);
  if (len <= 0) throw ValidationError("band outside the truncation");
  return {"band_sum_" + std::to_string(d), d, std::vector<cplx>(static_cast<size_t>(len), cplx{1.0})};
}

bool Trajectory::distance_non_increasing(double tol) const {
  for (size_t i = 1; i < records.size(); ++i)
    if (records[i].trace_distance > records[i - 1].trace_distance + tol) return false;
  return true;
}

std::pair<double, double> trace_distance(const BandedState& rho, const BandedState& sigma,
                                         int exact_norm_max) {
  const BandedState diff = rho - sigma;
  const int dm = diff.d_max();
  if (diff.n_max() <= exact_norm_max) {
    Eigen::MatrixXcd m = diff.to_dense();
    m = 0.5 * (m + m.adjoint()).eval();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m, Eigen::EigenvaluesOnly);
    const double exact = 0.5 * es.eigenvalues().cwiseAbs().sum();
    return {exact, exact + 0.5 * diff.dropped_norm()};
  }
  // Band extraction is an average of unitary conjugations, so each band's
  // l1 norm is a lower bound; the triangle inequality gives the upper one.
  double lower = 0.0, upper = 0.0;
  for (int d = -dm; d <= dm; ++d) {
    const double l1 = diff.band_l1(d);
    lower = std::max(lower, l1);
    upper += l1;
  }
  return {0.5 * lower, 0.5 * (upper + diff.dropped_norm())};
}

Trajectory iterate(const BandedState& rho0, const ModelParams& p, long steps,
                   const IterateOptions& options) {
  p.validate();
  if (rho0.n_max() != p.n_max) throw ValidationError("initial state and model disagree on n_max");
  if (steps < 0) throw ValidationError("steps must be >= 0");
  if (options.record_every < 1) throw ValidationError("record_every must be >= 1");
  if (options.picture == Picture::HilbertSchmidt) {
    throw ValidationError("iterate runs in the trace or interaction picture");
  }
  const int dm = rho0.d_max();
  for (int d : options.tracked_bands)
    if (std::abs(d) > dm) throw ValidationError("tracked band outside the stored bands");

  const KrausSet kraus = options.picture == Picture::Trace ? kraus_trace_picture(p)
                                                           : kraus_interaction_picture(p);
  const unsigned threads = options.threads == 0 ? thread_count() : options.threads;
  std::vector<SectorOperator> sectors;
  if (options.path == IterationPath::Band) {
    sectors.resize(static_cast<size_t>(2 * dm + 1));
    parallel_for(sectors.size(), threads, [&](size_t k) {
      sectors[k] = sector_operator_from_kraus(static_cast<int>(k) - dm, kraus);
    });
  }

  const DiagonalState th = thermal_state(p);
  const BandedState reference = [&] {
    BandedState s(p.n_max, dm);
    auto b = s.band(0);
    for (size_t n = 0; n < b.size(); ++n) b[n] = th.values[n];
    return s;
  }();
  const bool exact = p.n_max <= options.exact_norm_max;
  const double trace0 = rho0.trace().real();

  Trajectory out;
  out.tracked_bands = options.tracked_bands;
  for (const auto& o : options.observables) out.observable_names.push_back(o.name);
  out.exact_distance = exact;

  auto record = [&](long step, const BandedState& s) {
    StepRecord r;
    r.step = step;
    const auto [lo, hi] = trace_distance(s, reference, options.exact_norm_max);
    r.trace_distance = lo;
    r.trace_distance_upper = exact ? lo : hi;
    r.leakage = trace0 - s.trace().real();
    const auto b0 = s.band(0);
    double fixed = 0.0;
    for (size_t n = 0; n < b0.size(); ++n) fixed += std::abs(b0[n] - th.values[n]);
    r.band0_fixednorm = 0.5 * fixed;
    for (int d : options.tracked_bands) r.band_l1.push_back(s.band_l1(d));
    for (const auto& o : options.observables) r.expectations.push_back(o.expectation(s));
    out.records.push_back(std::move(r));
    return out.records.back().trace_distance_upper;
  };

  BandedState state = rho0;
  record(0, state);
  BandedState next = state;
  for (long n = 1; n <= steps; ++n) {
    double step_leak = 0.0;
    if (options.path == IterationPath::Kraus) {
      ChannelOutput o = apply_channel(state, kraus, {options.leakage_threshold, threads});
      step_leak = o.leakage;
      state = std::move(o.state);
    } else {
      parallel_for(sectors.size(), threads, [&](size_t k) {
        const int d = static_cast<int>(k) - dm;
        sectors[k].apply_into(state.band(d), next.band(d));
      });
      step_leak = state.trace().real() - next.trace().real();
      std::swap(state, next);
    }
    if (step_leak > options.leakage_threshold) ++out.leakage_flags;
    out.steps_run = n;
    out.total_leakage = trace0 - state.trace().real();
    if (out.total_leakage > options.leakage_budget) {
      throw BudgetExceeded("accumulated leakage " + std::to_string(out.total_leakage) +
                           " exceeds the budget after step " + std::to_string(n));
    }
    if (n % options.record_every == 0 || n == steps) {
      const double dist = record(n, state);
      if (options.stop_below > 0 && dist < options.stop_below) {
        out.stopped_early = n < steps;
        break;
      }
    }
  }
  out.final_state = std::move(state);
  return out;
}

namespace {

template <class T>
std::vector<T> cesaro(std::span<const T> a) {
  std::vector<T> out(a.size());
  T sum{};
  for (size_t i = 0; i < a.size(); ++i) {
    sum += a[i];
    out[i] = sum / static_cast<double>(i + 1);
  }
  return out;
}

long quasi_site(std::span<const long> quasi, int k) {
  if (k < 1 || static_cast<size_t>(k) > quasi.size()) {
    throw ValidationError("metastable index outside the quasi-resonance list");
  }
  return quasi[static_cast<size_t>(k - 1)];
}

double tail_mass(const DiagonalState& th, long m) {
  double s = 0.0;
  for (size_t n = static_cast<size_t>(std::max(0L, m)); n < th.values.size(); ++n) s += th.values[n];
  return s;
}

}  // namespace

std::vector<cplx> ergodic_average(std::span<const cplx> sequence) { return cesaro(sequence); }
std::vector<double> ergodic_average(std::span<const double> sequence) { return cesaro(sequence); }

LifetimeResult metastable_lifetime(const ModelParams& p, std::span<const long> quasi, int k,
                                   const LifetimeOptions& options) {
  p.validate();
  if (!(options.threshold > 0)) throw ValidationError("lifetime threshold must be > 0");
  if (options.budget < 1) throw ValidationError("lifetime budget must be >= 1");
  LifetimeResult r;
  r.k = k;
  r.m_k = quasi_site(quasi, k);
  if (r.m_k >= p.n_max) throw ValidationError("lifetime needs m_k < n_max");

  const DiagonalState rho = metastable_state(k, quasi, p.beta_omega0, 1.0, p.n_max);
  const GradientForm form = trace_diagonal_form(p, options.zeroed);
  const size_t n = rho.values.size();
  std::vector<double> g(n), y(n, 0.0), ny(n);
  form.generator(rho.values, g);

  r.escape_distance = tail_mass(thermal_state(p), r.m_k);
  r.threshold_distance = options.mode == ThresholdMode::Relative
                             ? options.threshold * r.escape_distance
                             : options.threshold;
  if (std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; })) {
    r.infinite = true;
    r.steps = options.budget;
    return r;
  }
  for (long step = 1; step <= options.budget; ++step) {
    form.apply(y, ny);
    double dist = 0.0;
    for (size_t i = 0; i < n; ++i) {
      y[i] = ny[i] + g[i];
      dist += std::abs(y[i]);
    }
    r.final_distance = 0.5 * dist;
    r.steps = step;
    if (r.final_distance > r.threshold_distance) {
      r.reached = true;
      break;
    }
  }
  return r;
}

EpsilonSequence epsilon_sequence(const std::string& name) {
  if (name == "inverse") return {name, [](long n) { return 1.0 / static_cast<double>(n); }};
  if (name == "inverse_sqrt")
    return {name, [](long n) { return 1.0 / std::sqrt(static_cast<double>(n)); }};
  if (name == "inverse_log")
    return {name, [](long n) { return 1.0 / std::log(static_cast<double>(n) + 1.0); }};
  if (name == "geometric") return {name, [](long n) { return std::ldexp(1.0, static_cast<int>(-std::min(n, 2000L))); }};
  throw ValidationError("unknown epsilon sequence '" + name +
                        "' (inverse, inverse_sqrt, inverse_log, geometric)");
}

namespace {

// Tracks the certification rule along f(n0..budget).
struct Certifier {
  const EpsilonSequence& eps;
  long n0;
  bool real_valued;
  WitnessCandidate& c;
  double sign = 0.0;

  void observe(long n, cplx f) {
    if (n < n0) return;
    const double af = std::abs(f);
    const double ratio = af / eps.value(n);
    if (n == n0) {
      c.constant = 0.5 * ratio;
      c.min_ratio = ratio;
      c.worst_step = n;
      sign = f.real() >= 0 ? 1.0 : -1.0;
    }
    if (ratio < c.min_ratio) {
      c.min_ratio = ratio;
      c.worst_step = n;
    }
    if (real_valued && f.real() * sign <= 0) c.sign_constant = false;
  }

  void finish() { c.certified = c.constant > 0 && c.min_ratio >= c.constant && c.sign_constant; }
};

}  // namespace

WitnessResult slow_mixing_witness(const ModelParams& p, std::span<const long> quasi,
                                  const EpsilonSequence& eps, const WitnessOptions& options) {
  p.validate();
  if (options.budget < 1 || options.n0 < 1 || options.n0 > options.budget) {
    throw ValidationError("witness window needs 1 <= n0 <= budget");
  }
  WitnessResult out;
  out.n0 = options.n0;
  out.budget = options.budget;
  const DiagonalState th = thermal_state(p);
  const GradientForm form = trace_diagonal_form(p);

  const int k_top = std::min<int>(options.k_max, static_cast<int>(quasi.size()));
  for (int k = 1; k <= k_top; ++k) {
    const long m = quasi[static_cast<size_t>(k - 1)];
    if (m + options.headroom > p.n_max) break;

    {  // Diagonal witness: rho_k against P_{>= m_k}.
      WitnessCandidate c{k, 0, m};
      Certifier cert{eps, options.n0, true, c};
      const DiagonalState rho = metastable_state(k, quasi, p.beta_omega0, 1.0, p.n_max);
      const size_t n = rho.values.size();
      std::vector<double> g(n), y(n, 0.0), ny(n);
      form.generator(rho.values, g);
      const double tail = tail_mass(th, m);
      for (long step = 1; step <= options.budget; ++step) {
        form.apply(y, ny);
        double escaped = 0.0;
        for (size_t i = 0; i < n; ++i) {
          y[i] = ny[i] + g[i];
          if (static_cast<long>(i) >= m) escaped += y[i];
        }
        cert.observe(step, escaped - tail);
      }
      cert.finish();
      out.tried.push_back(c);
      if (c.certified) {
        out.found = true;
        out.witness = c;
        out.state = BandedState::diagonal(rho.values);
        out.observable = Observable::tail_projector(p.n_max, m);
        return out;
      }
    }

    for (int d = 1; d <= options.d_max && d < m; ++d) {
      // Coherence witness: rho proportional to X + X* + |X| + |X*| with X
      // supported below m_k, against sum_n |n + d><n|.
      WitnessCandidate c{k, d, m};
      Certifier cert{eps, options.n0, false, c};
      BandedState rho(p.n_max, d);
      double total = 0.0;
      std::vector<double> cn(static_cast<size_t>(m - d));
      for (long i = 0; i + d < m; ++i) {
        cn[static_cast<size_t>(i)] = std::sqrt(th.values[static_cast<size_t>(i)] * th.values[static_cast<size_t>(i + d)]);
        total += cn[static_cast<size_t>(i)];
      }
      for (size_t i = 0; i < cn.size(); ++i) {
        const double v = cn[i] / (2.0 * total);
        rho.band(d)[i] = v;
        rho.band(-d)[i] = v;
        rho.band(0)[i] += v;
        rho.band(0)[i + static_cast<size_t>(d)] += v;
      }
      const SectorOperator op = sector_operator_trace(d, p);
      std::vector<cplx> x(rho.band(d).begin(), rho.band(d).end()), nx(x.size());
      for (long step = 1; step <= options.budget; ++step) {
        op.apply_into(x, nx);
        std::swap(x, nx);
        cplx f{};
        for (const cplx& v : x) f += v;
        cert.observe(step, f);
      }
      cert.finish();
      out.tried.push_back(c);
      if (c.certified) {
        out.found = true;
        out.witness = c;
        out.state = std::move(rho);
        out.observable = Observable::band_sum(p.n_max, d);
        return out;
      }
    }
  }
  return out;
}

std::vector<double> decoherence_curve(const BandedState& rho0, int d, const ModelParams& p,
                                      long steps) {
  p.validate();
  if (rho0.n_max() != p.n_max) throw ValidationError("initial state and model disagree on n_max");
  if (steps < 0) throw ValidationError("steps must be >= 0");
  const SectorOperator op = sector_operator_trace(d, p);
  std::vector<cplx> x(rho0.band(d).begin(), rho0.band(d).end()), nx(x.size());
  auto l1 = [](const std::vector<cplx>& v) {
    double s = 0.0;
    for (const cplx& z : v) s += std::abs(z);
    return s;
  };
  std::vector<double> out;
  out.reserve(static_cast<size_t>(steps) + 1);
  out.push_back(l1(x));
  for (long n = 1; n <= steps; ++n) {
    op.apply_into(x, nx);
    std::swap(x, nx);
    out.push_back(l1(x));
  }
  return out;
}

long mixing_budget(double gap, double tol, long cap) {
  if (!(tol > 0 && tol < 1)) throw ValidationError("mixing tolerance must lie in (0, 1)");
  if (cap < 1) throw ValidationError("mixing budget cap must be >= 1");
  if (!(gap > 0) || !std::isfinite(gap)) return cap;
  const double steps = std::ceil(2.0 * std::log(1.0 / tol) / gap);
  return steps >= static_cast<double>(cap) ? cap : static_cast<long>(steps);
}

BandedState coherent_state(double alpha, int n_max, int d_max) {
  if (!std::isfinite(alpha)) throw ValidationError("coherent amplitude must be finite");
  std::vector<double> c(static_cast<size_t>(n_max) + 1);
  c[0] = 1.0;
  double norm = 1.0;
  for (int n = 1; n <= n_max; ++n) {
    c[static_cast<size_t>(n)] = c[static_cast<size_t>(n - 1)] * alpha / std::sqrt(static_cast<double>(n));
    norm += c[static_cast<size_t>(n)] * c[static_cast<size_t>(n)];
  }
  BandedState s(n_max, d_max);
  for (int d = -s.d_max(); d <= s.d_max(); ++d) {
    auto b = s.band(d);
    const int r0 = BandedState::first_row(d);
    for (size_t i = 0; i < b.size(); ++i) {
      const int r = r0 + static_cast<int>(i);
      b[i] = c[static_cast<size_t>(r)] * c[static_cast<size_t>(r + d)] / norm;
    }
  }
  return s;
}

}  // namespace maser
