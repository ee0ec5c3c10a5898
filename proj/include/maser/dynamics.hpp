#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "maser/channel.hpp"
#include "maser/params.hpp"

namespace maser {

/// A = sum_i coeff[i] |n_i + d><n_i| with n_i = i + max(0, -d), so that
/// Tr(rho A) = sum_i band_d(rho)[i] coeff[i].
struct Observable {
  std::string name;
  int d = 0;
  std::vector<cplx> coeff;

  cplx expectation(const BandedState& rho) const;

  static Observable number(int n_max);
  /// Projector onto photon numbers >= m.
  static Observable tail_projector(int n_max, long m);
  /// sum_n |n + d><n|, i.e. the sum of band-d coherences.
  static Observable band_sum(int n_max, int d);
};

enum class IterationPath { Kraus, Band };

struct IterateOptions {
  IterationPath path = IterationPath::Kraus;
  Picture picture = Picture::Trace;  // Trace or Interaction
  std::vector<int> tracked_bands{0};
  std::vector<Observable> observables;
  double leakage_budget = 1e-8;      // total 1 - Tr allowed before aborting
  double leakage_threshold = 1e-10;  // per-step flag threshold
  long record_every = 1;
  double stop_below = 0.0;           // stop once the distance drops below this
  /// Exact trace norm (dense eigenvalues) up to this n_max; band bounds above.
  int exact_norm_max = 256;
  unsigned threads = 1;
};

struct StepRecord {
  long step = 0;
  double trace_distance = 0.0;        // exact, or the lower bound when inexact
  double trace_distance_upper = 0.0;  // equals trace_distance when exact
  double leakage = 0.0;               // accumulated 1 - Tr
  double band0_fixednorm = 0.0;       // 1/2 sum |x^(0)_n - p_n|
  std::vector<double> band_l1;        // per tracked band
  std::vector<cplx> expectations;     // per observable
};

struct Trajectory {
  std::vector<int> tracked_bands;
  std::vector<std::string> observable_names;
  std::vector<StepRecord> records;  // records[0] is the initial state
  bool exact_distance = true;
  bool stopped_early = false;
  long steps_run = 0;
  long leakage_flags = 0;
  double total_leakage = 0.0;
  BandedState final_state;

  /// True when the distance never grows by more than tol between records.
  bool distance_non_increasing(double tol = 1e-12) const;
};

/// 1/2 ||rho - sigma||_1 and an upper bound; exact when n_max <= exact_norm_max.
std::pair<double, double> trace_distance(const BandedState& rho, const BandedState& sigma,
                                         int exact_norm_max = 256);

/// Iterates the reduced dynamics (or its interaction picture) and records the
/// distance to the truncated thermal state. Throws BudgetExceeded when the
/// accumulated leakage exceeds the budget.
Trajectory iterate(const BandedState& rho0, const ModelParams& p, long steps,
                   const IterateOptions& options = {});

/// Cesaro means (1/N) sum_{n < N} a_n for N = 1..size.
std::vector<cplx> ergodic_average(std::span<const cplx> sequence);
std::vector<double> ergodic_average(std::span<const double> sequence);

enum class ThresholdMode { Relative, Absolute };

struct LifetimeOptions {
  double threshold = 0.5;
  ThresholdMode mode = ThresholdMode::Relative;  // relative to the escape distance
  long budget = 1000000;
  std::vector<long> zeroed;  // D_0 modification
};

struct LifetimeResult {
  int k = 0;
  long m_k = 0;
  long steps = 0;              // first n over threshold; budget when not reached
  bool reached = false;        // false: steps is a lower bound
  bool infinite = false;       // exactly invariant (D(m_k) = 0)
  double escape_distance = 0.0;  // 1/2 ||rho_k - rho_th||_1
  double threshold_distance = 0.0;
  double final_distance = 0.0;
};

/// Smallest n with 1/2 ||cL^n(rho_k) - rho_k||_1 above the threshold. The
/// deviation y_n = cL^n(rho_k) - rho_k is propagated directly,
/// y_{n+1} = cL y_n + (cL rho_k - rho_k), to avoid cancellation.
LifetimeResult metastable_lifetime(const ModelParams& p, std::span<const long> quasi, int k,
                                   const LifetimeOptions& options = {});

struct EpsilonSequence {
  std::string name;
  std::function<double(long)> value;
};

/// "inverse" (1/n), "inverse_sqrt", "inverse_log" (1/log(n+1)), "geometric" (2^{-n}).
EpsilonSequence epsilon_sequence(const std::string& name);

struct WitnessOptions {
  long budget = 10000;
  long n0 = 1;
  int k_max = 8;
  int d_max = 2;          // coherence bands tried after each diagonal candidate
  long headroom = 40;     // n_max must exceed m_k by this much
};

struct WitnessCandidate {
  int k = 0;
  int d = 0;
  long m_k = 0;
  bool certified = false;
  double constant = 0.0;    // C with |f(n)| >= C eps_n on [n0, budget]
  double min_ratio = 0.0;   // min |f(n)| / eps_n over the window
  long worst_step = 0;
  bool sign_constant = true;
};

struct WitnessResult {
  bool found = false;
  bool full_sequence = true;  // every n in [n0, budget], no subsequence
  WitnessCandidate witness;
  std::vector<WitnessCandidate> tried;
  BandedState state;
  Observable observable;
  long n0 = 1;
  long budget = 0;
};

/// Scans k = 1..k_max; for each k tries the diagonal witness (rho_k with
/// A = P_{>= m_k}) and then coherence witnesses in bands d = 1..d_max. A
/// candidate is certified when f(n) = Tr(cL^n(rho) A) - Tr(rho_th A)
/// satisfies |f(n)| >= C eps_n for every n in [n0, budget] with
/// C = |f(n0)| / (2 eps_{n0}) and, on the diagonal, f never changes sign.
WitnessResult slow_mixing_witness(const ModelParams& p, std::span<const long> quasi,
                                  const EpsilonSequence& eps, const WitnessOptions& options = {});

/// ||x^(d)(n)||_1 for n = 0..steps, via the band-d sector operator.
std::vector<double> decoherence_curve(const BandedState& rho0, int d, const ModelParams& p,
                                      long steps);

/// ceil(2 ln(1/tol) / gap), capped; gap <= 0 yields the cap.
long mixing_budget(double gap, double tol, long cap = 10000000);

/// Truncated coherent state |alpha><alpha| restricted to |d| <= d_max, renormalized.
BandedState coherent_state(double alpha, int n_max, int d_max);

}  // namespace maser
