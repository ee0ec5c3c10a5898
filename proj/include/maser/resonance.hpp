#pragma once

#include <span>
#include <string>
#include <vector>

#include "maser/params.hpp"

namespace maser {

/// p / q with q > 0, used by the exact detection mode.
struct Rational {
  long long num = 0;
  long long den = 1;

  /// Parses "p/q", an integer, or a finite decimal ("0.3" -> 3/10).
  static Rational parse(const std::string& text);
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

enum class ResonanceMode { Float, Exact };
enum class Classification { NonResonant, SimplyResonant, FullyResonant };

const char* to_string(ResonanceMode m);
const char* to_string(Classification c);

/// Half-open index range [begin, end).
struct Interval {
  long begin = 0;
  long end = 0;
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct DecayFit {
  bool available = false;
  double slope = 0.0;
  double intercept = 0.0;
  int points = 0;
};

struct QuasiResonances {
  std::vector<long> sites;       // m_1 < m_2 < ...
  std::vector<double> d_values;  // D(m_k)
  DecayFit fit;
};

struct ResonanceReport {
  double eta = 0.0;
  double xi = 0.0;
  long bound = 0;
  ResonanceMode mode = ResonanceMode::Float;
  std::vector<long> resonances;
  Classification classification = Classification::NonResonant;
  std::vector<Interval> partition;
  QuasiResonances quasi;

  /// e.g. "non-resonant (float, n <= 10000)".
  std::string label() const;
};

/// All n in [1, bound] with |sqrt(xi n + eta) - k| <= tol for an integer k >= 1.
/// The range is split across `threads` workers and merged in order.
std::vector<long> find_resonances(double eta, double xi, long bound, double tol = 1e-9,
                                  unsigned threads = 1);

/// All n in [1, bound] with xi n + eta = k^2 exactly, k >= 1 an integer.
std::vector<long> find_resonances_exact(Rational eta, Rational xi, long bound);

Classification classify(std::span<const long> resonances);
Classification classify(const ResonanceReport& report);

/// Rabi sectors [0, n_1), [n_1, n_2), ..., [n_r, bound + 1).
std::vector<Interval> sector_partition(std::span<const long> resonances, long bound);

/// Strict local minima of D on [1, bound - 1], true resonances removed, with a
/// least-squares fit of log D(m_k) against log k over k >= 3.
QuasiResonances find_quasi_resonances(double eta, double xi, double beta, double omega0,
                                      long bound);

/// Least-squares line through (log k, log D(m_k)) for k >= first_k.
/// Unavailable with fewer than three sites or fewer than two fit points.
DecayFit fit_quasi_decay(std::span<const double> d_values, int first_k = 3);

/// Gibbs weights e^{-beta omega0 n} restricted to [0, m_k), normalized; k is 1-based.
DiagonalState metastable_state(int k, std::span<const long> quasi, double beta, double omega0,
                               int n_max);

/// Float-mode report (resonances, classification, partition, quasi-resonances).
ResonanceReport resonance_report(double eta, double xi, double beta_omega0, long bound,
                                 double tol = 1e-9);
/// Exact-mode report; quasi-resonances still use the double-precision D.
ResonanceReport resonance_report_exact(Rational eta, Rational xi, double beta_omega0, long bound);

}  // namespace maser
