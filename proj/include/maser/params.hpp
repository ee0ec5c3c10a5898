#pragma once

#include <complex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace maser {

using cplx = std::complex<double>;

/// Raised when user-supplied parameters or configuration fail validation.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a run exceeds its step or leakage budget.
class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Physical parameters of the one-atom maser (hbar = 1).
struct PhysicalParams {
  double omega = 1.0;   // cavity frequency
  double omega0 = 1.0;  // atomic transition frequency
  double lambda = 0.0;  // coupling constant
  double tau = 1.0;     // interaction time
  double beta = 1.0;    // atomic inverse temperature
  int n_max = 16;       // Fock cutoff

  void validate() const;
};

struct Dimensionless {
  double eta;
  double xi;
};

/// eta = ((omega0 - omega) tau / 2pi)^2, xi = (lambda tau / 2pi)^2.
Dimensionless dimensionless(const PhysicalParams& p);

/// Reduced model parameters. The reduced dynamics depends on the physical
/// inputs only through (eta, xi, beta*omega0, omega*tau), which is what every
/// module consumes.
struct ModelParams {
  double eta = 0.0;
  double xi = 1.0;
  double beta_omega0 = 1.0;
  double omega_tau = 1.0;
  int n_max = 16;

  static ModelParams from_physical(const PhysicalParams& p);

  void validate() const;

  /// Z_beta = 1 + exp(-beta omega0).
  double z_beta() const;
  /// Atom weights w(-) = 1/Z, w(+) = e^{-beta omega0}/Z.
  double w_minus() const;
  double w_plus() const;
  /// e^{-beta omega0}, the ratio of consecutive thermal populations.
  double boltzmann() const;

  ModelParams with_n_max(int n) const {
    ModelParams q = *this;
    q.n_max = n;
    return q;
  }
};

/// Renormalized cavity inverse temperature beta* = beta omega0 / omega.
double beta_star(const PhysicalParams& p);

// ---------------------------------------------------------------------------
// Special functions. All of them go through rabi_argument so every module sees
// bit-identical values of pi*sqrt(xi n + eta).

struct RabiArgument {
  double u;        // xi n + eta
  double root;     // sqrt(u)
  double sin_pi;   // sin(pi sqrt(u)), exact zero when sqrt(u) is an integer
  double cos_pi;   // cos(pi sqrt(u))
  double sinc;     // sin(pi sqrt(u)) / sqrt(u), continuous limit pi at u = 0
};

double sin_pi(double x);
double cos_pi(double x);

RabiArgument rabi_argument(long n, double eta, double xi);

/// C(n) = cos(pi sqrt(xi n + eta)) + i sqrt(eta) sin(pi sqrt(xi n + eta)) / sqrt(xi n + eta)
cplx c_function(long n, double eta, double xi);

/// S(n) = sqrt(xi) sin(pi sqrt(xi n + eta)) / sqrt(xi n + eta)
double s_function(long n, double eta, double xi);

/// D(n) = sin^2(pi sqrt(xi n + eta)) xi n / (xi n + eta) / Z_beta; D(0) = 0.
double d_function(long n, double eta, double xi, double beta, double omega0);
double d_function(long n, const ModelParams& p);

/// D with the quasi-resonance sites zeroed. quasi_set must be sorted.
double d0_function(long n, double eta, double xi, double beta, double omega0,
                   std::span<const long> quasi_set);

/// D(0..n_last) for the given model.
std::vector<double> d_profile(const ModelParams& p, long n_last);

struct DiagonalState {
  std::vector<double> values;

  double sum() const;
  double mean() const;
};

/// Gibbs state p_n ∝ exp(-beta_star omega n) on {0..n_max}.
DiagonalState thermal_state(double beta_star, double omega, int n_max);
/// Same state from the product beta*omega0 = beta_star*omega.
DiagonalState thermal_state(const ModelParams& p);

}  // namespace maser
