#include "maser/params.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <numeric>

namespace maser {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

}  // namespace

void PhysicalParams::validate() const {
  require(std::isfinite(omega) && omega > 0, "omega must be > 0");
  require(std::isfinite(omega0) && omega0 > 0, "omega0 must be > 0");
  require(std::isfinite(tau) && tau > 0, "tau must be > 0");
  require(std::isfinite(lambda), "lambda must be finite");
  require(std::isfinite(beta), "beta must be finite");
  require(n_max >= 2, "n_max must be >= 2");
}

Dimensionless dimensionless(const PhysicalParams& p) {
  const double detuning = (p.omega0 - p.omega) * p.tau / kTwoPi;
  const double coupling = p.lambda * p.tau / kTwoPi;
  return {detuning * detuning, coupling * coupling};
}

double beta_star(const PhysicalParams& p) { return p.beta * p.omega0 / p.omega; }

ModelParams ModelParams::from_physical(const PhysicalParams& p) {
  p.validate();
  const auto [eta, xi] = dimensionless(p);
  ModelParams m;
  m.eta = eta;
  m.xi = xi;
  m.beta_omega0 = p.beta * p.omega0;
  m.omega_tau = p.omega * p.tau;
  m.n_max = p.n_max;
  return m;
}

void ModelParams::validate() const {
  require(std::isfinite(eta) && eta >= 0, "eta must be >= 0");
  require(std::isfinite(xi) && xi >= 0, "xi must be >= 0");
  require(!std::isnan(beta_omega0) && beta_omega0 > -std::numeric_limits<double>::infinity(),
          "beta*omega0 must be a number > -inf");
  require(std::isfinite(omega_tau) && omega_tau > 0, "omega*tau must be > 0");
  require(n_max >= 2, "n_max must be >= 2");
}

double ModelParams::z_beta() const { return 1.0 + std::exp(-beta_omega0); }
double ModelParams::w_minus() const { return 1.0 / z_beta(); }
double ModelParams::w_plus() const { return std::exp(-beta_omega0) / z_beta(); }
double ModelParams::boltzmann() const { return std::exp(-beta_omega0); }

double sin_pi(double x) {
  const double k = std::nearbyint(x);
  const double s = std::sin(std::numbers::pi * (x - k));
  return std::fmod(std::fabs(k), 2.0) == 1.0 ? -s : s;
}

double cos_pi(double x) {
  const double k = std::nearbyint(x);
  const double c = std::cos(std::numbers::pi * (x - k));
  return std::fmod(std::fabs(k), 2.0) == 1.0 ? -c : c;
}

RabiArgument rabi_argument(long n, double eta, double xi) {
  RabiArgument a{};
  a.u = xi * static_cast<double>(n) + eta;
  a.root = std::sqrt(a.u);
  a.sin_pi = sin_pi(a.root);
  a.cos_pi = cos_pi(a.root);
  a.sinc = a.u == 0.0 ? std::numbers::pi : a.sin_pi / a.root;
  return a;
}

cplx c_function(long n, double eta, double xi) {
  const RabiArgument a = rabi_argument(n, eta, xi);
  return {a.cos_pi, std::sqrt(eta) * a.sinc};
}

double s_function(long n, double eta, double xi) {
  return std::sqrt(xi) * rabi_argument(n, eta, xi).sinc;
}

double d_function(long n, double eta, double xi, double beta, double omega0) {
  const double xn = xi * static_cast<double>(n);
  if (n == 0 || xn == 0.0) return 0.0;
  const RabiArgument a = rabi_argument(n, eta, xi);
  const double z = 1.0 + std::exp(-beta * omega0);
  return a.sin_pi * a.sin_pi * (xn / a.u) / z;
}

double d_function(long n, const ModelParams& p) {
  return d_function(n, p.eta, p.xi, p.beta_omega0, 1.0);
}

double d0_function(long n, double eta, double xi, double beta, double omega0,
                   std::span<const long> quasi_set) {
  if (std::binary_search(quasi_set.begin(), quasi_set.end(), n)) return 0.0;
  return d_function(n, eta, xi, beta, omega0);
}

std::vector<double> d_profile(const ModelParams& p, long n_last) {
  std::vector<double> d(static_cast<size_t>(n_last + 1));
  for (long n = 0; n <= n_last; ++n) d[static_cast<size_t>(n)] = d_function(n, p);
  return d;
}

double DiagonalState::sum() const {
  return std::accumulate(values.begin(), values.end(), 0.0);
}

double DiagonalState::mean() const {
  double m = 0.0;
  for (size_t n = 0; n < values.size(); ++n) m += static_cast<double>(n) * values[n];
  return m;
}

namespace {

// Populations built by repeated multiplication so that x_n - q x_{n-1} == 0
// holds exactly in floating point; the sector generators rely on it.
DiagonalState geometric_state(double q, int n_max) {
  DiagonalState s;
  s.values.resize(static_cast<size_t>(n_max) + 1);
  double total = 0.0, term = 1.0;
  for (int n = 0; n <= n_max; ++n) {
    total += term;
    term *= q;
  }
  s.values[0] = 1.0 / total;
  for (size_t n = 1; n < s.values.size(); ++n) s.values[n] = q * s.values[n - 1];
  return s;
}

}  // namespace

DiagonalState thermal_state(double beta_star, double omega, int n_max) {
  const double x = beta_star * omega;
  if (!(x > 0)) {
    throw ValidationError("thermal state requires beta_star * omega > 0");
  }
  if (n_max < 0) throw ValidationError("n_max must be >= 0");
  return geometric_state(std::exp(-x), n_max);
}

DiagonalState thermal_state(const ModelParams& p) {
  return thermal_state(p.beta_omega0, 1.0, p.n_max);
}

}  // namespace maser
