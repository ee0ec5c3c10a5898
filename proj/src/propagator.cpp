#include "maser/propagator.hpp"

#include <cmath>
#include <numbers>

namespace maser {

namespace {

constexpr cplx kI{0.0, 1.0};

cplx phase(double angle) { return std::polar(1.0, -angle); }

}  // namespace

BlockPropagator build_propagator(const ModelParams& p) {
  p.validate();
  const int n_max = p.n_max;
  BlockPropagator u;
  u.n_max = n_max;
  u.omega_tau = p.omega_tau;
  u.eta_phase = std::numbers::pi * std::sqrt(p.eta);

  const auto size = static_cast<size_t>(n_max) + 1;
  u.ground_ground.resize(size);
  u.excited_excited.resize(size);
  u.ground_excited.resize(size - 1);
  u.excited_ground.resize(size - 1);

  for (int n = 0; n <= n_max; ++n) {
    const double dn = n;
    u.ground_ground[n] = phase(p.omega_tau * dn + u.eta_phase) * c_function(n, p.eta, p.xi);
    // The N+1 argument is evaluated even at n = n_max: the |n_max,+> entry is
    // the only place where the hard cutoff breaks unitarity.
    u.excited_excited[n] =
        phase(p.omega_tau * (dn + 1) + u.eta_phase) * std::conj(c_function(n + 1, p.eta, p.xi));
  }
  for (int n = 0; n < n_max; ++n) {
    // a*|n> = sqrt(n+1)|n+1>, then S(N) and the phase act on n+1.
    const double dn = n;
    u.ground_excited[n] = -kI * phase(p.omega_tau * (dn + 1) + u.eta_phase) *
                          s_function(n + 1, p.eta, p.xi) * std::sqrt(dn + 1);
  }
  for (int n = 1; n <= n_max; ++n) {
    // a|n> = sqrt(n)|n-1>, then S(N+1) and e^{-i tau omega (N+1)} act on n-1.
    const double dn = n;
    u.excited_ground[n - 1] =
        -kI * phase(p.omega_tau * dn + u.eta_phase) * s_function(n, p.eta, p.xi) * std::sqrt(dn);
  }
  return u;
}

Eigen::MatrixXcd BlockPropagator::to_dense() const {
  const int dim = n_max + 1;
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(2 * dim, 2 * dim);
  for (int n = 0; n <= n_max; ++n) {
    m(n, n) = ground_ground[n];
    m(dim + n, dim + n) = excited_excited[n];
  }
  for (int n = 0; n < n_max; ++n) m(n + 1, dim + n) = ground_excited[n];
  for (int n = 1; n <= n_max; ++n) m(dim + n - 1, n) = excited_ground[n - 1];
  return m;
}

Eigen::MatrixXcd BlockPropagator::number_block(int m) const {
  if (m < 0 || m > n_max + 1) throw ValidationError("total number outside truncation");
  if (m == 0) return Eigen::MatrixXcd::Constant(1, 1, ground_ground[0]);
  if (m == n_max + 1) return Eigen::MatrixXcd::Constant(1, 1, excited_excited[n_max]);
  Eigen::MatrixXcd b(2, 2);
  b(0, 0) = ground_ground[m];
  b(0, 1) = ground_excited[m - 1];
  b(1, 0) = excited_ground[m - 1];
  b(1, 1) = excited_excited[m - 1];
  return b;
}

double BlockPropagator::unitarity_defect(int m) const {
  const Eigen::MatrixXcd b = number_block(m);
  const Eigen::MatrixXcd g = b.adjoint() * b - Eigen::MatrixXcd::Identity(b.rows(), b.cols());
  return g.cwiseAbs().maxCoeff();
}

Eigen::MatrixXcd jaynes_cummings_hamiltonian(const PhysicalParams& p) {
  if (p.n_max < 0) throw ValidationError("n_max must be >= 0");
  const int dim = p.n_max + 1;
  // Photon operators on the cavity factor.
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  const Eigen::MatrixXcd a_dag = a.adjoint();
  const Eigen::MatrixXcd number = a_dag * a;
  // Atom basis (|->, |+>): b = |-><+|.
  Eigen::Matrix2cd b = Eigen::Matrix2cd::Zero();
  b(0, 1) = 1.0;
  const Eigen::Matrix2cd b_dag = b.adjoint();

  // Kronecker product with the atom index as the slow one, matching the
  // ground-block / excited-block layout.
  auto kron = [dim](const Eigen::Matrix2cd& atom, const Eigen::MatrixXcd& cavity) {
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(2 * dim, 2 * dim);
    for (int s = 0; s < 2; ++s)
      for (int t = 0; t < 2; ++t)
        if (atom(s, t) != cplx{}) out.block(s * dim, t * dim, dim, dim) = atom(s, t) * cavity;
    return out;
  };
  const Eigen::Matrix2cd atom_id = Eigen::Matrix2cd::Identity();
  const Eigen::MatrixXcd cavity_id = Eigen::MatrixXcd::Identity(dim, dim);

  Eigen::MatrixXcd h = p.omega * kron(atom_id, number) + p.omega0 * kron(b_dag * b, cavity_id) +
                       0.5 * p.lambda * (kron(b, a_dag) + kron(b_dag, a));
  return p.tau * h;
}

Eigen::MatrixXcd dense_exponential_oracle(const PhysicalParams& p) {
  if (p.n_max > 64) throw ValidationError("dense oracle limited to n_max <= 64");
  const Eigen::MatrixXcd h = jaynes_cummings_hamiltonian(p);
  if ((h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + h.cwiseAbs().maxCoeff())) {
    throw std::logic_error("assembled Hamiltonian is not Hermitian");
  }
  const Eigen::MatrixXcd x = -kI * h;
  // Scale so that ||x / 2^s||_1 <= 1/2, Taylor to convergence, square back.
  const double norm = x.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  if (squarings > 60 || !std::isfinite(norm)) {
    throw std::overflow_error("norm estimate exceeds the squaring depth");
  }
  const Eigen::MatrixXcd scaled = x / std::ldexp(1.0, squarings);
  const auto dim = x.rows();
  Eigen::MatrixXcd result = Eigen::MatrixXcd::Identity(dim, dim);
  Eigen::MatrixXcd term = Eigen::MatrixXcd::Identity(dim, dim);
  for (int k = 1; k <= 30; ++k) {
    term = term * scaled / static_cast<double>(k);
    result += term;
    if (term.cwiseAbs().maxCoeff() < 1e-20) break;
  }
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

PhysicalParams canonical_physical(const ModelParams& p) {
  PhysicalParams q;
  q.tau = 1.0;
  q.omega = p.omega_tau;
  q.omega0 = p.omega_tau + 2.0 * std::numbers::pi * std::sqrt(p.eta);
  q.lambda = 2.0 * std::numbers::pi * std::sqrt(p.xi);
  q.beta = p.beta_omega0 / q.omega0;
  q.n_max = p.n_max;
  return q;
}

Eigen::MatrixXcd dense_exponential_oracle(const ModelParams& p) {
  return dense_exponential_oracle(canonical_physical(p));
}

}  // namespace maser
