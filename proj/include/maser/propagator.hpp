#pragma once

#include <Eigen/Dense>

#include <vector>

#include "maser/params.hpp"

namespace maser {

/// e^{-i tau H} restricted to H_S (+) H_S, with H_S cut at n_max photons.
///
/// The two components are the atom ground state (-) and excited state (+).
/// Dense index layout used by to_dense(): ground block rows 0..n_max,
/// excited block rows n_max+1..2 n_max+1.
struct BlockPropagator {
  int n_max = 0;
  double omega_tau = 0.0;
  double eta_phase = 0.0;  // pi sqrt(eta)

  std::vector<cplx> ground_ground;    // <n,-|U|n,->, n = 0..n_max
  std::vector<cplx> excited_excited;  // <n,+|U|n,+>, n = 0..n_max
  std::vector<cplx> ground_excited;   // <n+1,-|U|n,+>, n = 0..n_max-1
  std::vector<cplx> excited_ground;   // <n-1,+|U|n,->, stored at n-1, n = 1..n_max

  Eigen::MatrixXcd to_dense() const;

  /// Block of U on the total-number eigenspace N_tot = m, m = 0..n_max+1.
  /// Returns 1x1 for m = 0 and m = n_max+1, 2x2 otherwise, in the basis
  /// (|m,->, |m-1,+>).
  Eigen::MatrixXcd number_block(int m) const;

  /// max |U*U - 1| over the N_tot = m block.
  double unitarity_defect(int m) const;
};

BlockPropagator build_propagator(const ModelParams& p);

/// Truncated Jaynes-Cummings Hamiltonian times tau, assembled from a, a*, b, b*
/// on the (n_max+1)*2 dimensional space in the BlockPropagator layout.
Eigen::MatrixXcd jaynes_cummings_hamiltonian(const PhysicalParams& p);

/// e^{-i tau H} by scaling and squaring of the assembled Hamiltonian.
/// Test oracle; n_max <= 64. tau = 0 is accepted and yields the identity.
Eigen::MatrixXcd dense_exponential_oracle(const PhysicalParams& p);

/// Same oracle for reduced parameters, using the canonical tau = 1,
/// omega = omega_tau, omega0 = omega + 2 pi sqrt(eta), lambda = 2 pi sqrt(xi).
Eigen::MatrixXcd dense_exponential_oracle(const ModelParams& p);

PhysicalParams canonical_physical(const ModelParams& p);

}  // namespace maser
