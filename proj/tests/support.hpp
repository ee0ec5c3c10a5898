#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>

#include "maser/channel.hpp"
#include "maser/propagator.hpp"

namespace maser::testing {

inline const double kGolden = (1.0 + std::sqrt(5.0)) / 2.0;

inline ModelParams model(double eta, double xi, double bw, int n_max, double omega_tau = 1.0) {
  ModelParams p;
  p.eta = eta;
  p.xi = xi;
  p.beta_omega0 = bw;
  p.omega_tau = omega_tau;
  p.n_max = n_max;
  return p;
}

/// Random density matrix G G* / Tr, G with Gaussian entries.
inline Eigen::MatrixXcd random_density(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXcd m(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) m(i, j) = cplx{g(rng), g(rng)};
  Eigen::MatrixXcd rho = m * m.adjoint();
  rho = (0.5 * (rho + rho.adjoint())).eval();
  return rho / rho.trace().real();
}

/// Random Hermitian matrix with unit trace (not necessarily positive).
inline Eigen::MatrixXcd random_hermitian(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXcd m(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) m(i, j) = cplx{g(rng), g(rng)};
  Eigen::MatrixXcd h = 0.5 * (m + m.adjoint());
  return h / dim;
}

inline double trace_norm(const Eigen::MatrixXcd& a) {
  const Eigen::MatrixXcd h = 0.5 * (a + a.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().sum();
}

/// Pads rho with one extra zero level.
inline Eigen::MatrixXcd pad(const Eigen::MatrixXcd& rho) {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(rho.rows() + 1, rho.cols() + 1);
  out.topLeftCorner(rho.rows(), rho.cols()) = rho;
  return out;
}

/// Dense reduced dynamics from the matrix exponential at cutoff n_max + 1,
/// restricted to {0..n_max}.
inline Eigen::MatrixXcd oracle_channel(const ModelParams& p, const Eigen::MatrixXcd& rho) {
  const Eigen::MatrixXcd u = dense_exponential_oracle(p.with_n_max(p.n_max + 1));
  const Eigen::MatrixXcd out = dense_reduced_dynamics(u, pad(rho), p.w_minus(), p.w_plus());
  return out.topLeftCorner(rho.rows(), rho.cols());
}

}  // namespace maser::testing
