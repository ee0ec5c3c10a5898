#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "maser/channel.hpp"
#include "maser/params.hpp"

namespace maser {

/// Real symmetric tridiagonal matrix: diag[0..n-1], off[i] = T(i, i+1) = T(i+1, i).
struct SymTridiagonal {
  std::vector<double> diag;
  std::vector<double> off;

  int size() const { return static_cast<int>(diag.size()); }

  /// Rejects operators with an imaginary part or lower != upper (entry-wise).
  static SymTridiagonal from_sector(const SectorOperator& op);

  /// Gershgorin interval containing the spectrum.
  std::pair<double, double> gershgorin() const;
  std::vector<double> apply(std::span<const double> x) const;
};

/// Number of eigenvalues strictly below x.
int sturm_count(const SymTridiagonal& t, double x);

/// k-th smallest eigenvalue (0-based) by bisection to absolute width tol.
double tridiagonal_eigenvalue(const SymTridiagonal& t, int k, double tol = 1e-12);

/// All eigenvalues, ascending, by Sturm bisection. Indices are split across
/// `threads` workers.
std::vector<double> tridiagonal_spectrum(const SymTridiagonal& t, double tol = 1e-12,
                                         unsigned threads = 1);

struct EigenPair {
  double value = 0.0;
  std::vector<double> vector;  // unit 2-norm, largest component positive
  double residual = 0.0;       // ||T x - value x||_2
  int iterations = 0;
  bool converged = false;
};

/// Inverse iteration with a pivoted tridiagonal LU at the given shift.
EigenPair inverse_iteration(const SymTridiagonal& t, double shift, int max_iter = 50,
                            double tol = 1e-10);

struct SpectralBounds {
  double lower = 0.0;
  double upper = 1.0;
};

/// (-2 e^{-beta omega0 / 2} / (1 + e^{-beta omega0}), 1).
SpectralBounds l0_bounds(double beta, double omega0);

struct SpectrumReport {
  int d = 0;
  Picture picture = Picture::HilbertSchmidt;
  int n_max = 0;
  std::vector<double> eigenvalues;  // ascending
  double top = 0.0;
  int top_multiplicity = 0;         // eigenvalues within 1e-10 of top
  double second_modulus = 0.0;      // largest |lambda| outside the top cluster
  double gap = 0.0;                 // 1 - second_modulus
  double top_residual = 0.0;
};

/// Full spectrum of L^(0) (HS picture); `zeroed` sites get D = 0.
SpectrumReport l0_spectrum(const ModelParams& p, std::span<const long> zeroed = {},
                           unsigned threads = 1);

struct TopEigenpairCheck {
  double lambda_max = 0.0;
  double lambda2 = 0.0;        // largest eigenvalue strictly below the top cluster
  int multiplicity = 0;        // cluster size at lambda_max (radius 1e-10)
  double residual = 0.0;
  double cosine = 0.0;         // against e^{-beta omega0 n / 2}
  bool simple = false;
  bool resonant = false;       // degenerate fixed space: flagged, not an error
  std::vector<double> eigenvector;
};

TopEigenpairCheck top_eigenpair_check(const ModelParams& p);

struct GapRow {
  int n_max = 0;
  double lambda_max = 0.0;
  double lambda2 = 0.0;
  double lambda_min = 0.0;
  int multiplicity_at_one = 0;  // eigenvalues within 1e-10 of 1
  double gap = 0.0;             // 1 - max(lambda2, |lambda_min|)
};

/// gap(n_max) of L^(0) along the given truncations; `zeroed` selects the
/// D_0-modified operator. Rows are computed independently.
std::vector<GapRow> gap_scan(const ModelParams& base, std::span<const int> n_max_list,
                             std::span<const long> zeroed = {}, unsigned threads = 1);

struct PeripheralProbe {
  double radius_estimate = 0.0;  // growth rate of ||T^n x|| over the final window
  double radius_low = 0.0;       // smallest windowed rate in the final quarter
  double radius_high = 0.0;      // largest windowed rate in the final quarter
  double norm_bound = 0.0;       // min(||T||_1, ||T||_inf), always >= the spectral radius
  double final_norm_ratio = 0.0; // ||T^n x|| / ||x||
  cplx rayleigh{};               // x* T x for the final normalized iterate
  double residual = 0.0;         // ||T x - rayleigh x||_2
  double edge_mass = 0.0;        // share of |x|^2 on the top 10% of indices
  bool converged = false;
  bool peripheral_eigenvalue = false;
  int iterations = 0;
};

/// Power iteration with per-step renormalization from a seeded random start.
PeripheralProbe peripheral_probe(const SectorOperator& op, int max_iter = 10000,
                                 double tol = 1e-6, std::uint64_t seed = 1);

}  // namespace maser
