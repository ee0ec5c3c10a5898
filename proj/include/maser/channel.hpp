#pragma once

#include <Eigen/Dense>

#include <array>
#include <span>
#include <vector>

#include "maser/params.hpp"

namespace maser {

/// Which map a Kraus set or sector operator represents.
///  - Trace: the reduced dynamics on density matrices, rho -> sum V rho V*.
///  - Interaction: the same with the free cavity phases removed.
///  - HilbertSchmidt: the embedded dual map X -> sum V^* X V on J_2.
enum class Picture { Trace, Interaction, HilbertSchmidt };

const char* to_string(Picture p);

/// Operator with a single nonzero diagonal: V|n> = coeff[n] |n + shift>.
/// Entries whose target falls outside {0..n_max} are stored as zero.
struct ShiftOperator {
  int shift = 0;
  std::vector<cplx> coeff;

  Eigen::MatrixXcd dense() const;
};

/// The four Kraus operators V_{--}, V_{-+}, V_{+-}, V_{++}, in that order.
struct KrausSet {
  Picture picture = Picture::Trace;
  int n_max = 0;
  double w_minus = 0.0;
  double w_plus = 0.0;
  std::array<ShiftOperator, 4> ops;

  /// Diagonal of sum V* V (completeness defect lives at n_max).
  std::vector<double> completeness() const;
};

KrausSet kraus_trace_picture(const ModelParams& p);
KrausSet kraus_interaction_picture(const ModelParams& p);
KrausSet kraus_hs_picture(const ModelParams& p);

/// Operator stored by gauge sector: band d holds x_n for sum x_n |n><n+d|,
/// n running from max(0,-d) to n_max - max(0,d). Index i in the stored vector
/// corresponds to n = i + max(0,-d).
class BandedState {
 public:
  BandedState() = default;
  BandedState(int n_max, int d_max);

  /// Bands with |d| > d_max are dropped; their l1 mass is kept in dropped_norm().
  static BandedState from_dense(const Eigen::MatrixXcd& rho, int d_max);
  static BandedState diagonal(std::span<const double> populations, int d_max = 0);

  int n_max() const { return n_max_; }
  int d_max() const { return d_max_; }

  static int first_row(int d) { return d < 0 ? -d : 0; }
  static int band_length(int n_max, int d) { return n_max + 1 - (d < 0 ? -d : d); }

  std::span<const cplx> band(int d) const;
  std::span<cplx> band(int d);

  cplx trace() const;
  double band_l1(int d) const;
  double dropped_norm() const { return dropped_; }
  /// max |x^(-d)_i - conj(x^(d)_i)|.
  double hermiticity_defect() const;

  Eigen::MatrixXcd to_dense() const;

  BandedState& operator+=(const BandedState& other);
  BandedState& operator-=(const BandedState& other);
  BandedState& operator*=(cplx s);

 private:
  int n_max_ = 0;
  int d_max_ = 0;
  double dropped_ = 0.0;
  std::vector<std::vector<cplx>> bands_;
};

BandedState operator-(BandedState a, const BandedState& b);

struct ApplyOptions {
  /// 1 - Tr rho' above this value sets ChannelOutput::leakage_flagged.
  double leakage_threshold = 1e-10;
  /// 0 selects thread_count().
  unsigned threads = 1;
};

struct ChannelOutput {
  BandedState state;
  double leakage = 0.0;
  bool leakage_flagged = false;
};

/// One application of the map encoded by the Kraus set, band by band.
/// Trace and Interaction sets act as rho -> sum V rho V*; HilbertSchmidt sets
/// act as X -> sum V* X V. Bands never mix.
ChannelOutput apply_channel(const BandedState& rho, const KrausSet& kraus,
                            const ApplyOptions& options = {});

/// Tridiagonal action of a picture's map on band d.
/// lower[i] = T(i+1, i), upper[i] = T(i, i+1) in stored-band indices.
struct SectorOperator {
  int d = 0;
  Picture picture = Picture::Trace;
  int n_max = 0;
  std::vector<cplx> lower;
  std::vector<cplx> diag;
  std::vector<cplx> upper;

  int size() const { return static_cast<int>(diag.size()); }
  int first_row() const { return BandedState::first_row(d); }

  std::vector<cplx> apply(std::span<const cplx> x) const;
  void apply_into(std::span<const cplx> x, std::span<cplx> out) const;
  Eigen::MatrixXcd dense() const;
  bool is_real(double tol = 0.0) const;
  double max_abs_diff(const SectorOperator& other) const;
};

/// Band-d operator read off the Kraus products.
SectorOperator sector_operator_from_kraus(int d, const KrausSet& kraus);

/// Trace-picture sector operator cL^(d) (band extraction from the Kraus set).
SectorOperator sector_operator_trace(int d, const ModelParams& p);

/// HS-picture sector operator L^(d) from the closed forms: the symmetric
/// 1 - grad*_b D(N) grad_b for d = 0, the C/S tridiagonal for d != 0.
SectorOperator sector_operator_hs(int d, const ModelParams& p);

/// Maps L^(d) through the embedding weights to the trace-picture cL^(-d):
///   cL^(-d) = e^{-i omega tau d} (W^{-1} L^(d) W)^T,
/// with W the diagonal embedding weights on band d.
SectorOperator trace_sector_from_hs(const SectorOperator& hs, const ModelParams& p);

/// x -> x - grad*_left D(N) grad_right x on {0..n_max}, with
/// (grad_t x)_n = x_n - t x_{n-1} and (grad*_t y)_n = y_n - t y_{n+1}.
/// D holds D(0..n_max+1); the entry at n_max+1 carries the truncation leak.
struct GradientForm {
  int n_max = 0;
  double left = 1.0;
  double right = 1.0;
  std::vector<double> D;

  /// out = -grad*_left D grad_right x, computed in difference form.
  void generator(std::span<const double> x, std::span<double> out) const;
  void apply(std::span<const double> x, std::span<double> out) const;
  std::vector<double> apply(std::span<const double> x) const;
  SectorOperator to_sector_operator(Picture picture) const;
};

/// cL^(0) = 1 - grad*_0 D(N) grad_{2 beta}. Sites in `zeroed` get D = 0
/// (the D_0 modification at quasi-resonances).
GradientForm trace_diagonal_form(const ModelParams& p, std::span<const long> zeroed = {});
/// L^(0) = 1 - grad*_beta D(N) grad_beta.
GradientForm hs_diagonal_form(const ModelParams& p, std::span<const long> zeroed = {});

/// Phi(A) = rho^{1/4} A rho^{1/4} with rho the truncated Gibbs state at
/// beta*omega0: band entries scaled by (p_n p_{n+d})^{1/4}.
BandedState hs_embedding(const BandedState& a, double beta_omega0);
/// Inverse of hs_embedding.
BandedState hs_embedding_inverse(const BandedState& x, double beta_omega0);

/// cL^n(rho) computed as U^{-n} applied to the interaction-picture iterate:
/// band d of the interaction iterate is multiplied by e^{i omega tau d n}.
BandedState interaction_picture_split(long steps, const BandedState& rho, const ModelParams& p);

/// Dense rho -> Tr_atom[U (rho (x) rho_atom) U*] for a 2(n+1) dimensional
/// propagator in the BlockPropagator layout. Oracle path.
Eigen::MatrixXcd dense_reduced_dynamics(const Eigen::MatrixXcd& propagator,
                                        const Eigen::MatrixXcd& rho, double w_minus,
                                        double w_plus);

}  // namespace maser
