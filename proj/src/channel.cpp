#include "maser/channel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "maser/parallel.hpp"

namespace maser {

unsigned thread_count() {
  if (const char* env = std::getenv("MASER_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

const char* to_string(Picture p) {
  switch (p) {
    case Picture::Trace:
      return "trace";
    case Picture::Interaction:
      return "interaction";
    case Picture::HilbertSchmidt:
      return "hilbert-schmidt";
  }
  return "unknown";
}

Eigen::MatrixXcd ShiftOperator::dense() const {
  const auto dim = static_cast<Eigen::Index>(coeff.size());
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
  for (Eigen::Index n = 0; n < dim; ++n) {
    const Eigen::Index t = n + shift;
    if (t >= 0 && t < dim) m(t, n) = coeff[static_cast<size_t>(n)];
  }
  return m;
}

std::vector<double> KrausSet::completeness() const {
  std::vector<double> out(static_cast<size_t>(n_max) + 1, 0.0);
  for (const auto& op : ops)
    for (size_t n = 0; n < out.size(); ++n) out[n] += std::norm(op.coeff[n]);
  return out;
}

namespace {

ShiftOperator make_op(int shift, int n_max) {
  ShiftOperator op;
  op.shift = shift;
  op.coeff.assign(static_cast<size_t>(n_max) + 1, cplx{});
  return op;
}

// free_phase toggles the e^{-i omega tau N} factors of the trace picture.
KrausSet schrodinger_kraus(const ModelParams& p, bool free_phase, Picture picture) {
  p.validate();
  const int n_max = p.n_max;
  KrausSet k;
  k.picture = picture;
  k.n_max = n_max;
  k.w_minus = p.w_minus();
  k.w_plus = p.w_plus();
  const double am = std::sqrt(k.w_minus);
  const double ap = std::sqrt(k.w_plus);
  auto ph = [&](double n) { return free_phase ? std::polar(1.0, -p.omega_tau * n) : cplx{1.0}; };

  k.ops = {make_op(0, n_max), make_op(1, n_max), make_op(-1, n_max), make_op(0, n_max)};
  for (int n = 0; n <= n_max; ++n) {
    const double dn = n;
    k.ops[0].coeff[n] = am * ph(dn) * c_function(n, p.eta, p.xi);
    if (n < n_max) {
      k.ops[1].coeff[n] = ap * std::sqrt(dn + 1) * s_function(n + 1, p.eta, p.xi) * ph(dn + 1);
    }
    if (n > 0) k.ops[2].coeff[n] = am * std::sqrt(dn) * s_function(n, p.eta, p.xi) * ph(dn - 1);
    k.ops[3].coeff[n] = ap * ph(dn) * std::conj(c_function(n + 1, p.eta, p.xi));
  }
  return k;
}

}  // namespace

KrausSet kraus_trace_picture(const ModelParams& p) {
  return schrodinger_kraus(p, true, Picture::Trace);
}

KrausSet kraus_interaction_picture(const ModelParams& p) {
  return schrodinger_kraus(p, false, Picture::Interaction);
}

KrausSet kraus_hs_picture(const ModelParams& p) {
  p.validate();
  const int n_max = p.n_max;
  KrausSet k;
  k.picture = Picture::HilbertSchmidt;
  k.n_max = n_max;
  k.w_minus = p.w_minus();
  k.w_plus = p.w_plus();
  const double rz = 1.0 / std::sqrt(p.z_beta());
  const double quarter = std::exp(-p.beta_omega0 / 4.0) * rz;
  const double half = std::exp(-p.beta_omega0 / 2.0) * rz;

  k.ops = {make_op(0, n_max), make_op(1, n_max), make_op(-1, n_max), make_op(0, n_max)};
  for (int n = 0; n <= n_max; ++n) {
    const double dn = n;
    k.ops[0].coeff[n] = rz * c_function(n, p.eta, p.xi);
    if (n < n_max) k.ops[1].coeff[n] = quarter * std::sqrt(dn + 1) * s_function(n + 1, p.eta, p.xi);
    if (n > 0) k.ops[2].coeff[n] = quarter * std::sqrt(dn) * s_function(n, p.eta, p.xi);
    k.ops[3].coeff[n] = half * std::conj(c_function(n + 1, p.eta, p.xi));
  }
  return k;
}

// ---------------------------------------------------------------------------
// BandedState

BandedState::BandedState(int n_max, int d_max) : n_max_(n_max), d_max_(std::min(d_max, n_max)) {
  if (n_max < 0 || d_max < 0) throw ValidationError("banded state needs n_max, d_max >= 0");
  bands_.resize(static_cast<size_t>(2 * d_max_ + 1));
  for (int d = -d_max_; d <= d_max_; ++d)
    bands_[static_cast<size_t>(d + d_max_)].assign(static_cast<size_t>(band_length(n_max_, d)),
                                                   cplx{});
}

BandedState BandedState::from_dense(const Eigen::MatrixXcd& rho, int d_max) {
  if (rho.rows() != rho.cols() || rho.rows() == 0) throw ValidationError("state must be square");
  const int n_max = static_cast<int>(rho.rows()) - 1;
  BandedState s(n_max, d_max);
  for (int r = 0; r <= n_max; ++r) {
    for (int c = 0; c <= n_max; ++c) {
      const int d = c - r;
      if (std::abs(d) > s.d_max_) {
        s.dropped_ += std::abs(rho(r, c));
      } else {
        s.band(d)[static_cast<size_t>(r - first_row(d))] = rho(r, c);
      }
    }
  }
  return s;
}

BandedState BandedState::diagonal(std::span<const double> populations, int d_max) {
  if (populations.empty()) throw ValidationError("empty population vector");
  BandedState s(static_cast<int>(populations.size()) - 1, d_max);
  auto b = s.band(0);
  for (size_t n = 0; n < populations.size(); ++n) b[n] = populations[n];
  return s;
}

std::span<const cplx> BandedState::band(int d) const {
  if (std::abs(d) > d_max_) throw std::out_of_range("band outside stored range");
  return bands_[static_cast<size_t>(d + d_max_)];
}

std::span<cplx> BandedState::band(int d) {
  if (std::abs(d) > d_max_) throw std::out_of_range("band outside stored range");
  return bands_[static_cast<size_t>(d + d_max_)];
}

cplx BandedState::trace() const {
  cplx t{};
  for (const cplx& x : band(0)) t += x;
  return t;
}

double BandedState::band_l1(int d) const {
  double s = 0.0;
  for (const cplx& x : band(d)) s += std::abs(x);
  return s;
}

double BandedState::hermiticity_defect() const {
  double worst = 0.0;
  for (int d = 0; d <= d_max_; ++d) {
    auto up = band(d);
    auto lo = band(-d);
    for (size_t i = 0; i < up.size(); ++i) worst = std::max(worst, std::abs(lo[i] - std::conj(up[i])));
  }
  return worst;
}

Eigen::MatrixXcd BandedState::to_dense() const {
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n_max_ + 1, n_max_ + 1);
  for (int d = -d_max_; d <= d_max_; ++d) {
    auto b = band(d);
    const int r0 = first_row(d);
    for (size_t i = 0; i < b.size(); ++i) {
      const int r = r0 + static_cast<int>(i);
      m(r, r + d) = b[i];
    }
  }
  return m;
}

BandedState& BandedState::operator+=(const BandedState& other) {
  if (other.n_max_ != n_max_ || other.d_max_ != d_max_) throw ValidationError("shape mismatch");
  for (size_t k = 0; k < bands_.size(); ++k)
    for (size_t i = 0; i < bands_[k].size(); ++i) bands_[k][i] += other.bands_[k][i];
  dropped_ += other.dropped_;
  return *this;
}

BandedState& BandedState::operator-=(const BandedState& other) {
  if (other.n_max_ != n_max_ || other.d_max_ != d_max_) throw ValidationError("shape mismatch");
  for (size_t k = 0; k < bands_.size(); ++k)
    for (size_t i = 0; i < bands_[k].size(); ++i) bands_[k][i] -= other.bands_[k][i];
  dropped_ += other.dropped_;
  return *this;
}

BandedState& BandedState::operator*=(cplx s) {
  for (auto& b : bands_)
    for (auto& x : b) x *= s;
  dropped_ *= std::abs(s);
  return *this;
}

BandedState operator-(BandedState a, const BandedState& b) {
  a -= b;
  return a;
}

// ---------------------------------------------------------------------------
// Channel application

namespace {

// Adds the image of band d under one shift operator into `out`.
// Schrodinger:  |n><n+d|  ->  v_n conj(v_{n+d}) |n+s><n+d+s|
// Heisenberg:   |n><n+d|  ->  conj(v_{n-s}) v_{n+d-s} |n-s><n+d-s|
void accumulate_band(int d, int n_max, const ShiftOperator& op, bool heisenberg,
                     std::span<const cplx> in, std::span<cplx> out) {
  const int r0 = BandedState::first_row(d);
  const int len = static_cast<int>(in.size());
  const int s = op.shift;
  const auto& v = op.coeff;
  for (int i = 0; i < len; ++i) {
    const int n = r0 + i;
    const int t = heisenberg ? n - s : n + s;
    const int tp = t + d;
    if (t < 0 || t > n_max || tp < 0 || tp > n_max) continue;
    const cplx w = heisenberg ? std::conj(v[t]) * v[tp] : v[n] * std::conj(v[n + d]);
    out[static_cast<size_t>(t - r0)] += w * in[static_cast<size_t>(i)];
  }
}

bool is_heisenberg(Picture p) { return p == Picture::HilbertSchmidt; }

}  // namespace

ChannelOutput apply_channel(const BandedState& rho, const KrausSet& kraus,
                            const ApplyOptions& options) {
  if (rho.n_max() != kraus.n_max) throw ValidationError("state and channel truncations differ");
  ChannelOutput out;
  out.state = BandedState(rho.n_max(), rho.d_max());
  const int d_max = rho.d_max();
  const bool heis = is_heisenberg(kraus.picture);
  const unsigned threads = options.threads == 0 ? thread_count() : options.threads;
  parallel_for(static_cast<size_t>(2 * d_max + 1), threads, [&](size_t k) {
    const int d = static_cast<int>(k) - d_max;
    auto in = rho.band(d);
    auto dst = out.state.band(d);
    for (const auto& op : kraus.ops) accumulate_band(d, rho.n_max(), op, heis, in, dst);
  });
  if (!heis) {
    out.leakage = (rho.trace() - out.state.trace()).real();
    out.leakage_flagged = out.leakage > options.leakage_threshold;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sector operators

std::vector<cplx> SectorOperator::apply(std::span<const cplx> x) const {
  std::vector<cplx> out(diag.size());
  apply_into(x, out);
  return out;
}

void SectorOperator::apply_into(std::span<const cplx> x, std::span<cplx> out) const {
  const size_t n = diag.size();
  if (x.size() != n || out.size() != n) throw ValidationError("sector vector length mismatch");
  for (size_t i = 0; i < n; ++i) {
    cplx acc = diag[i] * x[i];
    if (i > 0) acc += lower[i - 1] * x[i - 1];
    if (i + 1 < n) acc += upper[i] * x[i + 1];
    out[i] = acc;
  }
}

Eigen::MatrixXcd SectorOperator::dense() const {
  const int n = size();
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = diag[i];
  for (int i = 0; i + 1 < n; ++i) {
    m(i + 1, i) = lower[i];
    m(i, i + 1) = upper[i];
  }
  return m;
}

bool SectorOperator::is_real(double tol) const {
  auto ok = [tol](const std::vector<cplx>& v) {
    return std::all_of(v.begin(), v.end(), [tol](cplx z) { return std::abs(z.imag()) <= tol; });
  };
  return ok(lower) && ok(diag) && ok(upper);
}

double SectorOperator::max_abs_diff(const SectorOperator& other) const {
  if (other.size() != size()) throw ValidationError("sector operator size mismatch");
  double worst = 0.0;
  for (size_t i = 0; i < diag.size(); ++i) worst = std::max(worst, std::abs(diag[i] - other.diag[i]));
  for (size_t i = 0; i < lower.size(); ++i) {
    worst = std::max(worst, std::abs(lower[i] - other.lower[i]));
    worst = std::max(worst, std::abs(upper[i] - other.upper[i]));
  }
  return worst;
}

namespace {

SectorOperator empty_sector(int d, Picture picture, int n_max) {
  if (std::abs(d) > n_max) throw ValidationError("band index outside truncation");
  SectorOperator op;
  op.d = d;
  op.picture = picture;
  op.n_max = n_max;
  const auto len = static_cast<size_t>(BandedState::band_length(n_max, d));
  op.diag.assign(len, cplx{});
  op.lower.assign(len - 1, cplx{});
  op.upper.assign(len - 1, cplx{});
  return op;
}

void add_entry(SectorOperator& op, int row, int col, cplx w) {
  if (row == col) {
    op.diag[static_cast<size_t>(row)] += w;
  } else if (row == col + 1) {
    op.lower[static_cast<size_t>(col)] += w;
  } else if (col == row + 1) {
    op.upper[static_cast<size_t>(row)] += w;
  } else {
    throw std::logic_error("Kraus shift outside tridiagonal pattern");
  }
}

}  // namespace

SectorOperator sector_operator_from_kraus(int d, const KrausSet& kraus) {
  const int n_max = kraus.n_max;
  SectorOperator op = empty_sector(d, kraus.picture, n_max);
  const bool heis = is_heisenberg(kraus.picture);
  const int r0 = BandedState::first_row(d);
  const int len = op.size();
  for (const auto& k : kraus.ops) {
    const auto& v = k.coeff;
    for (int i = 0; i < len; ++i) {
      const int n = r0 + i;
      const int t = heis ? n - k.shift : n + k.shift;
      const int tp = t + d;
      if (t < 0 || t > n_max || tp < 0 || tp > n_max) continue;
      const cplx w = heis ? std::conj(v[t]) * v[tp] : v[n] * std::conj(v[n + d]);
      if (w != cplx{}) add_entry(op, t - r0, i, w);
    }
  }
  return op;
}

SectorOperator sector_operator_trace(int d, const ModelParams& p) {
  return sector_operator_from_kraus(d, kraus_trace_picture(p));
}

SectorOperator sector_operator_hs(int d, const ModelParams& p) {
  p.validate();
  if (d == 0) return hs_diagonal_form(p).to_sector_operator(Picture::HilbertSchmidt);
  const int n_max = p.n_max;
  SectorOperator op = empty_sector(d, Picture::HilbertSchmidt, n_max);
  const double q = p.boltzmann();
  const double z = p.z_beta();
  const double hq = std::exp(-p.beta_omega0 / 2.0);
  const int r0 = op.first_row();
  for (int i = 0; i < op.size(); ++i) {
    const long m = r0 + i;
    const double dm = static_cast<double>(m);
    const cplx cm = c_function(m, p.eta, p.xi);
    const cplx cmd = c_function(m + d, p.eta, p.xi);
    const cplx cm1 = c_function(m + 1, p.eta, p.xi);
    const cplx cmd1 = c_function(m + d + 1, p.eta, p.xi);
    op.diag[i] = (std::conj(cm) * cmd + q * cm1 * std::conj(cmd1)) / z;
    if (i > 0) {
      op.lower[i - 1] = hq * std::sqrt(dm * (dm + d)) * s_function(m, p.eta, p.xi) *
                        s_function(m + d, p.eta, p.xi) / z;
    }
    if (i + 1 < op.size()) {
      op.upper[i] = hq * std::sqrt((dm + 1) * (dm + d + 1)) * s_function(m + 1, p.eta, p.xi) *
                    s_function(m + d + 1, p.eta, p.xi) / z;
    }
  }
  return op;
}

SectorOperator trace_sector_from_hs(const SectorOperator& hs, const ModelParams& p) {
  if (hs.picture != Picture::HilbertSchmidt) throw ValidationError("expected an HS-picture operator");
  SectorOperator out = empty_sector(-hs.d, Picture::Trace, hs.n_max);
  // Consecutive embedding weights on a band differ by e^{-beta omega0 / 2}.
  const double ratio = std::exp(-p.beta_omega0 / 2.0);
  if (ratio == 0.0) throw std::domain_error("embedding weights vanish at zero temperature");
  const cplx twist = std::polar(1.0, -p.omega_tau * hs.d);
  for (size_t i = 0; i < hs.diag.size(); ++i) out.diag[i] = twist * hs.diag[i];
  for (size_t i = 0; i < hs.lower.size(); ++i) {
    out.lower[i] = twist * hs.upper[i] * ratio;
    out.upper[i] = twist * hs.lower[i] / ratio;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gradient form

void GradientForm::generator(std::span<const double> x, std::span<double> out) const {
  const auto size = static_cast<size_t>(n_max) + 1;
  if (x.size() != size || out.size() != size || D.size() < size + 1) {
    throw ValidationError("gradient form length mismatch");
  }
  // g_n = D_n (x_n - right x_{n-1}) for n = 0..n_max+1, with x_{-1} = x_{n_max+1} = 0.
  auto g = [&](size_t n) {
    const double xn = n < size ? x[n] : 0.0;
    const double xp = n > 0 ? x[n - 1] : 0.0;
    return D[n] * (xn - right * xp);
  };
  double gn = g(0);
  for (size_t n = 0; n < size; ++n) {
    const double gnext = g(n + 1);
    out[n] = -(gn - left * gnext);
    gn = gnext;
  }
}

void GradientForm::apply(std::span<const double> x, std::span<double> out) const {
  generator(x, out);
  for (size_t n = 0; n < out.size(); ++n) out[n] += x[n];
}

std::vector<double> GradientForm::apply(std::span<const double> x) const {
  std::vector<double> out(x.size());
  apply(x, out);
  return out;
}

SectorOperator GradientForm::to_sector_operator(Picture picture) const {
  SectorOperator op = empty_sector(0, picture, n_max);
  for (int n = 0; n <= n_max; ++n) {
    op.diag[n] = 1.0 - D[n] - left * right * D[n + 1];
    if (n < n_max) {
      op.upper[n] = left * D[n + 1];
      op.lower[n] = right * D[n + 1];
    }
  }
  return op;
}

namespace {

std::vector<double> zeroed_profile(const ModelParams& p, std::span<const long> zeroed) {
  std::vector<double> D = d_profile(p, p.n_max + 1);
  for (long m : zeroed)
    if (m >= 0 && m < static_cast<long>(D.size())) D[static_cast<size_t>(m)] = 0.0;
  return D;
}

}  // namespace

GradientForm trace_diagonal_form(const ModelParams& p, std::span<const long> zeroed) {
  p.validate();
  return {p.n_max, 1.0, p.boltzmann(), zeroed_profile(p, zeroed)};
}

GradientForm hs_diagonal_form(const ModelParams& p, std::span<const long> zeroed) {
  p.validate();
  const double h = std::exp(-p.beta_omega0 / 2.0);
  return {p.n_max, h, h, zeroed_profile(p, zeroed)};
}

// ---------------------------------------------------------------------------
// Embedding and picture changes

namespace {

BandedState scale_by_embedding(const BandedState& a, double beta_omega0, bool inverse) {
  const DiagonalState th = thermal_state(beta_omega0, 1.0, a.n_max());
  std::vector<double> quarter(th.values.size());
  for (size_t n = 0; n < quarter.size(); ++n) quarter[n] = std::pow(th.values[n], 0.25);
  BandedState out = a;
  for (int d = -a.d_max(); d <= a.d_max(); ++d) {
    auto b = out.band(d);
    const int r0 = BandedState::first_row(d);
    for (size_t i = 0; i < b.size(); ++i) {
      const size_t n = static_cast<size_t>(r0) + i;
      const double w = quarter[n] * quarter[n + static_cast<size_t>(d)];
      if (inverse) {
        if (w == 0.0) throw std::domain_error("embedding weight underflows; cannot invert");
        b[i] /= w;
      } else {
        b[i] *= w;
      }
    }
  }
  return out;
}

}  // namespace

BandedState hs_embedding(const BandedState& a, double beta_omega0) {
  return scale_by_embedding(a, beta_omega0, false);
}

BandedState hs_embedding_inverse(const BandedState& x, double beta_omega0) {
  return scale_by_embedding(x, beta_omega0, true);
}

BandedState interaction_picture_split(long steps, const BandedState& rho, const ModelParams& p) {
  if (steps < 0) throw ValidationError("steps must be >= 0");
  const KrausSet k = kraus_interaction_picture(p.with_n_max(rho.n_max()));
  BandedState x = rho;
  for (long s = 0; s < steps; ++s) x = apply_channel(x, k).state;
  for (int d = -x.d_max(); d <= x.d_max(); ++d) {
    const cplx f = std::polar(1.0, p.omega_tau * static_cast<double>(d) * static_cast<double>(steps));
    for (auto& v : x.band(d)) v *= f;
  }
  return x;
}

Eigen::MatrixXcd dense_reduced_dynamics(const Eigen::MatrixXcd& propagator,
                                        const Eigen::MatrixXcd& rho, double w_minus,
                                        double w_plus) {
  const auto dim = rho.rows();
  if (rho.cols() != dim || propagator.rows() != 2 * dim || propagator.cols() != 2 * dim) {
    throw ValidationError("propagator and state dimensions disagree");
  }
  Eigen::MatrixXcd omega = Eigen::MatrixXcd::Zero(2 * dim, 2 * dim);
  omega.topLeftCorner(dim, dim) = w_minus * rho;
  omega.bottomRightCorner(dim, dim) = w_plus * rho;
  const Eigen::MatrixXcd full = propagator * omega * propagator.adjoint();
  return full.topLeftCorner(dim, dim) + full.bottomRightCorner(dim, dim);
}

}  // namespace maser
