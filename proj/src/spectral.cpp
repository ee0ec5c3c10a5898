#include "maser/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "maser/parallel.hpp"

namespace maser {

namespace {

constexpr double kCluster = 1e-10;

double norm2(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

}  // namespace

SymTridiagonal SymTridiagonal::from_sector(const SectorOperator& op) {
  if (!op.is_real()) throw ValidationError("sector operator is not real");
  SymTridiagonal t;
  t.diag.resize(op.diag.size());
  t.off.resize(op.lower.size());
  for (size_t i = 0; i < op.diag.size(); ++i) t.diag[i] = op.diag[i].real();
  for (size_t i = 0; i < op.lower.size(); ++i) {
    if (op.lower[i] != op.upper[i]) throw ValidationError("sector operator is not symmetric");
    t.off[i] = op.lower[i].real();
  }
  return t;
}

std::pair<double, double> SymTridiagonal::gershgorin() const {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  const size_t n = diag.size();
  for (size_t i = 0; i < n; ++i) {
    double r = 0.0;
    if (i > 0) r += std::abs(off[i - 1]);
    if (i + 1 < n) r += std::abs(off[i]);
    lo = std::min(lo, diag[i] - r);
    hi = std::max(hi, diag[i] + r);
  }
  return {lo, hi};
}

std::vector<double> SymTridiagonal::apply(std::span<const double> x) const {
  const size_t n = diag.size();
  std::vector<double> y(n);
  for (size_t i = 0; i < n; ++i) {
    double acc = diag[i] * x[i];
    if (i > 0) acc += off[i - 1] * x[i - 1];
    if (i + 1 < n) acc += off[i] * x[i + 1];
    y[i] = acc;
  }
  return y;
}

int sturm_count(const SymTridiagonal& t, double x) {
  const size_t n = t.diag.size();
  if (n == 0) return 0;
  double max_off = 1.0;
  for (double e : t.off) max_off = std::max(max_off, e * e);
  const double pivmin = std::numeric_limits<double>::min() * max_off;
  int count = 0;
  double q = t.diag[0] - x;
  if (std::abs(q) < pivmin) q = -pivmin;
  if (q < 0) ++count;
  for (size_t i = 1; i < n; ++i) {
    q = t.diag[i] - x - t.off[i - 1] * t.off[i - 1] / q;
    if (std::abs(q) < pivmin) q = -pivmin;
    if (q < 0) ++count;
  }
  return count;
}

double tridiagonal_eigenvalue(const SymTridiagonal& t, int k, double tol) {
  if (k < 0 || k >= t.size()) throw ValidationError("eigenvalue index out of range");
  auto [lo, hi] = t.gershgorin();
  const double pad = 2.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lo), std::abs(hi)) + tol;
  lo -= pad;
  hi += pad;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (sturm_count(t, mid) > k) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::vector<double> tridiagonal_spectrum(const SymTridiagonal& t, double tol, unsigned threads) {
  const int n = t.size();
  std::vector<double> ev(static_cast<size_t>(n));
  parallel_for(static_cast<size_t>(n), std::max(1u, threads),
               [&](size_t k) { ev[k] = tridiagonal_eigenvalue(t, static_cast<int>(k), tol); });
  std::sort(ev.begin(), ev.end());
  return ev;
}

namespace {

// Pivoted LU of a tridiagonal matrix (row interchanges between neighbours).
struct TridiagonalLU {
  std::vector<double> dl, d, du, du2;
  std::vector<char> swapped;

  TridiagonalLU(const SymTridiagonal& t, double shift) {
    const size_t n = t.diag.size();
    d.resize(n);
    for (size_t i = 0; i < n; ++i) d[i] = t.diag[i] - shift;
    dl = t.off;
    du = t.off;
    du2.assign(n > 2 ? n - 2 : 0, 0.0);
    swapped.assign(n > 0 ? n - 1 : 0, 0);
    double scale = 0.0;
    for (double v : t.diag) scale = std::max(scale, std::abs(v));
    for (double v : t.off) scale = std::max(scale, std::abs(v));
    const double tiny = std::numeric_limits<double>::epsilon() * std::max(scale, 1.0);

    for (size_t i = 0; i + 1 < n; ++i) {
      if (std::abs(d[i]) >= std::abs(dl[i])) {
        if (d[i] == 0.0) d[i] = tiny;
        const double f = dl[i] / d[i];
        dl[i] = f;
        d[i + 1] -= f * du[i];
      } else {
        const double f = d[i] / dl[i];
        d[i] = dl[i];
        dl[i] = f;
        const double tmp = du[i];
        du[i] = d[i + 1];
        d[i + 1] = tmp - f * d[i + 1];
        if (i + 2 < n) {
          du2[i] = du[i + 1];
          du[i + 1] = -f * du[i + 1];
        }
        swapped[i] = 1;
      }
    }
    if (n > 0 && d[n - 1] == 0.0) d[n - 1] = tiny;
  }

  void solve(std::vector<double>& b) const {
    const size_t n = d.size();
    for (size_t i = 0; i + 1 < n; ++i) {
      if (!swapped[i]) {
        b[i + 1] -= dl[i] * b[i];
      } else {
        const double tmp = b[i];
        b[i] = b[i + 1];
        b[i + 1] = tmp - dl[i] * b[i];
      }
    }
    b[n - 1] /= d[n - 1];
    if (n > 1) b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
    if (n >= 3)
      for (size_t i = n - 2; i-- > 0;) b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
  }
};

}  // namespace

EigenPair inverse_iteration(const SymTridiagonal& t, double shift, int max_iter, double tol) {
  const size_t n = t.diag.size();
  if (n == 0) throw ValidationError("empty matrix");
  const TridiagonalLU lu(t, shift);
  // Deterministic start with no special alignment to the coordinate axes.
  std::vector<double> x(n);
  for (size_t i = 0; i < n; ++i) x[i] = 1.0 + 0.5 * std::sin(0.7 * static_cast<double>(i) + 0.3);
  double nx = norm2(x);
  for (auto& v : x) v /= nx;

  EigenPair out;
  // Two sweeps past the residual test: the residual alone does not bound the
  // contamination by a nearby eigenvector.
  int polish = 2;
  for (int it = 1; it <= max_iter; ++it) {
    lu.solve(x);
    nx = norm2(x);
    if (!std::isfinite(nx) || nx == 0.0) break;
    for (auto& v : x) v /= nx;
    const std::vector<double> tx = t.apply(x);
    const double rq = std::inner_product(x.begin(), x.end(), tx.begin(), 0.0);
    double r = 0.0;
    for (size_t i = 0; i < n; ++i) r += (tx[i] - rq * x[i]) * (tx[i] - rq * x[i]);
    out.value = rq;
    out.residual = std::sqrt(r);
    out.iterations = it;
    if (out.residual <= tol) {
      out.converged = true;
      if (polish-- == 0) break;
    }
  }
  const auto big = std::max_element(x.begin(), x.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
  if (*big < 0)
    for (auto& v : x) v = -v;
  out.vector = std::move(x);
  return out;
}

SpectralBounds l0_bounds(double beta, double omega0) {
  const double x = beta * omega0;
  if (!(x > 0)) throw ValidationError("spectral bounds need beta * omega0 > 0");
  // 2 e^{-x/2} / (1 + e^{-x}) = 1 / cosh(x / 2).
  return {-1.0 / std::cosh(0.5 * x), 1.0};
}

namespace {

SymTridiagonal l0_matrix(const ModelParams& p, std::span<const long> zeroed) {
  return SymTridiagonal::from_sector(hs_diagonal_form(p, zeroed).to_sector_operator(Picture::HilbertSchmidt));
}

int count_above(const SymTridiagonal& t, double x) { return t.size() - sturm_count(t, x); }

}  // namespace

SpectrumReport l0_spectrum(const ModelParams& p, std::span<const long> zeroed, unsigned threads) {
  const SymTridiagonal t = l0_matrix(p, zeroed);
  SpectrumReport r;
  r.d = 0;
  r.picture = Picture::HilbertSchmidt;
  r.n_max = p.n_max;
  r.eigenvalues = tridiagonal_spectrum(t, 1e-12, threads);
  r.top = r.eigenvalues.back();
  r.top_multiplicity = count_above(t, r.top - kCluster);
  const int n = t.size();
  double second = std::abs(r.eigenvalues.front());
  if (r.top_multiplicity < n) second = std::max(second, r.eigenvalues[n - 1 - r.top_multiplicity]);
  if (r.top_multiplicity == n) second = 0.0;
  r.second_modulus = second;
  r.gap = 1.0 - second;
  r.top_residual = inverse_iteration(t, r.top).residual;
  return r;
}

TopEigenpairCheck top_eigenpair_check(const ModelParams& p) {
  const SymTridiagonal t = l0_matrix(p, {});
  const int n = t.size();
  TopEigenpairCheck c;
  c.lambda_max = tridiagonal_eigenvalue(t, n - 1);
  c.multiplicity = count_above(t, c.lambda_max - kCluster);
  c.lambda2 = c.multiplicity < n ? tridiagonal_eigenvalue(t, n - 1 - c.multiplicity) : c.lambda_max;
  c.simple = c.multiplicity == 1 && c.lambda2 < c.lambda_max;
  c.resonant = c.multiplicity > 1;
  const EigenPair e = inverse_iteration(t, c.lambda_max);
  c.residual = e.residual;
  double dot = 0.0, nw = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = std::exp(-p.beta_omega0 * i / 2.0);
    dot += w * e.vector[static_cast<size_t>(i)];
    nw += w * w;
  }
  c.cosine = dot / std::sqrt(nw);
  c.eigenvector = e.vector;
  return c;
}

std::vector<GapRow> gap_scan(const ModelParams& base, std::span<const int> n_max_list,
                             std::span<const long> zeroed, unsigned threads) {
  std::vector<GapRow> rows(n_max_list.size());
  parallel_for(rows.size(), std::max(1u, threads), [&](size_t i) {
    const ModelParams p = base.with_n_max(n_max_list[i]);
    const SymTridiagonal t = l0_matrix(p, zeroed);
    const int n = t.size();
    GapRow& r = rows[i];
    r.n_max = p.n_max;
    r.lambda_max = tridiagonal_eigenvalue(t, n - 1);
    r.lambda2 = tridiagonal_eigenvalue(t, n - 2);
    r.lambda_min = tridiagonal_eigenvalue(t, 0);
    r.multiplicity_at_one = count_above(t, 1.0 - kCluster);
    r.gap = 1.0 - std::max(r.lambda2, std::abs(r.lambda_min));
  });
  return rows;
}

PeripheralProbe peripheral_probe(const SectorOperator& op, int max_iter, double tol,
                                 std::uint64_t seed) {
  const int n = op.size();
  if (n == 0) throw ValidationError("empty sector operator");
  PeripheralProbe out;
  {
    double n1 = 0.0, ninf = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto u = static_cast<size_t>(i);
      double row = std::abs(op.diag[u]), col = row;
      if (i > 0) {
        row += std::abs(op.lower[u - 1]);
        col += std::abs(op.upper[u - 1]);
      }
      if (i + 1 < n) {
        row += std::abs(op.upper[u]);
        col += std::abs(op.lower[u]);
      }
      ninf = std::max(ninf, row);
      n1 = std::max(n1, col);
    }
    out.norm_bound = std::min(n1, ninf);
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<cplx> x(static_cast<size_t>(n)), y(static_cast<size_t>(n));
  for (auto& v : x) v = {g(rng), g(rng)};
  auto norm = [](const std::vector<cplx>& v) {
    double s = 0.0;
    for (const cplx& z : v) s += std::norm(z);
    return std::sqrt(s);
  };
  double nx = norm(x);
  for (auto& v : x) v /= nx;

  const int window = std::max(10, max_iter / 100);
  std::vector<double> rates;
  double log_total = 0.0, window_log = 0.0;
  int it = 0;
  for (it = 1; it <= max_iter; ++it) {
    op.apply_into(x, y);
    const double ny = norm(y);
    if (ny == 0.0 || !std::isfinite(ny)) {
      rates.push_back(0.0);
      log_total = -std::numeric_limits<double>::infinity();
      break;
    }
    log_total += std::log(ny);
    window_log += std::log(ny);
    for (int i = 0; i < n; ++i) x[static_cast<size_t>(i)] = y[static_cast<size_t>(i)] / ny;
    if (it % window == 0) {
      rates.push_back(std::exp(window_log / window));
      window_log = 0.0;
      const size_t k = rates.size();
      if (k >= 3 && std::abs(rates[k - 1] - rates[k - 2]) <= tol * std::max(rates[k - 1], 1e-300) &&
          std::abs(rates[k - 2] - rates[k - 3]) <= tol * std::max(rates[k - 2], 1e-300)) {
        out.converged = true;
        break;
      }
    }
  }
  out.iterations = std::min(it, max_iter);
  out.final_norm_ratio = std::exp(log_total);
  if (rates.empty()) rates.push_back(std::exp(window_log / std::max(1, out.iterations)));
  out.radius_estimate = rates.back();
  const size_t tail = std::max<size_t>(2, rates.size() / 4);
  const size_t from = rates.size() > tail ? rates.size() - tail : 0;
  out.radius_low = *std::min_element(rates.begin() + static_cast<long>(from), rates.end());
  out.radius_high = *std::max_element(rates.begin() + static_cast<long>(from), rates.end());

  op.apply_into(x, y);
  cplx rq{};
  for (int i = 0; i < n; ++i) rq += std::conj(x[static_cast<size_t>(i)]) * y[static_cast<size_t>(i)];
  double res = 0.0, edge = 0.0;
  const int edge_from = n - std::max(1, n / 10);
  for (int i = 0; i < n; ++i) {
    res += std::norm(y[static_cast<size_t>(i)] - rq * x[static_cast<size_t>(i)]);
    if (i >= edge_from) edge += std::norm(x[static_cast<size_t>(i)]);
  }
  out.rayleigh = rq;
  out.residual = std::sqrt(res);
  out.edge_mass = edge;
  out.peripheral_eigenvalue = out.converged && out.radius_estimate >= 1.0 - 1e-8 &&
                              out.residual <= 1e-8 && out.edge_mass < 0.5;
  return out;
}

}  // namespace maser
