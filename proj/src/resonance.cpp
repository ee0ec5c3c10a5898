#include "maser/resonance.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "maser/parallel.hpp"

namespace maser {

namespace {

__extension__ typedef __int128 i128;

long long gcd_ll(long long a, long long b) { return std::gcd(a < 0 ? -a : a, b < 0 ? -b : b); }

// floor(sqrt(v)) for v >= 0.
i128 isqrt(i128 v) {
  if (v <= 0) return 0;
  i128 r = static_cast<i128>(std::sqrt(static_cast<long double>(v)));
  while (r * r > v) --r;
  while ((r + 1) * (r + 1) <= v) ++r;
  return r;
}

}  // namespace

Rational Rational::parse(const std::string& text) {
  auto fail = [&text]() -> Rational { throw ValidationError("not a rational number: '" + text + "'"); };
  if (text.empty()) return fail();
  const auto slash = text.find('/');
  Rational r;
  if (slash != std::string::npos) {
    size_t a = 0, b = 0;
    try {
      r.num = std::stoll(text.substr(0, slash), &a);
      r.den = std::stoll(text.substr(slash + 1), &b);
    } catch (const std::exception&) {
      return fail();
    }
    if (a != slash || b != text.size() - slash - 1 || r.den == 0) return fail();
  } else {
    size_t i = 0;
    bool negative = false;
    if (text[i] == '+' || text[i] == '-') negative = text[i++] == '-';
    long long num = 0, den = 1;
    bool digits = false, point = false;
    for (; i < text.size(); ++i) {
      const char c = text[i];
      if (c == '.' && !point) {
        point = true;
        continue;
      }
      if (!std::isdigit(static_cast<unsigned char>(c))) return fail();
      if (num > 99999999999999999LL) throw ValidationError("rational literal too long: '" + text + "'");
      num = num * 10 + (c - '0');
      if (point) den *= 10;
      digits = true;
    }
    if (!digits) return fail();
    r.num = negative ? -num : num;
    r.den = den;
  }
  if (r.den < 0) {
    r.num = -r.num;
    r.den = -r.den;
  }
  const long long g = gcd_ll(r.num, r.den);
  if (g > 1) {
    r.num /= g;
    r.den /= g;
  }
  return r;
}

const char* to_string(ResonanceMode m) { return m == ResonanceMode::Float ? "float" : "exact"; }

const char* to_string(Classification c) {
  switch (c) {
    case Classification::NonResonant:
      return "non-resonant";
    case Classification::SimplyResonant:
      return "simply-resonant";
    case Classification::FullyResonant:
      return "fully-resonant";
  }
  return "unknown";
}

std::string ResonanceReport::label() const {
  return std::string(to_string(classification)) + " (" + to_string(mode) +
         ", n <= " + std::to_string(bound) + ")";
}

std::vector<long> find_resonances(double eta, double xi, long bound, double tol, unsigned threads) {
  if (!(xi > 0) || !std::isfinite(xi)) throw ValidationError("resonance search needs xi > 0");
  if (!(eta >= 0) || !std::isfinite(eta)) throw ValidationError("resonance search needs eta >= 0");
  if (bound < 1) throw ValidationError("search bound must be >= 1");
  if (!(tol > 0)) throw ValidationError("tolerance must be > 0");

  const long chunks = std::min<long>(bound, 64);
  const long per = (bound + chunks - 1) / chunks;
  std::vector<std::vector<long>> found(static_cast<size_t>(chunks));
  parallel_for(static_cast<size_t>(chunks), std::max(1u, threads), [&](size_t c) {
    const long lo = 1 + static_cast<long>(c) * per;
    const long hi = std::min(bound, lo + per - 1);
    for (long n = lo; n <= hi; ++n) {
      const double r = std::sqrt(xi * static_cast<double>(n) + eta);
      const double k = std::nearbyint(r);
      if (k >= 1 && std::abs(r - k) <= tol) found[c].push_back(n);
    }
  });
  std::vector<long> out;
  for (auto& f : found) out.insert(out.end(), f.begin(), f.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<long> find_resonances_exact(Rational eta, Rational xi, long bound) {
  if (xi.num <= 0 || xi.den <= 0) throw ValidationError("resonance search needs xi > 0");
  if (eta.num < 0 || eta.den <= 0) throw ValidationError("resonance search needs eta >= 0");
  if (bound < 1) throw ValidationError("search bound must be >= 1");
  // xi n + eta = (xi.num eta.den n + eta.num xi.den) / (xi.den eta.den).
  const i128 a = static_cast<i128>(xi.num) * eta.den;
  const i128 b = static_cast<i128>(eta.num) * xi.den;
  const i128 den = static_cast<i128>(xi.den) * eta.den;
  std::vector<long> out;
  for (long n = 1; n <= bound; ++n) {
    const i128 num = a * n + b;
    if (num % den != 0) continue;
    const i128 q = num / den;
    const i128 k = isqrt(q);
    if (k >= 1 && k * k == q) out.push_back(n);
  }
  return out;
}

Classification classify(std::span<const long> resonances) {
  if (resonances.empty()) return Classification::NonResonant;
  if (resonances.size() == 1) return Classification::SimplyResonant;
  return Classification::FullyResonant;
}

Classification classify(const ResonanceReport& report) { return classify(report.resonances); }

std::vector<Interval> sector_partition(std::span<const long> resonances, long bound) {
  if (!std::is_sorted(resonances.begin(), resonances.end())) {
    throw ValidationError("resonances must be sorted");
  }
  std::vector<Interval> out;
  long begin = 0;
  for (long r : resonances) {
    if (r <= begin || r > bound) continue;
    out.push_back({begin, r});
    begin = r;
  }
  out.push_back({begin, bound + 1});
  return out;
}

DecayFit fit_quasi_decay(std::span<const double> d_values, int first_k) {
  DecayFit fit;
  if (d_values.size() < 3) return fit;
  std::vector<double> xs, ys;
  for (size_t i = static_cast<size_t>(std::max(first_k, 1) - 1); i < d_values.size(); ++i) {
    if (!(d_values[i] > 0)) continue;
    xs.push_back(std::log(static_cast<double>(i + 1)));
    ys.push_back(std::log(d_values[i]));
  }
  if (xs.size() < 2) return fit;
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx == 0.0) return fit;
  fit.available = true;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.points = static_cast<int>(xs.size());
  return fit;
}

QuasiResonances find_quasi_resonances(double eta, double xi, double beta, double omega0,
                                      long bound) {
  if (bound < 2) throw ValidationError("quasi-resonance scan needs bound >= 2");
  const std::vector<long> exact = find_resonances(eta, xi, bound);
  std::vector<double> d(static_cast<size_t>(bound) + 1);
  for (long n = 0; n <= bound; ++n) d[static_cast<size_t>(n)] = d_function(n, eta, xi, beta, omega0);

  QuasiResonances q;
  for (long n = 1; n < bound; ++n) {
    const auto i = static_cast<size_t>(n);
    if (!(d[i] < d[i - 1] && d[i] < d[i + 1])) continue;
    if (std::binary_search(exact.begin(), exact.end(), n)) continue;
    q.sites.push_back(n);
    q.d_values.push_back(d[i]);
  }
  q.fit = fit_quasi_decay(q.d_values);
  return q;
}

DiagonalState metastable_state(int k, std::span<const long> quasi, double beta, double omega0,
                               int n_max) {
  if (k < 1 || static_cast<size_t>(k) > quasi.size()) {
    throw ValidationError("metastable index outside the quasi-resonance list");
  }
  const long m = quasi[static_cast<size_t>(k - 1)];
  if (m < 1 || m > static_cast<long>(n_max) + 1) {
    throw ValidationError("quasi-resonance m_k must lie in [1, n_max + 1]");
  }
  const double x = beta * omega0;
  if (!(x > 0)) throw ValidationError("metastable state requires beta * omega0 > 0");
  const double q = std::exp(-x);
  DiagonalState s;
  s.values.assign(static_cast<size_t>(n_max) + 1, 0.0);
  double total = 0.0, term = 1.0;
  for (long n = 0; n < m; ++n) {
    total += term;
    term *= q;
  }
  s.values[0] = 1.0 / total;
  for (long n = 1; n < m; ++n) {
    const auto i = static_cast<size_t>(n);
    s.values[i] = q * s.values[i - 1];
  }
  return s;
}

ResonanceReport resonance_report(double eta, double xi, double beta_omega0, long bound,
                                 double tol) {
  ResonanceReport r;
  r.eta = eta;
  r.xi = xi;
  r.bound = bound;
  r.mode = ResonanceMode::Float;
  r.resonances = find_resonances(eta, xi, bound, tol);
  r.classification = classify(r.resonances);
  r.partition = sector_partition(r.resonances, bound);
  r.quasi = find_quasi_resonances(eta, xi, beta_omega0, 1.0, bound);
  return r;
}

ResonanceReport resonance_report_exact(Rational eta, Rational xi, double beta_omega0, long bound) {
  ResonanceReport r;
  r.eta = eta.value();
  r.xi = xi.value();
  r.bound = bound;
  r.mode = ResonanceMode::Exact;
  r.resonances = find_resonances_exact(eta, xi, bound);
  r.classification = classify(r.resonances);
  r.partition = sector_partition(r.resonances, bound);
  r.quasi = find_quasi_resonances(r.eta, r.xi, beta_omega0, 1.0, bound);
  // Drop any quasi site that the exact search marks as resonant.
  std::vector<long> sites;
  std::vector<double> values;
  for (size_t i = 0; i < r.quasi.sites.size(); ++i) {
    if (std::binary_search(r.resonances.begin(), r.resonances.end(), r.quasi.sites[i])) continue;
    sites.push_back(r.quasi.sites[i]);
    values.push_back(r.quasi.d_values[i]);
  }
  r.quasi.sites = std::move(sites);
  r.quasi.d_values = std::move(values);
  r.quasi.fit = fit_quasi_decay(r.quasi.d_values);
  return r;
}

}  // namespace maser
