#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>

#include "maser/resonance.hpp"
#include "maser/spectral.hpp"
#include "support.hpp"

using namespace maser;
using maser::testing::kGolden;
using maser::testing::model;

namespace {

SymTridiagonal random_tridiagonal(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SymTridiagonal t;
  t.diag.resize(n);
  t.off.resize(n - 1);
  for (auto& v : t.diag) v = u(rng);
  for (auto& v : t.off) v = u(rng);
  return t;
}

Eigen::MatrixXd dense(const SymTridiagonal& t) {
  const int n = t.size();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = t.diag[i];
  for (int i = 0; i + 1 < n; ++i) m(i, i + 1) = m(i + 1, i) = t.off[i];
  return m;
}

}  // namespace

TEST_CASE("diagonal matrix spectrum is its sorted diagonal") {
  SymTridiagonal t;
  t.diag = {3.0, -1.0, 0.5, 2.0};
  t.off = {0.0, 0.0, 0.0};
  const auto ev = tridiagonal_spectrum(t);
  const std::vector<double> expected{-1.0, 0.5, 2.0, 3.0};
  for (size_t i = 0; i < ev.size(); ++i) CHECK(std::abs(ev[i] - expected[i]) <= 1e-12);
}

TEST_CASE("constant band has the Dirichlet cosine spectrum") {
  const int n = 300;
  SymTridiagonal t;
  t.diag.assign(n, 2.0);
  t.off.assign(n - 1, -1.0);
  const auto ev = tridiagonal_spectrum(t, 1e-12, 3);
  for (int k = 1; k <= n; ++k) {
    const double exact = 2.0 - 2.0 * std::cos(k * std::numbers::pi / (n + 1));
    CHECK(std::abs(ev[k - 1] - exact) <= 1e-11);
  }
}

TEST_CASE("Sturm counts and bisection against a dense solver") {
  const SymTridiagonal t = random_tridiagonal(200, 42);
  const auto [lo, hi] = t.gershgorin();
  CHECK(sturm_count(t, lo - 1.0) == 0);
  CHECK(sturm_count(t, hi + 1.0) == t.size());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense(t));
  const auto ev = tridiagonal_spectrum(t);
  REQUIRE(ev.size() == 200);
  for (int i = 0; i < 200; ++i) CHECK(std::abs(ev[i] - es.eigenvalues()(i)) <= 1e-11);
}

TEST_CASE("inverse iteration") {
  const SymTridiagonal t = random_tridiagonal(150, 7);
  const double lambda = tridiagonal_eigenvalue(t, 75);
  const EigenPair e = inverse_iteration(t, lambda);
  CHECK(e.converged);
  CHECK(e.residual <= 1e-10);
  CHECK(std::abs(e.value - lambda) <= 1e-11);
  double n2 = 0.0;
  for (double v : e.vector) n2 += v * v;
  CHECK(std::abs(n2 - 1.0) <= 1e-12);
}

TEST_CASE("asymmetric operators are rejected") {
  SectorOperator op = sector_operator_trace(0, model(0.1, 0.7, 1.0, 10));
  CHECK_THROWS_AS(SymTridiagonal::from_sector(op), ValidationError);
  SectorOperator c = sector_operator_hs(2, model(0.1, 0.7, 1.0, 10));
  CHECK_THROWS_AS(SymTridiagonal::from_sector(c), ValidationError);
}

TEST_CASE("l0 bounds") {
  const SpectralBounds b = l0_bounds(2.0, 1.0);
  CHECK(b.lower == doctest::Approx(-0.648054273663885).epsilon(1e-13));
  CHECK(b.upper == 1.0);
  CHECK(l0_bounds(1e-3, 1.0).lower > -1.0);
  CHECK(l0_bounds(1e-3, 1.0).lower < -0.999999);
  CHECK(l0_bounds(80.0, 1.0).lower < 0.0);
  CHECK(l0_bounds(80.0, 1.0).lower > -1e-15);
  CHECK_THROWS_AS(l0_bounds(0.0, 1.0), ValidationError);
}

TEST_CASE("L0 spectrum stays inside its bounds") {
  const ModelParams p = model(0.3, 1.7, 1.0, 2000);
  const SpectrumReport r = l0_spectrum(p);
  REQUIRE(r.eigenvalues.size() == 2001);
  const SpectralBounds b = l0_bounds(1.0, 1.0);
  const SymTridiagonal t =
      SymTridiagonal::from_sector(sector_operator_hs(0, p));
  CHECK(sturm_count(t, b.lower - 1e-10) == 0);
  CHECK(r.eigenvalues.front() >= b.lower - 1e-10);
  CHECK(r.eigenvalues.back() <= 1.0 + 1e-10);
}

TEST_CASE("top eigenpair of L0") {
  SUBCASE("eigenvector 2^{-n} at beta omega0 = ln 4") {
    const ModelParams p = model(0.1, std::numbers::pi / 4, std::log(4.0), 300);
    const TopEigenpairCheck c = top_eigenpair_check(p);
    CHECK(std::abs(c.lambda_max - 1.0) <= 1e-10);
    CHECK(c.cosine >= 1.0 - 1e-8);
    CHECK(c.residual <= 1e-10);
    CHECK(c.simple);
    CHECK_FALSE(c.resonant);
    for (int n = 1; n < 20; ++n) CHECK(c.eigenvector[n] / c.eigenvector[n - 1] == doctest::Approx(0.5).epsilon(1e-8));
  }
  SUBCASE("fully resonant: one fixed vector per closed sector") {
    // Squares 1, 4, 9 and 16 = n_max + 1 close four sectors.
    const TopEigenpairCheck c = top_eigenpair_check(model(0.0, 1.0, 1.0, 15));
    CHECK(c.resonant);
    CHECK(c.multiplicity == 4);
    const TopEigenpairCheck c2 = top_eigenpair_check(model(0.0, 1.0, 1.0, 35));
    CHECK(c2.multiplicity == 6);
  }
  SUBCASE("lambda2 < 1 at every truncation for non-resonant parameters") {
    for (int n : {5, 20, 80, 320}) {
      const TopEigenpairCheck c = top_eigenpair_check(model(0.0, 1.0 / kGolden, 1.0, n));
      CHECK(c.lambda2 < c.lambda_max);
      CHECK(c.simple);
    }
  }
}

TEST_CASE("embedding maps the L0 top vector to the trace fixed vector") {
  const ModelParams p = model(0.1, std::numbers::pi / 4, 1.3, 200);
  const TopEigenpairCheck c = top_eigenpair_check(p);
  // Phi^{-1} on band 0 divides by e^{-bw n / 2} up to normalization.
  std::vector<double> mapped(c.eigenvector.size());
  for (size_t n = 0; n < mapped.size(); ++n) mapped[n] = c.eigenvector[n] * std::exp(-p.beta_omega0 * n / 2.0);
  const DiagonalState th = thermal_state(p);
  const double ratio0 = mapped[0] / th.values[0];
  for (size_t n = 0; n < 40; ++n) CHECK(std::abs(mapped[n] / th.values[n] / ratio0 - 1.0) <= 1e-10);
}

TEST_CASE("gap scan") {
  const double xi = 1.0 / (kGolden * kGolden);
  const ModelParams base = model(0.0, xi, 1.0, 2);
  const QuasiResonances q = find_quasi_resonances(0.0, xi, 1.0, 1.0, 400);
  REQUIRE(q.sites.size() >= 4);

  SUBCASE("below the first quasi-resonance the gap is order one") {
    const std::vector<int> ns{2};
    CHECK(gap_scan(base, ns)[0].gap > 0.1);
  }
  SUBCASE("gap is positive and non-increasing") {
    std::vector<int> ns;
    for (int n = 2; n <= 120; ++n) ns.push_back(n);
    const auto rows = gap_scan(base, ns, {}, 2);
    for (size_t i = 0; i < rows.size(); ++i) {
      CHECK(rows[i].gap > 0.0);
      if (i > 0) CHECK(rows[i].gap <= rows[i - 1].gap + 1e-12);
    }
  }
  SUBCASE("crossing m_k raises lambda2") {
    for (size_t k = 0; k < 4; ++k) {
      const int m = static_cast<int>(q.sites[k]);
      const std::vector<int> ns{m - 1, m + 1};
      const auto rows = gap_scan(base, ns);
      CHECK(rows[1].lambda2 > rows[0].lambda2);
    }
  }
  SUBCASE("D0-modified operator has a degenerate eigenvalue 1") {
    const int n_max = static_cast<int>(q.sites[3]) - 1;
    const std::vector<int> ns{n_max};
    const auto rows = gap_scan(base, ns, q.sites);
    CHECK(std::abs(rows[0].lambda2 - 1.0) <= 1e-12);
    CHECK(rows[0].multiplicity_at_one == 4);
  }
}

TEST_CASE("peripheral probe") {
  SUBCASE("HS sectors d != 0 are strict contractions on a truncation") {
    const ModelParams p = model(0.1, std::numbers::pi / 4, 1.0, 200);
    for (int d : {1, 3}) {
      const PeripheralProbe r = peripheral_probe(sector_operator_hs(d, p), 10000, 1e-6, 5);
      CHECK(r.radius_estimate <= 1.0 + 1e-8);
      CHECK(r.radius_high <= r.norm_bound + 1e-12);
      CHECK(r.final_norm_ratio < 1e-3);
      CHECK_FALSE(r.peripheral_eigenvalue);
    }
  }
  SUBCASE("uncoupled trace picture is a pure phase") {
    const ModelParams p = model(0.2, 0.0, 1.0, 50, 0.9);
    const SectorOperator op = sector_operator_trace(2, p);
    for (size_t i = 0; i < op.diag.size(); ++i) {
      CHECK(std::abs(std::abs(op.diag[i]) - 1.0) <= 1e-15);
      CHECK(std::abs(op.diag[i] - std::polar(1.0, 0.9 * 2)) <= 1e-14);
    }
    const PeripheralProbe r = peripheral_probe(op, 200, 1e-10, 3);
    CHECK(std::abs(r.radius_estimate - 1.0) <= 1e-12);
    CHECK(std::abs(r.final_norm_ratio - 1.0) <= 1e-10);
  }
  SUBCASE("nilpotent input") {
    SectorOperator z;
    z.diag.assign(3, cplx{});
    z.lower.assign(2, cplx{});
    z.upper.assign(2, cplx{});
    const PeripheralProbe r = peripheral_probe(z, 100);
    CHECK(r.radius_estimate == 0.0);
  }
}
