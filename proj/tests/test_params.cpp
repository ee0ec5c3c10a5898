#include <doctest.h>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "maser/params.hpp"
#include "support.hpp"

using namespace maser;
using maser::testing::model;
using big = boost::multiprecision::cpp_bin_float_50;

namespace {

// 50-digit reference values of C, S, D straight from their definitions.
struct BigCSD {
  double c_re, c_im, s, d;
};

BigCSD big_csd(long n, double eta_d, double xi_d, double bw_d) {
  const big eta = eta_d, xi = xi_d, bw = bw_d;
  const big pi = boost::math::constants::pi<big>();
  const big u = xi * n + eta;
  const big root = sqrt(u);
  const big sinc = u == 0 ? pi : big(sin(pi * root) / root);
  const big z = 1 + exp(-bw);
  BigCSD r{};
  r.c_re = static_cast<double>(cos(pi * root));
  r.c_im = static_cast<double>(sqrt(eta) * sinc);
  r.s = static_cast<double>(sqrt(xi) * sinc);
  r.d = n == 0 ? 0.0 : static_cast<double>(sin(pi * root) * sin(pi * root) * xi * n / u / z);
  return r;
}

}  // namespace

TEST_CASE("dimensionless reduction") {
  PhysicalParams p;
  p.omega = 3.0;
  p.omega0 = 3.0;
  p.tau = 0.5;
  p.lambda = 4.0 * std::numbers::pi;  // lambda tau = 2 pi
  auto r = dimensionless(p);
  CHECK(r.eta == 0.0);
  CHECK(r.xi == doctest::Approx(1.0).epsilon(1e-15));

  p.lambda = 0.0;
  CHECK(dimensionless(p).xi == 0.0);

  // Delta tau = pi, lambda tau = 4 pi.
  p.tau = 1.0;
  p.omega = 1.0;
  p.omega0 = 1.0 + std::numbers::pi;
  p.lambda = 4.0 * std::numbers::pi;
  r = dimensionless(p);
  CHECK(r.eta == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(r.xi == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("parameter validation") {
  PhysicalParams p;
  p.tau = 0.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p.tau = 1.0;
  p.n_max = 1;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p.n_max = 2;
  p.omega = -1.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p.omega = 2.0;
  p.omega0 = 3.0;
  p.beta = 0.5;
  CHECK_NOTHROW(p.validate());
  CHECK(beta_star(p) == doctest::Approx(0.75));
  const ModelParams m = ModelParams::from_physical(p);
  CHECK(m.beta_omega0 == doctest::Approx(1.5));
  CHECK(m.z_beta() > 1.0);
  CHECK(m.z_beta() < 2.0);
  CHECK(m.w_minus() + m.w_plus() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("C function special values") {
  // Resonance: xi n = k^2 gives (-1)^k.
  for (int k = 1; k <= 6; ++k) {
    const cplx c = c_function(k * k, 0.0, 1.0);
    CHECK(c.real() == (k % 2 == 0 ? 1.0 : -1.0));
    CHECK(c.imag() == 0.0);
  }
  CHECK(c_function(0, 0.0, 0.7) == cplx{1.0, 0.0});
  const cplx c = c_function(1, 0.25, 0.0);
  CHECK(std::abs(c - cplx{0.0, 1.0}) < 1e-15);
}

TEST_CASE("S function special values and u = 0 convention") {
  CHECK(s_function(4, 0.0, 1.0) == 0.0);
  CHECK(s_function(3, 1.0, 1.0) == 0.0);  // 3 + 1 = 4
  CHECK(s_function(1, 0.0, 0.25) == doctest::Approx(1.0).epsilon(1e-15));
  // Continuous limit: sin(pi sqrt u) / sqrt u -> pi.
  CHECK(s_function(0, 0.0, 0.64) == doctest::Approx(0.8 * std::numbers::pi).epsilon(1e-15));
}

TEST_CASE("D function special values") {
  CHECK(d_function(0, 0.3, 1.7, 1.0, 1.0) == 0.0);
  CHECK(d_function(9, 0.0, 1.0, 1.0, 1.0) == 0.0);
  CHECK(d_function(1, 0.0, 0.25, std::log(2.0), 1.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  // beta and omega0 only enter through their product.
  CHECK(d_function(5, 0.1, 0.3, 2.0, 0.5) == d_function(5, 0.1, 0.3, 1.0, 1.0));
  const std::vector<long> quasi{3, 10, 24};
  CHECK(d0_function(10, 0.0, 0.4, 1.0, 1.0, quasi) == 0.0);
  CHECK(d0_function(11, 0.0, 0.4, 1.0, 1.0, quasi) == d_function(11, 0.0, 0.4, 1.0, 1.0));
}

TEST_CASE("C, S, D against 50-digit oracle") {
  const double params[][3] = {{0.0, 1.0 / (maser::testing::kGolden * maser::testing::kGolden), 1.0},
                              {0.3, 1.7, 0.5},
                              {0.25, 0.5, 2.0},
                              {0.1, std::numbers::pi / 4, 1.0}};
  const long ns[] = {0, 1, 2, 3, 7, 10, 33, 100, 1000, 12345, 99999, 1000000};
  for (const auto& q : params) {
    for (long n : ns) {
      const BigCSD ref = big_csd(n, q[0], q[1], q[2]);
      const cplx c = c_function(n, q[0], q[1]);
      // Absolute error grows with pi sqrt(xi n + eta) through the rounding of u.
      const double tol = 1e-15 * (1.0 + std::sqrt(q[1] * n + q[0])) * 8;
      CHECK(std::abs(c.real() - ref.c_re) <= tol);
      CHECK(std::abs(c.imag() - ref.c_im) <= tol);
      CHECK(std::abs(s_function(n, q[0], q[1]) - ref.s) <= tol);
      CHECK(std::abs(d_function(n, q[0], q[1], q[2], 1.0) - ref.d) <= tol);
    }
  }
}

TEST_CASE("unitarity identity |C|^2 + n S^2 = 1") {
  const double params[][2] = {{0.0, 1.0}, {0.3, 1.7}, {0.25, 0.5}, {0.0, 0.381966}, {2.0, 1e-3}};
  for (const auto& q : params) {
    double worst = 0.0;
    for (long n = 0; n <= 1000000; n += (n < 1000 ? 1 : 997)) {
      const double s = s_function(n, q[0], q[1]);
      const double v = std::norm(c_function(n, q[0], q[1])) + static_cast<double>(n) * s * s;
      worst = std::max(worst, std::abs(v - 1.0));
    }
    CHECK(worst <= 1e-14);
  }
}

TEST_CASE("D range and D(0)") {
  const double bw = 0.7;
  const double top = 1.0 / (1.0 + std::exp(-bw));
  for (long n = 0; n < 20000; ++n) {
    const double d = d_function(n, 0.2, 0.9, bw, 1.0);
    REQUIRE(d >= 0.0);
    REQUIRE(d <= top * (1 + 1e-15));
  }
  CHECK(d_function(0, 0.0, 5.0, bw, 1.0) == 0.0);
}

TEST_CASE("thermal state") {
  const DiagonalState s = thermal_state(std::log(2.0), 1.0, 2);
  REQUIRE(s.values.size() == 3);
  CHECK(s.values[0] == doctest::Approx(4.0 / 7.0).epsilon(1e-15));
  CHECK(s.values[1] == doctest::Approx(2.0 / 7.0).epsilon(1e-15));
  CHECK(s.values[2] == doctest::Approx(1.0 / 7.0).epsilon(1e-15));

  const DiagonalState g = thermal_state(std::numeric_limits<double>::infinity(), 1.0, 5);
  CHECK(g.values[0] == 1.0);
  for (size_t n = 1; n < g.values.size(); ++n) CHECK(g.values[n] == 0.0);

  // Geometric mean occupation; the tail beyond 200 is e^{-100} at bw = 0.5.
  const double bw = 0.5;
  const DiagonalState t = thermal_state(bw, 1.0, 200);
  CHECK(std::abs(t.sum() - 1.0) <= 1e-12);
  CHECK(std::abs(t.mean() - 1.0 / std::expm1(bw)) <= 1e-12);
  for (size_t n = 1; n < t.values.size(); ++n) CHECK(t.values[n] < t.values[n - 1]);

  // beta_star * omega enters as a product.
  const DiagonalState a = thermal_state(2.0, 0.25, 10);
  const DiagonalState b = thermal_state(model(0, 1, 0.5, 10));
  for (size_t n = 0; n < a.values.size(); ++n) CHECK(a.values[n] == b.values[n]);

  CHECK_THROWS_AS(thermal_state(0.0, 1.0, 10), ValidationError);
  CHECK_THROWS_AS(thermal_state(-1.0, 1.0, 10), ValidationError);
}

TEST_CASE("sin_pi and cos_pi are exact at integers") {
  for (int k = -5; k <= 5; ++k) {
    CHECK(sin_pi(k) == 0.0);
    CHECK(std::abs(cos_pi(k)) == 1.0);
  }
  CHECK(sin_pi(0.5) == 1.0);
  CHECK(sin_pi(1.5) == -1.0);
}
