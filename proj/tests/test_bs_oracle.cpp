#include <cmath>
#include <random>

#include "annpricer/bs_oracle.hpp"
#include "annpricer/errors.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace annp;
using annp::testing::close_rel;
using annp::testing::draw_sample;
using annp::testing::draw_invertible;

// Reference values below were computed with mpmath at 40 significant digits.

TEST_CASE("norm_cdf reference values and symmetry") {
  CHECK(norm_cdf(0.0) == 0.5);
  CHECK(norm_cdf(1.959964) == doctest::Approx(0.975000000903557595697).epsilon(1e-15));
  CHECK(norm_cdf(-3.0) == doctest::Approx(0.001349898031630094526651814767594977).epsilon(1e-14));
  CHECK(std::abs(norm_cdf(-3.0) - (1.0 - norm_cdf(3.0))) < 1e-15);
  CHECK(norm_cdf(-8.0) == doctest::Approx(6.220960574271784123515995e-16).epsilon(1e-13));
  CHECK(norm_cdf(0.3) == doctest::Approx(0.6179114221889526373065).epsilon(1e-15));
  CHECK(norm_cdf(-37.0) == doctest::Approx(5.725571222524576822683e-300).epsilon(1e-12));
}

TEST_CASE("norm_cdf is monotone on a grid") {
  double prev = norm_cdf(-10.0);
  for (double x = -10.0 + 0.01; x <= 10.0; x += 0.01) {
    const double cur = norm_cdf(x);
    CHECK(cur >= prev);
    prev = cur;
  }
}

TEST_CASE("norm_cdf_inv") {
  CHECK(norm_cdf_inv(0.5) == 0.0);
  CHECK(norm_cdf_inv(0.975) == doctest::Approx(1.959963984540054235524).epsilon(1e-14));
  CHECK(norm_cdf_inv(1e-10) == doctest::Approx(-6.361340902404056204695).epsilon(1e-14));
  for (double p : {1e-300, 1e-12, 0.001, 0.2, 0.37, 0.5, 0.8, 0.999, 1.0 - 1e-9}) {
    CHECK(std::abs(norm_cdf(norm_cdf_inv(p)) - p) <= 1e-10 * std::max(p, 1e-10));
    if (p > 1e-15) CHECK(norm_cdf_inv(p) == doctest::Approx(-norm_cdf_inv(1.0 - p)).epsilon(1e-6));
  }
  CHECK(norm_cdf_inv(0.3) == doctest::Approx(-norm_cdf_inv(0.7)).epsilon(1e-15));
  CHECK_THROWS_AS(norm_cdf_inv(0.0), DomainError);
  CHECK_THROWS_AS(norm_cdf_inv(1.0), DomainError);
  CHECK_THROWS_AS(norm_cdf_inv(-0.2), DomainError);
}

TEST_CASE("bs_call reference and limits") {
  CHECK(bs_call(100, 100, 1, 0.02, 0.01, 0.2) == doctest::Approx(8.349405767096769905).epsilon(1e-13));
  CHECK(bs_call(120, 100, 1, 0, 0, 1e-14) == 20.0);
  CHECK(bs_call(120, 100, 1, 0, 0, 1e-6) == doctest::Approx(20.0).epsilon(1e-12));
  for (double sigma : {0.05, 0.2, 0.9}) {
    CHECK(bs_call(100, 100, 1, 0, 0, sigma) == doctest::Approx(bs_put(100, 100, 1, 0, 0, sigma)).epsilon(1e-13));
  }
  CHECK_THROWS_AS(bs_call(0, 100, 1, 0, 0, 0.2), DomainError);
  CHECK_THROWS_AS(bs_call(100, -1, 1, 0, 0, 0.2), DomainError);
  CHECK_THROWS_AS(bs_call(100, 100, 0, 0, 0, 0.2), DomainError);
  CHECK_THROWS_AS(bs_call(100, 100, 1, 0, 0, 0), DomainError);
}

TEST_CASE("put-call parity and call bounds on random draws") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    const auto s = draw_sample(rng);
    const double p = bs_put(s.S, s.K, s.T, s.r, s.q, s.sigma);
    const double fwd = s.S * std::exp(-s.q * s.T) - s.K * std::exp(-s.r * s.T);
    CHECK(std::abs(s.C - p - fwd) <= 1e-12 * std::max(s.S, s.K));
    CHECK(s.C >= call_lower_bound(s.S, s.K, s.T, s.r, s.q) - 1e-13 * s.S);
    CHECK(s.C <= call_upper_bound(s.S, s.T, s.q));
  }
}

TEST_CASE("call price strictly monotone in sigma, K and (q = 0) T") {
  for (double K = 60; K < 140; K += 1.0) {
    CHECK(bs_call(100, K + 1.0, 1, 0.01, 0.0, 0.3) < bs_call(100, K, 1, 0.01, 0.0, 0.3));
  }
  for (double s = 0.05; s < 1.0; s += 0.01) {
    CHECK(bs_call(100, 105, 1, 0.01, 0.01, s + 0.01) > bs_call(100, 105, 1, 0.01, 0.01, s));
  }
  for (double T = 0.05; T < 3.0; T += 0.05) {
    CHECK(bs_call(100, 70, T + 0.05, 0.03, 0.0, 0.2) > bs_call(100, 70, T, 0.03, 0.0, 0.2));
  }
}

TEST_CASE("analytic Greeks match central finite differences") {
  std::mt19937_64 rng(11);
  const double rel = 1e-6;
  for (int i = 0; i < 1000; ++i) {
    const auto s = draw_sample(rng);
    const auto g = bs_greeks(s.S, s.K, s.T, s.r, s.q, s.sigma);
    auto price = [&](double S, double K, double T, double sig) { return bs_call(S, K, T, s.r, s.q, sig); };

    // Five-point stencils: truncation O(h^4) and round-off eps * C / h both stay near 1e-12.
    auto fd = [](auto&& f, double x, double h) {
      return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
    };
    const double vega_fd = fd([&](double v) { return price(s.S, s.K, s.T, v); }, s.sigma, 1e-3 * s.sigma);
    const double dk_fd = fd([&](double k) { return price(s.S, k, s.T, s.sigma); }, s.K, 1e-3 * s.K);
    const double dt_fd = fd([&](double t) { return price(s.S, s.K, t, s.sigma); }, s.T, 1e-3 * s.T);
    const double delta_fd = fd([&](double x) { return price(x, s.K, s.T, s.sigma); }, s.S, 1e-3 * s.S);
    // Second strike derivative: stencil on the analytic first derivative.
    const double d2k_fd =
        fd([&](double k) { return bs_greeks(s.S, k, s.T, s.r, s.q, s.sigma).dCdK; }, s.K, 1e-3 * s.K);

    CHECK(g.vega > 0.0);
    CHECK(g.dCdK < 0.0);
    CHECK(g.d2CdK2 > 0.0);
    // Absolute floor at the finite-difference round-off level (~eps * C / h).
    CHECK(close_rel(g.vega, vega_fd, rel, 1e-3));
    CHECK(close_rel(g.dCdK, dk_fd, rel, 1e-3));
    CHECK(close_rel(g.dCdT, dt_fd, rel, 1e-3));
    CHECK(close_rel(g.delta, delta_fd, rel, 1e-3));
    CHECK(close_rel(g.d2CdK2, d2k_fd, rel, 1e-3));
  }
}

TEST_CASE("vega is bell shaped in moneyness") {
  // S in [50,150], K=100, r=0.02, q=0.01, T=1.
  double vmax = 0.0, s_at_max = 0.0;
  for (double S = 50; S <= 150; S += 0.5) {
    const double v = bs_greeks(S, 100, 1, 0.02, 0.01, 0.2).vega;
    if (v > vmax) {
      vmax = v;
      s_at_max = S;
    }
  }
  CHECK(s_at_max > 90);
  CHECK(s_at_max < 110);
  CHECK(bs_greeks(50, 100, 1, 0.02, 0.01, 0.2).vega < 0.01 * vmax);
  CHECK(bs_greeks(150, 100, 1, 0.02, 0.01, 0.01).vega < 1e-12);
  CHECK(bs_greeks(50, 100, 1, 0.02, 0.01, 0.01).vega < 1e-12);
}

TEST_CASE("strike density integrates to the discount factor") {
  const double S = 100, T = 1.0, r = 0.03, q = 0.01, sigma = 0.25;
  // Composite Simpson over K in [1e-4, 1000].
  const int n = 200000;
  const double a = 1e-4, b = 1000.0, h = (b - a) / n;
  double sum = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    sum += w * bs_greeks(S, a + i * h, T, r, q, sigma).d2CdK2;
  }
  CHECK(sum * h / 3.0 == doctest::Approx(std::exp(-r * T)).epsilon(1e-8));
}

TEST_CASE("dCdK tends to minus the discount factor for tiny strikes") {
  const auto g = bs_greeks(100, 1e-6, 2.0, 0.04, 0.01, 0.3);
  CHECK(g.dCdK == doctest::Approx(-std::exp(-0.08)).epsilon(1e-12));
}

TEST_CASE("implied_vol round trip and failure modes") {
  CHECK(implied_vol(100, 100, 1, 0.02, 0.01, bs_call(100, 100, 1, 0.02, 0.01, 0.2)) ==
        doctest::Approx(0.2).epsilon(1e-10));

  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const auto s = draw_invertible(rng);
    const double iv = implied_vol(s.S, s.K, s.T, s.r, s.q, s.C);
    CHECK(std::abs(bs_call(s.S, s.K, s.T, s.r, s.q, iv) - s.C) <= 1e-10);
    CHECK(std::abs(iv - s.sigma) <= 1e-8);
  }

  // Just above the intrinsic value: a tiny volatility, located by plain bisection here.
  const double lb = call_lower_bound(110, 100, 1, 0.01, 0.0);
  const double target = lb + 1e-12;
  const double iv = implied_vol(110, 100, 1, 0.01, 0.0, target);
  double lo = 1e-6, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (bs_call(110, 100, 1, 0.01, 0.0, mid) < target ? lo : hi) = mid;
  }
  CHECK(iv < 0.1);
  CHECK(std::abs(bs_call(110, 100, 1, 0.01, 0.0, iv) - target) <= 1e-10);
  CHECK(std::abs(bs_call(110, 100, 1, 0.01, 0.0, lo) - target) <= 1e-10);

  CHECK_THROWS_AS(implied_vol(100, 100, 1, 0.0, 0.0, 101.0), NoSolutionError);
  CHECK_THROWS_AS(implied_vol(100, 100, 1, 0.0, 0.01, 100.0 * std::exp(-0.01)), NoSolutionError);
  CHECK_THROWS_AS(implied_vol(120, 100, 1, 0.0, 0.0, 19.0), NoSolutionError);
  const long before = implied_vol_call_count();
  (void)implied_vol(100, 100, 1, 0, 0, 5.0);
  CHECK(implied_vol_call_count() == before + 1);
}
