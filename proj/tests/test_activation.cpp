#include <cmath>

#include "annpricer/activation.hpp"
#include "annpricer/errors.hpp"
#include "doctest.h"

using namespace annp;


TEST_CASE("MELU closed form at z = 1") {
  const double alpha = 0.49;
  const double a = 1 - 2 * alpha, b = -2 + 1 / alpha;
  CHECK(melu(1.0, alpha) == doctest::Approx((0.5 + a) / (1 + b)).epsilon(1e-15));
  CHECK(melu(1.0, alpha) == doctest::Approx(0.4996078431372549013).epsilon(1e-15));
  CHECK(melu(0.0, alpha) == 0.0);
}

TEST_CASE("MELU has R'(0) = R''(0) = alpha from both sides") {
  for (double alpha : {0.49, 0.3, 0.1}) {
    const auto act = Activation::melu(alpha);
    const auto at0 = act.eval(0.0);
    CHECK(at0.d1 == doctest::Approx(alpha).epsilon(1e-12));
    CHECK(at0.d2 == doctest::Approx(alpha).epsilon(1e-12));
    const auto right = act.eval(1e-12);
    CHECK(std::abs(right.f - at0.f) < 1e-9);
    CHECK(std::abs(right.d1 - alpha) < 1e-9);
    CHECK(std::abs(right.d2 - alpha) < 1e-6);
    // Finite differences of the closed forms from each side.
    const double h = 1e-9;
    const double left_d1 = (melu(0.0, alpha) - melu(-h, alpha)) / h;
    const double right_d1 = (melu(h, alpha) - melu(0.0, alpha)) / h;
    CHECK(std::abs(left_d1 - right_d1) < 1e-6);
    const double left_d2 = (melu_d1(0.0, alpha) - melu_d1(-h, alpha)) / h;
    const double right_d2 = (melu_d1(h, alpha) - melu_d1(0.0, alpha)) / h;
    CHECK(std::abs(left_d2 - right_d2) < 1e-6);
    CHECK(std::abs(left_d2 - alpha) < 1e-6);
  }
}

TEST_CASE("MELU stays above -0.5 and tends to -alpha") {
  for (double z = -20.0; z <= 20.0; z += 0.001) CHECK(melu(z, 0.49) > -0.5);
  CHECK(melu(-40.0, 0.49) == doctest::Approx(-0.49).epsilon(1e-12));
}

TEST_CASE("MELU rejects alpha outside (0, 0.5)") {
  CHECK_THROWS_AS(Activation::melu(0.5), ConfigError);
  CHECK_THROWS_AS(Activation::melu(0.0), ConfigError);
  CHECK_THROWS_AS(Activation::melu(-0.1), ConfigError);
  CHECK_THROWS_AS(melu(1.0, 0.7), ConfigError);
}

TEST_CASE("analytic derivatives match finite differences away from breakpoints") {
  const Activation acts[] = {Activation::melu(0.49), Activation::melu(0.2), Activation::elu(1.0),
                             Activation::softplus_shift(), Activation::leaky_relu(0.3)};
  for (const auto& a : acts) {
    for (double z : {-7.3, -2.0, -0.4, 0.3, 1.0, 4.5, 25.0}) {
      const double h = 1e-5 * std::max(1.0, std::abs(z));
      const auto j = a.eval(z);
      const auto p = a.eval(z + h), m = a.eval(z - h);
      CHECK(j.d1 == doctest::Approx((p.f - m.f) / (2 * h)).epsilon(1e-7));
      CHECK(j.d2 == doctest::Approx((p.d1 - m.d1) / (2 * h)).epsilon(1e-6));
      CHECK(j.d3 == doctest::Approx((p.d2 - m.d2) / (2 * h)).epsilon(1e-5));
    }
  }
}

TEST_CASE("breakpoint continuity of value, d1 and d2") {
  const double eps = 1e-12;
  // C2: MELU and the smooth softplus; LeakyReLU(1) is the identity.
  for (const auto& a : {Activation::melu(0.49), Activation::softplus_shift(), Activation::leaky_relu(1.0)}) {
    const auto l = a.eval(-eps), r = a.eval(eps);
    CHECK(std::abs(l.f - r.f) < 1e-9);
    CHECK(std::abs(l.d1 - r.d1) < 1e-9);
    CHECK(std::abs(l.d2 - r.d2) < 1e-9);
  }
  // ELU(1) is only C1 at 0: its second derivative jumps from 1 to 0.
  const auto elu = Activation::elu(1.0);
  CHECK(std::abs(elu.eval(-eps).f - elu.eval(eps).f) < 1e-9);
  CHECK(std::abs(elu.eval(-eps).d1 - elu.eval(eps).d1) < 1e-9);
}

TEST_CASE("LeakyReLU with alpha = 1 is the identity") {
  const auto a = Activation::leaky_relu(1.0);
  for (double z : {-1e6, -3.25, -1e-300, 0.0, 1e-300, 2.5, 7e8}) {
    CHECK(a.eval(z).f == z);
    CHECK(a.eval(z).d1 == 1.0);
    CHECK(a.eval(z).d2 == 0.0);
  }
}

TEST_CASE("SoftplusShift is stable and centred") {
  const auto a = Activation::softplus_shift();
  CHECK(a.value(0.0) == doctest::Approx(std::log(2.0) - 0.5).epsilon(1e-15));
  CHECK(a.value(800.0) == doctest::Approx(799.5));
  CHECK(a.value(-800.0) == doctest::Approx(-0.5));
  CHECK(std::isfinite(a.eval(-800.0).d1));
  CHECK(a.eval(800.0).d1 == 1.0);
}

TEST_CASE("tags round trip") {
  for (const auto& a : {Activation::melu(0.49), Activation::elu(), Activation::softplus_shift(), Activation::leaky_relu()}) {
    CHECK(Activation::parse_tag(a.tag()) == a.kind());
  }
  CHECK_THROWS_WITH_AS(Activation::parse_tag("swish"), doctest::Contains("swish"), LoadError);
}
