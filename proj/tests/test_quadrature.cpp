#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mfwsn/quadrature.hpp"

using namespace mfwsn;

TEST_CASE("polynomials are integrated exactly") {
  const double r = integrate_adaptive([](double x) { return 3.0 * x * x; }, 0.0, 2.0);
  CHECK(r == doctest::Approx(8.0).epsilon(1e-12));
}

TEST_CASE("gaussian over a wide interval") {
  // integral of exp(-x^2/2)/sqrt(2 pi) over [-8, 8] ~ 1
  const double inv = 1.0 / std::sqrt(2.0 * M_PI);
  const double r = integrate_adaptive(
      [inv](double x) { return inv * std::exp(-0.5 * x * x); }, -8.0, 8.0, 1e-12);
  CHECK(std::abs(r - 1.0) < 1e-11);
}

TEST_CASE("sharply peaked integrand still converges") {
  // integral of 2000 x exp(-1000 x^2) over [0, 1] = 1 - exp(-1000)
  auto f = [](double x) { return 2000.0 * x * std::exp(-1000.0 * x * x); };
  auto r = integrate_adaptive(f, {0.0, 0.01, 0.1, 0.5, 1.0}, 1e-10);
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("impossible tolerance raises with the achieved estimate") {
  auto f = [](double x) { return std::sqrt(std::abs(x)); };
  CHECK_THROWS_AS(integrate_adaptive(f, {0.0, 1.0}, 1e-30, 8), NumericError);
}
