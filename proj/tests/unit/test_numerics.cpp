#include <array>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "peertreat/errors.hpp"
#include "peertreat/numerics.hpp"
#include "support/oracles.hpp"

using namespace peertreat;

TEST_SUITE("numerics") {

TEST_CASE("univariate normal matches erfc and inverts") {
  for (double x = -8.0; x <= 8.0; x += 0.37) {
    CHECK(std_normal_cdf(x) == doctest::Approx(oracle::phi_erfc(x)).epsilon(1e-14));
    CHECK(std_normal_pdf(x) == doctest::Approx(oracle::normal_density(x)).epsilon(1e-14));
  }
  for (double p : {1e-12, 1e-6, 0.01, 0.3, 0.5, 0.77, 0.999, 1.0 - 1e-9}) {
    CHECK(std_normal_cdf(std_normal_quantile(p)) == doctest::Approx(p).epsilon(1e-12));
  }
}

TEST_CASE("bivariate CDF at the origin has a closed form") {
  for (double r = -0.99; r < 0.995; r += 0.03) {
    CHECK(std::abs(bivariate_normal_cdf(0.0, 0.0, Correlation(r)) - oracle::bivariate_cdf_origin(r)) < 1e-14);
  }
}

TEST_CASE("bivariate CDF agrees with quadrature, including |rho| = 0.95") {
  RandomStream rng(11);
  double worst = 0.0;
  for (int k = 0; k < 120; ++k) {
    const double a = -4.0 + 8.0 * rng.uniform();
    const double b = -4.0 + 8.0 * rng.uniform();
    const double r = (k % 4 == 0) ? 0.95 : (k % 4 == 1) ? -0.95 : -0.99 + 1.98 * rng.uniform();
    worst = std::max(worst, std::abs(bivariate_normal_cdf(a, b, Correlation(r)) - oracle::bivariate_cdf_1d(a, b, r)));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("bivariate CDF keeps relative accuracy in the far tails") {
  RandomStream rng(12);
  double worst = 0.0;
  int tested = 0;
  for (int k = 0; k < 4000 && tested < 150; ++k) {
    const double a = -9.0 + 12.0 * rng.uniform();
    const double b = -9.0 + 12.0 * rng.uniform();
    const double r = -0.99 + 1.98 * rng.uniform();
    const double p = bivariate_normal_cdf(a, b, Correlation(r));
    if (!(p < 1e-9 && p > 1e-280)) continue;
    ++tested;
    worst = std::max(worst, std::abs(p / oracle::bivariate_cdf_1d(a, b, r) - 1.0));
  }
  CHECK(tested == 150);
  CHECK(worst < 1e-9);
}

TEST_CASE("bivariate CDF limits and symmetry") {
  const Correlation r(0.4);
  CHECK(bivariate_normal_cdf(-40.0, 1.0, r) == doctest::Approx(0.0));
  CHECK(bivariate_normal_cdf(40.0, 1.0, r) == doctest::Approx(std_normal_cdf(1.0)).epsilon(1e-14));
  CHECK(bivariate_normal_cdf(0.3, -1.1, r) == doctest::Approx(bivariate_normal_cdf(-1.1, 0.3, r)).epsilon(1e-15));
  CHECK(bivariate_normal_cdf(0.7, 0.2, Correlation(0.0)) ==
        doctest::Approx(std_normal_cdf(0.7) * std_normal_cdf(0.2)).epsilon(1e-15));
}

TEST_CASE("bivariate partial derivatives match finite differences") {
  const double h = 1e-6;
  for (auto [a, b, r] : std::vector<std::array<double, 3>>{{0.3, -0.4, 0.5}, {-1.2, 0.8, -0.7}, {2.0, 1.5, 0.94}}) {
    const double fa = (bivariate_normal_cdf(a + h, b, Correlation(r)) - bivariate_normal_cdf(a - h, b, Correlation(r))) / (2 * h);
    const double fr = (bivariate_normal_cdf(a, b, Correlation(r + h)) - bivariate_normal_cdf(a, b, Correlation(r - h))) / (2 * h);
    CHECK(bivariate_normal_cdf_da(a, b, r) == doctest::Approx(fa).epsilon(1e-7));
    CHECK(bivariate_normal_pdf(a, b, r) == doctest::Approx(fr).epsilon(1e-7));
  }
}

TEST_CASE("correlation outside (-1, 1) is rejected") {
  CHECK_THROWS_AS(Correlation(1.0), ValidationError);
  CHECK_THROWS_AS(Correlation(-1.2), ValidationError);
  CHECK_THROWS_AS(Correlation(std::nan("")), ValidationError);
}

TEST_CASE("random streams are reproducible and correlated pairs have the target moments") {
  RandomStream a(5), b(5);
  for (int k = 0; k < 100; ++k) CHECK(a.normal() == b.normal());
  CHECK(RandomStream::derive_seed(1, 2) != RandomStream::derive_seed(1, 3));
  CHECK(RandomStream::derive_seed(1, 2) == RandomStream::derive_seed(1, 2));

  RandomStream rng(99);
  const int m = 200000;
  double su = 0, sv = 0, suu = 0, svv = 0, suv = 0;
  for (int k = 0; k < m; ++k) {
    const auto [u, v] = sample_correlated_normal_pair(Correlation(-0.6), rng);
    su += u; sv += v; suu += u * u; svv += v * v; suv += u * v;
  }
  CHECK(std::abs(su / m) < 0.01);
  CHECK(std::abs(sv / m) < 0.01);
  CHECK(suu / m == doctest::Approx(1.0).epsilon(0.02));
  CHECK(svv / m == doctest::Approx(1.0).epsilon(0.02));
  CHECK(suv / m == doctest::Approx(-0.6).epsilon(0.03));
}

}
