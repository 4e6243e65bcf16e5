#include <cmath>
#include <vector>

#include "doctest.h"
#include "hlpuf/analytics.hpp"
#include "stat_helpers.hpp"

using namespace hlpuf;
using namespace hlpuf::analytics;
using hlpuf::testing::within_sigmas;

namespace {

// Exact binomial tail from Pascal's triangle in long double, for small q.
long double pascal_tail(int q, int k0, long double s) {
  std::vector<long double> row{1.0L};
  for (int i = 0; i < q; ++i) {
    std::vector<long double> next(row.size() + 1, 0.0L);
    for (std::size_t j = 0; j < row.size(); ++j) {
      next[j] += row[j];
      next[j + 1] += row[j];
    }
    row = std::move(next);
  }
  long double sum = 0.0L;
  for (int k = k0; k <= q; ++k) sum += row[static_cast<std::size_t>(k)] * std::pow(s, k) * std::pow(1.0L - s, q - k);
  return sum;
}

}  // namespace

TEST_CASE("p_guess_bound") {
  CHECK(p_guess_bound(0.5).value == doctest::Approx(0.5 + 1.0 / (2.0 * std::sqrt(2.0))).epsilon(1e-12));
  CHECK(p_guess_bound(0.5).value == doctest::Approx(0.853553).epsilon(1e-6));
  CHECK(p_guess_bound(1.0).value == 1.0);
  CHECK(p_guess_bound(1.0).raw == doctest::Approx(2.0));
  CHECK(p_guess_bound(0.6).value == 1.0);
  CHECK(p_guess_bound(0.6).raw == doctest::Approx(1.03267).epsilon(1e-5));
  CHECK_THROWS_AS(p_guess_bound(0.4), BoundError);
}

TEST_CASE("p_extract_bound") {
  CHECK(binomial_tail(10, 0.2, 0.5) == doctest::Approx(56.0 / 1024.0).epsilon(1e-13));
  CHECK(static_cast<double>(pascal_tail(10, 8, 0.5L)) == doctest::Approx(56.0 / 1024.0).epsilon(1e-15));
  // per-response 0.5 from p_guess^(2m) with m = 1.
  CHECK(p_extract_bound(10, 0.2, 1, std::sqrt(0.5)) == doctest::Approx(0.0546875).epsilon(1e-12));
  CHECK(p_extract_bound(25, 1.0, 3, 0.7) == 1.0);
  CHECK(p_extract_bound(1, 0.0, 4, 0.8) == doctest::Approx(std::pow(0.8, 8)).epsilon(1e-12));

  SUBCASE("agrees with exact enumeration") {
    for (int q : {1, 5, 10, 37, 60}) {
      for (double eps : {0.0, 0.1, 0.2, 0.5}) {
        for (double s : {0.05, 0.3, 0.5, 0.9}) {
          const int k0 = static_cast<int>(std::ceil((1.0 - eps) * q - 1e-9));
          CHECK(binomial_tail(q, eps, s) == doctest::Approx(static_cast<double>(pascal_tail(q, k0, s))).epsilon(1e-10));
        }
      }
    }
  }
  SUBCASE("monotone and bounded") {
    for (int m : {1, 8, 64, 128}) {
      double prev = 0.0;
      for (double eps = 0.0; eps <= 1.0; eps += 0.05) {
        const double v = p_extract_bound(1000000, eps, m, 0.999);
        CHECK(v >= prev - 1e-15);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        prev = v;
      }
      double prev_g = 0.0;
      for (double g = 0.5; g <= 1.0; g += 0.05) {
        const double v = p_extract_bound(100, 0.2, m, g);
        CHECK(v >= prev_g - 1e-15);
        prev_g = v;
      }
    }
  }
  CHECK_THROWS_AS(binomial_tail(10, 1.5, 0.5), BoundError);
}

TEST_CASE("forge, reuse and min-entropy bounds") {
  CHECK(forge_bound(1.0, 0.3) == 0.3);
  CHECK(forge_bound(0.0, 0.3) == 0.0);
  CHECK(forge_bound(0.0546875, 0.9) == doctest::Approx(0.04921875).epsilon(1e-15));

  CHECK(reuse_bound(0, 7, 0.0).value == 0.0);
  CHECK(reuse_bound(1, 10, 0.0).value == doctest::Approx(1.0 / 1024.0));
  CHECK(reuse_bound(3, 4, 0.01).value == doctest::Approx(0.1975));
  CHECK(reuse_bound(40, 2, 0.0).value == 1.0);
  CHECK(reuse_bound(40, 2, 0.0).raw == doctest::Approx(10.0));

  CHECK(minentropy_bound(12, 0.0, 0.0) == 12.0);
  CHECK(minentropy_bound(12, 0.0, 0.5) == doctest::Approx(0.0).scale(1.0));
  // h(0.01) = 0.0807931 by hand: 0.01*6.643856 + 0.99*0.0144996.
  CHECK(minentropy_bound(10, 0.01, 0.0) == doctest::Approx(9.192).epsilon(1e-4));
  double prev = 1e9;
  for (double z = 0.0; z <= 0.5; z += 0.05) {
    const double v = minentropy_bound(8, z, 0.1);
    CHECK(v < prev);
    prev = v;
  }
  CHECK(minentropy_bound(8, 0.1, 0.2) < minentropy_bound(8, 0.1, 0.1));
}

TEST_CASE("pextract_curve") {
  const std::vector<double> eps{0.0, 0.1, 0.2, 0.3};
  const std::vector<long> q{10, 20, 50};
  const auto curve = pextract_curve(eps, q, 2, 0.5);
  REQUIRE(curve.size() == 12);
  const double pg = p_guess_bound(0.5).value;
  for (std::size_t qi = 0; qi < q.size(); ++qi) {
    for (std::size_t e = 1; e < eps.size(); ++e) {
      CHECK(curve[e * q.size() + qi].value >= curve[(e - 1) * q.size() + qi].value);
    }
  }
  CHECK(curve.front().value == p_extract_bound(10, 0.0, 2, pg));
  CHECK(curve.back().value == p_extract_bound(50, 0.3, 2, pg));
  // Interior point: q = 20, eps = 0.1 needs 18 of 20 at s = pg^4.
  CHECK(curve[1 * q.size() + 1].value ==
        doctest::Approx(static_cast<double>(pascal_tail(20, 18, std::pow(static_cast<long double>(pg), 4)))).epsilon(1e-10));
}

TEST_CASE("mc_extract_rate") {
  const auto bb84 = hybrid::bb84_scheme();
  SUBCASE("m = 1, single response: rate is the squared per-bit rate") {
    const auto r = mc_extract_rate(bb84, 1, 0.5, 1, 0.0, 40000, 11);
    CHECK(within_sigmas(r.rate, r.per_bit * r.per_bit, r.trials));
    CHECK(within_sigmas(r.per_bit, p_guess_bound(0.5).value, r.trials * 2));
  }
  SUBCASE("p = 1 is fully extractable") {
    const auto r = mc_extract_rate(bb84, 4, 1.0, 10, 0.0, 200, 12);
    CHECK(r.rate == 1.0);
    CHECK(r.per_bit == 1.0);
  }
  SUBCASE("full-half rate decays geometrically in m") {
    std::vector<double> xs, ys;
    double per_bit = 0.0;
    for (int m = 1; m <= 6; ++m) {
      const auto r = mc_extract_rate(bb84, m, 0.5, 1, 0.0, 30000, 13 + static_cast<std::uint64_t>(m));
      xs.push_back(m);
      ys.push_back(std::log(r.rate));
      per_bit += r.per_bit / 6.0;
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      mx += xs[i] / 6.0;
      my += ys[i] / 6.0;
    }
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxy += (xs[i] - mx) * (ys[i] - my);
      sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    const double slope = sxy / sxx;
    CHECK(slope == doctest::Approx(2.0 * std::log(per_bit)).epsilon(0.05));
  }
  SUBCASE("threshold runs agree with the bound") {
    const auto r = mc_extract_rate(bb84, 1, 0.5, 10, 0.2, 4000, 14, 2);
    CHECK(within_sigmas(r.rate, r.bound, r.trials));
  }
}

TEST_CASE("eve guessing experiment") {
  const auto e = eve_guessing_experiment(4, 0.5, 100000, 21, 2);
  CHECK(within_sigmas(e.zeta, 0.25, e.rounds * 4));
  // Per qubit, Eve passes with 3/4 and is right about both bits with 1/2.
  CHECK(within_sigmas(e.guess_rate, std::pow(2.0 / 3.0, 4), e.accepted));
  CHECK(e.guess_rate <= e.bound + 3 * e.sigma);
  const auto again = eve_guessing_experiment(4, 0.5, 100000, 21, 1);
  CHECK(again.guessed == e.guessed);
}
