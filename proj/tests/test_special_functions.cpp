#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "test_support.hpp"
#include "vbhp/errors.hpp"
#include "vbhp/special_functions.hpp"

using namespace vbhp;
using vbhp::testing::mc_mean;

namespace {

// Reference values from a 40-digit evaluation of d/da 1F1(a; 1/2; z) at a = 0,
// and of G'(z) = 2 Dawson(sqrt|z|) / sqrt|z|.
struct Frozen {
  double z, value, derivative;
};
constexpr Frozen kFrozen[] = {
    {-0.5, -0.85337120859208961159, 1.4495569180141526636},
    {-1.0, -1.478883260198158601, 1.0761590138255368383},
    {-3.0, -2.829493828248821132, 0.42042311430711082116},
    {-10.0, -4.2114303185597287649, 0.1060751619858032897},
    {-50.0, -5.8653777480940386296, 0.020206323129837197744},
    {-200.0, -7.2593179384001773423, 0.0050125949428573560447},
    {-700.0, -8.513875308215394091, 0.0014295940311721605408},
};

// The defining series sum_{n>=1} z^n / (n (1/2)_n), in long double. Alternating for
// z < 0, so only usable where the largest term stays well inside long double precision.
double alternating_series(double z) {
  long double term_base = 1.0L;  // z^n / (1/2)_n
  long double sum = 0.0L;
  for (int n = 1; n < 2000; ++n) {
    term_base *= static_cast<long double>(z) / (n - 0.5L);
    const long double term = term_base / n;
    sum += term;
    if (std::abs(term) < 1e-22L * std::max(1.0L, std::abs(sum)) && n > std::abs(z)) break;
  }
  return static_cast<double>(sum);
}

}  // namespace

TEST_CASE("g_tilde vanishes at zero and matches reference values") {
  CHECK(g_tilde(0.0) == 0.0);
  for (const auto& f : kFrozen) {
    INFO("z = " << f.z);
    CHECK(g_tilde(f.z) == doctest::Approx(f.value).epsilon(1e-9));
    CHECK(g_tilde_prime(f.z) == doctest::Approx(f.derivative).epsilon(1e-8));
    CHECK(g_tilde_series(f.z) == doctest::Approx(f.value).epsilon(1e-12));
    CHECK(g_tilde_prime_series(f.z) == doctest::Approx(f.derivative).epsilon(1e-12));
  }
  CHECK(g_tilde(-0.5) == doctest::Approx(-0.8534).epsilon(1e-4));
}

TEST_CASE("g_tilde agrees with the alternating series where it converges cleanly") {
  for (int i = 0; i <= 400; ++i) {
    const double z = -20.0 * i / 400.0;
    const double oracle = alternating_series(z);
    INFO("z = " << z);
    CHECK(std::abs(g_tilde(z) - oracle) / std::max(1.0, std::abs(oracle)) <= 1e-4);
    CHECK(std::abs(g_tilde(z) - oracle) <= 1e-10 * std::max(1.0, std::abs(oracle)));
  }
}

TEST_CASE("table lookup matches direct evaluation across the whole table range") {
  std::mt19937_64 gen(11);
  for (int i = 0; i < 2000; ++i) {
    const double z = vbhp::testing::uniform(gen, -700.0, 0.0);
    const double direct = g_tilde_series(z);
    INFO("z = " << z);
    CHECK(std::abs(g_tilde(z) - direct) / std::max(1.0, std::abs(direct)) <= 1e-4);
    CHECK(g_tilde_prime(z) == doctest::Approx(g_tilde_prime_series(z)).epsilon(1e-6));
  }
}

TEST_CASE("g_tilde is decreasing on the negative axis") {
  double prev = g_tilde(0.0);
  for (double z = -0.01; z > -2000.0; z *= 1.05) {
    const double v = g_tilde(z);
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("asymptotic branch joins the table continuously") {
  const auto& table = g_tilde_table();
  const double z = table.z_min;
  CHECK(g_tilde(z - 1e-9) == doctest::Approx(g_tilde(z + 1e-9)).epsilon(1e-9));
  CHECK(g_tilde_prime(z - 1e-9) == doctest::Approx(g_tilde_prime(z + 1e-9)).epsilon(1e-6));
  CHECK(g_tilde(-1500.0) == doctest::Approx(-9.276396912926214874051).epsilon(1e-13));
  CHECK(g_tilde(-1e5) == doctest::Approx(-13.47643049095415127451).epsilon(1e-14));
  CHECK(g_tilde(-1500.0) == doctest::Approx(g_tilde_series(-1500.0)).epsilon(1e-10));
}

TEST_CASE("g_tilde_prime examples") {
  CHECK(g_tilde_prime(0.0) == doctest::Approx(2.0).epsilon(1e-12));
  const double h = 1e-6;
  const double fd = (g_tilde(-0.5 + h) - g_tilde(-0.5 - h)) / (2 * h);
  CHECK(g_tilde_prime(-0.5) == doctest::Approx(fd).epsilon(1e-3));
  const double hz = 1.0;
  const double fd_far = (g_tilde(-1e6 + hz) - g_tilde(-1e6 - hz)) / (2 * hz);
  CHECK(g_tilde_prime(-1e6) == doctest::Approx(fd_far).epsilon(1e-3));
  CHECK(g_tilde_prime(-1e6) == doctest::Approx(1e-6).epsilon(1e-5));
}

TEST_CASE("g_tilde_prime matches central differences at interior table nodes") {
  const auto& table = g_tilde_table();
  const double h = 1e-4;
  for (std::size_t i = 1; i + 1 < table.nodes.size(); i += 997) {
    const double z = table.nodes[i];
    const double fd = (g_tilde(z + h) - g_tilde(z - h)) / (2 * h);
    INFO("z = " << z);
    CHECK(std::abs(g_tilde_prime(z) - fd) <= 1e-3 * std::abs(fd));
  }
}

TEST_CASE("positive argument is rejected") {
  CHECK_THROWS_AS(g_tilde(1e-3), DomainError);
  CHECK_THROWS_AS(g_tilde_prime(0.5), DomainError);
}

TEST_CASE("g_tilde at -50 reproduces the Monte-Carlo mean of log f^2") {
  // nu^2 = 100 Sigma gives z = -50.
  const double variance = 1.0, mean = 10.0;
  const auto r = vbhp::testing::mc_log_square(mean, variance, 1000000, 5);
  const double mc = r.mean, se = r.se;
  const double closed = -g_tilde(-50.0) + std::log(variance / 2.0) - kEulerGamma;
  CHECK(std::abs(closed - mc) <= 3.0 * se);
}

TEST_CASE("expected_log_square examples") {
  CHECK(expected_log_square(0.0, 2.0) == doctest::Approx(-kEulerGamma).epsilon(1e-14));
  CHECK(std::abs(expected_log_square(1.0, 0.01)) <= 0.02);
  const auto r = vbhp::testing::mc_log_square(3.0, 0.5, 1000000, 9);
  const double mc = r.mean, se = r.se;
  CHECK(std::abs(expected_log_square(3.0, 0.5) - mc) <= 3.0 * se);
  CHECK_THROWS_AS(expected_log_square(1.0, 0.0), DomainError);
  CHECK_THROWS_AS(expected_log_square(1.0, -1.0), DomainError);
}

TEST_CASE("expected_log_square agrees with Monte Carlo at random moments") {
  std::mt19937_64 gen(2024);
  for (int i = 0; i < 50; ++i) {
    const double mean = vbhp::testing::uniform(gen, -10.0, 10.0);
    const double variance = std::exp(vbhp::testing::uniform(gen, std::log(1e-3), std::log(10.0)));
    const auto r = vbhp::testing::mc_log_square(mean, variance, 1000000, 100 + i);
    const double mc = r.mean, se = r.se;
    const double value = expected_log_square(mean, variance);
    // Jensen: E[log f^2] <= log E[f^2].
    CHECK(value <= std::log(mean * mean + variance));
    CHECK(std::abs(value - mc) <= 3.0 * se);
  }
}

TEST_CASE("expected_log_square gradient matches finite differences") {
  std::mt19937_64 gen(3);
  for (int i = 0; i < 50; ++i) {
    const double mean = vbhp::testing::uniform(gen, -5.0, 5.0);
    const double variance = vbhp::testing::uniform(gen, 0.01, 4.0);
    const auto g = expected_log_square_with_grad(mean, variance);
    const double h = 1e-6;
    const double dm = (expected_log_square(mean + h, variance) - expected_log_square(mean - h, variance)) / (2 * h);
    const double dv = (expected_log_square(mean, variance + h) - expected_log_square(mean, variance - h)) / (2 * h);
    CHECK(g.value == doctest::Approx(expected_log_square(mean, variance)));
    CHECK(g.d_mean == doctest::Approx(dm).epsilon(1e-5));
    CHECK(g.d_variance == doctest::Approx(dv).epsilon(1e-5));
  }
}

TEST_CASE("digamma, log_gamma and erf") {
  CHECK(digamma(1.0) == doctest::Approx(-kEulerGamma).epsilon(1e-15));
  CHECK(vbhp::erf(0.0) == 0.0);
  CHECK(log_gamma(5.0) == doctest::Approx(std::log(24.0)).epsilon(1e-15));
  CHECK(std::abs(digamma(0.3) - -3.5025242222001331249) <= 1e-10);
  CHECK(std::abs(digamma(7.5) - 1.9467574842460867881) <= 1e-10);
  CHECK(std::abs(log_gamma(0.1) - 2.252712651734205902) <= 1e-10);
  CHECK(std::abs(log_gamma(123.4) - 469.33609744219058579) <= 1e-10);
  CHECK(std::abs(vbhp::erf(0.7) - 0.67780119383741844228) <= 1e-10);
  CHECK(std::abs(vbhp::erf(-2.2) - -0.99813715370201811014) <= 1e-10);
  // Recurrences as independent checks.
  std::mt19937_64 gen(1);
  for (int i = 0; i < 100; ++i) {
    const double x = vbhp::testing::uniform(gen, 0.05, 50.0);
    CHECK(std::abs(digamma(x + 1) - digamma(x) - 1.0 / x) <= 1e-10);
    CHECK(std::abs(log_gamma(x + 1) - log_gamma(x) - std::log(x)) <= 1e-10);
    CHECK(std::abs(trigamma(x) - trigamma(x + 1) - 1.0 / (x * x)) <= 1e-10 * std::max(1.0, 1.0 / (x * x)));
    CHECK(vbhp::erf(-x / 10) == doctest::Approx(-vbhp::erf(x / 10)).epsilon(1e-15));
  }
  CHECK_THROWS_AS(digamma(0.0), DomainError);
  CHECK_THROWS_AS(digamma(-1.5), DomainError);
  CHECK_THROWS_AS(log_gamma(0.0), DomainError);
  CHECK_THROWS_AS(trigamma(-2.0), DomainError);
}
