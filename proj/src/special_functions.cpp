#include "vbhp/special_functions.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include <cmath>
#include <string>

#include "vbhp/errors.hpp"

namespace vbhp {

namespace {

void require_positive(double x, const char* name) {
  if (!(x > 0.0)) {
    throw DomainError(std::string(name) + ": argument must be positive, got " + std::to_string(x));
  }
}

void require_non_positive_z(double z, const char* name) {
  if (!(z <= 0.0)) {
    throw DomainError(std::string(name) + ": argument must be <= 0, got " + std::to_string(z));
  }
}

constexpr double kLog2 = 0.69314718055994530941723212145818;

// Sum f(n) * Poisson(n; lambda) over n >= 0, walking outward from the mode so
// that no intermediate pmf underflows before it matters.
template <typename F>
double poisson_expectation(double lambda, F&& f) {
  if (lambda == 0.0) return f(0);
  const auto mode = static_cast<long>(std::floor(lambda));
  const double log_pmf_mode =
      static_cast<double>(mode) * std::log(lambda) - lambda - boost::math::lgamma(static_cast<double>(mode) + 1.0);
  const double pmf_mode = std::exp(log_pmf_mode);

  double sum = pmf_mode * f(mode);
  double comp = 0.0;
  auto add = [&](double term) {
    const double y = term - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  };

  double pmf = pmf_mode;
  for (long n = mode + 1;; ++n) {
    pmf *= lambda / static_cast<double>(n);
    const double term = pmf * f(n);
    add(term);
    if (pmf < 1e-18 * pmf_mode && std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  pmf = pmf_mode;
  for (long n = mode; n > 0; --n) {
    pmf *= static_cast<double>(n) / lambda;
    const double term = pmf * f(n - 1);
    add(term);
    if (pmf < 1e-18 * pmf_mode && std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return sum;
}

double asymptotic_value(double z, double offset) {
  const double w = -z;
  const double r = 1.0 / w;
  return offset - std::log(w) + r * (0.5 + r * (3.0 / 8.0 + r * (5.0 / 8.0 + r * (105.0 / 64.0))));
}

double asymptotic_derivative(double z) {
  const double w = -z;
  const double r = 1.0 / w;
  return r * (1.0 + r * (0.5 + r * (3.0 / 4.0 + r * (15.0 / 8.0 + r * (105.0 / 16.0)))));
}

}  // namespace

double digamma(double x) {
  require_positive(x, "digamma");
  return boost::math::digamma(x);
}

double trigamma(double x) {
  require_positive(x, "trigamma");
  return boost::math::trigamma(x);
}

double log_gamma(double x) {
  require_positive(x, "log_gamma");
  return boost::math::lgamma(x);
}

double erf(double x) { return std::erf(x); }

double g_tilde_series(double z) {
  require_non_positive_z(z, "g_tilde_series");
  // H_n has no closed form cheaper than digamma: H_n = psi(n + 1/2) - psi(1/2).
  const double psi_half = -kEulerGamma - 2.0 * kLog2;
  return -poisson_expectation(-z, [psi_half](long n) {
    return n == 0 ? 0.0 : boost::math::digamma(static_cast<double>(n) + 0.5) - psi_half;
  });
}

double g_tilde_prime_series(double z) {
  require_non_positive_z(z, "g_tilde_prime_series");
  return 2.0 * poisson_expectation(-z, [](long n) { return 1.0 / (2.0 * static_cast<double>(n) + 1.0); });
}

GTildeTable GTildeTable::build(double z_min, std::size_t intervals) {
  GTildeTable table;
  table.z_min = z_min;
  table.spacing = -z_min / static_cast<double>(intervals);
  table.nodes.resize(intervals + 1);
  table.values.resize(intervals + 1);
  table.derivative_values.resize(intervals + 1);

  // Running harmonic-type sums are cheaper than digamma per term; build the
  // values in one pass per node using the recurrence H_{n+1} = H_n + 1/(n+1/2).
  std::vector<double> h{0.0};
  auto harmonic = [&h](long n) {
    while (static_cast<long>(h.size()) <= n) {
      const auto k = static_cast<double>(h.size() - 1);
      h.push_back(h.back() + 1.0 / (k + 0.5));
    }
    return h[static_cast<std::size_t>(n)];
  };

  for (std::size_t i = 0; i <= intervals; ++i) {
    const double z = -table.spacing * static_cast<double>(i);
    table.nodes[i] = z;
    table.values[i] = -poisson_expectation(-z, harmonic);
    table.derivative_values[i] =
        2.0 * poisson_expectation(-z, [](long n) { return 1.0 / (2.0 * static_cast<double>(n) + 1.0); });
  }
  table.values[0] = 0.0;
  table.nodes.back() = z_min;
  table.asymptotic_offset = -2.0 * kLog2 - kEulerGamma;
  table.interleaved.resize(2 * (intervals + 1));
  for (std::size_t i = 0; i <= intervals; ++i) {
    table.interleaved[2 * i] = table.values[i];
    table.interleaved[2 * i + 1] = table.derivative_values[i];
  }
  return table;
}

GTildeTable::Point GTildeTable::lookup(double z) const {
  require_non_positive_z(z, "g_tilde");
  if (z < z_min) return {asymptotic_value(z, asymptotic_offset), asymptotic_derivative(z)};
  const double pos = -z / spacing;
  auto i = static_cast<std::size_t>(pos);
  if (i >= nodes.size() - 1) i = nodes.size() - 2;
  const double t = pos - static_cast<double>(i);
  const double* node = interleaved.data() + 2 * i;
  const double v0 = node[0], d0 = node[1], v1 = node[2], d1 = node[3];
  // Hermite basis on a segment of length h traversed in the -z direction.
  const double h = -spacing;
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double value = (2 * t3 - 3 * t2 + 1) * v0 + (t3 - 2 * t2 + t) * h * d0 + (-2 * t3 + 3 * t2) * v1 +
                       (t3 - t2) * h * d1;
  // d/dz = (1/h) d/dt
  const double derivative = ((6 * t2 - 6 * t) * v0 + (-6 * t2 + 6 * t) * v1) / h + (3 * t2 - 4 * t + 1) * d0 +
                            (3 * t2 - 2 * t) * d1;
  return {value, derivative};
}

const GTildeTable& g_tilde_table() {
  static const GTildeTable table = GTildeTable::build();
  return table;
}

double g_tilde(double z) { return g_tilde_table().value(z); }

double g_tilde_prime(double z) { return g_tilde_table().derivative(z); }

ExpectedLogSquareGrad expected_log_square_with_grad(double mean, double variance) {
  if (!(variance > 0.0)) {
    throw DomainError("expected_log_square: variance must be positive, got " + std::to_string(variance));
  }
  const GTildeTable& table = g_tilde_table();
  const double z = -mean * mean / (2.0 * variance);
  const auto [g, gp] = table.lookup(z);
  ExpectedLogSquareGrad out{};
  out.value = -g + std::log(variance / 2.0) - kEulerGamma;
  // dz/dmean = -mean / variance, dz/dvariance = mean^2 / (2 variance^2)
  out.d_mean = gp * mean / variance;
  out.d_variance = -gp * mean * mean / (2.0 * variance * variance) + 1.0 / variance;
  return out;
}

double expected_log_square(double mean, double variance) {
  return expected_log_square_with_grad(mean, variance).value;
}

}  // namespace vbhp
