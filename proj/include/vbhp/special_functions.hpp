#pragma once

#include <vector>

namespace vbhp {

inline constexpr double kEulerGamma = 0.57721566490153286060651209008240243;

double digamma(double x);
double trigamma(double x);
double log_gamma(double x);
double erf(double x);

/// Tabulated G-tilde(z) = d/da 1F1(a; 1/2; z) at a = 0, for z <= 0.
///
/// Nodes run from 0 down to z_min on a uniform grid. Values and first
/// derivatives are stored at every node and the lookup is a cubic Hermite
/// interpolant, so g_tilde_prime is the exact derivative of g_tilde.
/// Below z_min the large-|z| expansion takes over:
///   G(z) = -log|z| - 2 log 2 - C + 1/(2|z|) + 3/(8 z^2) + 5/(8|z|^3) + 105/(64 z^4).
struct GTildeTable {
  std::vector<double> nodes;              // nodes[0] = 0, strictly decreasing
  std::vector<double> values;             // G(nodes[i])
  std::vector<double> derivative_values;  // G'(nodes[i])
  double z_min = 0.0;
  double spacing = 0.0;
  // Asymptotic branch: G(z) ~ asymptotic_offset - log|z| + 1/(2|z|) + ...
  double asymptotic_offset = 0.0;

  // (value, derivative) pairs node by node, so one lookup touches one or two cache lines.
  std::vector<double> interleaved;

  static GTildeTable build(double z_min = -700.0, std::size_t intervals = 100000);

  struct Point {
    double value;
    double derivative;
  };
  Point lookup(double z) const;
  double value(double z) const { return lookup(z).value; }
  double derivative(double z) const { return lookup(z).derivative; }
};

/// Process-wide table, built once on first use.
const GTildeTable& g_tilde_table();

double g_tilde(double z);
double g_tilde_prime(double z);

/// Direct evaluation of G(z) and G'(z) as Poisson(|z|) expectations:
///   G(z)  = -E[H_N],       H_n = sum_{k<n} 1 / (k + 1/2)
///   G'(z) = 2 E[1 / (2N + 1)]
/// This is the Kummer-transformed form of the defining series; every term is
/// positive, so it stays accurate for large |z| where the alternating series
/// cancels catastrophically.
double g_tilde_series(double z);
double g_tilde_prime_series(double z);

/// E[log f^2] for f ~ Normal(mean, variance).
double expected_log_square(double mean, double variance);

/// Partial derivatives of expected_log_square with respect to mean and variance.
struct ExpectedLogSquareGrad {
  double value;
  double d_mean;
  double d_variance;
};
ExpectedLogSquareGrad expected_log_square_with_grad(double mean, double variance);

}  // namespace vbhp
