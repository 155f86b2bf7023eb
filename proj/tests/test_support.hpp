#pragma once

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "vbhp/engine.hpp"
#include "vbhp/events.hpp"
#include "vbhp/kernel_gp.hpp"
#include "vbhp/simulator.hpp"

namespace vbhp::testing {

// Adaptive Gauss-Kronrod on [a, b].
template <class F>
double integrate(F f, double a, double b, double tol = 1e-13) {
  if (!(b > a)) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, tol);
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

template <class F>
MeanSe mc_mean(F sample, std::size_t n) {
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = sample();
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / n;
  const double var = (sum2 - n * mean * mean) / (n - 1);
  return {mean, std::sqrt(var / n)};
}

inline EventSequence random_events(std::mt19937_64& gen, std::size_t n, double t_max) {
  std::uniform_real_distribution<double> u(0.0, t_max);
  EventSequence s;
  s.t_max = t_max;
  for (std::size_t i = 0; i < n; ++i) s.times.push_back(u(gen));
  std::sort(s.times.begin(), s.times.end());
  return s;
}

inline double uniform(std::mt19937_64& gen, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(gen);
}

// Random m, lower-triangular factor with positive diagonal, k, c and normalised branching rows.
inline VariationalState random_state(const FitContext& ctx, std::mt19937_64& gen) {
  const auto m = static_cast<Eigen::Index>(ctx.num_inducing());
  VariationalState s;
  s.m.resize(m);
  s.s_factor = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    s.m(i) = uniform(gen, -1.5, 1.5);
    for (Eigen::Index j = 0; j < i; ++j) s.s_factor(i, j) = uniform(gen, -0.3, 0.3);
    s.s_factor(i, i) = uniform(gen, 0.2, 0.9);
  }
  s.k = uniform(gen, 1.5, 6.0);
  s.c = uniform(gen, 0.5, 3.0);
  s.branching = uniform_branching(ctx.pairs());
  const auto& pairs = *ctx.pairs();
  for (std::size_t i = 0; i < pairs.num_events(); ++i) {
    double total = s.branching.background[i] = uniform(gen, 0.1, 1.0);
    for (std::size_t p = pairs.offsets[i]; p < pairs.offsets[i + 1]; ++p) total += s.branching.parent[p] = uniform(gen, 0.1, 1.0);
    s.branching.background[i] /= total;
    for (std::size_t p = pairs.offsets[i]; p < pairs.offsets[i + 1]; ++p) s.branching.parent[p] /= total;
  }
  return s;
}

// Monte-Carlo mean of log f^2 for f ~ Normal(mean, variance).
inline MeanSe mc_log_square(double mean, double variance, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(mean, std::sqrt(variance));
  return mc_mean([&] {
    const double f = normal(gen);
    return std::log(f * f);
  }, n);
}

// KL(Gamma(k, c) || Gamma(k0, c0)) by quadrature over u = log x, where the
// integrand stays smooth even for shape < 1.
inline double quadrature_kl_gamma(double k, double c, double k0, double c0) {
  boost::math::gamma_distribution<double> q(k, c), p(k0, c0);
  const double lo = std::log(boost::math::quantile(q, 1e-17));
  const double hi = std::log(boost::math::quantile(boost::math::complement(q, 1e-17)));
  return integrate([&](double u) {
    const double x = std::exp(u);
    const double qx = boost::math::pdf(q, x);
    if (qx <= 0.0) return 0.0;
    return x * qx * (std::log(qx) - std::log(boost::math::pdf(p, x)));
  }, lo, hi, 1e-13);
}

inline double se_kernel_1d(double a, double b, const KernelConfig& cfg) {
  return cfg.gamma * std::exp(-(a - b) * (a - b) / (2.0 * cfg.alphas[0]));
}

// 1-D posterior moments with an explicit inverse of the jittered Gram matrix.
inline PosteriorMoments explicit_moments(double x, const Eigen::VectorXd& m, const Eigen::MatrixXd& s,
                                         const SparseGp& gp) {
  const auto n = static_cast<Eigen::Index>(gp.grid.size());
  Eigen::MatrixXd k(n, n);
  Eigen::VectorXd kx(n);
  for (Eigen::Index a = 0; a < n; ++a) {
    kx(a) = se_kernel_1d(gp.grid.points(a, 0), x, gp.cfg);
    for (Eigen::Index b = 0; b < n; ++b) k(a, b) = se_kernel_1d(gp.grid.points(a, 0), gp.grid.points(b, 0), gp.cfg);
  }
  k.diagonal().array() += gp.cfg.jitter;
  const Eigen::MatrixXd kinv = k.inverse();
  const Eigen::VectorXd w = kinv * kx;
  return {w.dot(m), gp.cfg.gamma + gp.cfg.jitter - kx.dot(w) + w.dot(s * w)};
}

// KL(Normal(m, l l^T) || Normal(0, K)) with explicit inverse and determinants.
inline double explicit_kl_gaussian(const Eigen::VectorXd& m, const Eigen::MatrixXd& l, const Eigen::MatrixXd& k) {
  const Eigen::MatrixXd s = l * l.transpose();
  const Eigen::MatrixXd kinv = k.inverse();
  return 0.5 * ((kinv * s).trace() + std::log(k.determinant() / s.determinant()) - static_cast<double>(m.size()) +
                m.dot(kinv * m));
}

// Independent cluster construction: Poisson immigrants, then every event spawns
// Poisson(integral of phi over its remaining window) children at lags drawn from phi
// by rejection against phi_max. Returns the total count on [0, t_max].
inline std::size_t cluster_count(const TriggeringKernel& phi, double phi_max, double support, double mu, double t_max,
                          std::mt19937_64& gen) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> queue;
  std::poisson_distribution<int> immigrants(mu * t_max);
  const int n0 = immigrants(gen);
  for (int i = 0; i < n0; ++i) queue.push_back(unit(gen) * t_max);
  std::size_t total = 0;
  while (!queue.empty()) {
    const double t = queue.back();
    queue.pop_back();
    ++total;
    const double reach = std::min(support, t_max - t);
    if (reach <= 0.0) continue;
    const double mass = integrate([&](double x) { return phi(x); }, 0.0, reach, 1e-10);
    std::poisson_distribution<int> children(mass);
    const int k = children(gen);
    for (int c = 0; c < k; ++c) {
      double lag;
      do {
        lag = unit(gen) * reach;
      } while (unit(gen) * phi_max > phi(lag));
      queue.push_back(t + lag);
    }
  }
  return total;
}

// Asymptotic Kolmogorov survival function Q(lambda) = 2 sum (-1)^{j-1} exp(-2 j^2 lambda^2).
inline double kolmogorov_q(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int j = 1; j < 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += (j % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

inline double relative_error(double a, double b, double floor = 1.0) {
  return std::abs(a - b) / std::max(floor, std::max(std::abs(a), std::abs(b)));
}

}  // namespace vbhp::testing
