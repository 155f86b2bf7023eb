#include "vbhp/kernel_gp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "vbhp/errors.hpp"

namespace vbhp {

KernelConfig KernelConfig::make(double gamma, std::vector<double> alphas) {
  KernelConfig cfg;
  cfg.gamma = gamma;
  cfg.alphas = std::move(alphas);
  cfg.jitter = kDefaultRelativeJitter * gamma;
  cfg.validate();
  return cfg;
}

void KernelConfig::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ArgumentError("kernel gamma must be positive");
  if (alphas.empty()) throw ArgumentError("kernel needs at least one length-scale");
  for (double a : alphas) {
    if (!(a > 0.0) || !std::isfinite(a)) throw ArgumentError("kernel alphas must be positive");
  }
  if (!(jitter > 0.0)) throw ArgumentError("kernel jitter must be positive");
}

double Domain::volume() const {
  double v = 1.0;
  for (const auto& b : bounds) v *= b.length();
  return v;
}

bool Domain::contains(PointView x) const {
  if (x.size() != bounds.size()) return false;
  for (std::size_t r = 0; r < x.size(); ++r) {
    if (x[r] < bounds[r].lo || x[r] > bounds[r].hi) return false;
  }
  return true;
}

void Domain::validate() const {
  if (bounds.empty()) throw ArgumentError("domain needs at least one dimension");
  for (const auto& b : bounds) {
    if (!(b.hi > b.lo)) throw ArgumentError("domain bounds must satisfy hi > lo");
  }
}

InducingGrid InducingGrid::regular(const Domain& domain, std::vector<std::size_t> points_per_dim) {
  domain.validate();
  if (points_per_dim.size() != domain.dim()) throw ArgumentError("grid dimension does not match domain");
  std::size_t total = 1;
  for (auto n : points_per_dim) {
    if (n < 2) throw ArgumentError("inducing grid needs at least 2 points per dimension");
    total *= n;
  }
  InducingGrid grid;
  grid.points_per_dim = std::move(points_per_dim);
  const std::size_t dim = domain.dim();
  grid.points.resize(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(dim));
  std::vector<std::size_t> index(dim, 0);
  for (std::size_t j = 0; j < total; ++j) {
    for (std::size_t r = 0; r < dim; ++r) {
      const auto& b = domain.bounds[r];
      const double step = b.length() / static_cast<double>(grid.points_per_dim[r] - 1);
      grid.points(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(r)) =
          index[r] + 1 == grid.points_per_dim[r] ? b.hi : b.lo + step * static_cast<double>(index[r]);
    }
    // odometer, last dimension fastest
    for (std::size_t r = dim; r-- > 0;) {
      if (++index[r] < grid.points_per_dim[r]) break;
      index[r] = 0;
    }
  }
  return grid;
}

double kernel(PointView x, PointView x_prime, const KernelConfig& cfg) {
  if (x.size() != cfg.dim() || x_prime.size() != cfg.dim()) {
    throw ArgumentError("kernel: point dimension does not match kernel dimension");
  }
  double exponent = 0.0;
  for (std::size_t r = 0; r < x.size(); ++r) {
    const double d = x[r] - x_prime[r];
    exponent += d * d / (2.0 * cfg.alphas[r]);
  }
  return cfg.gamma * std::exp(-exponent);
}

Eigen::VectorXd cross_kernel(PointView x, const InducingGrid& grid, const KernelConfig& cfg) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t j = 0; j < grid.size(); ++j) out[static_cast<Eigen::Index>(j)] = kernel(x, grid.point(j), cfg);
  return out;
}

Eigen::MatrixXd gram_matrix(const RowMatrix& points, const KernelConfig& cfg) {
  const Eigen::Index n = points.rows();
  const auto dim = static_cast<std::size_t>(points.cols());
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b <= a; ++b) {
      const double v = kernel({points.data() + a * points.cols(), dim}, {points.data() + b * points.cols(), dim}, cfg);
      g(a, b) = v;
      g(b, a) = v;
    }
  }
  return g;
}

GramFactor::GramFactor(const InducingGrid& grid, const KernelConfig& cfg) {
  cfg.validate();
  if (grid.dim() != cfg.dim()) throw ArgumentError("grid dimension does not match kernel dimension");
  gram_ = gram_matrix(grid.points, cfg);
  gram_.diagonal().array() += cfg.jitter;
  llt_.compute(gram_);
  if (llt_.info() != Eigen::Success) throw NumericalError("Cholesky factorisation of K_zz failed");
  const Eigen::MatrixXd l = llt_.matrixL();
  log_det_ = 2.0 * l.diagonal().array().log().sum();
}

Eigen::VectorXd GramFactor::whiten(const Eigen::VectorXd& rhs) const { return llt_.matrixL().solve(rhs); }

Eigen::MatrixXd GramFactor::whiten(const Eigen::MatrixXd& rhs) const { return llt_.matrixL().solve(rhs); }

SparseGp::SparseGp(KernelConfig c, InducingGrid g) : cfg(std::move(c)), grid(std::move(g)), factor(grid, cfg) {}

void check_s_factor(const Eigen::MatrixXd& s_factor, std::size_t m) {
  if (static_cast<std::size_t>(s_factor.rows()) != m || static_cast<std::size_t>(s_factor.cols()) != m) {
    throw StateError("S factor has wrong shape");
  }
  for (Eigen::Index i = 0; i < s_factor.rows(); ++i) {
    if (!(s_factor(i, i) > 0.0) || !std::isfinite(s_factor(i, i))) {
      throw StateError("S factor must have a positive diagonal (S not positive definite)");
    }
  }
}

PosteriorMoments posterior_moments(PointView x, const Eigen::VectorXd& m, const Eigen::MatrixXd& s_factor,
                                   const SparseGp& gp) {
  check_s_factor(s_factor, gp.grid.size());
  const Eigen::VectorXd kzx = cross_kernel(x, gp.grid, gp.cfg);
  const Eigen::VectorXd a = gp.factor.solve(kzx);  // K_zz^{-1} K_zx
  const Eigen::VectorXd b = gp.factor.whiten(kzx);
  const Eigen::VectorXd sa = s_factor.triangularView<Eigen::Lower>().transpose() * a;
  PosteriorMoments out;
  out.mean = a.dot(m);
  out.variance = gp.cfg.gamma + gp.cfg.jitter - b.squaredNorm() + sa.squaredNorm();
  if (!(out.variance > 0.0)) throw StateError("posterior variance is not positive");
  return out;
}

std::vector<double> truncated_upper(PointView x_i, const Domain& domain,
                                    const std::optional<std::vector<double>>& support) {
  if (x_i.size() != domain.dim()) throw ArgumentError("point dimension does not match domain");
  if (!domain.contains(x_i)) throw ArgumentError("point lies outside the domain");
  if (support && support->size() != domain.dim()) throw ArgumentError("support dimension does not match domain");
  std::vector<double> upper(domain.dim());
  for (std::size_t r = 0; r < domain.dim(); ++r) {
    upper[r] = domain.bounds[r].hi - x_i[r];
    if (support) upper[r] = std::min(upper[r], (*support)[r]);
  }
  return upper;
}

double truncated_volume(PointView x_i, const Domain& domain, const std::optional<std::vector<double>>& support) {
  const auto upper = truncated_upper(x_i, domain, support);
  double v = 1.0;
  for (std::size_t r = 0; r < domain.dim(); ++r) v *= std::max(0.0, upper[r] - domain.bounds[r].lo);
  return v;
}

namespace {

// erf(b) - erf(a) for a <= b without cancellation in the tails.
double erf_difference(double a, double b) {
  if (a >= 0.0) return std::erfc(a) - std::erfc(b);
  if (b <= 0.0) return std::erfc(-b) - std::erfc(-a);
  return std::erf(b) - std::erf(a);
}

}  // namespace

Eigen::MatrixXd psi_matrix(PointView x_i, const InducingGrid& grid, const KernelConfig& cfg, const Domain& domain,
                           const std::optional<std::vector<double>>& support) {
  if (grid.dim() != cfg.dim() || domain.dim() != cfg.dim()) throw ArgumentError("psi_matrix: dimension mismatch");
  const auto upper = truncated_upper(x_i, domain, support);
  const auto m = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd psi = Eigen::MatrixXd::Constant(m, m, cfg.gamma * cfg.gamma);
  for (std::size_t r = 0; r < cfg.dim(); ++r) {
    const double lo = domain.bounds[r].lo;
    const double hi = upper[r];
    if (!(hi > lo)) return Eigen::MatrixXd::Zero(m, m);
    const double alpha = cfg.alphas[r];
    const double sqrt_alpha = std::sqrt(alpha);
    const double scale = std::sqrt(std::numbers::pi * alpha) / 2.0;
    const auto col = static_cast<Eigen::Index>(r);
    for (Eigen::Index a = 0; a < m; ++a) {
      for (Eigen::Index b = 0; b <= a; ++b) {
        const double za = grid.points(a, col);
        const double zb = grid.points(b, col);
        const double mid = 0.5 * (za + zb);
        const double d = za - zb;
        const double factor = scale * std::exp(-d * d / (4.0 * alpha)) *
                              erf_difference((lo - mid) / sqrt_alpha, (hi - mid) / sqrt_alpha);
        psi(a, b) *= factor;
        if (a != b) psi(b, a) *= factor;
      }
    }
  }
  return psi;
}

double expected_square_integral(PointView x_i, const Eigen::VectorXd& m, const Eigen::MatrixXd& s_factor,
                                const SparseGp& gp, const Domain& domain,
                                const std::optional<std::vector<double>>& support) {
  check_s_factor(s_factor, gp.grid.size());
  const Eigen::MatrixXd psi = psi_matrix(x_i, gp.grid, gp.cfg, domain, support);
  const double volume = truncated_volume(x_i, domain, support);
  // Whitened form: with K = L L^T, Psi~ = L^{-1} Psi L^{-T}, m~ = L^{-1} m, S~ = L^{-1} S_factor.
  const Eigen::MatrixXd psi_w = gp.factor.whiten(Eigen::MatrixXd(gp.factor.whiten(psi).transpose()));
  const Eigen::VectorXd m_w = gp.factor.whiten(m);
  const Eigen::MatrixXd s_w = gp.factor.whiten(Eigen::MatrixXd(s_factor.triangularView<Eigen::Lower>()));
  const double mean_part = m_w.dot(psi_w * m_w);
  const double var_part = (gp.cfg.gamma + gp.cfg.jitter) * volume - psi_w.trace() +
                          (s_w.transpose() * psi_w * s_w).trace();
  const double total = mean_part + var_part;
  if (total < -1e-8) throw NumericalError("expected_square_integral is negative; Gram factorisation is unreliable");
  return std::max(total, 0.0);
}

}  // namespace vbhp
