#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace vbhp {

using PointView = std::span<const double>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// ARD squared-exponential kernel K(x, x') = gamma * prod_r exp(-(x_r - x'_r)^2 / (2 alpha_r)).
/// alpha_r is a squared length-scale. jitter is an absolute amount added to the
/// diagonal of the inducing Gram matrix and to the prior variance K(x, x).
struct KernelConfig {
  double gamma = 1.0;
  std::vector<double> alphas{1.0};
  double jitter = 1e-6;

  static constexpr double kDefaultRelativeJitter = 1e-6;

  /// Jitter defaults to kDefaultRelativeJitter * gamma.
  static KernelConfig make(double gamma, std::vector<double> alphas);

  std::size_t dim() const { return alphas.size(); }
  void validate() const;
};

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  double length() const { return hi - lo; }
};

struct Domain {
  std::vector<Interval> bounds;

  static Domain interval(double lo, double hi) { return Domain{{Interval{lo, hi}}}; }

  std::size_t dim() const { return bounds.size(); }
  double volume() const;
  bool contains(PointView x) const;
  void validate() const;
};

/// Inducing locations on a regular lattice, endpoints included in every dimension.
struct InducingGrid {
  RowMatrix points;  // M x R, one location per row
  std::vector<std::size_t> points_per_dim;

  static InducingGrid regular(const Domain& domain, std::vector<std::size_t> points_per_dim);
  static InducingGrid regular(const Domain& domain, std::size_t points) {
    return regular(domain, std::vector<std::size_t>(domain.dim(), points));
  }

  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(points.cols()); }
  PointView point(std::size_t j) const {
    return {points.data() + j * dim(), dim()};
  }
};

/// Cholesky factorisation of K_zz + jitter * I.
class GramFactor {
 public:
  GramFactor() = default;
  GramFactor(const InducingGrid& grid, const KernelConfig& cfg);

  const Eigen::MatrixXd& gram() const { return gram_; }
  Eigen::MatrixXd lower() const { return llt_.matrixL(); }
  double log_det() const { return log_det_; }
  std::size_t size() const { return static_cast<std::size_t>(gram_.rows()); }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const { return llt_.solve(rhs); }
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const { return llt_.solve(rhs); }
  /// L^{-1} rhs
  Eigen::VectorXd whiten(const Eigen::VectorXd& rhs) const;
  Eigen::MatrixXd whiten(const Eigen::MatrixXd& rhs) const;

 private:
  Eigen::MatrixXd gram_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double log_det_ = 0.0;
};

/// Everything needed to evaluate the sparse-GP posterior for fixed hyperparameters.
struct SparseGp {
  KernelConfig cfg;
  InducingGrid grid;
  GramFactor factor;

  SparseGp() = default;
  SparseGp(KernelConfig c, InducingGrid g);
};

double kernel(PointView x, PointView x_prime, const KernelConfig& cfg);

/// K_zx: kernel between every inducing point and x.
Eigen::VectorXd cross_kernel(PointView x, const InducingGrid& grid, const KernelConfig& cfg);

/// Gram matrix over the rows of points (no jitter).
Eigen::MatrixXd gram_matrix(const RowMatrix& points, const KernelConfig& cfg);

struct PosteriorMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// q(f(x)) for q(u) = Normal(m, s_factor * s_factor^T).
PosteriorMoments posterior_moments(PointView x, const Eigen::VectorXd& m, const Eigen::MatrixXd& s_factor,
                                   const SparseGp& gp);

/// Upper integration limit per dimension of the lag region T_i, optionally
/// capped by the support-truncation length.
std::vector<double> truncated_upper(PointView x_i, const Domain& domain,
                                    const std::optional<std::vector<double>>& support);

/// |T_i|, zero when the region is empty.
double truncated_volume(PointView x_i, const Domain& domain, const std::optional<std::vector<double>>& support);

/// Psi_i(z, z') = integral over T_i of K(z, x) K(x, z') dx, in closed form via erf.
Eigen::MatrixXd psi_matrix(PointView x_i, const InducingGrid& grid, const KernelConfig& cfg, const Domain& domain,
                           const std::optional<std::vector<double>>& support = std::nullopt);

/// Integral over T_i of E[f(x)^2] under the posterior GP.
double expected_square_integral(PointView x_i, const Eigen::VectorXd& m, const Eigen::MatrixXd& s_factor,
                                const SparseGp& gp, const Domain& domain,
                                const std::optional<std::vector<double>>& support = std::nullopt);

/// Throws StateError unless s_factor is square, matches M and has a positive diagonal.
void check_s_factor(const Eigen::MatrixXd& s_factor, std::size_t m);

}  // namespace vbhp
