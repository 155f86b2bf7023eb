#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include "vbhp/events.hpp"
#include "vbhp/kernel_gp.hpp"

namespace vbhp {

/// Gamma(k0, c0) prior on the background rate (shape, scale).
struct Priors {
  double k0 = 1.0;
  double c0 = 1.0;

  /// k0 = 1 and c0 = half the empirical rate N / |T| (floored so that c0 > 0).
  static Priors default_for(std::size_t num_events, double volume);
  void validate() const;
};

/// Admissible (child, parent) pairs grouped by child. A pair is admissible when
/// the lag lies inside the truncation support (or always, without truncation).
struct PairIndex {
  std::vector<std::size_t> offsets;  // size N + 1
  std::vector<std::size_t> parents;
  std::vector<double> lags;

  static PairIndex build(const std::vector<double>& times, std::optional<double> support);

  std::size_t num_events() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  std::size_t size() const { return parents.size(); }
};

/// q(B): per event, probabilities over the background and its admissible parents.
struct BranchingPosterior {
  std::shared_ptr<const PairIndex> pairs;
  std::vector<double> background;  // q_{i,0}
  std::vector<double> parent;      // q_{i,j}, aligned with pairs->parents

  std::size_t num_events() const { return background.size(); }
  /// Probability that event j (0-based, j < i) triggered event i; zero if not admissible.
  double parent_prob(std::size_t i, std::size_t j) const;
  double row_sum(std::size_t i) const;
  double entropy() const;
};

struct VariationalState {
  Eigen::VectorXd m;
  Eigen::MatrixXd s_factor;  // lower triangular, positive diagonal; S = s_factor * s_factor^T
  double k = 1.0;
  double c = 1.0;
  BranchingPosterior branching;

  Eigen::MatrixXd covariance() const;
};

struct FitConfig {
  std::size_t max_em_iterations = 50;
  double elbo_relative_tolerance = 1e-5;
  std::size_t m_step_iterations = 25;
  std::size_t lbfgs_memory = 10;
  // The M-step also ends once an accepted step gains less than this fraction of |ELBO|.
  double m_step_relative_tolerance = 1e-9;
  // Support truncation: when truncate is set and support is empty, 0.45 |T| is used.
  bool truncate = true;
  std::optional<double> support;
  // Integral of the initial kernel guess over its reach.
  double initial_branching_ratio = 0.5;
  // Run exactly max_em_iterations (timing runs).
  bool fixed_iterations = false;

  static constexpr double kDefaultSupportFraction = 0.45;

  std::optional<double> resolved_support(double volume) const;
  void validate() const;
};

struct FitReport {
  double initial_elbo = 0.0;
  std::vector<double> elbo_trace;
  std::vector<double> bound_trace;
  std::vector<double> kl_gamma_trace;
  std::vector<double> kl_u_trace;
  std::vector<double> iteration_seconds;
  double setup_seconds = 0.0;
  double bound = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  std::size_t m_step_stalls = 0;
};

/// Per-fit precomputation for fixed events and hyperparameters: admissible pairs,
/// whitened cross-covariances L^{-1} K_z(lag) for every pair, and the summed
/// whitened Psi matrix of the compensator integrals.
class FitContext {
 public:
  FitContext(const EventSequence& events, SparseGp gp, std::optional<double> support);

  const SparseGp& gp() const { return gp_; }
  const EventSequence& events() const { return events_; }
  const std::shared_ptr<const PairIndex>& pairs() const { return pairs_; }
  std::optional<double> support() const { return support_; }
  double volume() const { return events_.t_max; }
  std::size_t num_inducing() const { return gp_.grid.size(); }

  const Eigen::MatrixXd& whitened_cross() const { return cross_w_; }
  const Eigen::VectorXd& residual_variance() const { return residual_; }
  const Eigen::MatrixXd& whitened_psi() const { return psi_w_; }
  double region_volume_total() const { return region_volume_; }

 private:
  EventSequence events_;
  SparseGp gp_;
  std::optional<double> support_;
  std::shared_ptr<const PairIndex> pairs_;
  Eigen::MatrixXd cross_w_;   // M x P
  Eigen::VectorXd residual_;  // gamma + jitter - |b_p|^2
  Eigen::MatrixXd psi_w_;     // L^{-1} (sum_i Psi_i) L^{-T}
  double region_volume_ = 0.0;
};

double kl_gamma(double k, double c, double k0, double c0);
double kl_gaussian_u(const Eigen::VectorXd& m, const Eigen::MatrixXd& s_factor, const GramFactor& factor);

/// Starting point: S = K_zz and a constant m whose square integrates to
/// branching_ratio over min(support, |T|); (k, c) from the prior.
VariationalState initial_state(const FitContext& ctx, const Priors& priors, double branching_ratio = 0.5);
BranchingPosterior uniform_branching(const std::shared_ptr<const PairIndex>& pairs);

/// E[log f(lag_p)^2] for every admissible pair under the current q(u).
Eigen::VectorXd pair_expected_log_square(const FitContext& ctx, const VariationalState& state);

BranchingPosterior e_step(const FitContext& ctx, const VariationalState& state);

/// Data-dependent expectation; identical to the tighter marginal-likelihood bound.
double dde(const FitContext& ctx, const VariationalState& state);
double approx_log_marginal(const FitContext& ctx, const VariationalState& state);
double elbo(const FitContext& ctx, const VariationalState& state, const Priors& priors);

/// Gradient of the ELBO (q(B) fixed) in the unconstrained coordinates:
/// m, the lower triangle of s_factor with the diagonal taken in log space, log k and log c.
struct ElboGradient {
  Eigen::VectorXd m;
  Eigen::MatrixXd s_factor;  // lower triangle; diagonal entries are d/d log(s_ii)
  double log_k = 0.0;
  double log_c = 0.0;

  double max_abs() const;
};
ElboGradient elbo_gradient(const FitContext& ctx, const VariationalState& state, const Priors& priors);

struct MStepResult {
  VariationalState state;
  bool stalled = false;
  std::size_t accepted_steps = 0;
};
MStepResult m_step(const FitContext& ctx, const VariationalState& state, const Priors& priors, const FitConfig& cfg);

struct FitResult {
  VariationalState state;
  FitReport report;
};
FitResult fit(const EventSequence& events, const Priors& priors, const KernelConfig& kernel_cfg,
              const InducingGrid& grid, const FitConfig& cfg);
/// Same as above on a prepared context (reused by model selection and timing).
FitResult fit(const FitContext& ctx, const Priors& priors, const FitConfig& cfg);

/// Gamma(shape, scale) matching the first two moments of f(x)^2.
struct GammaParams {
  double shape = 1.0;
  double scale = 1.0;

  double mean() const { return shape * scale; }
  double variance() const { return shape * scale * scale; }
  double mode() const { return shape > 1.0 ? (shape - 1.0) * scale : 0.0; }
  double quantile(double p) const;
};

GammaParams predictive_from_moments(double mean, double variance);
GammaParams predictive_kernel(const VariationalState& state, const SparseGp& gp, double lag);
double predictive_mode(const VariationalState& state, const SparseGp& gp, double lag);
double background_mode(const VariationalState& state);

}  // namespace vbhp
