#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vbhp/engine.hpp"
#include "vbhp/events.hpp"
#include "vbhp/kernel_gp.hpp"

namespace vbhp {

using ScalarFunction = std::function<double(double)>;

/// (integral over [support.lo, support.hi] of (pred - truth)^2)^(1/2), trapezoid rule on `points` nodes.
double l2_phi(const ScalarFunction& pred, const ScalarFunction& truth, Interval support, std::size_t points = 1000);

inline double l2_mu(double mu_pred, double mu_true) { return mu_pred > mu_true ? mu_pred - mu_true : mu_true - mu_pred; }

/// Held-out log-likelihood per test point. phi is taken as zero past `support`.
/// Returns nullopt for an empty test sequence.
std::optional<double> hll(const EventSequence& test, double mu, const ScalarFunction& phi, double support,
                          std::size_t quadrature_points = 1000);

struct TrainTestSplit {
  EventSequence train;
  EventSequence test;
};

/// Each event goes to train or test with probability 1/2.
TrainTestSplit split(const EventSequence& sequence, std::uint64_t seed);

struct HeldOutScore {
  std::size_t train = 0;
  std::size_t test = 0;
  std::optional<double> hll;
};

/// For split seeds seed, seed + 1, ...: refits on the train half with the given
/// hyperparameters and scores the test half with the predictive modes.
std::vector<HeldOutScore> heldout_scores(const EventSequence& sequence, const KernelConfig& kernel,
                                         const InducingGrid& grid, const FitConfig& fit_cfg, std::size_t splits,
                                         std::uint64_t seed, double support);

/// Median of the values; NaN when empty.
double median(std::vector<double> values);

/// Pointwise predictive mode of the triggering kernel as a function of lag.
ScalarFunction predictive_mode_function(const VariationalState& state, const SparseGp& gp);

struct GridPoint {
  double gamma = 1.0;
  double alpha = 1.0;
};

/// gamma and alpha log-spaced, alpha varying fastest.
std::vector<GridPoint> log_grid(double gamma_lo, double gamma_hi, std::size_t gamma_count, double alpha_lo,
                                double alpha_hi, std::size_t alpha_count);
std::vector<GridPoint> default_hyper_grid();

struct GridEntry {
  GridPoint point;
  std::optional<double> bound;  // empty when the fit failed
  std::string error;
  std::size_t iterations = 0;
};

/// Index maximising the bound; ties go to smaller gamma, then smaller alpha, then
/// the earlier entry. nullopt when every entry failed.
std::optional<std::size_t> argmax_bound(const std::vector<GridEntry>& entries);

struct SelectionConfig {
  std::vector<GridPoint> grid = default_hyper_grid();
  std::size_t inducing_points = 10;
  std::optional<Priors> priors;  // default: Priors::default_for
  FitConfig fit;
  unsigned threads = 0;  // 0: hardware concurrency
  bool keep_states = false;  // keep every fitted state, not only the best
};

struct SelectionResult {
  std::vector<GridEntry> entries;
  std::size_t best_index = 0;
  KernelConfig best_config;
  InducingGrid grid;
  Priors priors;
  FitResult best_fit;
  std::vector<std::optional<VariationalState>> states;  // per entry, filled when keep_states is set
};

/// Fits every grid configuration and keeps the one with the largest
/// approximate log marginal likelihood. Throws SelectionError if all fail.
SelectionResult grid_select(const EventSequence& sequence, const SelectionConfig& cfg);

struct BenchmarkConfig {
  std::vector<std::size_t> sizes{250, 500, 1000, 2000};
  std::size_t inducing_points = 10;
  std::size_t iterations = 5;
  double support = 1.4;
  double gamma = 1.0;
  double alpha = 0.1;
  double mu = 10.0;
  double branching_ratio = 0.5;
  std::uint64_t seed = 1;
};

struct BenchmarkRow {
  std::size_t target_events = 0;
  std::size_t events = 0;
  std::size_t pairs = 0;
  double seconds_per_iteration = 0.0;
};

struct BenchmarkResult {
  std::vector<BenchmarkRow> rows;
  double slope = 0.0;
  double correlation = 0.0;
};

/// Per-iteration fit time against sequence length with support truncation on.
/// Sequences come from a subcritical exponential-kernel process whose window
/// grows with the target size, so the event density stays fixed.
BenchmarkResult benchmark_scaling(const BenchmarkConfig& cfg);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double correlation = 0.0;
};
LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace vbhp
