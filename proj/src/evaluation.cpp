#include "vbhp/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <thread>

#include "vbhp/errors.hpp"
#include "vbhp/rng.hpp"
#include "vbhp/simulator.hpp"

namespace vbhp {

double l2_phi(const ScalarFunction& pred, const ScalarFunction& truth, Interval support, std::size_t points) {
  if (points < 2) throw ArgumentError("l2_phi needs at least two quadrature nodes");
  const double h = support.length() / static_cast<double>(points - 1);
  double sum = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    const double x = i + 1 == points ? support.hi : support.lo + h * static_cast<double>(i);
    const double d = pred(x) - truth(x);
    const double w = (i == 0 || i + 1 == points) ? 0.5 : 1.0;
    sum += w * d * d;
  }
  return std::sqrt(std::max(sum * h, 0.0));
}

std::optional<double> hll(const EventSequence& test, double mu, const ScalarFunction& phi, double support,
                          std::size_t quadrature_points) {
  if (test.empty()) return std::nullopt;
  if (quadrature_points < 2) throw ArgumentError("hll needs at least two quadrature nodes");
  const auto& x = test.times;

  // Cumulative trapezoid of phi over [0, support].
  const double h = support / static_cast<double>(quadrature_points - 1);
  std::vector<double> nodes(quadrature_points);
  std::vector<double> cumulative(quadrature_points, 0.0);
  for (std::size_t k = 0; k < quadrature_points; ++k) nodes[k] = phi(h * static_cast<double>(k));
  for (std::size_t k = 1; k < quadrature_points; ++k) cumulative[k] = cumulative[k - 1] + 0.5 * h * (nodes[k - 1] + nodes[k]);
  auto integral_to = [&](double u) {
    if (u <= 0.0) return 0.0;
    if (u >= support) return cumulative.back();
    const auto k = std::min(static_cast<std::size_t>(u / h), quadrature_points - 2);
    const double t = (u - h * static_cast<double>(k)) / h;
    const double at_u = nodes[k] + t * (nodes[k + 1] - nodes[k]);
    return cumulative[k] + 0.5 * (u - h * static_cast<double>(k)) * (nodes[k] + at_u);
  };

  double log_sum = 0.0;
  std::size_t first = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    while (first < i && x[i] - x[first] > support) ++first;
    double lambda = mu;
    for (std::size_t j = first; j < i; ++j) lambda += phi(x[i] - x[j]);
    log_sum += std::log(lambda);
  }
  double compensator = mu * test.t_max;
  for (double xi : x) compensator += integral_to(std::min(support, test.t_max - xi));
  return (log_sum - compensator) / static_cast<double>(x.size());
}

TrainTestSplit split(const EventSequence& sequence, std::uint64_t seed) {
  TrainTestSplit out;
  out.train.t_max = out.test.t_max = sequence.t_max;
  out.train.source = sequence.source + ":train";
  out.test.source = sequence.source + ":test";
  Rng rng(seed);
  for (double t : sequence.times) (rng.bernoulli(0.5) ? out.train : out.test).times.push_back(t);
  return out;
}

std::vector<HeldOutScore> heldout_scores(const EventSequence& sequence, const KernelConfig& kernel,
                                         const InducingGrid& grid, const FitConfig& fit_cfg, std::size_t splits,
                                         std::uint64_t seed, double support) {
  const SparseGp gp(kernel, grid);
  std::vector<HeldOutScore> scores;
  for (std::size_t s = 0; s < splits; ++s) {
    const TrainTestSplit tt = split(sequence, seed + s);
    const FitContext ctx(tt.train, gp, fit_cfg.resolved_support(tt.train.t_max));
    const FitResult r = fit(ctx, Priors::default_for(tt.train.size(), tt.train.t_max), fit_cfg);
    scores.push_back({tt.train.size(), tt.test.size(),
                      hll(tt.test, background_mode(r.state), predictive_mode_function(r.state, gp), support)});
  }
  return scores;
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

ScalarFunction predictive_mode_function(const VariationalState& state, const SparseGp& gp) {
  return [state, gp](double lag) { return predictive_mode(state, gp, lag); };
}

std::vector<GridPoint> log_grid(double gamma_lo, double gamma_hi, std::size_t gamma_count, double alpha_lo,
                                double alpha_hi, std::size_t alpha_count) {
  if (gamma_count == 0 || alpha_count == 0) throw ArgumentError("hyperparameter grid must be non-empty");
  if (!(gamma_lo > 0.0) || !(gamma_hi >= gamma_lo) || !(alpha_lo > 0.0) || !(alpha_hi >= alpha_lo)) {
    throw ArgumentError("hyperparameter grid bounds must be positive and ordered");
  }
  auto spaced = [](double lo, double hi, std::size_t n, std::size_t i) {
    if (n == 1) return lo;
    const double t = static_cast<double>(i) / static_cast<double>(n - 1);
    return std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)));
  };
  std::vector<GridPoint> grid;
  for (std::size_t g = 0; g < gamma_count; ++g) {
    for (std::size_t a = 0; a < alpha_count; ++a) {
      grid.push_back({spaced(gamma_lo, gamma_hi, gamma_count, g), spaced(alpha_lo, alpha_hi, alpha_count, a)});
    }
  }
  return grid;
}

std::vector<GridPoint> default_hyper_grid() { return log_grid(1e-1, 1e2, 7, 1e-3, 1e1, 7); }

std::optional<std::size_t> argmax_bound(const std::vector<GridEntry>& entries) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!entries[i].bound) continue;
    if (!best) {
      best = i;
      continue;
    }
    const auto& a = entries[i];
    const auto& b = entries[*best];
    if (*a.bound > *b.bound ||
        (*a.bound == *b.bound && (a.point.gamma < b.point.gamma ||
                                  (a.point.gamma == b.point.gamma && a.point.alpha < b.point.alpha)))) {
      best = i;
    }
  }
  return best;
}

SelectionResult grid_select(const EventSequence& sequence, const SelectionConfig& cfg) {
  if (cfg.grid.empty()) throw ArgumentError("hyperparameter grid must be non-empty");
  sequence.validate();
  const Domain domain = sequence.domain();
  const InducingGrid grid = InducingGrid::regular(domain, cfg.inducing_points);
  const Priors priors = cfg.priors.value_or(Priors::default_for(sequence.size(), domain.volume()));

  struct Outcome {
    GridEntry entry;
    std::optional<FitResult> fit;
  };
  auto run_one = [&](std::size_t i) {
    Outcome out;
    out.entry.point = cfg.grid[i];
    try {
      const KernelConfig kc = KernelConfig::make(cfg.grid[i].gamma, {cfg.grid[i].alpha});
      FitResult r = fit(sequence, priors, kc, grid, cfg.fit);
      out.entry.iterations = r.report.iterations;
      if (std::isfinite(r.report.bound)) {
        out.entry.bound = r.report.bound;
        out.fit = std::move(r);
      } else {
        out.entry.error = "non-finite bound";
      }
    } catch (const std::exception& e) {
      out.entry.error = e.what();
    }
    return out;
  };

  unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(cfg.grid.size()));
  std::vector<Outcome> outcomes(cfg.grid.size());
  if (threads <= 1) {
    for (std::size_t i = 0; i < cfg.grid.size(); ++i) outcomes[i] = run_one(i);
  } else {
    // Strided work split; results land at their grid index, so the reduction is order-independent.
    std::vector<std::future<void>> workers;
    for (unsigned w = 0; w < threads; ++w) {
      workers.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t i = w; i < cfg.grid.size(); i += threads) outcomes[i] = run_one(i);
      }));
    }
    for (auto& f : workers) f.get();
  }

  SelectionResult result;
  for (const auto& o : outcomes) {
    result.entries.push_back(o.entry);
    if (cfg.keep_states) result.states.push_back(o.fit ? std::optional(o.fit->state) : std::nullopt);
  }
  const auto best = argmax_bound(result.entries);
  if (!best) throw SelectionError("every hyperparameter configuration failed to fit");
  result.best_index = *best;
  result.best_config = KernelConfig::make(cfg.grid[*best].gamma, {cfg.grid[*best].alpha});
  result.grid = grid;
  result.priors = priors;
  result.best_fit = std::move(*outcomes[*best].fit);
  return result;
}

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ArgumentError("least_squares needs two or more paired samples");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.correlation = sxy / std::sqrt(sxx * syy);
  return f;
}

BenchmarkResult benchmark_scaling(const BenchmarkConfig& cfg) {
  if (cfg.sizes.size() < 2) throw ArgumentError("benchmark needs at least two sizes");
  BenchmarkResult result;
  std::vector<double> log_n;
  std::vector<double> log_t;
  const double rate = cfg.mu / (1.0 - cfg.branching_ratio);
  for (std::size_t idx = 0; idx < cfg.sizes.size(); ++idx) {
    const std::size_t target = cfg.sizes[idx];
    SimConfig sim;
    sim.mu = cfg.mu;
    sim.t_max = static_cast<double>(target) / rate;
    sim.kernel = std::make_shared<ExpKernel>(cfg.branching_ratio, 5.0);
    sim.seed = cfg.seed + idx;
    const EventSequence events = simulate(sim).events;

    const double reach = std::min(cfg.support, events.t_max);
    const InducingGrid grid = InducingGrid::regular(Domain::interval(0.0, reach), cfg.inducing_points);
    const KernelConfig kc = KernelConfig::make(cfg.gamma, {cfg.alpha});
    FitConfig fc;
    fc.max_em_iterations = cfg.iterations;
    fc.fixed_iterations = true;
    fc.support = cfg.support;
    const FitContext ctx(events, SparseGp(kc, grid), fc.resolved_support(events.t_max));
    const FitResult r = fit(ctx, Priors::default_for(events.size(), events.t_max), fc);

    std::vector<double> secs = r.report.iteration_seconds;
    std::sort(secs.begin(), secs.end());
    BenchmarkRow row;
    row.target_events = target;
    row.events = events.size();
    row.pairs = ctx.pairs()->size();
    row.seconds_per_iteration = secs[secs.size() / 2];
    result.rows.push_back(row);
    log_n.push_back(std::log(static_cast<double>(std::max<std::size_t>(row.events, 1))));
    log_t.push_back(std::log(row.seconds_per_iteration));
  }
  const LineFit lf = least_squares(log_n, log_t);
  result.slope = lf.slope;
  result.correlation = lf.correlation;
  return result;
}

}  // namespace vbhp
