#include "vbhp/cli.hpp"

#include <cmath>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "vbhp/errors.hpp"
#include "vbhp/evaluation.hpp"
#include "vbhp/io.hpp"
#include "vbhp/simulator.hpp"

namespace vbhp {

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct EventArgs {
  std::string path;
  std::string format;
  std::optional<double> scale_to;

  void add(CLI::App* app) {
    app->add_option("--events", path, "Event file (csv or json)")->required();
    app->add_option("--format", format, "csv or json (default: from extension)");
    app->add_option("--scale-to", scale_to, "Rescale the observed span onto [0, value)");
  }
  EventSequence load() const {
    return format.empty() ? load_events(path, scale_to) : load_events(path, parse_event_format(format), scale_to);
  }
};

struct FitArgs {
  std::size_t inducing = 10;
  std::optional<double> support;
  bool no_truncate = false;
  std::size_t max_iterations = 50;
  double tolerance = 1e-5;
  std::optional<double> k0;
  std::optional<double> c0;

  void add(CLI::App* app) {
    app->add_option("--inducing", inducing, "Inducing points per dimension")->check(CLI::PositiveNumber);
    app->add_option("--support", support, "Triggering-kernel support length (default 0.45 T)");
    app->add_flag("--no-truncate", no_truncate, "Consider every earlier event as a parent");
    app->add_option("--max-iter", max_iterations, "Maximum EM iterations")->check(CLI::PositiveNumber);
    app->add_option("--tol", tolerance, "Relative ELBO tolerance");
    app->add_option("--k0", k0, "Gamma prior shape on the background rate");
    app->add_option("--c0", c0, "Gamma prior scale on the background rate");
  }
  FitConfig config() const {
    FitConfig cfg;
    cfg.max_em_iterations = max_iterations;
    cfg.elbo_relative_tolerance = tolerance;
    cfg.truncate = !no_truncate;
    cfg.support = support;
    cfg.validate();
    return cfg;
  }
  Priors priors(const EventSequence& events) const {
    Priors p = Priors::default_for(events.size(), events.t_max);
    if (k0) p.k0 = *k0;
    if (c0) p.c0 = *c0;
    p.validate();
    return p;
  }
};

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ArgumentError("cannot parse list item '" + item + "'");
    }
  }
  if (out.empty()) throw ArgumentError("empty list");
  return out;
}

std::shared_ptr<const TriggeringKernel> load_kernel_file(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::vector<double> lags, values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    double lag = 0.0, value = 0.0;
    if (!(row >> lag >> value)) throw ParseError(path + ":" + std::to_string(line_no) + ": expected 'lag,value'");
    lags.push_back(lag);
    values.push_back(value);
  }
  try {
    return std::make_shared<TabulatedKernel>(lags, values, path);
  } catch (const ArgumentError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_text_file(path, text);
  }
}

std::string trace_table(const FitReport& r) {
  std::string out = "iteration,elbo,bound,kl_gamma,kl_u,seconds\n";
  for (std::size_t i = 0; i < r.elbo_trace.size(); ++i) {
    out += std::to_string(i + 1) + "," + format_double(r.elbo_trace[i]) + "," + format_double(r.bound_trace[i]) + "," +
           format_double(r.kl_gamma_trace[i]) + "," + format_double(r.kl_u_trace[i]) + "," +
           format_double(r.iteration_seconds[i]) + "\n";
  }
  return out;
}

void print_summary(const ModelFile& mf) {
  std::cout << "events=" << mf.num_events << "\n"
            << "gamma=" << format_double(mf.kernel.gamma) << "\n"
            << "alpha=" << format_double(mf.kernel.alphas.front()) << "\n"
            << "iterations=" << mf.report.iterations << "\n"
            << "converged=" << (mf.report.converged ? "true" : "false") << "\n"
            << "elbo=" << format_double(mf.report.elbo_trace.empty() ? mf.report.initial_elbo : mf.report.elbo_trace.back())
            << "\n"
            << "bound=" << format_double(mf.report.bound) << "\n"
            << "mu_mode=" << format_double(background_mode(mf.state())) << "\n";
}

int cmd_simulate(const std::string& kernel_name, const std::string& kernel_file, double mu, double t_max,
                 std::uint64_t seed, const std::string& out, const std::string& format,
                 const std::string& parents_out) {
  SimConfig cfg;
  cfg.mu = mu;
  cfg.t_max = t_max;
  cfg.seed = seed;
  cfg.kernel = kernel_file.empty() ? make_builtin_kernel(kernel_name) : load_kernel_file(kernel_file);
  cfg.record_branching = !parents_out.empty();
  const Simulation sim = simulate(cfg);
  EventSequence events = sim.events;
  events.source = "simulate:" + cfg.kernel->name() + ":seed=" + std::to_string(seed);
  if (out.empty() || out == "-") {
    std::string text = "# t_max=" + format_double(events.t_max) + "\n";
    for (double t : events.times) text += format_double(t) + "\n";
    std::cout << text;
  } else {
    format.empty() ? save_events(out, events) : save_events(out, events, parse_event_format(format));
  }
  if (sim.parents) {
    std::string text = "event,time,parent\n";
    for (std::size_t i = 0; i < events.size(); ++i) {
      text += std::to_string(i) + "," + format_double(events.times[i]) + "," + std::to_string((*sim.parents)[i]) + "\n";
    }
    write_text_file(parents_out, text);
  }
  std::cerr << "simulated " << events.size() << " events\n";
  return kOk;
}

int cmd_fit(const EventArgs& ea, const FitArgs& fa, double gamma, double alpha, const std::string& out,
            const std::string& report) {
  const EventSequence events = ea.load();
  const FitConfig cfg = fa.config();
  const Priors priors = fa.priors(events);
  const KernelConfig kc = KernelConfig::make(gamma, {alpha});
  const Domain domain = events.domain();
  const InducingGrid grid = InducingGrid::regular(domain, fa.inducing);
  const FitResult result = fit(events, priors, kc, grid, cfg);
  const ModelFile mf = make_model_file(result, kc, domain, grid, priors, cfg.resolved_support(events.t_max), events);
  if (!out.empty()) save_model(out, mf);
  if (!report.empty()) write_text_file(report, trace_table(result.report));
  print_summary(mf);
  return kOk;
}

int cmd_select(const EventArgs& ea, const FitArgs& fa, const std::string& gammas, const std::string& alphas,
               std::size_t threads, const std::string& out, const std::string& contour) {
  const EventSequence events = ea.load();
  SelectionConfig sc;
  if (!gammas.empty() || !alphas.empty()) {
    const auto gs = gammas.empty() ? std::vector<double>{1.0} : parse_list(gammas);
    const auto as = alphas.empty() ? std::vector<double>{0.1} : parse_list(alphas);
    sc.grid.clear();
    for (double g : gs) {
      for (double a : as) sc.grid.push_back({g, a});
    }
  }
  sc.inducing_points = fa.inducing;
  sc.priors = fa.priors(events);
  sc.fit = fa.config();
  sc.threads = static_cast<unsigned>(threads);
  const SelectionResult sel = grid_select(events, sc);

  std::string table = "gamma,alpha,bound,iterations,status\n";
  for (const auto& e : sel.entries) {
    table += format_double(e.point.gamma) + "," + format_double(e.point.alpha) + "," +
             (e.bound ? format_double(*e.bound) : std::string("nan")) + "," + std::to_string(e.iterations) + "," +
             (e.bound ? std::string("ok") : "failed") + "\n";
  }
  write_output(contour, table);
  const ModelFile mf = make_model_file(sel.best_fit, sel.best_config, events.domain(), sel.grid, sel.priors,
                                       sc.fit.resolved_support(events.t_max), events);
  if (!out.empty()) save_model(out, mf);
  if (!contour.empty() && contour != "-") print_summary(mf);
  return kOk;
}

int cmd_predict(const std::string& model_path, double x_min, std::optional<double> x_max, std::size_t points,
                const std::string& xs, const std::string& out) {
  const ModelFile mf = load_model(model_path);
  const SparseGp gp = mf.gp();
  const VariationalState state = mf.state();
  std::vector<double> lags;
  if (!xs.empty()) {
    lags = parse_list(xs);
  } else {
    const double hi = x_max.value_or(mf.support.value_or(mf.domain.bounds.front().hi));
    if (points < 2 || !(hi > x_min)) throw ArgumentError("prediction grid needs points >= 2 and x-max > x-min");
    for (std::size_t i = 0; i < points; ++i) {
      lags.push_back(x_min + (hi - x_min) * static_cast<double>(i) / static_cast<double>(points - 1));
    }
  }
  std::string table = "# mu_mode=" + format_double(background_mode(state)) + "\n";
  table += "x,mode,shape,scale,q10,q90\n";
  for (double x : lags) {
    const GammaParams g = predictive_kernel(state, gp, x);
    table += format_double(x) + "," + format_double(g.mode()) + "," + format_double(g.shape) + "," +
             format_double(g.scale) + "," + format_double(g.quantile(0.1)) + "," + format_double(g.quantile(0.9)) + "\n";
  }
  write_output(out, table);
  return kOk;
}

int cmd_evaluate(const std::string& model_path, const EventArgs& ea, const std::string& truth, std::optional<double> mu_true,
                 std::size_t splits, std::uint64_t seed, std::optional<double> l2_hi, bool refit, const std::string& out) {
  const ModelFile mf = load_model(model_path);
  const SparseGp gp = mf.gp();
  const VariationalState state = mf.state();
  const double mu_mode = background_mode(state);
  const double support = mf.support.value_or(mf.domain.bounds.front().hi);
  std::string text;
  if (!truth.empty()) {
    const auto kernel = make_builtin_kernel(truth);
    const double hi = l2_hi.value_or(support);
    const double l2 = l2_phi(predictive_mode_function(state, gp), [&](double x) { return (*kernel)(x); }, {0.0, hi});
    text += "# l2_phi=" + format_double(l2) + "\n";
  }
  if (mu_true) text += "# l2_mu=" + format_double(l2_mu(mu_mode, *mu_true)) + "\n";

  const EventSequence events = ea.load();
  FitConfig cfg;
  cfg.support = mf.support;
  cfg.truncate = mf.support.has_value();
  text += "split,train,test,hll\n";
  std::vector<HeldOutScore> scores;
  if (refit) {
    scores = heldout_scores(events, mf.kernel, mf.grid, cfg, splits, seed, support);
  } else {
    for (std::size_t s = 0; s < splits; ++s) {
      const TrainTestSplit tt = split(events, seed + s);
      scores.push_back({tt.train.size(), tt.test.size(),
                        hll(tt.test, mu_mode, predictive_mode_function(state, gp), support)});
    }
  }
  std::vector<double> values;
  for (std::size_t s = 0; s < scores.size(); ++s) {
    const auto& sc = scores[s];
    text += std::to_string(s) + "," + std::to_string(sc.train) + "," + std::to_string(sc.test) + "," +
            (sc.hll ? format_double(*sc.hll) : std::string("nan")) + "\n";
    if (sc.hll) values.push_back(*sc.hll);
  }
  if (!values.empty()) text += "# hll_median=" + format_double(median(values)) + "\n";
  write_output(out, text);
  return kOk;
}

int cmd_benchmark(const std::string& sizes, std::size_t inducing, std::size_t iterations, std::uint64_t seed,
                  const std::string& out) {
  BenchmarkConfig cfg;
  cfg.sizes.clear();
  for (double s : parse_list(sizes)) {
    if (!(s >= 1.0) || s != std::floor(s)) throw ArgumentError("sizes must be positive integers");
    cfg.sizes.push_back(static_cast<std::size_t>(s));
  }
  cfg.inducing_points = inducing;
  cfg.iterations = iterations;
  cfg.seed = seed;
  const BenchmarkResult r = benchmark_scaling(cfg);
  std::string text = "target,events,pairs,seconds_per_iteration\n";
  for (const auto& row : r.rows) {
    text += std::to_string(row.target_events) + "," + std::to_string(row.events) + "," + std::to_string(row.pairs) + "," +
            format_double(row.seconds_per_iteration) + "\n";
  }
  text += "# slope=" + format_double(r.slope) + "\n# correlation=" + format_double(r.correlation) + "\n";
  write_output(out, text);
  return kOk;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Variational Bayesian Hawkes process fitting"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "Simulate a Hawkes process by thinning");
  std::string kernel_name = "sin", kernel_file, sim_out, sim_format, parents_out;
  double mu = 10.0, t_max = 3.14159265358979323846;
  std::uint64_t seed = 1;
  sim->add_option("--kernel", kernel_name, "Built-in kernel: sin, cos, exp or zero");
  sim->add_option("--kernel-file", kernel_file, "Tabulated kernel as 'lag,value' rows");
  sim->add_option("--mu", mu, "Background rate");
  sim->add_option("--t-max", t_max, "Observation window length");
  sim->add_option("--seed", seed, "Random seed");
  sim->add_option("--out", sim_out, "Output event file (default: stdout as csv)");
  sim->add_option("--format", sim_format, "csv or json (default: from extension)");
  sim->add_option("--parents-out", parents_out, "Write the simulated branching structure");

  EventArgs fit_events;
  FitArgs fit_args;
  double gamma = 1.0, alpha = 0.1;
  std::string fit_out, fit_report;
  auto* fitc = app.add_subcommand("fit", "Fit one hyperparameter configuration");
  fit_events.add(fitc);
  fit_args.add(fitc);
  fitc->add_option("--gamma", gamma, "Kernel amplitude");
  fitc->add_option("--alpha", alpha, "Kernel squared length-scale");
  fitc->add_option("--out", fit_out, "Model file to write");
  fitc->add_option("--report", fit_report, "Per-iteration trace table");

  EventArgs sel_events;
  FitArgs sel_args;
  std::string gammas, alphas, sel_out, contour;
  std::size_t threads = 0;
  auto* selc = app.add_subcommand("select", "Grid search over (gamma, alpha) by the approximate marginal likelihood");
  sel_events.add(selc);
  sel_args.add(selc);
  selc->add_option("--gammas", gammas, "Comma-separated gamma values (default: 7 log-spaced in [0.1, 100])");
  selc->add_option("--alphas", alphas, "Comma-separated alpha values (default: 7 log-spaced in [1e-3, 10])");
  selc->add_option("--threads", threads, "Concurrent fits (0: hardware concurrency)");
  selc->add_option("--out", sel_out, "Model file for the selected configuration");
  selc->add_option("--contour", contour, "Bound table over the grid (default: stdout)");

  std::string model_path, xs, pred_out;
  double x_min = 0.0;
  std::optional<double> x_max;
  std::size_t points = 101;
  auto* pred = app.add_subcommand("predict", "Tabulate the predictive triggering kernel");
  pred->add_option("--model", model_path, "Model file")->required();
  pred->add_option("--x-min", x_min, "Smallest lag");
  pred->add_option("--x-max", x_max, "Largest lag (default: model support)");
  pred->add_option("--points", points, "Number of lags");
  pred->add_option("--x", xs, "Comma-separated lags (overrides the grid)");
  pred->add_option("--out", pred_out, "Output table (default: stdout)");

  EventArgs eval_events;
  std::string eval_model, truth, eval_out;
  std::optional<double> mu_true, l2_hi;
  std::size_t splits = 20;
  std::uint64_t eval_seed = 1;
  bool no_refit = false;
  auto* eval = app.add_subcommand("evaluate", "L2 error against a known kernel and held-out log-likelihood");
  eval->add_option("--model", eval_model, "Model file")->required();
  eval_events.add(eval);
  eval->add_option("--truth", truth, "Built-in true kernel for the L2 error");
  eval->add_option("--mu-true", mu_true, "True background rate");
  eval->add_option("--l2-support", l2_hi, "Upper end of the L2 interval (default: model support)");
  eval->add_option("--splits", splits, "Number of random train/test splits");
  eval->add_option("--seed", eval_seed, "Seed of the first split");
  eval->add_flag("--no-refit", no_refit, "Score test halves with the given model instead of refitting on train halves");
  eval->add_option("--out", eval_out, "Output table (default: stdout)");

  std::string sizes = "250,500,1000,2000", bench_out;
  std::size_t bench_inducing = 10, bench_iterations = 5;
  std::uint64_t bench_seed = 1;
  auto* bench = app.add_subcommand("benchmark", "Per-iteration fit time against sequence length");
  bench->add_option("--sizes", sizes, "Comma-separated target sequence lengths");
  bench->add_option("--inducing", bench_inducing, "Inducing points");
  bench->add_option("--iterations", bench_iterations, "EM iterations timed per size");
  bench->add_option("--seed", bench_seed, "Random seed");
  bench->add_option("--out", bench_out, "Output table (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*sim) return cmd_simulate(kernel_name, kernel_file, mu, t_max, seed, sim_out, sim_format, parents_out);
    if (*fitc) return cmd_fit(fit_events, fit_args, gamma, alpha, fit_out, fit_report);
    if (*selc) return cmd_select(sel_events, sel_args, gammas, alphas, threads, sel_out, contour);
    if (*pred) return cmd_predict(model_path, x_min, x_max, points, xs, pred_out);
    if (*eval) {
      return cmd_evaluate(eval_model, eval_events, truth, mu_true, splits, eval_seed, l2_hi, !no_refit, eval_out);
    }
    if (*bench) return cmd_benchmark(sizes, bench_inducing, bench_iterations, bench_seed, bench_out);
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  }
  return kUsage;
}

}  // namespace vbhp
