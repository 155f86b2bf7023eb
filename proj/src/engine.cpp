#include "vbhp/engine.hpp"

#include <boost/math/distributions/gamma.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

#include "vbhp/errors.hpp"
#include "vbhp/special_functions.hpp"

namespace vbhp {

void EventSequence::validate() const {
  if (!(t_max > 0.0) || !std::isfinite(t_max)) throw ArgumentError("event window t_max must be positive");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] >= 0.0) || times[i] > t_max) throw ArgumentError("event outside the observation window");
    if (i > 0 && !(times[i] > times[i - 1])) throw ArgumentError("events must be strictly increasing");
  }
}

Priors Priors::default_for(std::size_t num_events, double volume) {
  Priors p;
  p.k0 = 1.0;
  p.c0 = 0.5 * static_cast<double>(std::max<std::size_t>(num_events, 1)) / volume;
  return p;
}

void Priors::validate() const {
  if (!(k0 > 0.0) || !(c0 > 0.0)) throw DomainError("Gamma prior parameters must be positive");
}

std::optional<double> FitConfig::resolved_support(double volume) const {
  if (!truncate) return std::nullopt;
  if (support) return support;
  return kDefaultSupportFraction * volume;
}

void FitConfig::validate() const {
  if (max_em_iterations == 0) throw ArgumentError("max_em_iterations must be positive");
  if (!(elbo_relative_tolerance > 0.0)) throw ArgumentError("elbo_relative_tolerance must be positive");
  if (m_step_iterations == 0 || lbfgs_memory == 0) throw ArgumentError("M-step budget must be positive");
  if (support && !(*support > 0.0)) throw ArgumentError("support length must be positive");
}

PairIndex PairIndex::build(const std::vector<double>& times, std::optional<double> support) {
  PairIndex index;
  index.offsets.reserve(times.size() + 1);
  index.offsets.push_back(0);
  std::size_t first = 0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (support) {
      while (first < i && times[i] - times[first] > *support) ++first;
    }
    for (std::size_t j = first; j < i; ++j) {
      index.parents.push_back(j);
      index.lags.push_back(times[i] - times[j]);
    }
    index.offsets.push_back(index.parents.size());
  }
  return index;
}

double BranchingPosterior::parent_prob(std::size_t i, std::size_t j) const {
  for (std::size_t p = pairs->offsets[i]; p < pairs->offsets[i + 1]; ++p) {
    if (pairs->parents[p] == j) return parent[p];
  }
  return 0.0;
}

double BranchingPosterior::row_sum(std::size_t i) const {
  double s = background[i];
  for (std::size_t p = pairs->offsets[i]; p < pairs->offsets[i + 1]; ++p) s += parent[p];
  return s;
}

double BranchingPosterior::entropy() const {
  constexpr double kFloor = 1e-300;
  double h = 0.0;
  auto term = [&](double q) {
    if (q >= kFloor) h -= q * std::log(q);
  };
  for (double q : background) term(q);
  for (double q : parent) term(q);
  return h;
}

Eigen::MatrixXd VariationalState::covariance() const {
  const Eigen::MatrixXd l = s_factor.triangularView<Eigen::Lower>();
  return l * l.transpose();
}

double ElboGradient::max_abs() const {
  double v = std::max(std::abs(log_k), std::abs(log_c));
  if (m.size() > 0) v = std::max(v, m.cwiseAbs().maxCoeff());
  if (s_factor.size() > 0) v = std::max(v, Eigen::MatrixXd(s_factor.triangularView<Eigen::Lower>()).cwiseAbs().maxCoeff());
  return v;
}

FitContext::FitContext(const EventSequence& events, SparseGp gp, std::optional<double> support)
    : events_(events), gp_(std::move(gp)), support_(support) {
  events_.validate();
  if (gp_.cfg.dim() != 1) throw ArgumentError("Hawkes fits take a one-dimensional kernel");
  if (support_ && !(*support_ > 0.0)) throw ArgumentError("support length must be positive");
  pairs_ = std::make_shared<const PairIndex>(PairIndex::build(events_.times, support_));

  const auto m = static_cast<Eigen::Index>(gp_.grid.size());
  const auto p = static_cast<Eigen::Index>(pairs_->size());
  Eigen::MatrixXd cross(m, p);
  for (Eigen::Index q = 0; q < p; ++q) {
    const double lag = pairs_->lags[static_cast<std::size_t>(q)];
    cross.col(q) = cross_kernel({&lag, 1}, gp_.grid, gp_.cfg);
  }
  cross_w_ = gp_.factor.whiten(cross);
  residual_ = (gp_.cfg.gamma + gp_.cfg.jitter) - cross_w_.colwise().squaredNorm().transpose().array();

  const Domain domain = events_.domain();
  const std::optional<std::vector<double>> sup =
      support_ ? std::optional<std::vector<double>>(std::vector<double>{*support_}) : std::nullopt;
  Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(m, m);
  region_volume_ = 0.0;
  for (double t : events_.times) {
    psi += psi_matrix({&t, 1}, gp_.grid, gp_.cfg, domain, sup);
    region_volume_ += truncated_volume({&t, 1}, domain, sup);
  }
  const Eigen::MatrixXd half = gp_.factor.whiten(psi);
  psi_w_ = gp_.factor.whiten(Eigen::MatrixXd(half.transpose()));
  psi_w_ = 0.5 * (psi_w_ + psi_w_.transpose()).eval();
}

double kl_gamma(double k, double c, double k0, double c0) {
  if (!(k > 0.0) || !(c > 0.0) || !(k0 > 0.0) || !(c0 > 0.0)) {
    throw DomainError("kl_gamma: all parameters must be positive");
  }
  const double kl = (k - k0) * digamma(k) - k0 * std::log(c / c0) - k - (log_gamma(k) - log_gamma(k0)) + c * k / c0;
  return std::max(kl, 0.0);
}

double kl_gaussian_u(const Eigen::VectorXd& m, const Eigen::MatrixXd& s_factor, const GramFactor& factor) {
  check_s_factor(s_factor, factor.size());
  const Eigen::MatrixXd s_w = factor.whiten(Eigen::MatrixXd(s_factor.triangularView<Eigen::Lower>()));
  const Eigen::VectorXd m_w = factor.whiten(m);
  const double log_det_s = 2.0 * s_factor.diagonal().array().log().sum();
  const double kl = 0.5 * (s_w.squaredNorm() + factor.log_det() - log_det_s - static_cast<double>(m.size()) +
                           m_w.squaredNorm());
  return std::max(kl, 0.0);
}

namespace {

// q(u) in whitened coordinates: m = L m_w, s_factor = L l_w with K_zz + jitter = L L^T.
struct WhitenedState {
  Eigen::VectorXd m;
  Eigen::MatrixXd l;
  double log_k = 0.0;
  double log_c = 0.0;
};

WhitenedState whiten_state(const FitContext& ctx, const VariationalState& state) {
  check_s_factor(state.s_factor, ctx.num_inducing());
  if (!(state.k > 0.0) || !(state.c > 0.0)) throw StateError("Gamma posterior parameters must be positive");
  WhitenedState w;
  w.m = ctx.gp().factor.whiten(state.m);
  w.l = ctx.gp().factor.whiten(Eigen::MatrixXd(state.s_factor.triangularView<Eigen::Lower>()));
  w.l = w.l.triangularView<Eigen::Lower>();
  w.log_k = std::log(state.k);
  w.log_c = std::log(state.c);
  return w;
}

void unwhiten_into(const FitContext& ctx, const WhitenedState& w, VariationalState& state) {
  const Eigen::MatrixXd lk = ctx.gp().factor.lower();
  state.m = lk * w.m;
  state.s_factor = (lk * w.l).triangularView<Eigen::Lower>();
  state.k = std::exp(w.log_k);
  state.c = std::exp(w.log_c);
}

std::size_t packed_size(std::size_t m) { return m + m * (m + 1) / 2 + 2; }

Eigen::VectorXd pack(const WhitenedState& w) {
  const auto m = static_cast<std::size_t>(w.m.size());
  Eigen::VectorXd x(static_cast<Eigen::Index>(packed_size(m)));
  Eigen::Index at = 0;
  for (Eigen::Index i = 0; i < w.m.size(); ++i) x[at++] = w.m[i];
  for (Eigen::Index i = 0; i < w.l.rows(); ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) x[at++] = i == j ? std::log(w.l(i, i)) : w.l(i, j);
  }
  x[at++] = w.log_k;
  x[at++] = w.log_c;
  return x;
}

WhitenedState unpack(const Eigen::VectorXd& x, std::size_t m) {
  WhitenedState w;
  const auto mm = static_cast<Eigen::Index>(m);
  w.m = x.head(mm);
  w.l = Eigen::MatrixXd::Zero(mm, mm);
  Eigen::Index at = mm;
  for (Eigen::Index i = 0; i < mm; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) w.l(i, j) = i == j ? std::exp(x[at++]) : x[at++];
  }
  w.log_k = x[at++];
  w.log_c = x[at++];
  return w;
}

// Per-pair buffers reused across objective evaluations; P can run to 10^5 and more.
struct Workspace {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
  Eigen::VectorXd coef_mean;
  Eigen::VectorXd coef_var;
  Eigen::MatrixXd l_transpose;
  Eigen::MatrixXd projected;  // l_w^T b_p per column
};

void pair_moments(const FitContext& ctx, const WhitenedState& w, Workspace& ws) {
  const Eigen::MatrixXd& b = ctx.whitened_cross();
  ws.mean.noalias() = b.transpose() * w.m;
  ws.l_transpose = w.l.transpose();
  ws.projected.noalias() = ws.l_transpose * b;
  ws.variance = ctx.residual_variance();
  ws.variance.noalias() += ws.projected.colwise().squaredNorm().transpose();
}

struct Objective {
  double elbo = 0.0;
  double dde = 0.0;
  double kl_gamma = 0.0;
  double kl_u = 0.0;
};

struct WhitenedGradient {
  Eigen::VectorXd m;
  Eigen::MatrixXd l;  // with respect to raw lower-triangular entries
  double log_k = 0.0;
  double log_c = 0.0;
};

// ELBO at a whitened state with q(B) held fixed; fills the gradient when asked.
Objective evaluate(const FitContext& ctx, const WhitenedState& w, const BranchingPosterior& q, const Priors& priors,
                   double entropy, Workspace& ws, WhitenedGradient* grad) {
  const double k = std::exp(w.log_k);
  const double c = std::exp(w.log_c);
  if (!std::isfinite(k) || !std::isfinite(c) || !(k > 0.0) || !(c > 0.0)) {
    return {-std::numeric_limits<double>::infinity(), 0.0, 0.0, 0.0};
  }
  const auto mm = static_cast<Eigen::Index>(ctx.num_inducing());
  const double volume = ctx.volume();
  const Eigen::MatrixXd& psi = ctx.whitened_psi();
  const auto& gp = ctx.gp();

  pair_moments(ctx, w, ws);
  const auto np = static_cast<Eigen::Index>(q.parent.size());
  double pair_sum = 0.0;
  ws.coef_mean.resize(np);
  ws.coef_var.resize(np);
  for (Eigen::Index p = 0; p < np; ++p) {
    const double qp = q.parent[static_cast<std::size_t>(p)];
    if (!(ws.variance[p] > 0.0)) return {-std::numeric_limits<double>::infinity(), 0.0, 0.0, 0.0};
    const auto els = expected_log_square_with_grad(ws.mean[p], ws.variance[p]);
    pair_sum += qp * els.value;
    ws.coef_mean[p] = qp * els.d_mean;
    ws.coef_var[p] = qp * els.d_variance;
  }

  double q0 = 0.0;
  for (double v : q.background) q0 += v;
  const double psi_k = digamma(k);
  const double background = q0 * (psi_k + w.log_c) - k * c * volume;

  const Eigen::VectorXd psi_m = psi * w.m;
  const Eigen::MatrixXd psi_l = psi * w.l;
  const double integral = w.m.dot(psi_m) + (gp.cfg.gamma + gp.cfg.jitter) * ctx.region_volume_total() -
                          psi.trace() + (w.l.array() * psi_l.array()).sum();

  Objective out;
  out.dde = pair_sum + background - integral + entropy;
  out.kl_gamma = kl_gamma(k, c, priors.k0, priors.c0);
  const double log_det_l = w.l.diagonal().array().log().sum();
  out.kl_u = 0.5 * (w.l.squaredNorm() - 2.0 * log_det_l - static_cast<double>(mm) + w.m.squaredNorm());
  out.elbo = out.dde - out.kl_gamma - out.kl_u;

  if (grad) {
    const Eigen::MatrixXd& b = ctx.whitened_cross();
    grad->m.noalias() = b * ws.coef_mean;
    grad->m -= 2.0 * psi_m + w.m;
    // Scales the projections in place; they are not needed after this point.
    ws.projected.array().rowwise() *= ws.coef_var.transpose().array();
    Eigen::MatrixXd gl(mm, mm);
    gl.noalias() = 2.0 * b * ws.projected.transpose();
    gl -= 2.0 * psi_l + w.l;
    gl.diagonal().array() += w.l.diagonal().array().inverse();
    grad->l = gl.triangularView<Eigen::Lower>();
    const double tri_k = trigamma(k);
    const double d_kl_dk = (k - priors.k0) * tri_k - 1.0 + c / priors.c0;
    const double d_kl_dc = -priors.k0 / c + k / priors.c0;
    grad->log_k = k * (q0 * tri_k - c * volume - d_kl_dk);
    grad->log_c = c * (q0 / c - k * volume - d_kl_dc);
  }
  return out;
}

Eigen::VectorXd pack_gradient(const WhitenedGradient& g, const WhitenedState& w) {
  const auto m = static_cast<std::size_t>(w.m.size());
  Eigen::VectorXd x(static_cast<Eigen::Index>(packed_size(m)));
  Eigen::Index at = 0;
  for (Eigen::Index i = 0; i < g.m.size(); ++i) x[at++] = g.m[i];
  for (Eigen::Index i = 0; i < g.l.rows(); ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) x[at++] = i == j ? g.l(i, i) * w.l(i, i) : g.l(i, j);
  }
  x[at++] = g.log_k;
  x[at++] = g.log_c;
  return x;
}

}  // namespace

BranchingPosterior uniform_branching(const std::shared_ptr<const PairIndex>& pairs) {
  BranchingPosterior q;
  q.pairs = pairs;
  const std::size_t n = pairs->num_events();
  q.background.resize(n);
  q.parent.resize(pairs->size());
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t count = pairs->offsets[i + 1] - pairs->offsets[i];
    const double share = 1.0 / static_cast<double>(count + 1);
    q.background[i] = share;
    for (std::size_t p = pairs->offsets[i]; p < pairs->offsets[i + 1]; ++p) q.parent[p] = share;
  }
  return q;
}

VariationalState initial_state(const FitContext& ctx, const Priors& priors, double branching_ratio) {
  priors.validate();
  if (!(branching_ratio > 0.0)) throw ArgumentError("initial branching ratio must be positive");
  VariationalState s;
  const auto m = static_cast<Eigen::Index>(ctx.num_inducing());
  // m = 0 is a stationary point in m (f and -f give the same kernel), so start
  // from a constant mean whose square spreads the branching ratio over the support.
  const double reach = std::min(ctx.support().value_or(ctx.volume()), ctx.volume());
  s.m = Eigen::VectorXd::Constant(m, std::sqrt(branching_ratio / reach));
  s.s_factor = ctx.gp().factor.lower();
  s.k = priors.k0;
  s.c = priors.c0;
  s.branching = uniform_branching(ctx.pairs());
  return s;
}

Eigen::VectorXd pair_expected_log_square(const FitContext& ctx, const VariationalState& state) {
  const WhitenedState w = whiten_state(ctx, state);
  Workspace ws;
  pair_moments(ctx, w, ws);
  Eigen::VectorXd out(ws.mean.size());
  for (Eigen::Index p = 0; p < ws.mean.size(); ++p) out[p] = expected_log_square(ws.mean[p], ws.variance[p]);
  return out;
}

BranchingPosterior e_step(const FitContext& ctx, const VariationalState& state) {
  const Eigen::VectorXd els = pair_expected_log_square(ctx, state);
  const auto& pairs = *ctx.pairs();
  BranchingPosterior q;
  q.pairs = ctx.pairs();
  q.background.resize(pairs.num_events());
  q.parent.resize(pairs.size());
  const double log_background = digamma(state.k) + std::log(state.c);
  for (std::size_t i = 0; i < pairs.num_events(); ++i) {
    double top = log_background;
    for (std::size_t p = pairs.offsets[i]; p < pairs.offsets[i + 1]; ++p) {
      top = std::max(top, els[static_cast<Eigen::Index>(p)]);
    }
    const double w0 = std::exp(log_background - top);
    double norm = w0;
    for (std::size_t p = pairs.offsets[i]; p < pairs.offsets[i + 1]; ++p) {
      q.parent[p] = std::exp(els[static_cast<Eigen::Index>(p)] - top);
      norm += q.parent[p];
    }
    q.background[i] = w0 / norm;
    for (std::size_t p = pairs.offsets[i]; p < pairs.offsets[i + 1]; ++p) q.parent[p] /= norm;
  }
  return q;
}

namespace {

void check_branching(const FitContext& ctx, const VariationalState& state) {
  if (state.branching.pairs.get() != ctx.pairs().get() &&
      (!state.branching.pairs || state.branching.pairs->size() != ctx.pairs()->size() ||
       state.branching.num_events() != ctx.events().size())) {
    throw StateError("branching posterior does not belong to this fit context");
  }
  if (state.branching.background.size() != ctx.events().size() ||
      state.branching.parent.size() != ctx.pairs()->size()) {
    throw StateError("branching posterior has the wrong size");
  }
}

Objective evaluate_state(const FitContext& ctx, const VariationalState& state, const Priors& priors,
                         WhitenedGradient* grad = nullptr) {
  check_branching(ctx, state);
  const WhitenedState w = whiten_state(ctx, state);
  Workspace ws;
  return evaluate(ctx, w, state.branching, priors, state.branching.entropy(), ws, grad);
}

}  // namespace

double dde(const FitContext& ctx, const VariationalState& state) {
  // Priors only enter the KL terms; any valid pair works here.
  return evaluate_state(ctx, state, Priors{1.0, 1.0}).dde;
}

double approx_log_marginal(const FitContext& ctx, const VariationalState& state) { return dde(ctx, state); }

double elbo(const FitContext& ctx, const VariationalState& state, const Priors& priors) {
  priors.validate();
  return evaluate_state(ctx, state, priors).elbo;
}

ElboGradient elbo_gradient(const FitContext& ctx, const VariationalState& state, const Priors& priors) {
  priors.validate();
  WhitenedGradient gw;
  evaluate_state(ctx, state, priors, &gw);
  // m = L m_w and s_factor = L l_w are linear, so pull back with L^{-T}.
  const Eigen::MatrixXd lk = ctx.gp().factor.lower();
  const auto lk_t = lk.transpose().triangularView<Eigen::Upper>();
  ElboGradient g;
  g.m = lk_t.solve(gw.m);
  Eigen::MatrixXd gs = lk_t.solve(gw.l);
  gs = gs.triangularView<Eigen::Lower>();
  for (Eigen::Index i = 0; i < gs.rows(); ++i) gs(i, i) *= state.s_factor(i, i);
  g.s_factor = gs;
  g.log_k = gw.log_k;
  g.log_c = gw.log_c;
  return g;
}

MStepResult m_step(const FitContext& ctx, const VariationalState& state, const Priors& priors, const FitConfig& cfg) {
  priors.validate();
  check_branching(ctx, state);
  const std::size_t m = ctx.num_inducing();
  const double entropy = state.branching.entropy();
  const BranchingPosterior& q = state.branching;

  Workspace ws;
  auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    const WhitenedState w = unpack(x, m);
    WhitenedGradient gw;
    const Objective o = evaluate(ctx, w, q, priors, entropy, ws, g ? &gw : nullptr);
    if (g && std::isfinite(o.elbo)) *g = pack_gradient(gw, w);
    return o.elbo;
  };

  MStepResult result{state, false, 0};
  Eigen::VectorXd x = pack(whiten_state(ctx, state));
  Eigen::VectorXd g;
  double f = objective(x, &g);
  if (!std::isfinite(f)) throw NumericalError("ELBO is not finite at the M-step start");
  if (g.cwiseAbs().maxCoeff() < 1e-10) return result;

  // L-BFGS ascent with Armijo backtracking; every accepted step increases the ELBO.
  std::deque<Eigen::VectorXd> s_hist;
  std::deque<Eigen::VectorXd> y_hist;
  constexpr double kArmijo = 1e-4;
  constexpr int kMaxBacktracks = 60;
  for (std::size_t it = 0; it < cfg.m_step_iterations; ++it) {
    Eigen::VectorXd d = g;
    if (!s_hist.empty()) {
      const std::size_t h = s_hist.size();
      std::vector<double> alpha(h);
      std::vector<double> rho(h);
      for (std::size_t i = h; i-- > 0;) {
        rho[i] = 1.0 / y_hist[i].dot(s_hist[i]);
        alpha[i] = rho[i] * s_hist[i].dot(d);
        d -= alpha[i] * y_hist[i];
      }
      d *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
      for (std::size_t i = 0; i < h; ++i) {
        const double beta = rho[i] * y_hist[i].dot(d);
        d += (alpha[i] - beta) * s_hist[i];
      }
    } else {
      d /= std::max(1.0, d.norm());
    }
    double slope = g.dot(d);
    if (!(slope > 0.0)) {
      d = g / std::max(1.0, g.norm());
      slope = g.dot(d);
      s_hist.clear();
      y_hist.clear();
    }

    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd x_new;
    Eigen::VectorXd g_new;
    double f_new = f;
    for (int bt = 0; bt < kMaxBacktracks; ++bt) {
      x_new = x + step * d;
      f_new = objective(x_new, &g_new);
      if (std::isfinite(f_new) && f_new >= f + kArmijo * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (result.accepted_steps == 0) result.stalled = true;
      break;
    }
    ++result.accepted_steps;
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g - g_new;  // curvature pair of the minimised -ELBO
    const double f_old = f;
    x = x_new;
    g = g_new;
    f = f_new;
    if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      if (s_hist.size() > cfg.lbfgs_memory) {
        s_hist.pop_front();
        y_hist.pop_front();
      }
    }
    if (g.cwiseAbs().maxCoeff() < 1e-10) break;
    if (f - f_old <= cfg.m_step_relative_tolerance * std::max(1.0, std::abs(f))) break;
  }

  if (result.accepted_steps > 0) unwhiten_into(ctx, unpack(x, m), result.state);
  return result;
}

FitResult fit(const FitContext& ctx, const Priors& priors, const FitConfig& cfg) {
  cfg.validate();
  priors.validate();
  using clock = std::chrono::steady_clock;
  FitResult out;
  out.state = initial_state(ctx, priors, cfg.initial_branching_ratio);
  double previous = elbo(ctx, out.state, priors);
  out.report.initial_elbo = previous;
  for (std::size_t it = 0; it < cfg.max_em_iterations; ++it) {
    const auto t0 = clock::now();
    out.state.branching = e_step(ctx, out.state);
    MStepResult ms = m_step(ctx, out.state, priors, cfg);
    if (ms.stalled) ++out.report.m_step_stalls;
    out.state = std::move(ms.state);
    const Objective o = evaluate_state(ctx, out.state, priors);
    const auto t1 = clock::now();
    if (!std::isfinite(o.elbo)) throw NumericalError("ELBO became non-finite during the fit");
    out.report.elbo_trace.push_back(o.elbo);
    out.report.bound_trace.push_back(o.dde);
    out.report.kl_gamma_trace.push_back(o.kl_gamma);
    out.report.kl_u_trace.push_back(o.kl_u);
    out.report.iteration_seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
    out.report.iterations = it + 1;
    const double change = std::abs(o.elbo - previous) / std::max(std::abs(o.elbo), 1e-300);
    previous = o.elbo;
    if (!cfg.fixed_iterations && change < cfg.elbo_relative_tolerance) {
      out.report.converged = true;
      break;
    }
  }
  out.report.bound = out.report.bound_trace.empty() ? dde(ctx, out.state) : out.report.bound_trace.back();
  return out;
}

FitResult fit(const EventSequence& events, const Priors& priors, const KernelConfig& kernel_cfg,
              const InducingGrid& grid, const FitConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const FitContext ctx(events, SparseGp(kernel_cfg, grid), cfg.resolved_support(events.t_max));
  const double setup = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  FitResult out = fit(ctx, priors, cfg);
  out.report.setup_seconds = setup;
  return out;
}

double GammaParams::quantile(double p) const {
  boost::math::gamma_distribution<double> dist(shape, scale);
  return boost::math::quantile(dist, p);
}

GammaParams predictive_from_moments(double mean, double variance) {
  if (!(variance > 0.0)) throw StateError("predictive variance must be positive");
  const double nu2 = mean * mean;
  const double second = nu2 + variance;
  const double spread = 2.0 * variance * (2.0 * nu2 + variance);
  return GammaParams{second * second / spread, spread / second};
}

GammaParams predictive_kernel(const VariationalState& state, const SparseGp& gp, double lag) {
  const PosteriorMoments pm = posterior_moments({&lag, 1}, state.m, state.s_factor, gp);
  return predictive_from_moments(pm.mean, pm.variance);
}

double predictive_mode(const VariationalState& state, const SparseGp& gp, double lag) {
  return predictive_kernel(state, gp, lag).mode();
}

double background_mode(const VariationalState& state) { return state.k > 1.0 ? (state.k - 1.0) * state.c : 0.0; }

}  // namespace vbhp
