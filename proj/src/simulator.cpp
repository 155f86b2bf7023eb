#include "vbhp/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vbhp/errors.hpp"

namespace vbhp {

namespace {
constexpr double kHalfPi = std::numbers::pi / 2.0;
}

double SinKernel::operator()(double lag) const {
  if (lag < 0.0 || lag > kHalfPi) return 0.0;
  return 0.9 * std::sin(3.0 * lag) + 0.9;
}

double SinKernel::support() const { return kHalfPi; }

double SinKernel::tail_bound(double lag) const {
  if (lag > kHalfPi) return 0.0;
  // 0.9 sin(3t) + 0.9 peaks at t = pi/6 with 1.8; past the peak the next local
  // maximum inside [0, pi/2] would be at 5 pi / 6, which is outside.
  if (lag <= std::numbers::pi / 6.0) return 1.8;
  return (*this)(lag);
}

double CosKernel::operator()(double lag) const {
  if (lag < 0.0 || lag > kHalfPi) return 0.0;
  return std::cos(2.0 * lag) + 1.0;
}

double CosKernel::support() const { return kHalfPi; }

double CosKernel::tail_bound(double lag) const {
  if (lag > kHalfPi) return 0.0;
  return (*this)(std::max(lag, 0.0));  // decreasing on [0, pi/2]
}

ExpKernel::ExpKernel(double scale, double rate) : scale_(scale), rate_(rate) {
  if (!(scale >= 0.0) || !(rate > 0.0)) throw ArgumentError("exp kernel needs scale >= 0 and rate > 0");
}

double ExpKernel::operator()(double lag) const {
  if (lag < 0.0) return 0.0;
  return scale_ * rate_ * std::exp(-rate_ * lag);
}

double ExpKernel::tail_bound(double lag) const { return (*this)(std::max(lag, 0.0)); }

TabulatedKernel::TabulatedKernel(std::vector<double> lags, std::vector<double> values, std::string name)
    : lags_(std::move(lags)), values_(std::move(values)), name_(std::move(name)) {
  if (lags_.size() < 2 || lags_.size() != values_.size()) {
    throw ArgumentError("tabulated kernel needs at least two (lag, value) knots");
  }
  if (lags_.front() != 0.0) throw ArgumentError("tabulated kernel must start at lag 0");
  for (std::size_t i = 0; i < lags_.size(); ++i) {
    if (!(values_[i] >= 0.0) || !std::isfinite(values_[i])) throw ArgumentError("kernel values must be >= 0");
    if (i > 0 && !(lags_[i] > lags_[i - 1])) throw ArgumentError("kernel lags must be increasing");
  }
  suffix_max_.resize(values_.size());
  double running = 0.0;
  for (std::size_t i = values_.size(); i-- > 0;) {
    running = std::max(running, values_[i]);
    suffix_max_[i] = running;
  }
}

double TabulatedKernel::operator()(double lag) const {
  if (lag < 0.0 || lag > lags_.back()) return 0.0;
  const auto it = std::upper_bound(lags_.begin(), lags_.end(), lag);
  if (it == lags_.end()) return values_.back();
  const auto i = static_cast<std::size_t>(it - lags_.begin());
  const double t = (lag - lags_[i - 1]) / (lags_[i] - lags_[i - 1]);
  return values_[i - 1] + t * (values_[i] - values_[i - 1]);
}

double TabulatedKernel::tail_bound(double lag) const {
  if (lag > lags_.back()) return 0.0;
  if (lag <= 0.0) return suffix_max_.front();
  const auto it = std::upper_bound(lags_.begin(), lags_.end(), lag);
  if (it == lags_.end()) return values_.back();
  const auto i = static_cast<std::size_t>(it - lags_.begin());
  return std::max((*this)(lag), suffix_max_[i]);
}

std::shared_ptr<const TriggeringKernel> make_builtin_kernel(const std::string& name) {
  if (name == "sin") return std::make_shared<SinKernel>();
  if (name == "cos") return std::make_shared<CosKernel>();
  if (name == "exp") return std::make_shared<ExpKernel>();
  if (name == "zero") return std::make_shared<ZeroKernel>();
  throw ArgumentError("unknown kernel '" + name + "' (expected sin, cos, exp or zero)");
}

double intensity_at(double t, const std::vector<double>& history, double mu, const TriggeringKernel& kernel) {
  double lambda = mu;
  for (double x : history) {
    if (x < t) lambda += kernel(t - x);
  }
  return lambda;
}

Simulation simulate(const SimConfig& cfg) {
  if (!(cfg.mu >= 0.0)) throw ArgumentError("background rate must be non-negative");
  if (!(cfg.t_max > 0.0)) throw ArgumentError("t_max must be positive");
  if (!cfg.kernel) throw ArgumentError("simulation needs a triggering kernel");
  const TriggeringKernel& phi = *cfg.kernel;

  Simulation sim;
  sim.events.t_max = cfg.t_max;
  sim.events.source = "simulate:" + phi.name();
  std::vector<long> parents;
  Rng rng(cfg.seed);
  std::vector<double>& times = sim.events.times;
  std::size_t first_active = 0;  // events before this index no longer contribute
  double t = 0.0;
  std::vector<double> weights;

  while (true) {
    while (first_active < times.size() && phi.tail_bound(t - times[first_active]) == 0.0) ++first_active;
    double bound = cfg.mu;
    for (std::size_t i = first_active; i < times.size(); ++i) bound += phi.tail_bound(t - times[i]);
    if (bound <= 0.0) break;
    t += rng.exponential(bound);
    if (t > cfg.t_max) break;

    weights.clear();
    double lambda = cfg.mu;
    for (std::size_t i = first_active; i < times.size(); ++i) {
      const double w = phi(t - times[i]);
      weights.push_back(w);
      lambda += w;
    }
    const double u = rng.uniform() * bound;
    if (u >= lambda) continue;

    if (times.size() >= cfg.max_events) {
      throw ExplosionError("simulation exceeded " + std::to_string(cfg.max_events) + " events");
    }
    if (cfg.record_branching) {
      // u is uniform on [0, lambda) given acceptance, so it also picks the source.
      long parent = -1;
      double acc = cfg.mu;
      if (u >= acc) {
        for (std::size_t k = 0; k < weights.size(); ++k) {
          acc += weights[k];
          if (u < acc) {
            parent = static_cast<long>(first_active + k);
            break;
          }
        }
        if (parent < 0) {
          // rounding at the top end of the cumulative sum
          for (std::size_t k = weights.size(); k-- > 0;) {
            if (weights[k] > 0.0) {
              parent = static_cast<long>(first_active + k);
              break;
            }
          }
        }
      }
      parents.push_back(parent);
    }
    times.push_back(t);
  }
  if (cfg.record_branching) sim.parents = std::move(parents);
  return sim;
}

}  // namespace vbhp
