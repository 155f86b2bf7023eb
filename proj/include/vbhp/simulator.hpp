#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vbhp/events.hpp"
#include "vbhp/rng.hpp"

namespace vbhp {

/// Non-negative triggering kernel phi on lags t >= 0, zero beyond support().
class TriggeringKernel {
 public:
  virtual ~TriggeringKernel() = default;

  virtual double operator()(double lag) const = 0;
  /// Length of the support; +infinity for kernels with unbounded support.
  virtual double support() const = 0;
  /// sup of phi over [lag, infinity). Non-increasing in lag.
  virtual double tail_bound(double lag) const = 0;
  /// sup of phi over [0, infinity).
  double max_value() const { return tail_bound(0.0); }
  virtual std::string name() const = 0;
};

/// 0.9 sin(3t) + 0.9 on [0, pi/2].
class SinKernel final : public TriggeringKernel {
 public:
  double operator()(double lag) const override;
  double support() const override;
  double tail_bound(double lag) const override;
  std::string name() const override { return "sin"; }
};

/// cos(2t) + 1 on [0, pi/2].
class CosKernel final : public TriggeringKernel {
 public:
  double operator()(double lag) const override;
  double support() const override;
  double tail_bound(double lag) const override;
  std::string name() const override { return "cos"; }
};

/// scale * rate * exp(-rate t) on [0, infinity); defaults to 5 exp(-5t).
class ExpKernel final : public TriggeringKernel {
 public:
  explicit ExpKernel(double scale = 1.0, double rate = 5.0);
  double operator()(double lag) const override;
  double support() const override { return std::numeric_limits<double>::infinity(); }
  double tail_bound(double lag) const override;
  std::string name() const override { return "exp"; }

 private:
  double scale_;
  double rate_;
};

class ZeroKernel final : public TriggeringKernel {
 public:
  double operator()(double) const override { return 0.0; }
  double support() const override { return 0.0; }
  double tail_bound(double) const override { return 0.0; }
  std::string name() const override { return "zero"; }
};

/// Piecewise-linear kernel through (lag, value) knots starting at lag 0; zero past the last knot.
class TabulatedKernel final : public TriggeringKernel {
 public:
  TabulatedKernel(std::vector<double> lags, std::vector<double> values, std::string name = "tabulated");
  double operator()(double lag) const override;
  double support() const override { return lags_.back(); }
  double tail_bound(double lag) const override;
  std::string name() const override { return name_; }

 private:
  std::vector<double> lags_;
  std::vector<double> values_;
  std::vector<double> suffix_max_;
  std::string name_;
};

/// "sin", "cos", "exp" or "zero".
std::shared_ptr<const TriggeringKernel> make_builtin_kernel(const std::string& name);

struct SimConfig {
  double mu = 10.0;
  double t_max = 3.14159265358979323846;
  std::shared_ptr<const TriggeringKernel> kernel;
  std::uint64_t seed = 0;
  bool record_branching = false;
  std::size_t max_events = 1000000;
};

struct Simulation {
  EventSequence events;
  // parent[i] = index of the generating event, or -1 for the background.
  std::optional<std::vector<long>> parents;
};

/// Ogata thinning with the local bound mu + sum_i tail_bound(t - x_i).
Simulation simulate(const SimConfig& cfg);

/// mu + sum over history of phi(t - x_i) for x_i < t.
double intensity_at(double t, const std::vector<double>& history, double mu, const TriggeringKernel& kernel);

}  // namespace vbhp
