#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vbhp/kernel_gp.hpp"

namespace vbhp {

/// Sorted event timestamps observed on [0, t_max].
struct EventSequence {
  std::vector<double> times;
  double t_max = 1.0;
  std::string source;
  // Number of timestamps nudged forward by load_events to break ties.
  std::size_t perturbed = 0;

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }
  Domain domain() const { return Domain::interval(0.0, t_max); }

  /// Throws ArgumentError unless times are strictly increasing and inside [0, t_max].
  void validate() const;
};

}  // namespace vbhp
