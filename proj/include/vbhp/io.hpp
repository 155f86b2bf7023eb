#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vbhp/engine.hpp"
#include "vbhp/events.hpp"
#include "vbhp/kernel_gp.hpp"

namespace vbhp {

enum class EventFormat { Csv, Json };

/// Csv for ".csv"/".txt", Json for ".json"; anything else throws ArgumentError.
EventFormat format_from_path(const std::filesystem::path& path);
EventFormat parse_event_format(const std::string& name);

/// Duplicated timestamps are nudged forward by multiples of this amount.
inline constexpr double kTieIncrement = 1e-9;

/// Reads timestamps, sorts them and breaks ties. With scale_to set, the observed
/// span [min, max] is mapped affinely onto [0, scale_to) and t_max = scale_to.
/// Otherwise t_max comes from the file header, or defaults to the largest timestamp.
EventSequence load_events(const std::filesystem::path& path, EventFormat format,
                          std::optional<double> scale_to = std::nullopt);
EventSequence load_events(const std::filesystem::path& path, std::optional<double> scale_to = std::nullopt);
EventSequence parse_events_csv(const std::string& text, const std::string& source = "");
EventSequence parse_events_json(const std::string& text, const std::string& source = "");

void save_events(const std::filesystem::path& path, const EventSequence& events, EventFormat format);
void save_events(const std::filesystem::path& path, const EventSequence& events);

/// Everything needed to reproduce predictions from a fit.
struct ModelFile {
  static constexpr const char* kFormatTag = "vbhp-model";
  static constexpr int kVersion = 1;

  KernelConfig kernel;
  Domain domain;
  InducingGrid grid;
  Priors priors;
  std::optional<double> support;
  Eigen::VectorXd m;
  Eigen::MatrixXd s_factor;
  double k = 1.0;
  double c = 1.0;
  FitReport report;
  std::size_t num_events = 0;
  std::string source;

  SparseGp gp() const { return SparseGp(kernel, grid); }
  /// Variational state without branching probabilities (those are tied to the training data).
  VariationalState state() const;
};

ModelFile make_model_file(const FitResult& result, const KernelConfig& kernel, const Domain& domain,
                          const InducingGrid& grid, const Priors& priors, std::optional<double> support,
                          const EventSequence& events);

std::string serialize_model(const ModelFile& model);
ModelFile deserialize_model(const std::string& text);
void save_model(const std::filesystem::path& path, const ModelFile& model);
ModelFile load_model(const std::filesystem::path& path);

/// 17 significant digits, enough to round-trip a double.
std::string format_double(double value);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace vbhp
