#include "vbhp/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "vbhp/errors.hpp"

namespace vbhp {

namespace {

using nlohmann::json;

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::optional<double> parse_number(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

// Sorting, scaling and tie breaking shared by both formats.
EventSequence finish_events(std::vector<double> times, std::optional<double> header_t_max, std::string source) {
  for (double t : times) {
    if (t < 0.0) throw DataError("negative timestamp " + format_double(t) + " in " + source);
  }
  std::sort(times.begin(), times.end());
  if (header_t_max) {
    if (!(*header_t_max > 0.0)) throw DataError("t_max must be positive in " + source);
    if (!times.empty() && times.back() > *header_t_max) {
      throw DataError("timestamp " + format_double(times.back()) + " exceeds t_max in " + source);
    }
  }
  EventSequence seq;
  seq.source = std::move(source);
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (times[i] <= times[i - 1]) {
      times[i] = times[i - 1] + kTieIncrement;
      ++seq.perturbed;
    }
  }
  double t_max = header_t_max.value_or(times.empty() ? 1.0 : times.back());
  if (!times.empty()) t_max = std::max(t_max, times.back());
  if (!(t_max > 0.0)) t_max = 1.0;
  seq.times = std::move(times);
  seq.t_max = t_max;
  return seq;
}

EventSequence rescale(EventSequence seq, double target) {
  if (!(target > 0.0) || !std::isfinite(target)) throw ArgumentError("scale target must be positive");
  seq.t_max = target;
  if (seq.times.empty()) return seq;
  const double lo = seq.times.front();
  const double span = seq.times.back() - lo;
  std::vector<double> scaled(seq.times.size());
  for (std::size_t i = 0; i < scaled.size(); ++i) {
    scaled[i] = span > 0.0 ? (seq.times[i] - lo) * target / (span * (1.0 + 1e-6)) : 0.0;
  }
  const std::size_t already = seq.perturbed;
  seq = finish_events(std::move(scaled), target, seq.source);
  seq.perturbed += already;
  return seq;
}

json double_to_json(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double double_from_json(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw ParseError("expected a number in model file");
}

json vector_to_json(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(double_to_json(x));
  return out;
}

std::vector<double> vector_from_json(const json& j) {
  std::vector<double> out;
  for (const auto& x : j) out.push_back(double_from_json(x));
  return out;
}

}  // namespace

EventFormat parse_event_format(const std::string& name) {
  if (name == "csv") return EventFormat::Csv;
  if (name == "json") return EventFormat::Json;
  throw ArgumentError("unknown event format '" + name + "' (expected csv or json)");
}

EventFormat format_from_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv" || ext == ".txt") return EventFormat::Csv;
  if (ext == ".json") return EventFormat::Json;
  throw ArgumentError("cannot infer event format from '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

EventSequence parse_events_csv(const std::string& text, const std::string& source) {
  std::vector<double> times;
  std::optional<double> t_max;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto s = trim(line);
    if (s.empty()) continue;
    if (s.front() == '#') {
      auto body = trim(s.substr(1));
      if (body.rfind("t_max=", 0) == 0) {
        const auto v = parse_number(trim(body.substr(6)));
        if (!v) throw ParseError(source + ":" + std::to_string(line_no) + ": bad t_max header");
        t_max = *v;
      }
      continue;
    }
    if (!s.empty() && s.back() == ',') s = trim(s.substr(0, s.size() - 1));
    const auto v = parse_number(s);
    if (!v) throw ParseError(source + ":" + std::to_string(line_no) + ": cannot parse '" + std::string(s) + "'");
    times.push_back(*v);
  }
  return finish_events(std::move(times), t_max, source);
}

EventSequence parse_events_json(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source + ": " + e.what());
  }
  std::optional<double> t_max;
  const json* events = &doc;
  if (doc.is_object()) {
    if (doc.contains("t_max")) {
      if (!doc["t_max"].is_number()) throw ParseError(source + ": t_max must be a number");
      t_max = doc["t_max"].get<double>();
    }
    if (!doc.contains("events")) throw ParseError(source + ": missing 'events'");
    events = &doc["events"];
  }
  if (!events->is_array()) throw ParseError(source + ": events must be an array");
  std::vector<double> times;
  for (std::size_t i = 0; i < events->size(); ++i) {
    const auto& v = (*events)[i];
    if (!v.is_number()) throw ParseError(source + ": event " + std::to_string(i) + " is not a number");
    times.push_back(v.get<double>());
  }
  return finish_events(std::move(times), t_max, source);
}

EventSequence load_events(const std::filesystem::path& path, EventFormat format, std::optional<double> scale_to) {
  const std::string text = read_text_file(path);
  EventSequence seq = format == EventFormat::Csv ? parse_events_csv(text, path.string())
                                                 : parse_events_json(text, path.string());
  if (scale_to) seq = rescale(std::move(seq), *scale_to);
  return seq;
}

EventSequence load_events(const std::filesystem::path& path, std::optional<double> scale_to) {
  return load_events(path, format_from_path(path), scale_to);
}

void save_events(const std::filesystem::path& path, const EventSequence& events, EventFormat format) {
  std::string out;
  if (format == EventFormat::Csv) {
    out += "# t_max=" + format_double(events.t_max) + "\n";
    if (events.perturbed) out += "# perturbed=" + std::to_string(events.perturbed) + "\n";
    for (double t : events.times) out += format_double(t) + "\n";
  } else {
    out = "{\"t_max\": " + format_double(events.t_max);
    if (events.perturbed) out += ", \"perturbed\": " + std::to_string(events.perturbed);
    out += ", \"events\": [";
    for (std::size_t i = 0; i < events.times.size(); ++i) {
      if (i) out += ", ";
      out += format_double(events.times[i]);
    }
    out += "]}\n";
  }
  write_text_file(path, out);
}

void save_events(const std::filesystem::path& path, const EventSequence& events) {
  save_events(path, events, format_from_path(path));
}

VariationalState ModelFile::state() const {
  VariationalState s;
  s.m = m;
  s.s_factor = s_factor;
  s.k = k;
  s.c = c;
  return s;
}

ModelFile make_model_file(const FitResult& result, const KernelConfig& kernel, const Domain& domain,
                          const InducingGrid& grid, const Priors& priors, std::optional<double> support,
                          const EventSequence& events) {
  ModelFile mf;
  mf.kernel = kernel;
  mf.domain = domain;
  mf.grid = grid;
  mf.priors = priors;
  mf.support = support;
  mf.m = result.state.m;
  mf.s_factor = result.state.s_factor;
  mf.k = result.state.k;
  mf.c = result.state.c;
  mf.report = result.report;
  mf.num_events = events.size();
  mf.source = events.source;
  return mf;
}

std::string serialize_model(const ModelFile& model) {
  json j;
  j["format"] = ModelFile::kFormatTag;
  j["version"] = ModelFile::kVersion;
  j["kernel"] = {{"gamma", double_to_json(model.kernel.gamma)},
                 {"alphas", vector_to_json(model.kernel.alphas)},
                 {"jitter", double_to_json(model.kernel.jitter)}};
  json bounds = json::array();
  for (const auto& b : model.domain.bounds) bounds.push_back({double_to_json(b.lo), double_to_json(b.hi)});
  j["domain"] = bounds;
  json points = json::array();
  for (std::size_t r = 0; r < model.grid.size(); ++r) {
    json row = json::array();
    for (std::size_t d = 0; d < model.grid.dim(); ++d) row.push_back(double_to_json(model.grid.points(r, d)));
    points.push_back(row);
  }
  j["grid"] = {{"points_per_dim", model.grid.points_per_dim}, {"points", points}};
  j["priors"] = {{"k0", double_to_json(model.priors.k0)}, {"c0", double_to_json(model.priors.c0)}};
  j["support"] = model.support ? double_to_json(*model.support) : json(nullptr);
  const auto n = static_cast<std::size_t>(model.m.size());
  json s_rows = json::array();
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<double> row(r + 1);
    for (std::size_t c = 0; c <= r; ++c) row[c] = model.s_factor(r, c);
    s_rows.push_back(vector_to_json(row));
  }
  j["state"] = {{"m", vector_to_json(std::vector<double>(model.m.data(), model.m.data() + n))},
                {"s_factor_lower", s_rows},
                {"k", double_to_json(model.k)},
                {"c", double_to_json(model.c)}};
  const auto& rep = model.report;
  j["fit"] = {{"initial_elbo", double_to_json(rep.initial_elbo)},
              {"elbo_trace", vector_to_json(rep.elbo_trace)},
              {"bound_trace", vector_to_json(rep.bound_trace)},
              {"kl_gamma_trace", vector_to_json(rep.kl_gamma_trace)},
              {"kl_u_trace", vector_to_json(rep.kl_u_trace)},
              {"bound", double_to_json(rep.bound)},
              {"converged", rep.converged},
              {"iterations", rep.iterations},
              {"m_step_stalls", rep.m_step_stalls},
              {"num_events", model.num_events},
              {"source", model.source}};
  return j.dump(1) + "\n";
}

ModelFile deserialize_model(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model file: ") + e.what());
  }
  try {
    if (!j.is_object() || j.value("format", "") != ModelFile::kFormatTag) {
      throw ParseError("not a vbhp model file");
    }
    const int version = j.at("version").get<int>();
    if (version != ModelFile::kVersion) {
      throw IncompatibleVersionError("model file version " + std::to_string(version) + " is not supported (expected " +
                                     std::to_string(ModelFile::kVersion) + ")");
    }
    ModelFile mf;
    const auto& jk = j.at("kernel");
    mf.kernel.gamma = double_from_json(jk.at("gamma"));
    mf.kernel.alphas = vector_from_json(jk.at("alphas"));
    mf.kernel.jitter = double_from_json(jk.at("jitter"));
    mf.kernel.validate();
    for (const auto& b : j.at("domain")) mf.domain.bounds.push_back({double_from_json(b.at(0)), double_from_json(b.at(1))});
    mf.domain.validate();
    const auto& jg = j.at("grid");
    mf.grid.points_per_dim = jg.at("points_per_dim").get<std::vector<std::size_t>>();
    const auto& pts = jg.at("points");
    const std::size_t dim = mf.kernel.dim();
    mf.grid.points.resize(static_cast<Eigen::Index>(pts.size()), static_cast<Eigen::Index>(dim));
    for (std::size_t r = 0; r < pts.size(); ++r) {
      if (pts[r].size() != dim) throw ParseError("inducing point dimension mismatch");
      for (std::size_t d = 0; d < dim; ++d) mf.grid.points(r, d) = double_from_json(pts[r][d]);
    }
    mf.priors.k0 = double_from_json(j.at("priors").at("k0"));
    mf.priors.c0 = double_from_json(j.at("priors").at("c0"));
    mf.priors.validate();
    if (!j.at("support").is_null()) mf.support = double_from_json(j.at("support"));
    const auto& js = j.at("state");
    const auto m = vector_from_json(js.at("m"));
    const auto n = m.size();
    if (n != mf.grid.size()) throw ParseError("state size does not match the inducing grid");
    mf.m = Eigen::Map<const Eigen::VectorXd>(m.data(), static_cast<Eigen::Index>(n));
    mf.s_factor = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    const auto& rows = js.at("s_factor_lower");
    if (rows.size() != n) throw ParseError("s_factor has the wrong number of rows");
    for (std::size_t r = 0; r < n; ++r) {
      const auto row = vector_from_json(rows[r]);
      if (row.size() != r + 1) throw ParseError("s_factor row " + std::to_string(r) + " has the wrong length");
      for (std::size_t c = 0; c <= r; ++c) mf.s_factor(r, c) = row[c];
    }
    mf.k = double_from_json(js.at("k"));
    mf.c = double_from_json(js.at("c"));
    const auto& jf = j.at("fit");
    mf.report.initial_elbo = double_from_json(jf.at("initial_elbo"));
    mf.report.elbo_trace = vector_from_json(jf.at("elbo_trace"));
    mf.report.bound_trace = vector_from_json(jf.at("bound_trace"));
    mf.report.kl_gamma_trace = vector_from_json(jf.at("kl_gamma_trace"));
    mf.report.kl_u_trace = vector_from_json(jf.at("kl_u_trace"));
    mf.report.bound = double_from_json(jf.at("bound"));
    mf.report.converged = jf.at("converged").get<bool>();
    mf.report.iterations = jf.at("iterations").get<std::size_t>();
    mf.report.m_step_stalls = jf.at("m_step_stalls").get<std::size_t>();
    mf.num_events = jf.at("num_events").get<std::size_t>();
    mf.source = jf.at("source").get<std::string>();
    return mf;
  } catch (const json::exception& e) {
    throw ParseError(std::string("model file: ") + e.what());
  } catch (const ArgumentError& e) {
    throw ParseError(std::string("model file: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const ModelFile& model) {
  write_text_file(path, serialize_model(model));
}

ModelFile load_model(const std::filesystem::path& path) { return deserialize_model(read_text_file(path)); }

}  // namespace vbhp
