#pragma once

// Run configuration (JSON). Validation collects every problem with the JSON
// path of the offending field before anything runs.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "gpbounds/bound_solver.hpp"
#include "gpbounds/design.hpp"
#include "gpbounds/errors.hpp"
#include "gpbounds/models.hpp"
#include "gpbounds/subprocess.hpp"

namespace gpbounds {

class ConfigError : public InvalidArgument {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : InvalidArgument(join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& p) {
    std::string s = "invalid configuration:";
    for (const auto& x : p) s += "\n  " + x;
    return s;
  }
  std::vector<std::string> problems_;
};

struct ModelSpec {
  std::string builtin;  // "sdof" or "synthetic4d"; empty for a subprocess
  SdofParams sdof;
  std::string command;
  int timeout_ms = 60000;
};

struct InitialDesignSpec {
  std::string type = "partition";  // partition | taguchi | points
  int q = 3;
  std::optional<std::vector<std::vector<double>>> level_values;
  std::string file;  // resolved path for "points"
};

struct RunConfig {
  ModelSpec model;
  IntervalBox box;
  std::string approach = "B";
  AcquisitionKind af = AcquisitionKind::ei();
  StoppingPolicy policy;
  InitialDesignSpec initial;
  std::optional<GridSpec> grid;
  SurrogateOptions surrogate;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  std::optional<std::pair<double, double>> reference;
  std::string baseline_method = "subinterval";
  int baseline_n = 300;

  SolverOptions solver_options() const { return {surrogate, grid}; }
};

namespace detail {

class Checker {
 public:
  std::vector<std::string> problems;

  void fail(const std::string& path, const std::string& msg) { problems.push_back(path + ": " + msg); }

  const nlohmann::json* get(const nlohmann::json& obj, const std::string& key, const std::string& path,
                            bool required) {
    if (obj.is_object() && obj.contains(key)) return &obj.at(key);
    if (required) fail(path + "/" + key, "required field missing");
    return nullptr;
  }

  std::optional<double> number(const nlohmann::json& obj, const std::string& key, const std::string& path,
                               bool required = false) {
    const auto* v = get(obj, key, path, required);
    if (!v) return std::nullopt;
    if (!v->is_number()) {
      fail(path + "/" + key, "must be a number");
      return std::nullopt;
    }
    return v->get<double>();
  }

  std::optional<long long> integer(const nlohmann::json& obj, const std::string& key,
                                   const std::string& path, bool required = false) {
    const auto* v = get(obj, key, path, required);
    if (!v) return std::nullopt;
    if (!v->is_number_integer()) {
      fail(path + "/" + key, "must be an integer");
      return std::nullopt;
    }
    return v->get<long long>();
  }

  std::optional<std::string> string(const nlohmann::json& obj, const std::string& key,
                                    const std::string& path, bool required = false) {
    const auto* v = get(obj, key, path, required);
    if (!v) return std::nullopt;
    if (!v->is_string()) {
      fail(path + "/" + key, "must be a string");
      return std::nullopt;
    }
    return v->get<std::string>();
  }

  std::optional<bool> boolean(const nlohmann::json& obj, const std::string& key, const std::string& path) {
    const auto* v = get(obj, key, path, false);
    if (!v) return std::nullopt;
    if (!v->is_boolean()) {
      fail(path + "/" + key, "must be true or false");
      return std::nullopt;
    }
    return v->get<bool>();
  }

  void unknown_keys(const nlohmann::json& obj, const std::string& path,
                    std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) return;
    for (const auto& [k, v] : obj.items()) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || k == a;
      if (!ok) fail(path + "/" + k, "unknown field");
    }
  }
};

inline void parse_model(Checker& c, const nlohmann::json& m, ModelSpec& out) {
  if (!m.is_object()) {
    c.fail("/model", "must be an object");
    return;
  }
  c.unknown_keys(m, "/model", {"builtin", "params", "command", "timeout_ms"});
  const auto builtin = c.string(m, "builtin", "/model");
  const auto command = c.string(m, "command", "/model");
  if (builtin.has_value() == command.has_value()) {
    c.fail("/model", "exactly one of \"builtin\" or \"command\" is required");
    return;
  }
  if (command) {
    if (command->empty()) c.fail("/model/command", "must not be empty");
    out.command = *command;
    if (auto t = c.integer(m, "timeout_ms", "/model")) {
      if (*t < 1) c.fail("/model/timeout_ms", "must be >= 1");
      out.timeout_ms = static_cast<int>(*t);
    }
    return;
  }
  out.builtin = *builtin;
  if (out.builtin != "sdof" && out.builtin != "synthetic4d") {
    c.fail("/model/builtin", "must be \"sdof\" or \"synthetic4d\"");
    return;
  }
  const auto* params = c.get(m, "params", "/model", false);
  if (!params) return;
  if (out.builtin != "sdof") {
    c.fail("/model/params", "only the sdof model takes parameters");
    return;
  }
  const std::string p = "/model/params";
  c.unknown_keys(*params, p,
                 {"mass", "damping", "damping_reference_stiffness", "force_amplitude", "forcing_frequency",
                  "forcing_duration", "horizon", "dt", "damping_model", "acceleration"});
  auto& s = out.sdof;
  const std::pair<const char*, double*> fields[] = {
      {"mass", &s.mass},
      {"damping", &s.damping},
      {"damping_reference_stiffness", &s.damping_reference_stiffness},
      {"force_amplitude", &s.force_amplitude},
      {"forcing_frequency", &s.forcing_frequency},
      {"forcing_duration", &s.forcing_duration},
      {"horizon", &s.horizon},
      {"dt", &s.dt}};
  for (const auto& [key, dst] : fields)
    if (auto v = c.number(*params, key, p)) {
      if (!(*v > 0)) c.fail(p + "/" + key, "must be > 0");
      *dst = *v;
    }
  if (auto v = c.string(*params, "damping_model", p)) {
    if (*v == "fixed")
      s.damping_model = SdofParams::Damping::Fixed;
    else if (*v == "constant_ratio")
      s.damping_model = SdofParams::Damping::ConstantRatio;
    else
      c.fail(p + "/damping_model", "must be \"fixed\" or \"constant_ratio\"");
  }
  if (auto v = c.string(*params, "acceleration", p)) {
    if (*v == "velocity_difference")
      s.acceleration = SdofParams::Acceleration::VelocityDifference;
    else if (*v == "equation_of_motion")
      s.acceleration = SdofParams::Acceleration::EquationOfMotion;
    else
      c.fail(p + "/acceleration", "must be \"velocity_difference\" or \"equation_of_motion\"");
  }
}

inline void parse_variables(Checker& c, const nlohmann::json& vars, IntervalBox& box) {
  if (!vars.is_array() || vars.empty()) {
    c.fail("/variables", "must be a non-empty array");
    return;
  }
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const std::string p = "/variables/" + std::to_string(i);
    const auto& v = vars[i];
    if (!v.is_object()) {
      c.fail(p, "must be an object");
      continue;
    }
    c.unknown_keys(v, p, {"name", "lower", "upper", "unit"});
    const auto lo = c.number(v, "lower", p, true);
    const auto hi = c.number(v, "upper", p, true);
    const auto name = c.string(v, "name", p);
    const auto unit = c.string(v, "unit", p);
    if (lo && hi && !(*lo < *hi)) c.fail(p + "/lower", "lower must be < upper");
    box.lower.push_back(lo.value_or(0.0));
    box.upper.push_back(hi.value_or(1.0));
    box.names.push_back(name.value_or(""));
    box.units.push_back(unit.value_or(""));
  }
}

inline void parse_af(Checker& c, const nlohmann::json& a, RunConfig& cfg) {
  if (!a.is_object()) {
    c.fail("/af", "must be an object");
    return;
  }
  c.unknown_keys(a, "/af", {"kind", "chi", "delta", "cb_slack"});
  const auto kind = c.string(a, "kind", "/af", true);
  const auto chi = c.number(a, "chi", "/af");
  if (chi && *chi < 0) c.fail("/af/chi", "must be >= 0");
  if (kind) {
    if (*kind == "pi")
      cfg.af = AcquisitionKind::pi();
    else if (*kind == "ei")
      cfg.af = AcquisitionKind::ei();
    else if (*kind == "cb")
      cfg.af = {AcquisitionKind::Type::CB, chi.value_or(2.0)};
    else
      c.fail("/af/kind", "must be \"pi\", \"ei\" or \"cb\"");
    if (chi && *kind != "cb") c.fail("/af/chi", "only valid with kind \"cb\"");
  }
  if (auto d = c.number(a, "delta", "/af")) {
    if (!(*d > 0)) c.fail("/af/delta", "must be > 0");
    cfg.policy.af.delta = *d;
  }
  if (auto s = c.number(a, "cb_slack", "/af")) {
    if (*s < 0) c.fail("/af/cb_slack", "must be >= 0");
    cfg.policy.af.cb_slack = *s;
  }
}

inline void parse_initial(Checker& c, const nlohmann::json& d, RunConfig& cfg,
                          const std::filesystem::path& base) {
  const std::string p = "/initial_design";
  if (!d.is_object()) {
    c.fail(p, "must be an object");
    return;
  }
  c.unknown_keys(d, p, {"type", "q", "level_values", "file"});
  auto& out = cfg.initial;
  out.type = c.string(d, "type", p, true).value_or("partition");
  if (out.type == "points") {
    if (auto f = c.string(d, "file", p, true)) {
      const auto path = std::filesystem::path(*f).is_absolute() ? std::filesystem::path(*f) : base / *f;
      if (!std::filesystem::exists(path)) c.fail(p + "/file", "file not found: " + path.string());
      out.file = path.string();
    }
    return;
  }
  if (out.type != "partition" && out.type != "taguchi") {
    c.fail(p + "/type", "must be \"partition\", \"taguchi\" or \"points\"");
    return;
  }
  if (auto q = c.integer(d, "q", p, true)) {
    if (*q < 2) c.fail(p + "/q", "must be >= 2");
    out.q = static_cast<int>(*q);
  }
  if (const auto* lv = c.get(d, "level_values", p, false)) {
    try {
      out.level_values = lv->get<std::vector<std::vector<double>>>();
    } catch (const nlohmann::json::exception&) {
      c.fail(p + "/level_values", "must be an array of number arrays");
    }
  }
}

inline void parse_grid(Checker& c, const nlohmann::json& g, RunConfig& cfg) {
  if (!g.is_object()) {
    c.fail("/grid", "must be an object");
    return;
  }
  c.unknown_keys(g, "/grid", {"type", "points_per_dim", "count", "seed"});
  const auto type = c.string(g, "type", "/grid", true);
  if (!type) return;
  if (*type == "lattice") {
    const auto n = c.integer(g, "points_per_dim", "/grid").value_or(50);
    if (n < 2) c.fail("/grid/points_per_dim", "must be >= 2");
    cfg.grid = LatticeGrid{static_cast<int>(n)};
  } else if (*type == "halton") {
    const auto n = c.integer(g, "count", "/grid").value_or(4096);
    if (n < 2) c.fail("/grid/count", "must be >= 2");
    const auto s = c.integer(g, "seed", "/grid").value_or(0);
    cfg.grid = LowDiscrepancyGrid{static_cast<int>(n), static_cast<std::uint64_t>(s)};
  } else {
    c.fail("/grid/type", "must be \"lattice\" or \"halton\"");
  }
}

}  // namespace detail

/// Parses and validates a configuration document. `base` resolves relative paths.
inline RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base = ".") {
  detail::Checker c;
  RunConfig cfg;
  if (!j.is_object()) throw ConfigError({"/: configuration must be a JSON object"});
  c.unknown_keys(j, "", {"$schema", "model", "variables", "approach", "af", "initial_design", "budget",
                         "grid", "gp", "seed", "output_dir", "reference", "baseline"});
  if (const auto* m = c.get(j, "model", "", true)) detail::parse_model(c, *m, cfg.model);
  if (const auto* v = c.get(j, "variables", "", true)) detail::parse_variables(c, *v, cfg.box);
  if (auto a = c.string(j, "approach", "")) {
    if (*a != "A" && *a != "B") c.fail("/approach", "must be \"A\" or \"B\"");
    cfg.approach = *a;
  }
  if (const auto* a = c.get(j, "af", "", true)) detail::parse_af(c, *a, cfg);
  if (const auto* d = c.get(j, "initial_design", "", true)) detail::parse_initial(c, *d, cfg, base);
  if (auto b = c.integer(j, "budget", "", true)) {
    if (*b < 0) c.fail("/budget", "must be >= 0");
    cfg.policy.budget = static_cast<int>(*b);
  }
  if (const auto* g = c.get(j, "grid", "", false)) detail::parse_grid(c, *g, cfg);
  if (const auto* gp = c.get(j, "gp", "", false)) {
    c.unknown_keys(*gp, "/gp", {"standardize_outputs", "starts", "max_iterations"});
    if (auto s = c.boolean(*gp, "standardize_outputs", "/gp")) cfg.surrogate.standardize_outputs = *s;
    if (auto s = c.integer(*gp, "starts", "/gp")) {
      if (*s < 1) c.fail("/gp/starts", "must be >= 1");
      cfg.surrogate.fit.starts = static_cast<int>(*s);
    }
    if (auto s = c.integer(*gp, "max_iterations", "/gp")) {
      if (*s < 1) c.fail("/gp/max_iterations", "must be >= 1");
      cfg.surrogate.fit.max_iterations = static_cast<int>(*s);
    }
  }
  if (auto s = c.integer(j, "seed", "")) {
    if (*s < 0) c.fail("/seed", "must be >= 0");
    cfg.seed = static_cast<std::uint64_t>(*s);
  }
  if (auto o = c.string(j, "output_dir", "")) cfg.output_dir = *o;
  if (const auto* r = c.get(j, "reference", "", false)) {
    c.unknown_keys(*r, "/reference", {"lower", "upper"});
    const auto lo = c.number(*r, "lower", "/reference", true);
    const auto hi = c.number(*r, "upper", "/reference", true);
    if (lo && *lo == 0) c.fail("/reference/lower", "must be nonzero");
    if (hi && *hi == 0) c.fail("/reference/upper", "must be nonzero");
    if (lo && hi) cfg.reference = {*lo, *hi};
  }
  if (const auto* b = c.get(j, "baseline", "", false)) {
    c.unknown_keys(*b, "/baseline", {"method", "n"});
    if (auto m = c.string(*b, "method", "/baseline")) {
      if (*m != "vertex" && *m != "subinterval") c.fail("/baseline/method", "must be \"vertex\" or \"subinterval\"");
      cfg.baseline_method = *m;
    }
    if (auto n = c.integer(*b, "n", "/baseline")) {
      if (*n < 1) c.fail("/baseline/n", "must be >= 1");
      cfg.baseline_n = static_cast<int>(*n);
    }
  }
  if (cfg.model.builtin == "sdof" && cfg.box.dim() != 1)
    c.fail("/variables", "the sdof model takes exactly one variable (stiffness)");
  if (cfg.model.builtin == "synthetic4d" && cfg.box.dim() != 4)
    c.fail("/variables", "the synthetic4d model takes exactly four variables");
  if (cfg.model.builtin == "sdof") {
    try {
      cfg.model.sdof.validate();
    } catch (const InvalidArgument& e) {
      c.fail("/model/params", e.what());
    }
  }
  if (cfg.initial.level_values && static_cast<int>(cfg.initial.level_values->size()) != cfg.box.dim())
    c.fail("/initial_design/level_values", "need one level list per variable");
  if (!c.problems.empty()) throw ConfigError(c.problems);
  return cfg;
}

/// Reads a configuration file; JSON syntax errors report line and column.
inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({path + ": cannot open"});
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError({path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + e.what()});
  }
  return parse_config(j, std::filesystem::path(path).parent_path());
}

/// Black box for the configured model. Subprocess boxes get a per-run id prefix.
inline BlackBox make_blackbox(const RunConfig& cfg, const std::string& run_id = "run") {
  if (cfg.model.builtin == "sdof") return sdof_blackbox(cfg.model.sdof);
  if (cfg.model.builtin == "synthetic4d") return [](const Eigen::VectorXd& b) { return synthetic_4d(b); };
  SubprocessBlackBox sub(cfg.model.command, std::chrono::milliseconds(cfg.model.timeout_ms), run_id);
  return [sub](const Eigen::VectorXd& b) { return sub(b); };
}

/// Identifies the model in evaluation logs, so a log is only replayed
/// against the model that produced it.
inline std::string model_source(const RunConfig& cfg) {
  if (!cfg.model.command.empty()) return "command:" + cfg.model.command;
  if (cfg.model.builtin != "sdof") return "builtin:" + cfg.model.builtin;
  const auto& s = cfg.model.sdof;
  char buf[512];
  std::snprintf(buf, sizeof buf, "builtin:sdof:%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d", s.mass,
                s.damping, s.damping_reference_stiffness, s.force_amplitude, s.forcing_frequency,
                s.forcing_duration, s.horizon, s.dt, static_cast<int>(s.damping_model),
                static_cast<int>(s.acceleration));
  return buf;
}

/// Reads a CSV of physical points (header row of names, one point per line).
inline Eigen::MatrixXd read_points_csv(const std::string& path, int dim) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open points file " + path);
  std::string line;
  std::vector<std::vector<double>> rows;
  bool header = true;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<double> row;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw InvalidArgument(path + ":" + std::to_string(lineno) + ": not a number: \"" + cell + "\"");
      }
    }
    if (static_cast<int>(row.size()) != dim)
      throw InvalidArgument(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(dim) +
                            " values");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InvalidArgument(path + ": no points");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int h = 0; h < dim; ++h) m(static_cast<Eigen::Index>(i), h) = rows[i][h];
  return m;
}

/// Physical initial design rows plus a short description.
inline std::pair<Eigen::MatrixXd, std::string> initial_design(const RunConfig& cfg) {
  const int r = cfg.box.dim();
  const auto& d = cfg.initial;
  if (d.type == "points") {
    auto pts = read_points_csv(d.file, r);
    for (Eigen::Index j = 0; j < pts.rows(); ++j)
      for (int h = 0; h < r; ++h)
        if (pts(j, h) < cfg.box.lower[h] || pts(j, h) > cfg.box.upper[h])
          throw InvalidArgument(d.file + ": point " + std::to_string(j + 1) + " lies outside the box");
    return {pts, "points from " + d.file + " (" + std::to_string(pts.rows()) + " rows)"};
  }
  const DesignMatrix design = d.type == "taguchi" ? taguchi_array(d.q, r) : full_factorial(d.q, r);
  std::string desc = d.type == "taguchi" ? "Taguchi L" + std::to_string(design.runs()) + "(" +
                                               std::to_string(d.q) + "^" + std::to_string(r) + ")"
                                         : "partition q=" + std::to_string(d.q) + " (" +
                                               std::to_string(design.runs()) + " points)";
  return {map_levels(design, cfg.box, d.level_values), desc};
}

}  // namespace gpbounds
