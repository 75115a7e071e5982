/** @file config.cpp
 *  @brief Parser and validator for the sectioned key=value run configuration.
 */
#include "fpsi/config.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <climits>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <utility>
#include <vector>

namespace fpsi {

namespace {

// ===========================================================================
// Lexical helpers
// ===========================================================================

std::string trim(std::string_view sv) {
  size_t b = 0, e = sv.size();
  while (b < e && std::isspace(static_cast<unsigned char>(sv[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(sv[e - 1]))) --e;
  return std::string(sv.substr(b, e - b));
}

/// One `key = value` line, with its section and source line for messages.
struct Entry {
  std::string section, key, value;
  int line = 0;
};

[[noreturn]] void fail(int line, const std::string& msg) {
  throw ConfigError("config line " + std::to_string(line) + ": " + msg);
}

[[noreturn]] void unknown_key(const Entry& e) {
  fail(e.line, "unknown key '" + e.key + "' in [" + e.section + "]");
}

double parse_real(const Entry& e) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(e.value.c_str(), &end);
  if (end == e.value.c_str() || *end != '\0' || errno == ERANGE || !std::isfinite(v))
    fail(e.line, "key '" + e.key + "': expected a finite number, got '" + e.value + "'");
  return v;
}

int parse_int(const Entry& e) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(e.value.c_str(), &end, 10);
  if (end == e.value.c_str() || *end != '\0' || errno == ERANGE || v < INT_MIN || v > INT_MAX)
    fail(e.line, "key '" + e.key + "': expected an integer, got '" + e.value + "'");
  return static_cast<int>(v);
}

std::uint64_t parse_u64(const Entry& e) {
  errno = 0;
  char* end = nullptr;
  if (!e.value.empty() && e.value.front() == '-')
    fail(e.line, "key '" + e.key + "': expected a nonnegative integer");
  const unsigned long long v = std::strtoull(e.value.c_str(), &end, 10);
  if (end == e.value.c_str() || *end != '\0' || errno == ERANGE)
    fail(e.line, "key '" + e.key + "': expected a nonnegative integer, got '" + e.value + "'");
  return v;
}

bool parse_bool(const Entry& e) {
  if (e.value == "true") return true;
  if (e.value == "false") return false;
  fail(e.line, "key '" + e.key + "': expected true or false, got '" + e.value + "'");
}

Expr parse_expr(const Entry& e) {
  try {
    return Expr::parse(e.value);
  } catch (const ConfigError& err) {
    fail(e.line, "key '" + e.key + "': " + err.what());
  }
}

// --- enumerated values ------------------------------------------------------

RunMode parse_mode(const Entry& e) {
  if (e.value == "dynamic-linear") return RunMode::DynamicLinear;
  if (e.value == "quasistatic-linear") return RunMode::QuasistaticLinear;
  if (e.value == "quasistatic-nonlinear") return RunMode::QuasistaticNonlinear;
  fail(e.line, "key 'mode': expected dynamic-linear, quasistatic-linear, or "
               "quasistatic-nonlinear, got '" + e.value + "'");
}

PermeabilityKind parse_model(const Entry& e) {
  if (e.value == "constant") return PermeabilityKind::Constant;
  if (e.value == "space-time") return PermeabilityKind::SpaceTime;
  if (e.value == "nonlinear") return PermeabilityKind::Nonlinear;
  fail(e.line, "key 'model': expected constant, space-time, or nonlinear, got '" +
               e.value + "'");
}

SourceKind parse_source_kind(const Entry& e) {
  if (e.value == "zero") return SourceKind::Zero;
  if (e.value == "expr") return SourceKind::Expressions;
  if (e.value == "mms") return SourceKind::Manufactured;
  fail(e.line, "key 'kind': expected zero, expr, or mms, got '" + e.value + "'");
}

InitialKind parse_initial_kind(const Entry& e) {
  if (e.value == "zero") return InitialKind::Zero;
  if (e.value == "expr") return InitialKind::Expressions;
  if (e.value == "snapshot") return InitialKind::Snapshot;
  if (e.value == "random") return InitialKind::Random;
  if (e.value == "mms") return InitialKind::Manufactured;
  fail(e.line, "key 'kind': expected zero, expr, snapshot, random, or mms, got '" +
               e.value + "'");
}

MmsCaseId parse_case(const Entry& e) {
  if (e.value == "temporal") return MmsCaseId::Temporal;
  if (e.value == "spatial") return MmsCaseId::Spatial;
  fail(e.line, "key 'case': expected temporal or spatial, got '" + e.value + "'");
}

// ===========================================================================
// Tokenizer
// ===========================================================================

std::vector<Entry> tokenize(const std::string& text) {
  static const std::set<std::string> kSections = {"domain", "discretization", "params",
                                                  "permeability", "sources", "initial",
                                                  "run", "output"};
  std::vector<Entry> out;
  std::set<std::string> seen;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (const auto cut = raw.find('#'); cut != std::string::npos) raw.erase(cut);
    const std::string s = trim(raw);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail(line, "malformed section header '" + s + "'");
      section = trim(s.substr(1, s.size() - 2));
      if (!kSections.count(section)) fail(line, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail(line, "expected key = value, got '" + s + "'");
    if (section.empty()) fail(line, "key outside any [section]");
    Entry e{section, trim(s.substr(0, eq)), trim(s.substr(eq + 1)), line};
    if (e.key.empty()) fail(line, "missing key before '='");
    if (e.value.empty()) fail(line, "key '" + e.key + "': empty value");
    if (!seen.insert(section + "." + e.key).second)
      fail(line, "duplicate key '" + e.key + "' in [" + section + "]");
    out.push_back(std::move(e));
  }
  return out;
}

// ===========================================================================
// Section handlers
// ===========================================================================

/// Per-axis expressions (u_x1 = ...) and the set of keys that appeared, kept
/// until the whole file is read: slot mapping needs d_plane and applicability
/// checks need the section kinds, either of which may come later in the file.
struct Gathered {
  std::map<std::string, int> lines; ///< "section.key" -> line number
  std::map<std::string, std::map<std::string, std::pair<Expr, int>>> axes;

  bool has(const std::string& id) const { return lines.count(id) != 0; }
  int line(const std::string& id) const { return lines.at(id); }
};

/// Match `<base>_x1|_x2|_x3`; stores the axis name in *axis.
bool axis_key(const std::string& key, const std::string& base, std::string* axis) {
  if (key.size() != base.size() + 3 || key.compare(0, base.size(), base) != 0 ||
      key[base.size()] != '_')
    return false;
  *axis = key.substr(base.size() + 1);
  return *axis == "x1" || *axis == "x2" || *axis == "x3";
}

void apply_domain(const Entry& e, RunConfig& c) {
  if (e.key == "d_plane") c.domain.d_plane = parse_int(e);
  else if (e.key == "h") c.domain.h = parse_real(e);
  else unknown_key(e);
}

void apply_discretization(const Entry& e, RunConfig& c) {
  if (e.key == "M") c.M = parse_int(e);
  else if (e.key == "fluid_elems") c.fluid_elems = parse_int(e);
  else if (e.key == "plate_elems") c.plate_elems = parse_int(e);
  else if (e.key == "biot_elems") c.biot_elems = parse_int(e);
  else unknown_key(e);
}

void apply_params(const Entry& e, RunConfig& c) {
  static const std::map<std::string, double PhysicalParams::*> kReal = {
      {"rho_f", &PhysicalParams::rho_f},     {"mu_f", &PhysicalParams::mu_f},
      {"beta", &PhysicalParams::beta},       {"rho_p", &PhysicalParams::rho_p},
      {"D", &PhysicalParams::D_bend},        {"gamma", &PhysicalParams::gamma},
      {"alpha_p", &PhysicalParams::alpha_p}, {"c_p", &PhysicalParams::c_p},
      {"k_p", &PhysicalParams::k_p},         {"rho_b", &PhysicalParams::rho_b},
      {"mu_b", &PhysicalParams::mu_b},       {"lambda_b", &PhysicalParams::lambda_b},
      {"alpha_b", &PhysicalParams::alpha_b}, {"c_b", &PhysicalParams::c_b},
      {"mu_v", &PhysicalParams::mu_v},       {"lambda_v", &PhysicalParams::lambda_v}};
  if (const auto it = kReal.find(e.key); it != kReal.end()) {
    c.params.*(it->second) = parse_real(e);
    return;
  }
  if (e.key == "mode") {
    c.params.mode = parse_mode(e);
    return;
  }
  unknown_key(e);
}

void apply_permeability(const Entry& e, RunConfig& c) {
  if (e.key == "model") c.perm.kind = parse_model(e);
  else if (e.key == "k") c.perm.k0 = parse_real(e);
  else if (e.key == "k_expr") c.perm.spacetime = parse_expr(e);
  else if (e.key == "response") c.perm.response = parse_expr(e);
  else if (e.key == "k_min") c.perm.k_min = parse_real(e);
  else if (e.key == "k_max") c.perm.k_max = parse_real(e);
  else unknown_key(e);
}

void apply_sources(const Entry& e, RunConfig& c, Gathered& g) {
  std::string axis;
  if (axis_key(e.key, "f", &axis) || axis_key(e.key, "Fb", &axis)) {
    const std::string base = e.key.substr(0, e.key.size() - 3);
    g.axes[e.section + "." + base][axis] = {parse_expr(e), e.line};
    return;
  }
  if (e.key == "kind") c.source_kind = parse_source_kind(e);
  else if (e.key == "S") c.sources.S = parse_expr(e);
  else if (e.key == "case") c.source_case = parse_case(e);
  else unknown_key(e);
}

void apply_initial(const Entry& e, RunConfig& c, Gathered& g) {
  std::string axis;
  if (axis_key(e.key, "u", &axis) || axis_key(e.key, "eta", &axis) ||
      axis_key(e.key, "etadot", &axis)) {
    const std::string base = e.key.substr(0, e.key.size() - 3);
    g.axes[e.section + "." + base][axis] = {parse_expr(e), e.line};
    return;
  }
  if (e.key == "kind") c.initial_kind = parse_initial_kind(e);
  else if (e.key == "w") c.initial.w0 = parse_expr(e);
  else if (e.key == "wdot") c.initial.wdot0 = parse_expr(e);
  else if (e.key == "pp") c.initial.pp0 = parse_expr(e);
  else if (e.key == "pb") c.initial.pb0 = parse_expr(e);
  else if (e.key == "file") c.snapshot_path = e.value;
  else if (e.key == "seed") c.seed = parse_u64(e);
  else if (e.key == "amplitude") c.amplitude = parse_real(e);
  else if (e.key == "decay") c.decay = parse_real(e);
  else if (e.key == "case") c.initial_case = parse_case(e);
  else unknown_key(e);
}

void apply_run(const Entry& e, RunConfig& c) {
  if (e.key == "T") c.T = parse_real(e);
  else if (e.key == "N") c.N = parse_int(e);
  else if (e.key == "tol") c.solver.tol = parse_real(e);
  else if (e.key == "restart") c.solver.restart = parse_int(e);
  else if (e.key == "max_iters") c.solver.max_iters = parse_int(e);
  else if (e.key == "strict") c.strict = parse_bool(e);
  else if (e.key == "strict_tol") c.strict_tol = parse_real(e);
  else unknown_key(e);
}

void apply_output(const Entry& e, RunConfig& c) {
  if (e.key == "dir") c.out_dir = e.value;
  else if (e.key == "cadence") c.cadence = parse_int(e);
  else unknown_key(e);
}

// ===========================================================================
// Cross-field validation
// ===========================================================================

void check(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError("config: " + msg);
}

/// Assemble a component vector from per-axis expressions; tangential axes
/// first, the transverse axis (x3) last, matching the field storage layout.
std::vector<Expr> build_axis_vector(const Gathered& g, const std::string& id, int d_plane) {
  const auto it = g.axes.find(id);
  if (it == g.axes.end()) return {};
  std::vector<Expr> v(static_cast<size_t>(d_plane) + 1);
  for (const auto& [axis, ev] : it->second) {
    int slot = 0;
    if (axis == "x2") {
      if (d_plane != 2) fail(ev.second, "axis x2 requires d_plane = 2");
      slot = 1;
    } else if (axis == "x3") {
      slot = d_plane;
    }
    v[static_cast<size_t>(slot)] = ev.first;
  }
  return v;
}

/// Reject a key that appeared although the section's kind does not use it.
void forbid(const Gathered& g, const std::string& id, const std::string& why) {
  if (g.has(id)) fail(g.line(id), "key '" + id.substr(id.find('.') + 1) + "' " + why);
}

void finalize(RunConfig& c, const Gathered& g) {
  check(c.domain.d_plane == 1 || c.domain.d_plane == 2, "d_plane must be 1 or 2");
  check(c.domain.h > 0.0, "h must be positive");
  check(c.M >= 0, "M must be nonnegative");
  check(c.fluid_elems >= 1 && c.plate_elems >= 1 && c.biot_elems >= 1,
        "element counts must be at least 1");
  check(c.T > 0.0, "T must be positive");
  check(c.N >= 1, "N must be at least 1");
  check(c.solver.tol > 0.0, "tol must be positive");
  check(c.solver.restart >= 1 && c.solver.max_iters >= 1,
        "solver limits must be at least 1");
  check(c.strict_tol >= 0.0, "strict_tol must be nonnegative");
  check(c.cadence >= 0, "cadence must be nonnegative (0 = default)");
  check(!c.out_dir.empty(), "output dir must not be empty");

  validate_params(c.params);
  validate_permeability(c.perm);

  // Permeability keys must match the chosen model.
  if (c.perm.kind != PermeabilityKind::Constant)
    forbid(g, "permeability.k", "applies only to model = constant");
  if (c.perm.kind != PermeabilityKind::SpaceTime)
    forbid(g, "permeability.k_expr", "applies only to model = space-time");
  if (c.perm.kind != PermeabilityKind::Nonlinear)
    forbid(g, "permeability.response", "applies only to model = nonlinear");

  // Sources: expression keys only with kind = expr, the case only with mms.
  c.sources.f = build_axis_vector(g, "sources.f", c.domain.d_plane);
  c.sources.Fb = build_axis_vector(g, "sources.Fb", c.domain.d_plane);
  if (c.source_kind != SourceKind::Expressions) {
    for (const char* base : {"sources.f", "sources.Fb"})
      check(g.axes.find(base) == g.axes.end(),
            "source expressions require kind = expr in [sources]");
    forbid(g, "sources.S", "requires kind = expr in [sources]");
  }
  if (c.source_kind != SourceKind::Manufactured)
    forbid(g, "sources.case", "requires kind = mms in [sources]");
  if (c.source_kind == SourceKind::Manufactured)
    check(c.perm.kind == PermeabilityKind::Constant,
          "manufactured sources require the constant permeability model");

  // Initial data: each kind owns its keys.
  c.initial.u0 = build_axis_vector(g, "initial.u", c.domain.d_plane);
  c.initial.eta0 = build_axis_vector(g, "initial.eta", c.domain.d_plane);
  c.initial.etadot0 = build_axis_vector(g, "initial.etadot", c.domain.d_plane);
  c.initial.has_wdot0 = g.has("initial.wdot");
  if (c.initial_kind != InitialKind::Expressions) {
    for (const char* base : {"initial.u", "initial.eta", "initial.etadot"})
      check(g.axes.find(base) == g.axes.end(),
            "initial field expressions require kind = expr in [initial]");
    for (const char* id : {"initial.w", "initial.wdot", "initial.pp", "initial.pb"})
      forbid(g, id, "requires kind = expr in [initial]");
  }
  if (c.initial_kind == InitialKind::Snapshot)
    check(g.has("initial.file"), "kind = snapshot requires file = <path> in [initial]");
  else
    forbid(g, "initial.file", "requires kind = snapshot in [initial]");
  if (c.initial_kind != InitialKind::Random)
    for (const char* id : {"initial.seed", "initial.amplitude", "initial.decay"})
      forbid(g, id, "requires kind = random in [initial]");
  if (c.initial_kind != InitialKind::Manufactured)
    forbid(g, "initial.case", "requires kind = mms in [initial]");
  check(c.amplitude >= 0.0, "amplitude must be nonnegative");
  check(c.decay > 0.0, "decay must be positive");

  if (c.source_kind == SourceKind::Manufactured &&
      c.initial_kind == InitialKind::Manufactured)
    check(c.source_case == c.initial_case,
          "manufactured initial data and sources must use the same case");
}

} // namespace

// ===========================================================================
// Public entry points
// ===========================================================================

const char* mms_case_name(MmsCaseId id) {
  return id == MmsCaseId::Temporal ? "temporal" : "spatial";
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (const char ch : bytes) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ULL;
  }
  return h;
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  Gathered g;
  for (const Entry& e : tokenize(text)) {
    g.lines[e.section + "." + e.key] = e.line;
    if (e.section == "domain") apply_domain(e, cfg);
    else if (e.section == "discretization") apply_discretization(e, cfg);
    else if (e.section == "params") apply_params(e, cfg);
    else if (e.section == "permeability") apply_permeability(e, cfg);
    else if (e.section == "sources") apply_sources(e, cfg, g);
    else if (e.section == "initial") apply_initial(e, cfg, g);
    else if (e.section == "run") apply_run(e, cfg);
    else apply_output(e, cfg);
  }
  finalize(cfg, g);
  cfg.config_hash = fnv1a64(text);
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

int snapshot_cadence(const RunConfig& cfg) {
  return cfg.cadence > 0 ? cfg.cadence : std::max(1, cfg.N / 50);
}

Discretization make_discretization(const RunConfig& cfg) {
  return build_discretization(cfg.domain, cfg.M, cfg.fluid_elems, cfg.plate_elems,
                              cfg.biot_elems);
}

} // namespace fpsi
